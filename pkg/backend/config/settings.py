"""
Django settings for config project.

Generated by 'django-admin startproject' using Django 5.2.7.

For more information on this file, see
https://docs.djangoproject.com/en/5.2/topics/settings/

For the full list of settings and their values, see
https://docs.djangoproject.com/en/5.2/ref/settings/
"""

from pathlib import Path
from decouple import config

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = config('SECRET_KEY', default='django-insecure-partialslice-local-only')

DEBUG = config('DEBUG', default=True, cast=bool)


# Application definition
# The library runs from management commands only: no URLs, middleware or models.

INSTALLED_APPS = [
    # Local apps
    'partialslice',
]

MIDDLEWARE = []

# No database: every computation is in memory and results go to CSV
DATABASES = {}


# Internationalization
# https://docs.djangoproject.com/en/5.2/topics/i18n/

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# Verification runtime
# Worker threads for independent (suite, case, level) cells
GPS_THREADS = config('GPS_THREADS', default=1, cast=int)

# Finite-difference step for vartheta-bar applied to quadrature-computed operators
GPS_OPERATOR_FD_STEP = config('GPS_OPERATOR_FD_STEP', default=1e-3, cast=float)

# Refinement level of the hemisphere rule used by the domain operators
GPS_SPHERE_LEVEL = config('GPS_SPHERE_LEVEL', default=2, cast=int)

# Highest level at which S^2, P^2, Q^2 and PQ are composed
GPS_PLEMELJ_MAX_LEVEL = config('GPS_PLEMELJ_MAX_LEVEL', default=4, cast=int)


# Logging
LOG_LEVEL = config('LOG_LEVEL', default='INFO')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{asctime} {levelname} {name} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'loggers': {
        'partialslice': {
            'handlers': ['console'],
            'level': LOG_LEVEL,
            'propagate': False,
        },
    },
    'root': {
        'handlers': ['console'],
        'level': LOG_LEVEL,
    },
}
