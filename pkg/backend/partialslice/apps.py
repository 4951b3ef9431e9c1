from django.apps import AppConfig


class PartialSliceConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'partialslice'
    verbose_name = 'Generalized partial-slice verification'
