"""
Base Service Class

This module provides the base class for the numerical service layer.
Services encapsulate the computations behind the verification suites and
share one exception type and one logging convention.
"""

import logging
from typing import Any, Callable, Dict, Optional

from django.core.exceptions import ImproperlyConfigured

logger = logging.getLogger(__name__)


class ServiceException(Exception):
    """Custom exception for service layer errors"""
    def __init__(self, message: str, code: str = 'error', details: Optional[Dict[str, Any]] = None):
        self.message = message
        self.code = code
        self.details = details or {}
        super().__init__(self.message)

    def __str__(self):
        return f"[{self.code}] {self.message}"


class BaseService:
    """
    Base service class providing common functionality

    All service classes should inherit from this class to get:
    - Consistent error handling
    - Logging
    - Common validation helpers
    """

    def __init__(self, label: Optional[str] = None):
        """
        Initialize service

        Args:
            label: Short context label prepended to log lines (optional)
        """
        self.label = label
        self.logger = logging.getLogger(self.__class__.__name__)

    def run_guarded(self, func: Callable, *args, **kwargs):
        """
        Execute a computation, converting unexpected failures

        Args:
            func: Function to execute
            *args: Positional arguments for func
            **kwargs: Keyword arguments for func

        Returns:
            Result of func execution

        Raises:
            ServiceException: If func raises anything else than a ServiceException
        """
        try:
            return func(*args, **kwargs)
        except ServiceException:
            raise
        except Exception as e:
            self.logger.error(f"Computation failed: {str(e)}")
            raise ServiceException(
                message=f"Computation failed: {str(e)}",
                code='computation_failed',
            ) from e

    def require(self, condition: bool, message: str, code: str = 'error'):
        """
        Raise a ServiceException unless condition holds

        Args:
            condition: Value that must be truthy
            message: Error message
            code: Error code
        """
        if not condition:
            raise ServiceException(message=message, code=code)

    def log_action(self, action: str, details: Dict[str, Any] = None):
        """
        Log a service action

        Args:
            action: Description of the action
            details: Additional details to log (optional)
        """
        log_message = f"{action}"
        if self.label:
            log_message = f"[{self.label}] {log_message}"

        self.logger.info(log_message)

        if details:
            self.logger.debug(f"Details: {details}")


def service_setting(name: str, default: Any) -> Any:
    """
    Read a Django setting, falling back to default

    Args:
        name: Setting name
        default: Value used when the setting is absent or settings are not configured
    """
    try:
        from django.conf import settings
        return getattr(settings, name, default)
    except ImproperlyConfigured:
        return default
