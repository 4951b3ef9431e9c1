"""
Verification Suite Decorators

This module provides decorators for registering verification suites and
timing the cells they produce.

Usage:
    @register_suite('cif')
    def cif_suite(run):
        # Returns the cells of the suite
        pass

    compute = timed('cif/linear')(cell.compute)
"""

import logging
import time
from functools import wraps
from typing import Callable, Dict, List

from ..services.base_service import ServiceException

logger = logging.getLogger(__name__)

_SUITES: Dict[str, Callable] = {}


def register_suite(name: str):
    """
    Decorator to register a suite under a name

    Args:
        name: Suite name used by run_suite and the verify command

    Usage:
        @register_suite('algebra')
        def algebra_suite(run):
            pass
    """
    def decorator(suite_func):
        if name in _SUITES:
            raise ServiceException(message=f"Suite '{name}' registered twice", code='unknown_suite')
        _SUITES[name] = suite_func
        return suite_func
    return decorator


def registered_suites() -> List[str]:
    """Suite names in registration order"""
    return list(_SUITES)


def get_suite(name: str) -> Callable:
    if name not in _SUITES:
        raise ServiceException(
            message=f"Unknown suite '{name}'. Available: {', '.join(['all'] + registered_suites())}",
            code='unknown_suite',
        )
    return _SUITES[name]


def timed(label: str):
    """
    Decorator logging the wall time of a computation returning rows

    Args:
        label: Text identifying the computation in the log
    """
    def decorator(func):
        @wraps(func)
        def wrapper(*args, **kwargs):
            start = time.perf_counter()
            rows = func(*args, **kwargs)
            elapsed = time.perf_counter() - start
            logger.info(f"{label}: {len(rows)} rows in {elapsed:.2f}s")
            return rows
        return wrapper
    return decorator
