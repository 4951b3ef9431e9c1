from .suites import get_suite, register_suite, registered_suites, timed

__all__ = ['get_suite', 'register_suite', 'registered_suites', 'timed']
