# app/telemetry.py
"""
Logfire setup and the instrumentation decorator shared by solvers and experiment drivers.
Instrumentation stays silent until setup_logfire() has run in the process.
"""

import functools
import inspect
import os
from typing import Any, Dict

import numpy as np

from app import __version__
from app.workbench_config import WorkbenchSettings

# Logfire import
try:
    import logfire
    LOGFIRE_AVAILABLE = True
except ImportError:
    LOGFIRE_AVAILABLE = False
    # Create a no-op logfire mock
    class MockLogfire:
        def span(self, name, **kwargs):
            return self
        def __enter__(self):
            return self
        def __exit__(self, *args):
            pass
        def set_attribute(self, *args, **kwargs):
            pass
        def debug(self, *args, **kwargs):
            pass
        def info(self, *args, **kwargs):
            pass
        def warn(self, *args, **kwargs):
            pass
        def error(self, *args, **kwargs):
            pass
        def configure(self, **kwargs):
            pass
    logfire = MockLogfire()

_configured = False

# attributes worth recording on a span; arrays are summarised by shape
_SPAN_PARAMS = {'k', 'theta', 'iterations', 'method', 'mu', 'dtau', 'problem', 'study', 'name', 'jobs', 'spec_path'}


def setup_logfire(settings: WorkbenchSettings, debug: bool = False) -> bool:
    """Configure Logfire once; returns True when instrumentation is active"""
    global _configured
    if _configured:
        return True

    logfire_config = settings.logfire
    if not logfire_config.enabled or not LOGFIRE_AVAILABLE:
        return False

    try:
        configure_kwargs = {
            'service_name': logfire_config.service_name,
            'service_version': __version__,
            'environment': os.getenv('ENVIRONMENT', logfire_config.environment),
            'send_to_logfire': 'if-token-present',
        }

        # Console output only in debug mode or when asked for in config.yaml
        if debug or logfire_config.console:
            level = 'debug' if debug else logfire_config.log_level.lower()
            configure_kwargs['console'] = logfire.ConsoleOptions(min_log_level=level)
        else:
            configure_kwargs['console'] = False

        logfire.configure(**configure_kwargs)
        _configured = True
    except Exception as e:
        if debug:
            print(f"Warning: Failed to initialize Logfire: {e}")
    return _configured


def _span_attributes(func, args, kwargs) -> Dict[str, Any]:
    span_attrs: Dict[str, Any] = {}
    try:
        bound_args = inspect.signature(func).bind(*args, **kwargs)
        bound_args.apply_defaults()
        for param_name, param_value in bound_args.arguments.items():
            if param_name in ('self', 'cls'):
                continue
            if isinstance(param_value, np.ndarray):
                span_attrs[f"{param_name}_shape"] = list(param_value.shape)
            elif param_name in _SPAN_PARAMS and isinstance(param_value, (int, float, str, list, tuple)):
                span_attrs[param_name] = param_value
    except Exception:
        # If signature inspection fails, continue without detailed params
        pass
    return span_attrs


def _result_summary(result: Any) -> Dict[str, Any]:
    """Pull final residual / mass error out of (state, trace) results"""
    trace = result[1] if isinstance(result, tuple) and len(result) == 2 else None
    if trace is not None and getattr(trace, 'residual', None):
        summary = {'final_residual': float(trace.residual[-1]), 'iterates': len(trace.residual)}
        if getattr(trace, 'mass_error', None):
            summary['final_mass_error'] = float(trace.mass_error[-1])
        return summary
    return {}


def auto_instrument(operation_type: str):
    """Decorator that automatically adds Logfire instrumentation to solver and driver calls"""
    def decorator(func):
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            if not _configured:
                return func(*args, **kwargs)

            func_name = func.__name__
            span_name = f"conserva.{operation_type}.{func_name}"

            with logfire.span(span_name, **_span_attributes(func, args, kwargs)):
                try:
                    result = func(*args, **kwargs)
                    logfire.debug(f"{func_name} completed", operation=operation_type, **_result_summary(result))
                    return result
                except Exception as e:
                    logfire.error(f"{func_name} failed",
                                  error=str(e),
                                  error_type=type(e).__name__,
                                  operation=operation_type)
                    raise
        return wrapper
    return decorator


def log_info(message: str, **attributes):
    if _configured:
        logfire.info(message, **attributes)


def log_warn(message: str, **attributes):
    if _configured:
        logfire.warn(message, **attributes)
