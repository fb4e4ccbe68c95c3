"""numba switch.

Kernels are decorated with :func:`njit` from this module.  Setting
``GFMDAC_DISABLE_NUMBA=1`` (or running without numba installed) replaces
it with a no-op so the same vectorised numpy code runs interpreted.
"""
import os

_disabled = os.environ.get("GFMDAC_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")

try:
    if _disabled:
        raise ImportError
    import numba as _numba
    NUMBA_ENABLED = True
except ImportError:
    _numba = None
    NUMBA_ENABLED = False


def _noop(*args, **kwargs):
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def wrapper(func):
        return func

    return wrapper


if NUMBA_ENABLED:
    def njit(*args, **kwargs):
        kwargs.setdefault("cache", True)
        if len(args) == 1 and callable(args[0]):
            return _numba.njit(**kwargs)(args[0])
        return _numba.njit(*args, **kwargs)
else:
    njit = _noop


def python_impl(func):
    """Return the interpreted implementation behind a (possibly) jitted kernel."""
    return getattr(func, "py_func", func)


def backend_name() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"
