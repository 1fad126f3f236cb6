"""numba switch.

Kernels are written once in nopython-compatible style. Setting the
environment variable ``FTNPL_NO_NUMBA=1`` (before import) leaves them as
plain Python/numpy functions, which is also what happens if numba is not
importable.
"""
import logging
import os

_DISABLED = os.environ.get("FTNPL_NO_NUMBA", "").strip().lower() in {"1", "true", "yes"}

try:
    if _DISABLED:
        raise ImportError
    import numba

    logging.getLogger("numba").setLevel(logging.WARNING)
    NUMBA_ENABLED = True
except ImportError:  # pragma: no cover - depends on environment
    numba = None
    NUMBA_ENABLED = False


def njit(func=None, **kwargs):
    """``numba.njit`` when enabled, identity decorator otherwise.

    The returned object always has a ``py_func`` attribute pointing at the
    undecorated function, so benchmarks can time both paths in-process.
    """

    def wrap(f):
        if not NUMBA_ENABLED:
            f.py_func = f
            return f
        return numba.njit(**kwargs)(f)

    return wrap if func is None else wrap(func)
