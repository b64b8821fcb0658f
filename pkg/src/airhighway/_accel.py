"""Numba switch for the hot kernels.

Every compiled kernel is written once as plain Python over numpy arrays and
wrapped with :func:`maybe_njit`. Setting ``AIRHIGHWAY_PURE_NUMPY=1`` (or
running without numba installed) keeps the undecorated functions, and the
callers switch to their vectorized numpy paths.
"""

import os

_FLAG = os.environ.get("AIRHIGHWAY_PURE_NUMPY", "").strip().lower()

try:
    from numba import njit
    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover
    njit = None
    NUMBA_AVAILABLE = False

USE_NUMBA = NUMBA_AVAILABLE and _FLAG not in ("1", "true", "yes", "on")


def maybe_njit(func=None, **kwargs):
    """Compile ``func`` with ``numba.njit(cache=True)`` when acceleration is on."""
    kwargs.setdefault("cache", True)

    def decorate(f):
        if USE_NUMBA:
            return njit(**kwargs)(f)
        return f

    if func is not None:
        return decorate(func)
    return decorate


def backend():
    return "numba" if USE_NUMBA else "numpy"
