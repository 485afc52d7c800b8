"""Numba switch for the hot kernels.

Every kernel module ships two implementations: a loop version compiled with
``numba.njit`` and a vectorised numpy version.  ``RHO_DISABLE_NUMBA=1`` (or a
missing numba install) selects the numpy path at import time.
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

_DISABLED = os.environ.get("RHO_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")

HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and not _DISABLED


def njit(func):
    """Compile ``func`` in nopython mode, or return it untouched without numba."""
    if numba is None:
        return func
    return numba.njit(cache=True, nogil=True)(func)


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
