"""Numba switch for the hot kernels.

Every kernel in the package is written in numba-compatible numpy so the same
source runs either compiled (default) or as plain numpy. Set
``MAGDIRAC_NUMBA=0`` before import to force the pure-numpy path.
"""
import os

_FLAG = os.environ.get("MAGDIRAC_NUMBA", "1").strip().lower()
_WANTED = _FLAG not in ("0", "false", "no", "off")

try:
    import numba as _nb
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    _nb = None

USE_NUMBA = _WANTED and _nb is not None


def jit(fn=None, *, parallel=False):
    """``numba.njit(cache=True)`` when enabled, identity otherwise."""

    def wrap(f):
        if not USE_NUMBA:
            return f
        return _nb.njit(cache=True, parallel=parallel)(f)

    if fn is None:
        return wrap
    return wrap(fn)


if USE_NUMBA:
    prange = _nb.prange
else:
    prange = range


def backend():
    return "numba" if USE_NUMBA else "numpy"
