"""Kernel backend selection.

Hot Monte Carlo loops are compiled with numba when it is importable. Setting
``PCFPAIR_DISABLE_NUMBA=1`` forces the pure-numpy implementations; both paths
consume identical uniform streams and return identical counts.
"""
import os

_DISABLED = os.environ.get("PCFPAIR_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if _DISABLED:
        raise ImportError
    import numba as _numba
except ImportError:  # pragma: no cover - depends on environment
    _numba = None

HAVE_NUMBA = _numba is not None


def njit(*args, **kwargs):
    """``numba.njit`` when available, identity decorator otherwise."""
    if _numba is not None:
        return _numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f


def backend_name():
    return "numba" if HAVE_NUMBA else "numpy"
