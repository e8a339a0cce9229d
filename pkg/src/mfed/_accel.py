"""Numba toggle for the hot kernels.

Every hot kernel ships in two builds: a numba ``@njit`` loop and a pure
numpy version. Selection happens once at import time: the jit build is
used when numba imports cleanly and ``MFED_NUMBA`` is unset or truthy;
``MFED_NUMBA=0`` forces the numpy path. ``benchmarks/bench_kernels.py``
times both builds side by side.
"""
import os

_OFF_VALUES = ("0", "false", "off", "no")


def numba_requested() -> bool:
    return os.environ.get("MFED_NUMBA", "1").strip().lower() not in _OFF_VALUES


USING_NUMBA = False
_numba_njit = None
if numba_requested():
    try:
        from numba import njit as _numba_njit

        USING_NUMBA = True
    except ImportError:
        pass


def njit(func):
    """numba.njit when enabled, identity decorator otherwise."""
    if USING_NUMBA:
        return _numba_njit(cache=True)(func)
    return func
