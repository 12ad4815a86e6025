"""Selects between numba-compiled kernels and the pure numpy path.

Set ``FAME_DISABLE_JIT=1`` to force the numpy implementations (useful for
debugging and for machines without a working numba/llvmlite install).
"""

import os

_FLAG = os.environ.get("FAME_DISABLE_JIT", "").strip().lower()
JIT_REQUESTED = _FLAG not in ("1", "true", "yes", "on")

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

USE_JIT = JIT_REQUESTED and HAVE_NUMBA


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, identity decorator otherwise.

    Kernels are always compiled when numba exists so that benchmarks and
    tests can compare both paths regardless of ``USE_JIT``.
    """
    if HAVE_NUMBA:
        kwargs.setdefault("cache", True)
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda fn: fn
