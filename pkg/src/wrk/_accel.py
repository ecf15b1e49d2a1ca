"""Optional numba acceleration with an interpreted fallback.

Hot kernels are written once as plain Python functions and passed through
:func:`jit_decorator`.  When numba is importable and ``WRK_DISABLE_NUMBA`` is
not set, the decorator is ``numba.njit``; otherwise it is a no-op and the same
source runs interpreted.  Both paths draw from the same ``numpy.random
.Generator`` stream, so results are bit-identical either way.
"""
from __future__ import annotations

import os
from typing import Callable

try:
    import numba as _nb

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _nb = None
    HAS_NUMBA = False

_ENV_FLAG = "WRK_DISABLE_NUMBA"


def numba_enabled() -> bool:
    """True when the compiled path should be used for hot kernels."""
    if not HAS_NUMBA:
        return False
    return os.environ.get(_ENV_FLAG, "").strip().lower() not in ("1", "true", "yes")


def jit_decorator(use_jit: bool, **options) -> Callable:
    """Return ``numba.njit(**options)`` or a pass-through decorator.

    Kernel modules call this inside a ``_build_kernels(use_jit)`` factory so
    both variants of every kernel can coexist in one process (the benchmark
    needs that); ``cache=True`` is the default so compiled kernels persist
    across processes.
    """
    if use_jit and HAS_NUMBA:
        options.setdefault("cache", True)
        return _nb.njit(**options)

    def passthrough(fn):
        return fn

    return passthrough
