"""JIT switch for the hot kernels.

Kernels are compiled with numba when it is importable and the environment
variable ``ANTSWARM_NUMBA`` is not ``"0"``.  Otherwise every kernel runs as
ordinary numpy code (or the explicit numpy fallback given to :func:`kernel`).
"""
from __future__ import annotations

import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    numba = None

USE_NUMBA = numba is not None and os.environ.get("ANTSWARM_NUMBA", "1") != "0"


def kernel(fn=None, *, fallback=None):
    """Compile ``fn`` with ``numba.njit`` or hand back the numpy path.

    ``fallback`` is a vectorised numpy twin of ``fn`` for primitives whose
    loop form would be slow in the interpreter.
    """

    def wrap(f):
        if USE_NUMBA:
            return numba.njit(cache=True, nogil=True)(f)
        return fallback if fallback is not None else f

    if fn is None:
        return wrap
    return wrap(fn)


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
