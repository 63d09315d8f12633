"""Typed constants for precision-generic kernels.

Numba promotes ``float32 * 0.5`` to float64, so kernels spell constants as
``cst(x, 0.5)``: the literal is cast to the float type of ``x`` (a scalar or
an array).
"""

import numpy as np
from numba import types
from numba.extending import overload


def _float_type(x):
    t = x.dtype if isinstance(x, types.Array) else x
    return t if isinstance(t, types.Float) else types.float64


def cst(x, v):
    """``v`` as the float type of ``x`` (pure-Python fallback)."""
    dt = x.dtype if hasattr(x, "dtype") else np.float64
    return np.dtype(dt).type(v)


def eps_of(x):
    dt = x.dtype if hasattr(x, "dtype") else np.float64
    return np.finfo(dt).eps


@overload(cst, jit_options={"cache": True})
def _ol_cst(x, v):
    if _float_type(x) == types.float32:
        return lambda x, v: np.float32(v)
    return lambda x, v: np.float64(v)


@overload(eps_of, jit_options={"cache": True})
def _ol_eps_of(x):
    if _float_type(x) == types.float32:
        e = np.float32(np.finfo(np.float32).eps)
        return lambda x: e
    e = np.float64(np.finfo(np.float64).eps)
    return lambda x: e
