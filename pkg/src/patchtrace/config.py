"""Process-wide numeric settings."""

import os

import numpy as np

#: Geometry precision used when callers do not ask for one explicitly.
#: Set ``PATCHTRACE_PRECISION=double`` before import to switch.
REAL = np.float64 if os.environ.get("PATCHTRACE_PRECISION", "single").lower() in ("double", "float64", "64") else np.float32

#: Fixed-point resolution of the parametric domain (23 bits per axis).
DOMAIN_BITS = 23
DOMAIN_ONE = 1 << DOMAIN_BITS

JIT_OPTIONS = dict(cache=True, nogil=True, error_model="numpy")


def resolve_dtype(dtype=None):
    """Return the numpy scalar type for ``dtype`` (default :data:`REAL`)."""
    if dtype is None:
        return REAL
    dt = np.dtype(dtype)
    if dt not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise ValueError(f"unsupported geometry precision {dt}")
    return dt.type
