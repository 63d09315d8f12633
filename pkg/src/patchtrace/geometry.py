"""Rays, axis-aligned boxes and the conservative slab test.

Vectors are plain ``(3,)`` numpy arrays.  The compiled helpers operate on
scalars of either float width so they can be inlined into the hot loops of
the intersector without allocating.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numba import njit

from ._numeric import cst, eps_of
from .config import JIT_OPTIONS, resolve_dtype


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    direction: np.ndarray
    t_min: float = 0.0
    t_max: float = math.inf

    def __post_init__(self):
        o = np.asarray(self.origin, dtype=np.float64).reshape(3)
        d = np.asarray(self.direction, dtype=np.float64).reshape(3)
        if not np.any(d):
            raise ValueError("ray direction must be nonzero")
        if not (self.t_min >= 0 and self.t_max > self.t_min):
            raise ValueError(f"empty ray interval [{self.t_min}, {self.t_max}]")
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "direction", d)

    def at(self, t: float) -> np.ndarray:
        return self.origin + t * self.direction


@dataclass(frozen=True)
class Aabb:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lo", np.asarray(self.lo, dtype=np.float64).reshape(3))
        object.__setattr__(self, "hi", np.asarray(self.hi, dtype=np.float64).reshape(3))

    @classmethod
    def empty(cls) -> "Aabb":
        return cls(np.full(3, np.inf), np.full(3, -np.inf))

    @property
    def is_empty(self) -> bool:
        return bool(np.any(self.lo > self.hi))

    @property
    def diagonal(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def surface_area(self) -> float:
        if self.is_empty:
            return 0.0
        e = self.diagonal
        return float(2.0 * (e[0] * e[1] + e[1] * e[2] + e[2] * e[0]))

    def union(self, other: "Aabb") -> "Aabb":
        return Aabb(np.minimum(self.lo, other.lo), np.maximum(self.hi, other.hi))

    def contains(self, other: "Aabb") -> bool:
        return bool(np.all(self.lo <= other.lo) and np.all(other.hi <= self.hi))

    def contains_point(self, p) -> bool:
        p = np.asarray(p)
        return bool(np.all(self.lo <= p) and np.all(p <= self.hi))


def box_of_points(points: Sequence) -> Aabb:
    """Smallest box containing every point (component-wise min/max, no slack)."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(pts) == 0:
        raise ValueError("box_of_points needs at least one point")
    return Aabb(pts.min(axis=0), pts.max(axis=0))


def l1_norm(v) -> float:
    return float(np.abs(np.asarray(v, dtype=np.float64)).sum())


@njit(**JIT_OPTIONS)
def inv_dir(dx, dy, dz):
    one = cst(dx, 1.0)
    return one / dx, one / dy, one / dz


@njit(**JIT_OPTIONS)
def _slab(o, inv, lo, hi, tn, tf):
    if math.isinf(inv):
        if o < lo or o > hi:
            return tn, -cst(o, np.inf)
        return tn, tf
    t0 = (lo - o) * inv
    t1 = (hi - o) * inv
    if t0 > t1:
        t0, t1 = t1, t0
    # 4 ulp relative slack on far slab distances
    t1 = t1 + abs(t1) * (cst(o, 4.0) * eps_of(o))
    if t0 > tn:
        tn = t0
    if t1 < tf:
        tf = t1
    return tn, tf


@njit(**JIT_OPTIONS)
def ray_box(ox, oy, oz, ix, iy, iz, lx, ly, lz, hx, hy, hz, tmin, tmax):
    """Return ``(hit, t_entry)``; ``t_entry`` is clipped to ``[tmin, tmax]``."""
    tn = tmin
    tf = tmax + abs(tmax) * (cst(ox, 4.0) * eps_of(ox))
    tn, tf = _slab(ox, ix, lx, hx, tn, tf)
    tn, tf = _slab(oy, iy, ly, hy, tn, tf)
    tn, tf = _slab(oz, iz, lz, hz, tn, tf)
    if tn <= tf:
        if tn > tmax:
            tn = tmax
        return True, tn
    return False, cst(ox, 0.0)


@njit(**JIT_OPTIONS)
def _ray_box_batch(orig, dirs, tmin, tmax, lo, hi, hit, tout):
    for k in range(orig.shape[0]):
        ix, iy, iz = inv_dir(dirs[k, 0], dirs[k, 1], dirs[k, 2])
        h, t = ray_box(orig[k, 0], orig[k, 1], orig[k, 2], ix, iy, iz,
                       lo[k, 0], lo[k, 1], lo[k, 2], hi[k, 0], hi[k, 1], hi[k, 2],
                       tmin[k], tmax[k])
        hit[k] = h
        tout[k] = t


def ray_box_intersect(ray: Ray, box: Aabb, dtype=None) -> Optional[float]:
    """Entry distance of ``ray`` into ``box`` clipped to the ray interval, or None."""
    R = resolve_dtype(dtype)
    o = ray.origin.astype(R)
    ix, iy, iz = inv_dir(*ray.direction.astype(R))
    hit, t = ray_box(o[0], o[1], o[2], ix, iy, iz,
                       *box.lo.astype(R), *box.hi.astype(R),
                       R(ray.t_min), R(min(ray.t_max, np.finfo(R).max)))
    return float(t) if hit else None


def ray_box_batch(origins, directions, t_min, t_max, lo, hi, dtype=None):
    """Vectorised slab test; returns ``(hit, t_entry)`` arrays."""
    R = resolve_dtype(dtype)
    n = len(origins)
    hit = np.zeros(n, dtype=np.bool_)
    t = np.zeros(n, dtype=R)
    as_r = lambda a: np.ascontiguousarray(a, dtype=R)
    _ray_box_batch(as_r(origins), as_r(directions),
                    as_r(np.broadcast_to(t_min, n)), as_r(np.broadcast_to(t_max, n)),
                    as_r(lo), as_r(hi), hit, t)
    return hit, t
