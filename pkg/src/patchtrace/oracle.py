"""Reference intersector by dense tessellation.

Each patch is evaluated in float64 on a uniform ``(N+1) x (N+1)`` grid and
split into ``2 N^2`` triangles; cell ``(a, b)`` yields ``(a,b) (a+1,b)
(a+1,b+1)`` and ``(a,b) (a+1,b+1) (a,b+1)``.  Triangles are tested with the
watertight shear/scale formulation, so rays through shared edges and
vertices of one grid cannot slip through.  A binary tree over blocks of
cells (exact float64 boxes, slightly padded) keeps queries affordable; it is
an accelerator only and never changes the answer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numba import njit

from .bvh import Bvh, build_bvh, next_leaf, node_entry, tree_arrays
from .config import JIT_OPTIONS
from .geometry import Ray, inv_dir, ray_box
from .patch import Patch, eval_patch_grid

DEFAULT_RESOLUTION = 256
LEAF_CELLS = 16
BOX_PAD = 1e-9


@njit(**JIT_OPTIONS)
def _build_cell_tree(verts, n, leaf_cells, lo, hi, rng, left, right):
    """Split the cell grid into a binary tree; returns the node count.

    ``rng[k] = (a0, a1, b0, b1)`` is the half-open cell range of node ``k``.
    Children always follow their parent, so boxes are filled in reverse order.
    """
    rng[0, 0] = 0
    rng[0, 1] = n
    rng[0, 2] = 0
    rng[0, 3] = n
    count = 1
    stack = np.empty(128, np.int64)
    stack[0] = 0
    sp = 1
    while sp > 0:
        sp -= 1
        k = stack[sp]
        a0, a1, b0, b1 = rng[k, 0], rng[k, 1], rng[k, 2], rng[k, 3]
        if (a1 - a0) * (b1 - b0) <= leaf_cells:
            left[k] = -1
            right[k] = -1
            continue
        l = count
        r = count + 1
        count += 2
        left[k] = l
        right[k] = r
        if a1 - a0 >= b1 - b0:
            m = (a0 + a1) // 2
            rng[l, 0], rng[l, 1], rng[l, 2], rng[l, 3] = a0, m, b0, b1
            rng[r, 0], rng[r, 1], rng[r, 2], rng[r, 3] = m, a1, b0, b1
        else:
            m = (b0 + b1) // 2
            rng[l, 0], rng[l, 1], rng[l, 2], rng[l, 3] = a0, a1, b0, m
            rng[r, 0], rng[r, 1], rng[r, 2], rng[r, 3] = a0, a1, m, b1
        stack[sp] = r
        stack[sp + 1] = l
        sp += 2
    for k in range(count - 1, -1, -1):
        if left[k] >= 0:
            for c in range(3):
                lo[k, c] = min(lo[left[k], c], lo[right[k], c])
                hi[k, c] = max(hi[left[k], c], hi[right[k], c])
            continue
        for c in range(3):
            lo[k, c] = np.inf
            hi[k, c] = -np.inf
        for a in range(rng[k, 0], rng[k, 1] + 1):
            for b in range(rng[k, 2], rng[k, 3] + 1):
                for c in range(3):
                    x = verts[a, b, c]
                    if x < lo[k, c]:
                        lo[k, c] = x
                    if x > hi[k, c]:
                        hi[k, c] = x
        for c in range(3):
            pad = BOX_PAD * max(1.0, abs(lo[k, c]), abs(hi[k, c]))
            lo[k, c] -= pad
            hi[k, c] += pad
    return count


@dataclass(frozen=True, eq=False)
class TessellatedPatch:
    n: int
    vertices: np.ndarray   # (n+1, n+1, 3) float64, vertices[a, b] = S(a/n, b/n)
    lo: np.ndarray         # cell-tree node boxes
    hi: np.ndarray
    ranges: np.ndarray     # (K, 4) cell ranges
    left: np.ndarray
    right: np.ndarray

    @property
    def triangle_count(self) -> int:
        return 2 * self.n * self.n

    def triangles(self) -> np.ndarray:
        """``(2 n^2, 3, 2)`` grid indices ``(a, b)`` of each triangle's vertices."""
        a, b = np.meshgrid(np.arange(self.n), np.arange(self.n), indexing="ij")
        a = a.ravel()
        b = b.ravel()
        t1 = np.stack([np.stack([a, b], -1), np.stack([a + 1, b], -1), np.stack([a + 1, b + 1], -1)], 1)
        t2 = np.stack([np.stack([a, b], -1), np.stack([a + 1, b + 1], -1), np.stack([a, b + 1], -1)], 1)
        return np.concatenate([t1, t2])

    def area(self) -> float:
        idx = self.triangles()
        p = self.vertices[idx[..., 0], idx[..., 1]]
        return float(0.5 * np.linalg.norm(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1).sum())


def tessellate(patch: Patch, n: int = DEFAULT_RESOLUTION) -> TessellatedPatch:
    if n < 1:
        raise ValueError("tessellation resolution must be at least 1")
    grid = np.arange(n + 1, dtype=np.float64) / n
    verts = np.ascontiguousarray(eval_patch_grid(patch, grid, grid, np.float64))
    cap = 8 * n * n // LEAF_CELLS + 16
    lo = np.empty((cap, 3))
    hi = np.empty((cap, 3))
    rng = np.empty((cap, 4), np.int64)
    left = np.empty(cap, np.int64)
    right = np.empty(cap, np.int64)
    k = _build_cell_tree(verts, n, LEAF_CELLS, lo, hi, rng, left, right)
    return TessellatedPatch(n, verts, lo[:k].copy(), hi[:k].copy(), rng[:k].copy(), left[:k].copy(),
                            right[:k].copy())


@njit(**JIT_OPTIONS)
def _shear_setup(dx, dy, dz):
    ax, ay, az = abs(dx), abs(dy), abs(dz)
    if ax >= ay and ax >= az:
        kz = 0
    elif ay >= az:
        kz = 1
    else:
        kz = 2
    kx = (kz + 1) % 3
    ky = (kx + 1) % 3
    d = (dx, dy, dz)
    if d[kz] < 0.0:
        kx, ky = ky, kx
    return kx, ky, kz, d[kx] / d[kz], d[ky] / d[kz], 1.0 / d[kz]


@njit(**JIT_OPTIONS)
def _tri(o, kx, ky, kz, sx, sy, sz, p0, p1, p2, tmin, tmax):
    """Watertight ray/triangle test; returns ``(hit, t, b1, b2)`` (weights of ``p1``, ``p2``)."""
    ax = p0[kx] - o[kx]
    ay = p0[ky] - o[ky]
    az = p0[kz] - o[kz]
    bx = p1[kx] - o[kx]
    by = p1[ky] - o[ky]
    bz = p1[kz] - o[kz]
    cx = p2[kx] - o[kx]
    cy = p2[ky] - o[ky]
    cz = p2[kz] - o[kz]
    ax = ax - sx * az
    ay = ay - sy * az
    bx = bx - sx * bz
    by = by - sy * bz
    cx = cx - sx * cz
    cy = cy - sy * cz
    u = cx * by - cy * bx
    v = ax * cy - ay * cx
    w = bx * ay - by * ax
    if (u < 0.0 or v < 0.0 or w < 0.0) and (u > 0.0 or v > 0.0 or w > 0.0):
        return False, 0.0, 0.0, 0.0
    det = u + v + w
    if det == 0.0:
        return False, 0.0, 0.0, 0.0
    t = (u * az + v * bz + w * cz) * sz / det
    if not (t >= tmin and t <= tmax):
        return False, 0.0, 0.0, 0.0
    return True, t, v / det, w / det


@njit(**JIT_OPTIONS)
def _tess_closest(o, d, tmin, tmax, verts, n, lo, hi, rng, left, right, stack_n, stack_t):
    """Closest hit in one tessellation (float64): ``(hit, t, u, v, nx, ny, nz)``."""
    kx, ky, kz, sx, sy, sz = _shear_setup(d[0], d[1], d[2])
    ix, iy, iz = inv_dir(d[0], d[1], d[2])
    best = tmax
    found = False
    bu = 0.0
    bv = 0.0
    nx = 0.0
    ny = 0.0
    nz = 0.0
    h, t0 = ray_box(o[0], o[1], o[2], ix, iy, iz, lo[0, 0], lo[0, 1], lo[0, 2], hi[0, 0], hi[0, 1], hi[0, 2],
                    tmin, best)
    if not h:
        return False, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0
    stack_n[0] = 0
    stack_t[0] = t0
    sp = 1
    inv_n = 1.0 / n
    while sp > 0:
        sp -= 1
        k = stack_n[sp]
        if stack_t[sp] > best:
            continue
        if left[k] < 0:
            for a in range(rng[k, 0], rng[k, 1]):
                for b in range(rng[k, 2], rng[k, 3]):
                    p00 = verts[a, b]
                    p10 = verts[a + 1, b]
                    p11 = verts[a + 1, b + 1]
                    p01 = verts[a, b + 1]
                    hit, t, w1, w2 = _tri(o, kx, ky, kz, sx, sy, sz, p00, p10, p11, tmin, best)
                    if hit and (t < best or not found):
                        best = t
                        found = True
                        bu = (a + w1 + w2) * inv_n
                        bv = (b + w2) * inv_n
                        e1 = p10 - p00
                        e2 = p11 - p00
                        nx = e1[1] * e2[2] - e1[2] * e2[1]
                        ny = e1[2] * e2[0] - e1[0] * e2[2]
                        nz = e1[0] * e2[1] - e1[1] * e2[0]
                    hit, t, w1, w2 = _tri(o, kx, ky, kz, sx, sy, sz, p00, p11, p01, tmin, best)
                    if hit and (t < best or not found):
                        best = t
                        found = True
                        bu = (a + w1) * inv_n
                        bv = (b + w1 + w2) * inv_n
                        e1 = p11 - p00
                        e2 = p01 - p00
                        nx = e1[1] * e2[2] - e1[2] * e2[1]
                        ny = e1[2] * e2[0] - e1[0] * e2[2]
                        nz = e1[0] * e2[1] - e1[1] * e2[0]
            continue
        l = left[k]
        r = right[k]
        hl, tl = ray_box(o[0], o[1], o[2], ix, iy, iz, lo[l, 0], lo[l, 1], lo[l, 2], hi[l, 0], hi[l, 1],
                         hi[l, 2], tmin, best)
        hr, tr = ray_box(o[0], o[1], o[2], ix, iy, iz, lo[r, 0], lo[r, 1], lo[r, 2], hi[r, 0], hi[r, 1],
                         hi[r, 2], tmin, best)
        if hl and hr and tr < tl:
            l, r = r, l
            tl, tr = tr, tl
            hl, hr = hr, hl
        if hr:
            stack_n[sp] = r
            stack_t[sp] = tr
            sp += 1
        if hl:
            stack_n[sp] = l
            stack_t[sp] = tl
            sp += 1
    if not found:
        return False, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0
    ln = math.sqrt(nx * nx + ny * ny + nz * nz)
    if ln > 0.0:
        nx /= ln
        ny /= ln
        nz /= ln
    return True, best, bu, bv, nx, ny, nz


@dataclass(frozen=True)
class OracleHit:
    t: float
    u: float
    v: float
    normal: np.ndarray


def oracle_intersect(tess: TessellatedPatch, ray: Ray) -> Optional[OracleHit]:
    """Closest watertight hit over all triangles of ``tess``."""
    sn = np.empty(128, np.int64)
    st = np.empty(128)
    hit, t, u, v, nx, ny, nz = _tess_closest(ray.origin, ray.direction, float(ray.t_min), float(ray.t_max),
                                             tess.vertices, tess.n, tess.lo, tess.hi, tess.ranges,
                                             tess.left, tess.right, sn, st)
    if not hit:
        return None
    return OracleHit(float(t), float(u), float(v), np.array([nx, ny, nz]))


@njit(**JIT_OPTIONS)
def _oracle_trace(orig, dirs, tmin, tmax, any_hit,
                  blo, bhi, bleft, bright, bfirst, bcount, border,
                  verts, vstart, res, tlo, thi, trng, tleft, tright, tstart,
                  found, tout, pid, uv, normal):
    stack_n = np.empty(128, np.int64)
    stack_t = np.empty(128)
    tn = np.empty(128, np.int64)
    tt = np.empty(128)
    for k in range(orig.shape[0]):
        o = orig[k]
        d = dirs[k]
        ix, iy, iz = inv_dir(d[0], d[1], d[2])
        best = tmax[k]
        found[k] = False
        sp = 0
        h, t0 = node_entry(0, o[0], o[1], o[2], ix, iy, iz, blo, bhi, tmin[k], best)
        if h:
            stack_n[0] = 0
            stack_t[0] = t0
            sp = 1
        while True:
            nd, sp = next_leaf(stack_n, stack_t, sp, best, o[0], o[1], o[2], ix, iy, iz,
                               blo, bhi, bleft, bright, bcount, tmin[k])
            if nd < 0:
                break
            for m in range(bfirst[nd], bfirst[nd] + bcount[nd]):
                p = border[m]
                n = res[p]
                vs = verts[vstart[p]:vstart[p + 1]].reshape(n + 1, n + 1, 3)
                a = tstart[p]
                b = tstart[p + 1]
                hit, t, u, v, nx, ny, nz = _tess_closest(o, d, tmin[k], best, vs, n, tlo[a:b], thi[a:b],
                                                         trng[a:b], tleft[a:b], tright[a:b], tn, tt)
                if hit and (t < best or not found[k]):
                    best = t
                    found[k] = True
                    tout[k] = t
                    pid[k] = p
                    uv[k, 0] = u
                    uv[k, 1] = v
                    normal[k, 0] = nx
                    normal[k, 1] = ny
                    normal[k, 2] = nz
            if any_hit and found[k]:
                break


class OracleScene:
    """Tessellations of every patch plus a BVH over the patch boxes."""

    def __init__(self, patches: Sequence[Patch], n: int = DEFAULT_RESOLUTION, bvh: Optional[Bvh] = None):
        from .geometry import box_of_points

        self.n = n
        self.tess = [tessellate(p, n) for p in patches]
        self.bvh = bvh if bvh is not None else build_bvh([box_of_points(p.all_points()) for p in patches])
        self._verts = np.ascontiguousarray(np.concatenate([t.vertices.reshape(-1, 3) for t in self.tess]))
        self._vstart = np.cumsum([0] + [t.vertices.shape[0] * t.vertices.shape[1] for t in self.tess]).astype(np.int64)
        self._res = np.array([t.n for t in self.tess], dtype=np.int64)
        self._tstart = np.cumsum([0] + [len(t.left) for t in self.tess]).astype(np.int64)
        self._tlo = np.concatenate([t.lo for t in self.tess])
        self._thi = np.concatenate([t.hi for t in self.tess])
        self._trng = np.concatenate([t.ranges for t in self.tess])
        self._tleft = np.concatenate([t.left for t in self.tess])
        self._tright = np.concatenate([t.right for t in self.tess])

    def trace(self, orig, dirs, tmin=0.0, tmax=np.inf, any_hit: bool = False):
        """Closest (or any) hit per ray: ``(found, t, patch, uv, normal)``."""
        from .tracer import TraceResult

        orig = np.ascontiguousarray(orig, dtype=np.float64).reshape(-1, 3)
        dirs = np.ascontiguousarray(dirs, dtype=np.float64).reshape(-1, 3)
        m = len(orig)
        tmin = np.ascontiguousarray(np.broadcast_to(tmin, m), dtype=np.float64)
        tmax = np.ascontiguousarray(np.broadcast_to(tmax, m), dtype=np.float64)
        found = np.zeros(m, np.bool_)
        t = np.full(m, np.inf)
        pid = np.full(m, -1, np.int64)
        uv = np.zeros((m, 2))
        normal = np.zeros((m, 3))
        _oracle_trace(orig, dirs, tmin, tmax, any_hit, *tree_arrays(self.bvh),
                      self._verts, self._vstart, self._res, self._tlo, self._thi, self._trng,
                      self._tleft, self._tright, self._tstart, found, t, pid, uv, normal)
        return TraceResult(found, t, pid, uv, normal, np.zeros(m), np.zeros((m, 4), np.int64),
                           np.zeros(m, np.int64))
