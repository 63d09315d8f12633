"""Batched scene queries: BVH traversal feeding the patch intersector.

:class:`PreparedScene` packs every patch into its local frame once (anchored
at its root-box centre) in the geometry precision; BVH traversal runs in
float64 on the world-space patch boxes, then each candidate patch is
intersected with the ray translated into that patch's frame.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numba import njit

from ._numeric import cst
from .bvh import Bvh, build_bvh, next_leaf, node_entry, tree_arrays
from .config import DOMAIN_ONE, JIT_OPTIONS, resolve_dtype
from .geometry import box_of_points, inv_dir
from .intersect import (IntersectConfig, TerminationCriterion, intersect_core, intersect_stack,
                        patch_normal, prepare_patch)
from .patch import Patch

STACK = 128


@dataclass(frozen=True, eq=False)
class TraceResult:
    """Per-ray query results; entries of rays without a hit are unspecified except ``found``."""

    found: np.ndarray      # (n,) bool
    t: np.ndarray          # (n,) float64
    patch: np.ndarray      # (n,) int64, -1 for misses
    uv: np.ndarray         # (n, 2)
    normal: np.ndarray     # (n, 3) unit geometric normal
    leaf_l1: np.ndarray    # (n,) L1 diagonal of the final bounding volume
    domain: np.ndarray     # (n, 4) fixed-point (pos_u, pos_v, size_u, size_v) of the final domain
    iterations: np.ndarray  # (n,) loop iterations summed over candidate patches

    def __len__(self):
        return len(self.found)


@njit(**JIT_OPTIONS)
def _trace_direct(orig, dirs, tmin, tmax, scale, eps, any_hit, reference, check,
                  blo, bhi, bleft, bright, bfirst, bcount, border,
                  patches, anchors, greg, pad_abs, pad_thresh, transpose,
                  found, tout, pid, uv, normal, l1out, dom, iters):
    work = np.empty((6, 4, 4, 3), patches.dtype)
    net = np.empty((4, 4, 3), patches.dtype)
    ev = np.empty((1, 4, 3), patches.dtype)
    stack_n = np.empty(STACK, np.int64)
    stack_t = np.empty(STACK)
    half = cst(patches, 0.5)
    fixed = cst(patches, 1.0) / cst(patches, DOMAIN_ONE)
    for k in range(orig.shape[0]):
        ox, oy, oz = orig[k, 0], orig[k, 1], orig[k, 2]
        dx, dy, dz = dirs[k, 0], dirs[k, 1], dirs[k, 2]
        rdx, rdy, rdz = cst(patches, dx), cst(patches, dy), cst(patches, dz)
        ix, iy, iz = inv_dir(dx, dy, dz)
        best = tmax[k]
        rtmin = cst(patches, tmin[k])
        rsc = cst(patches, scale[k])
        reps = cst(patches, eps[k])
        found[k] = False
        pid[k] = -1
        total = 0
        violated = False
        sp = 0
        h, t0 = node_entry(0, ox, oy, oz, ix, iy, iz, blo, bhi, tmin[k], best)
        if h:
            stack_n[0] = 0
            stack_t[0] = t0
            sp = 1
        bp = -1
        while True:
            nd, sp = next_leaf(stack_n, stack_t, sp, best, ox, oy, oz, ix, iy, iz,
                               blo, bhi, bleft, bright, bcount, tmin[k])
            if nd < 0:
                break
            for m in range(bfirst[nd], bfirst[nd] + bcount[nd]):
                p = border[m]
                lx = cst(patches, ox - anchors[p, 0])
                ly = cst(patches, oy - anchors[p, 1])
                lz = cst(patches, oz - anchors[p, 2])
                if reference:
                    res = intersect_stack(lx, ly, lz, rdx, rdy, rdz, rtmin, cst(patches, best), patches[p],
                                          greg[p], rsc, reps, pad_abs[p], pad_thresh[p], work)
                else:
                    res = intersect_core(lx, ly, lz, rdx, rdy, rdz, rtmin, cst(patches, best), patches[p],
                                         greg[p], rsc, reps, pad_abs[p], pad_thresh[p], transpose,
                                         any_hit, work, check)
                ok, t, pu, pv, su, sv, lb, it = res
                if it < 0:
                    violated = True
                total += abs(it)
                if ok and (np.float64(t) < best or bp < 0):
                    best = np.float64(t)
                    bp = p
                    tout[k] = best
                    uv[k, 0] = (np.float64(pu) + 0.5 * np.float64(su)) / DOMAIN_ONE
                    uv[k, 1] = (np.float64(pv) + 0.5 * np.float64(sv)) / DOMAIN_ONE
                    dom[k, 0] = pu
                    dom[k, 1] = pv
                    dom[k, 2] = su
                    dom[k, 3] = sv
                    l1out[k] = np.float64(lb)
                    if any_hit:
                        break
            if any_hit and bp >= 0:
                break
        iters[k] = -total if violated else total
        if bp >= 0:
            found[k] = True
            pid[k] = bp
            u = (cst(patches, dom[k, 0]) + half * cst(patches, dom[k, 2])) * fixed
            v = (cst(patches, dom[k, 1]) + half * cst(patches, dom[k, 3])) * fixed
            nx, ny, nz = patch_normal(patches[bp], greg[bp], u, v, net, ev)
            if nx == 0.0 and ny == 0.0 and nz == 0.0:
                # fully degenerate tangent frame: face the ray
                ln = np.sqrt(dx * dx + dy * dy + dz * dz)
                nx, ny, nz = -dx / ln, -dy / ln, -dz / ln
            normal[k, 0] = nx
            normal[k, 1] = ny
            normal[k, 2] = nz


class PreparedScene:
    """Patches in local frames plus a BVH, ready for batched direct intersection."""

    def __init__(self, patches: Sequence[Patch], config: IntersectConfig = IntersectConfig(),
                 dtype=None, bvh: Optional[Bvh] = None):
        self.R = resolve_dtype(dtype)
        self.config = config
        self.patch_list = tuple(patches)
        n = len(self.patch_list)
        self.patches = np.empty((n, 20, 3), self.R)
        self.anchors = np.empty((n, 3))
        self.pad_abs = np.empty(n, self.R)
        self.pad_thresh = np.empty(n, self.R)
        self.greg = np.array([p.is_gregory for p in self.patch_list], dtype=np.bool_)
        for k, p in enumerate(self.patch_list):
            local, anchor, pa, pt = prepare_patch(p, config, self.R)
            self.patches[k] = local
            self.anchors[k] = anchor
            self.pad_abs[k] = pa
            self.pad_thresh[k] = pt
        self.boxes = [box_of_points(p.all_points()) for p in self.patch_list]
        self.bvh = bvh if bvh is not None else build_bvh(self.boxes)

    def __len__(self):
        return len(self.patch_list)

    def trace(self, orig, dirs, tmin=0.0, tmax=np.inf, crit: Optional[TerminationCriterion] = None,
              scale=None, eps=None, any_hit: bool = False, reference: bool = False,
              check: bool = False) -> TraceResult:
        """Closest (or any) hit per ray.

        Termination is given either as one ``crit`` for all rays or as per-ray
        ``scale``/``eps`` arrays (threshold ``eps + scale * t``).
        """
        orig = np.ascontiguousarray(orig, dtype=np.float64).reshape(-1, 3)
        dirs = np.ascontiguousarray(dirs, dtype=np.float64).reshape(-1, 3)
        m = len(orig)
        if crit is not None:
            scale, eps = crit.params
        if scale is None or eps is None:
            raise ValueError("pass a termination criterion or scale/eps")
        vec = lambda a: np.ascontiguousarray(np.broadcast_to(a, m), dtype=np.float64)
        found = np.zeros(m, np.bool_)
        t = np.full(m, np.inf)
        pid = np.full(m, -1, np.int64)
        uv = np.zeros((m, 2))
        normal = np.zeros((m, 3))
        l1 = np.zeros(m)
        dom = np.zeros((m, 4), np.int64)
        iters = np.zeros(m, np.int64)
        _trace_direct(orig, dirs, vec(tmin), vec(tmax), vec(scale), vec(eps), any_hit, reference, check,
                      *tree_arrays(self.bvh), self.patches, self.anchors, self.greg, self.pad_abs,
                      self.pad_thresh, self.config.transpose, found, t, pid, uv, normal, l1, dom, iters)
        return TraceResult(found, t, pid, uv, normal, l1, dom, iters)


@njit(**JIT_OPTIONS)
def _trace_pairs(orig, dirs, tmin, tmax, pid, scale, eps, reference, check, patches, anchors, greg,
                 pad_abs, pad_thresh, transpose, found, tout, dom, l1out, normal, iters):
    work = np.empty((6, 4, 4, 3), patches.dtype)
    net = np.empty((4, 4, 3), patches.dtype)
    ev = np.empty((1, 4, 3), patches.dtype)
    half = cst(patches, 0.5)
    fixed = cst(patches, 1.0) / cst(patches, DOMAIN_ONE)
    for k in range(orig.shape[0]):
        p = pid[k]
        lx = cst(patches, orig[k, 0] - anchors[p, 0])
        ly = cst(patches, orig[k, 1] - anchors[p, 1])
        lz = cst(patches, orig[k, 2] - anchors[p, 2])
        rdx, rdy, rdz = cst(patches, dirs[k, 0]), cst(patches, dirs[k, 1]), cst(patches, dirs[k, 2])
        if reference:
            res = intersect_stack(lx, ly, lz, rdx, rdy, rdz, cst(patches, tmin[k]), cst(patches, tmax[k]),
                                  patches[p], greg[p], cst(patches, scale[k]), cst(patches, eps[k]),
                                  pad_abs[p], pad_thresh[p], work)
        else:
            res = intersect_core(lx, ly, lz, rdx, rdy, rdz, cst(patches, tmin[k]), cst(patches, tmax[k]),
                                 patches[p], greg[p], cst(patches, scale[k]), cst(patches, eps[k]),
                                 pad_abs[p], pad_thresh[p], transpose, False, work, check)
        ok, t, pu, pv, su, sv, lb, it = res
        found[k] = ok
        tout[k] = np.float64(t)
        dom[k, 0] = pu
        dom[k, 1] = pv
        dom[k, 2] = su
        dom[k, 3] = sv
        l1out[k] = np.float64(lb)
        iters[k] = it
        if ok:
            u = (cst(patches, pu) + half * cst(patches, su)) * fixed
            v = (cst(patches, pv) + half * cst(patches, sv)) * fixed
            nx, ny, nz = patch_normal(patches[p], greg[p], u, v, net, ev)
            normal[k, 0] = nx
            normal[k, 1] = ny
            normal[k, 2] = nz


def intersect_pairs(scene: PreparedScene, orig, dirs, pid, crit: TerminationCriterion, tmin=0.0,
                    tmax=np.inf, reference: bool = False, check: bool = False) -> TraceResult:
    """Intersect ray ``k`` with patch ``pid[k]`` only (no BVH), in world coordinates."""
    orig = np.ascontiguousarray(orig, dtype=np.float64).reshape(-1, 3)
    dirs = np.ascontiguousarray(dirs, dtype=np.float64).reshape(-1, 3)
    m = len(orig)
    pid = np.ascontiguousarray(np.broadcast_to(pid, m), dtype=np.int64)
    big = float(np.finfo(scene.R).max)
    vec = lambda a: np.ascontiguousarray(np.broadcast_to(a, m), dtype=np.float64)
    scale, eps = crit.params
    found = np.zeros(m, np.bool_)
    t = np.full(m, np.inf)
    dom = np.zeros((m, 4), np.int64)
    l1 = np.zeros(m)
    normal = np.zeros((m, 3))
    iters = np.zeros(m, np.int64)
    _trace_pairs(orig, dirs, vec(tmin), np.minimum(vec(tmax), big), pid, vec(scale), vec(eps), reference,
                 check, scene.patches, scene.anchors, scene.greg, scene.pad_abs, scene.pad_thresh,
                 scene.config.transpose and not reference, found, t, dom, l1, normal, iters)
    uv = (dom[:, :2] + 0.5 * dom[:, 2:]) / DOMAIN_ONE
    return TraceResult(found, np.where(found, t, np.inf), np.where(found, pid, -1), uv, normal, l1, dom, iters)
