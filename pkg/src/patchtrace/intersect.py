"""Stackless ray/patch intersection by hierarchical subdivision.

The parametric unit square is split alternately along u and v.  Both halves
are bounded and tested against the ray; when both are hit the bit for the
current level is set in the trail of the split axis and the closer half is
visited first.  Backtracking reads the deepest pending sibling off the two
trails, so no stack is needed; control points for the restored domain are
recomputed from the original patch.

A stack-based twin (:func:`intersect_patch_reference`) follows the same
arithmetic and is kept for equivalence testing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np
from numba import njit

from . import geometry
from ._numeric import cst
from .config import DOMAIN_BITS, DOMAIN_ONE, JIT_OPTIONS, resolve_dtype
from .geometry import Ray, box_of_points, inv_dir, ray_box
from .patch import (BezierNet, Domain, GregoryNet, Patch, bound_into, calc_fixed, eval_packed,
                    net_box, subdivide_into, transpose_into)

U, V = 0, 1
MAX_DEPTH = DOMAIN_BITS
_EXHAUSTED = 64


@dataclass(frozen=True)
class DomainCursor:
    """Fixed-point traversal state: origin, extent, pending-sibling trails, next split axis."""

    pos: Tuple[int, int] = (0, 0)
    size: Tuple[int, int] = (DOMAIN_ONE, DOMAIN_ONE)
    trail: Tuple[int, int] = (0, 0)
    axis: int = U

    def domain(self) -> Domain:
        return Domain.from_fixed(self.pos, self.size)

    def is_well_formed(self) -> bool:
        for a in (0, 1):
            s, p, t = self.size[a], self.pos[a], self.trail[a]
            if s < 1 or s > DOMAIN_ONE or s & (s - 1):
                return False
            if p & (s - 1) or p + s > DOMAIN_ONE:
                return False
            if t & (s - 1) or t >= DOMAIN_ONE:
                return False
        return self.axis in (U, V)


@dataclass(frozen=True)
class TerminationCriterion:
    """Stop splitting once the L1 box diagonal drops below ``epsilon + footprint_scale * t``.

    Screen mode sets ``footprint_scale`` to the half-pixel width per unit
    distance; world mode uses a fixed ``epsilon``.  Splitting always stops
    after ``max_depth`` splits per axis.
    """

    mode: str = "world"
    footprint_scale: float = 0.0
    epsilon: float = 1e-4
    max_depth: int = MAX_DEPTH

    def __post_init__(self):
        if self.mode not in ("screen", "world"):
            raise ValueError(f"unknown termination mode {self.mode!r}")
        if self.mode == "world" and not self.epsilon > 0:
            raise ValueError("world epsilon must be positive")
        if self.mode == "screen" and not self.footprint_scale > 0:
            raise ValueError("screen footprint scale must be positive")
        if self.max_depth != MAX_DEPTH:
            raise ValueError(f"max_depth is fixed at {MAX_DEPTH} by the domain resolution")

    @classmethod
    def screen(cls, vfov_deg: float, image_height: int) -> "TerminationCriterion":
        half_pixel = math.tan(math.radians(vfov_deg) / 2.0) / image_height
        return cls("screen", half_pixel, 0.0)

    @classmethod
    def world(cls, epsilon: float) -> "TerminationCriterion":
        return cls("world", 0.0, epsilon)

    @property
    def params(self) -> Tuple[float, float]:
        """``(scale, epsilon)`` as consumed by the kernels."""
        if self.mode == "screen":
            return self.footprint_scale, 0.0
        return 0.0, self.epsilon

    def threshold(self, t: float) -> float:
        scale, eps = self.params
        return eps + scale * max(t, 0.0)


@dataclass(frozen=True)
class IntersectConfig:
    """Robustness knobs.

    ``pad_rel`` is the boundary padding as a fraction of the patch's root-box
    L1 diagonal; it applies to boxes touching the parametric boundary whose L1
    diagonal is below ``pad_threshold_rel`` of the root.
    """

    local_frame: bool = True
    padding: bool = True
    pad_rel: float = 1e-4
    pad_threshold_rel: float = 1e-2
    transpose: bool = False


@dataclass(frozen=True)
class HitRecord:
    patch_id: int
    t: float
    u: float
    v: float
    normal: np.ndarray
    leaf_box_l1: float
    pos: Tuple[int, int] = (0, 0)
    size: Tuple[int, int] = (1, 1)
    point: Optional[np.ndarray] = None
    incoming: Optional[np.ndarray] = None

    def domain(self) -> Domain:
        return Domain.from_fixed(self.pos, self.size)


@njit(**JIT_OPTIONS)
def ctz(x):
    if x == 0:
        return _EXHAUSTED
    n = 0
    while (x & 1) == 0:
        x >>= 1
        n += 1
    return n


@njit(**JIT_OPTIONS)
def backtrack(pu, pv, tu, tv):
    """Restore the deepest pending sibling: ``(ok, pu, pv, su, sv, tu, tv, next_axis)``."""
    if tu == 0 and tv == 0:
        return False, pu, pv, 0, 0, tu, tv, 0
    lu = ctz(tu)
    lv = ctz(tv)
    # equal levels: the v split happened after the u split of that level
    if lu < lv:
        su = 1 << lu
        sv = 1 << (lu + 1)
        pu ^= su
        tu ^= su
        axis = 0
    else:
        su = 1 << lv
        sv = su
        pv ^= sv
        tv ^= sv
        axis = 1
    pu &= ~(su - 1)
    pv &= ~(sv - 1)
    return True, pu, pv, su, sv, tu, tv, 1 - axis


@njit(**JIT_OPTIONS)
def cursor_ok(pu, pv, su, sv, tu, tv):
    """Alignment, power-of-two sizes and trail bits no finer than the current size."""
    for p, s, t in ((pu, su, tu), (pv, sv, tv)):
        if s < 1 or s > DOMAIN_ONE or (s & (s - 1)) != 0:
            return False
        if (p & (s - 1)) != 0 or p + s > DOMAIN_ONE:
            return False
        if (t & (s - 1)) != 0 or t >= DOMAIN_ONE:
            return False
    return True


@njit(**JIT_OPTIONS)
def bound(p, dx, dy, dz, pu, pv, su, sv, pad_abs, pad_thresh):
    lx, ly, lz, hx, hy, hz = net_box(p)
    hx += dx
    hy += dy
    hz += dz
    if pad_abs > cst(pad_abs, 0.0):
        l1 = (hx - lx) + (hy - ly) + (hz - lz)
        if l1 < pad_thresh and (pu == 0 or pv == 0 or pu + su == DOMAIN_ONE or pv + sv == DOMAIN_ONE):
            lx -= pad_abs
            ly -= pad_abs
            lz -= pad_abs
            hx += pad_abs
            hy += pad_abs
            hz += pad_abs
    return lx, ly, lz, hx, hy, hz


@njit(**JIT_OPTIONS)
def terminate_test(p, dx, dy, dz, su, sv, tcur, scale, eps):
    if su <= 1 and sv <= 1:
        return True
    lx, ly, lz, hx, hy, hz = net_box(p)
    l1 = (hx - lx) + (hy - ly) + (hz - lz) + dx + dy + dz
    zero = cst(tcur, 0.0)
    t = tcur if tcur > zero else zero
    return l1 < eps + scale * t


@njit(**JIT_OPTIONS)
def load_root(pk, is_gregory, work):
    zero = cst(pk, 0.0)
    one = cst(pk, 1.0)
    if is_gregory:
        return bound_into(pk, True, zero, one, zero, one, work[0], work[3], work[4])
    for i in range(4):
        for j in range(4):
            for c in range(3):
                work[0, i, j, c] = pk[i * 4 + j, c]
    return zero, zero, zero


@njit(**JIT_OPTIONS)
def recompute(pk, is_gregory, pu, pv, su, sv, axis, transpose, work, cur):
    d = calc_fixed(pk, is_gregory, pu, pv, su, sv, work[cur], work[3], work[4])
    if transpose and axis == 1:
        transpose_into(work[cur], work[5])
        work[cur, :, :, :] = work[5]
    return d


@njit(**JIT_OPTIONS)
def intersect_core(ox, oy, oz, dx, dy, dz, tmin, tmax, pk, is_gregory,
                   scale, eps, pad_abs, pad_thresh, transpose, any_hit, work, check=False):
    """Closest hit of one ray with one (anchored) patch.

    Returns ``(found, t, pos_u, pos_v, size_u, size_v, leaf_l1, iterations)``.
    ``work`` is a ``(6, 4, 4, 3)`` scratch array.  With ``check`` the cursor
    invariants are asserted every iteration; a violation
    ends the search and is reported as a negative iteration count.
    """
    ix, iy, iz = inv_dir(dx, dy, dz)
    ddx, ddy, ddz = load_root(pk, is_gregory, work)
    lx, ly, lz, hx, hy, hz = bound(work[0], ddx, ddy, ddz, 0, 0, DOMAIN_ONE, DOMAIN_ONE, pad_abs, pad_thresh)
    hit, tcur = ray_box(ox, oy, oz, ix, iy, iz, lx, ly, lz, hx, hy, hz, tmin, tmax)
    if not hit:
        return False, tmax, 0, 0, 0, 0, cst(ox, 0.0), 0
    curl1 = (hx - lx) + (hy - ly) + (hz - lz)
    pu = 0
    pv = 0
    su = DOMAIN_ONE
    sv = DOMAIN_ONE
    tu = 0
    tv = 0
    axis = 0
    cur = 0
    tbest = tmax
    found = False
    rpu = 0
    rpv = 0
    rsu = 0
    rsv = 0
    rl1 = cst(ox, 0.0)
    iters = 0
    while True:
        iters += 1
        if check and not cursor_ok(pu, pv, su, sv, tu, tv):
            return found, tbest, rpu, rpv, rsu, rsv, rl1, -iters
        subdividing = False
        if not terminate_test(work[cur], ddx, ddy, ddz, su, sv, tcur, scale, eps):
            a = (cur + 1) % 3
            b = (cur + 2) % 3
            subdivide_into(work[cur], 0 if transpose else axis, work[a], work[b])
            if axis == 0:
                hs = su >> 1
                lsu, lsv, rpu_, rpv_ = hs, sv, pu + hs, pv
            else:
                hs = sv >> 1
                lsu, lsv, rpu_, rpv_ = su, hs, pu, pv + hs
            l0, l1_, l2, h0, h1, h2 = bound(work[a], ddx, ddy, ddz, pu, pv, lsu, lsv, pad_abs, pad_thresh)
            hit_l, t_l = ray_box(ox, oy, oz, ix, iy, iz, l0, l1_, l2, h0, h1, h2, tmin, tbest)
            box_l = (h0 - l0) + (h1 - l1_) + (h2 - l2)
            l0, l1_, l2, h0, h1, h2 = bound(work[b], ddx, ddy, ddz, rpu_, rpv_, lsu, lsv, pad_abs, pad_thresh)
            hit_r, t_r = ray_box(ox, oy, oz, ix, iy, iz, l0, l1_, l2, h0, h1, h2, tmin, tbest)
            box_r = (h0 - l0) + (h1 - l1_) + (h2 - l2)
            if hit_l or hit_r:
                subdividing = True
                if axis == 0:
                    su = hs
                    if hit_l and hit_r:
                        tu ^= hs
                else:
                    sv = hs
                    if hit_l and hit_r:
                        tv ^= hs
                if (hit_l and hit_r and t_r < t_l) or not hit_l:
                    nxt = b
                    if axis == 0:
                        pu ^= hs
                    else:
                        pv ^= hs
                    tcur = t_r
                    curl1 = box_r
                else:
                    nxt = a
                    tcur = t_l
                    curl1 = box_l
                axis = 1 - axis
                if transpose:
                    transpose_into(work[nxt], work[cur])
                else:
                    cur = nxt
        else:
            if tcur < tbest:
                tbest = tcur
                found = True
                rpu = pu
                rpv = pv
                rsu = su
                rsv = sv
                rl1 = curl1
                if any_hit:
                    break
        if not subdividing:
            exhausted = True
            while tu != 0 or tv != 0:
                ok, pu, pv, su, sv, tu, tv, axis = backtrack(pu, pv, tu, tv)
                ddx, ddy, ddz = recompute(pk, is_gregory, pu, pv, su, sv, axis, transpose, work, cur)
                lx, ly, lz, hx, hy, hz = bound(work[cur], ddx, ddy, ddz, pu, pv, su, sv, pad_abs, pad_thresh)
                hit, tcur = ray_box(ox, oy, oz, ix, iy, iz, lx, ly, lz, hx, hy, hz, tmin, tbest)
                if hit:
                    curl1 = (hx - lx) + (hy - ly) + (hz - lz)
                    exhausted = False
                    break
            if exhausted:
                break
        elif is_gregory:
            ddx, ddy, ddz = recompute(pk, is_gregory, pu, pv, su, sv, axis, transpose, work, cur)
    return found, tbest, rpu, rpv, rsu, rsv, rl1, iters


@njit(**JIT_OPTIONS)
def intersect_stack(ox, oy, oz, dx, dy, dz, tmin, tmax, pk, is_gregory,
                    scale, eps, pad_abs, pad_thresh, work):
    """Reference twin of :func:`intersect_core` keeping pending siblings on an explicit stack."""
    ix, iy, iz = inv_dir(dx, dy, dz)
    ddx, ddy, ddz = load_root(pk, is_gregory, work)
    lx, ly, lz, hx, hy, hz = bound(work[0], ddx, ddy, ddz, 0, 0, DOMAIN_ONE, DOMAIN_ONE, pad_abs, pad_thresh)
    hit, tcur = ray_box(ox, oy, oz, ix, iy, iz, lx, ly, lz, hx, hy, hz, tmin, tmax)
    if not hit:
        return False, tmax, 0, 0, 0, 0, cst(ox, 0.0), 0
    curl1 = (hx - lx) + (hy - ly) + (hz - lz)
    stack = np.empty((2 * MAX_DEPTH + 2, 5), dtype=np.int64)
    sp = 0
    pu = 0
    pv = 0
    su = DOMAIN_ONE
    sv = DOMAIN_ONE
    axis = 0
    cur = 0
    tbest = tmax
    found = False
    rpu = 0
    rpv = 0
    rsu = 0
    rsv = 0
    rl1 = cst(ox, 0.0)
    iters = 0
    while True:
        iters += 1
        subdividing = False
        if not terminate_test(work[cur], ddx, ddy, ddz, su, sv, tcur, scale, eps):
            a = (cur + 1) % 3
            b = (cur + 2) % 3
            subdivide_into(work[cur], axis, work[a], work[b])
            if axis == 0:
                hs = su >> 1
                nsu, nsv, rpu_, rpv_ = hs, sv, pu + hs, pv
            else:
                hs = sv >> 1
                nsu, nsv, rpu_, rpv_ = su, hs, pu, pv + hs
            l0, l1_, l2, h0, h1, h2 = bound(work[a], ddx, ddy, ddz, pu, pv, nsu, nsv, pad_abs, pad_thresh)
            hit_l, t_l = ray_box(ox, oy, oz, ix, iy, iz, l0, l1_, l2, h0, h1, h2, tmin, tbest)
            box_l = (h0 - l0) + (h1 - l1_) + (h2 - l2)
            l0, l1_, l2, h0, h1, h2 = bound(work[b], ddx, ddy, ddz, rpu_, rpv_, nsu, nsv, pad_abs, pad_thresh)
            hit_r, t_r = ray_box(ox, oy, oz, ix, iy, iz, l0, l1_, l2, h0, h1, h2, tmin, tbest)
            box_r = (h0 - l0) + (h1 - l1_) + (h2 - l2)
            if hit_l or hit_r:
                subdividing = True
                go_right = (hit_l and hit_r and t_r < t_l) or not hit_l
                if hit_l and hit_r:
                    if go_right:
                        stack[sp, 0] = pu
                        stack[sp, 1] = pv
                    else:
                        stack[sp, 0] = rpu_
                        stack[sp, 1] = rpv_
                    stack[sp, 2] = nsu
                    stack[sp, 3] = nsv
                    stack[sp, 4] = 1 - axis
                    sp += 1
                if go_right:
                    pu, pv = rpu_, rpv_
                    cur = b
                    tcur = t_r
                    curl1 = box_r
                else:
                    cur = a
                    tcur = t_l
                    curl1 = box_l
                su, sv = nsu, nsv
                axis = 1 - axis
        else:
            if tcur < tbest:
                tbest = tcur
                found = True
                rpu = pu
                rpv = pv
                rsu = su
                rsv = sv
                rl1 = curl1
        if not subdividing:
            exhausted = True
            while sp > 0:
                sp -= 1
                pu = stack[sp, 0]
                pv = stack[sp, 1]
                su = stack[sp, 2]
                sv = stack[sp, 3]
                axis = stack[sp, 4]
                ddx, ddy, ddz = calc_fixed(pk, is_gregory, pu, pv, su, sv, work[cur], work[3], work[4])
                lx, ly, lz, hx, hy, hz = bound(work[cur], ddx, ddy, ddz, pu, pv, su, sv, pad_abs, pad_thresh)
                hit, tcur = ray_box(ox, oy, oz, ix, iy, iz, lx, ly, lz, hx, hy, hz, tmin, tbest)
                if hit:
                    curl1 = (hx - lx) + (hy - ly) + (hz - lz)
                    exhausted = False
                    break
            if exhausted:
                break
        elif is_gregory:
            ddx, ddy, ddz = calc_fixed(pk, is_gregory, pu, pv, su, sv, work[cur], work[3], work[4])
    return found, tbest, rpu, rpv, rsu, rsv, rl1, iters


@njit(**JIT_OPTIONS)
def patch_normal(pk, is_gregory, u, v, net, ev):
    """Unit geometric normal cross(Du, Dv); zero vector if degenerate everywhere nearby."""
    uu = u
    vv = v
    for attempt in range(8):
        eval_packed(pk, is_gregory, uu, vv, net, ev)
        ax, ay, az = np.float64(ev[0, 1, 0]), np.float64(ev[0, 1, 1]), np.float64(ev[0, 1, 2])
        bx, by, bz = np.float64(ev[0, 2, 0]), np.float64(ev[0, 2, 1]), np.float64(ev[0, 2, 2])
        nx = ay * bz - az * by
        ny = az * bx - ax * bz
        nz = ax * by - ay * bx
        ln = math.sqrt(nx * nx + ny * ny + nz * nz)
        if ln > 0.0 and math.isfinite(ln):
            return nx / ln, ny / ln, nz / ln
        # collapsed edge: step toward the patch centre
        step = cst(u, 1e-3 * 4.0 ** attempt)
        uu = uu + (cst(u, 0.5) - uu) * step
        vv = vv + (cst(u, 0.5) - vv) * step
    return 0.0, 0.0, 0.0


@njit(**JIT_OPTIONS)
def intersect_batch(orig, dirs, tmin, tmax, patches, greg, pid, scale, eps,
                    pad_abs, pad_thresh, transpose, any_hit, reference,
                    found, tout, dom, l1out, normal, iters, check=False):
    """Intersect ray ``k`` with ``patches[pid[k]]`` (arrays already in the patch's local frame)."""
    work = np.empty((6, 4, 4, 3), patches.dtype)
    net = np.empty((4, 4, 3), patches.dtype)
    ev = np.empty((1, 4, 3), patches.dtype)
    half = cst(patches, 0.5)
    fixed_scale = cst(patches, 1.0) / cst(patches, DOMAIN_ONE)
    for k in range(orig.shape[0]):
        p = pid[k]
        pk = patches[p]
        if reference:
            res = intersect_stack(orig[k, 0], orig[k, 1], orig[k, 2], dirs[k, 0], dirs[k, 1], dirs[k, 2],
                                  tmin[k], tmax[k], pk, greg[p], scale[k], eps[k],
                                  pad_abs[p], pad_thresh[p], work)
        else:
            res = intersect_core(orig[k, 0], orig[k, 1], orig[k, 2], dirs[k, 0], dirs[k, 1], dirs[k, 2],
                                 tmin[k], tmax[k], pk, greg[p], scale[k], eps[k],
                                 pad_abs[p], pad_thresh[p], transpose, any_hit, work, check)
        ok, t, pu, pv, su, sv, lb, it = res
        found[k] = ok
        tout[k] = t
        dom[k, 0] = pu
        dom[k, 1] = pv
        dom[k, 2] = su
        dom[k, 3] = sv
        l1out[k] = lb
        iters[k] = it
        if ok:
            u = (cst(patches, pu) + half * cst(patches, su)) * fixed_scale
            v = (cst(patches, pv) + half * cst(patches, sv)) * fixed_scale
            nx, ny, nz = patch_normal(pk, greg[p], u, v, net, ev)
            normal[k, 0] = nx
            normal[k, 1] = ny
            normal[k, 2] = nz


# --- Python-level API -------------------------------------------------------


def backtrack_step(cursor: DomainCursor) -> Optional[DomainCursor]:
    """Move to the deepest pending sibling, or return None when the trails are empty."""
    ok, pu, pv, su, sv, tu, tv, axis = backtrack(cursor.pos[0], cursor.pos[1],
                                                 cursor.trail[0], cursor.trail[1])
    if not ok:
        return None
    return DomainCursor((int(pu), int(pv)), (int(su), int(sv)), (int(tu), int(tv)), int(axis))


def local_frame_transform(patch: Patch, ray: Optional[Ray] = None):
    """Translate ``patch`` (and ``ray``) so the patch's root box is centred at the origin.

    Returns ``(patch', ray', anchor)``; distances along the ray are unchanged.
    """
    anchor = box_of_points(patch.all_points()).center
    if isinstance(patch, GregoryNet):
        moved = GregoryNet(patch.points - anchor, patch.pv - anchor)
    else:
        moved = BezierNet(patch.points - anchor)
    moved_ray = None
    if ray is not None:
        moved_ray = Ray(ray.origin - anchor, ray.direction, ray.t_min, ray.t_max)
    return moved, moved_ray, anchor


def prepare_patch(patch: Patch, config: IntersectConfig, dtype) -> Tuple[np.ndarray, np.ndarray, float, float]:
    """Packed (anchored) control points in ``dtype`` plus anchor and padding constants."""
    R = resolve_dtype(dtype)
    pk = patch.packed().astype(np.float64)
    if config.local_frame:
        anchor = 0.5 * (pk.min(axis=0) + pk.max(axis=0))
    else:
        anchor = np.zeros(3)
    local = (pk - anchor).astype(R)
    root_l1 = float(np.sum(local.max(axis=0).astype(np.float64) - local.min(axis=0)))
    pad_abs = config.pad_rel * root_l1 if config.padding else 0.0
    pad_thresh = config.pad_threshold_rel * root_l1 if config.padding else 0.0
    return local, anchor, pad_abs, pad_thresh


def _run_single(ray: Ray, patch: Patch, crit: TerminationCriterion, t_max, config, dtype, reference, patch_id):
    R = resolve_dtype(dtype)
    local, anchor, pad_abs, pad_thresh = prepare_patch(patch, config, R)
    t_max = ray.t_max if t_max is None else min(t_max, ray.t_max)
    orig = (ray.origin - anchor).astype(R).reshape(1, 3)
    dirs = ray.direction.astype(R).reshape(1, 3)
    scale, eps = crit.params
    found = np.zeros(1, np.bool_)
    tout = np.zeros(1, R)
    dom = np.zeros((1, 4), np.int64)
    l1out = np.zeros(1, R)
    normal = np.zeros((1, 3))
    iters = np.zeros(1, np.int64)
    big = np.finfo(R).max
    intersect_batch(orig, dirs, np.array([ray.t_min], R), np.array([min(t_max, big)], R),
                    local.reshape(1, 20, 3), np.array([patch.is_gregory]), np.zeros(1, np.int64),
                    np.array([scale], R), np.array([eps], R),
                    np.array([pad_abs], R), np.array([pad_thresh], R),
                    config.transpose, False, reference, found, tout, dom, l1out, normal, iters)
    if not found[0]:
        return None
    pu, pv, su, sv = (int(x) for x in dom[0])
    s = float(DOMAIN_ONE)
    t = float(tout[0])
    n = normal[0]
    if not np.any(n):
        n = -ray.direction / np.linalg.norm(ray.direction)
    return HitRecord(patch_id, t, (pu + 0.5 * su) / s, (pv + 0.5 * sv) / s, n, float(l1out[0]),
                     (pu, pv), (su, sv), ray.at(t), ray.direction.copy())


def intersect_patch(ray: Ray, patch: Patch, crit: TerminationCriterion, t_max: Optional[float] = None,
                    config: IntersectConfig = IntersectConfig(), dtype=None, patch_id: int = 0) -> Optional[HitRecord]:
    """Closest intersection of ``ray`` with ``patch`` using the bit-trail subdivision."""
    return _run_single(ray, patch, crit, t_max, config, dtype, False, patch_id)


def intersect_patch_reference(ray: Ray, patch: Patch, crit: TerminationCriterion, t_max: Optional[float] = None,
                              config: IntersectConfig = IntersectConfig(), dtype=None,
                              patch_id: int = 0) -> Optional[HitRecord]:
    """Same as :func:`intersect_patch` but backtracks with an explicit stack."""
    if config.transpose:
        config = replace(config, transpose=False)
    return _run_single(ray, patch, crit, t_max, config, dtype, True, patch_id)


def terminate(net, ray: Ray, cursor: DomainCursor, crit: TerminationCriterion,
              t_cur: Optional[float] = None, d=(0.0, 0.0, 0.0)) -> bool:
    """Termination test for the current domain; ``t_cur`` defaults to the box entry distance."""
    pts = net.points if isinstance(net, BezierNet) else np.asarray(net).reshape(4, 4, 3)
    box = box_of_points(pts.reshape(16, 3))
    if t_cur is None:
        t_cur = geometry.ray_box_intersect(ray, geometry.Aabb(box.lo, box.hi + np.asarray(d)), np.float64)
        t_cur = 0.0 if t_cur is None else t_cur
    if cursor.size[0] <= 1 and cursor.size[1] <= 1:
        return True
    l1 = float(np.sum(box.diagonal) + np.sum(d))
    return l1 < crit.threshold(t_cur)


def offset_spawn_origin(hit: HitRecord, incoming=None) -> np.ndarray:
    """Hit point pushed along the normal (flipped toward the incoming side) by the leaf-box L1."""
    d = hit.incoming if incoming is None else np.asarray(incoming, dtype=np.float64)
    n = np.asarray(hit.normal, dtype=np.float64)
    if d is not None and np.dot(n, d) > 0:
        n = -n
    return np.asarray(hit.point, dtype=np.float64) + n * hit.leaf_box_l1
