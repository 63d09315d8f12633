"""Bicubic Bezier and Gregory patches.

Control nets are ``(4, 4, 3)`` arrays indexed ``p[i, j]`` with ``i`` along u
and ``j`` along v.  Inside the compiled kernels every patch is packed into a
``(20, 3)`` array: rows ``0..15`` hold the grid in ``i * 4 + j`` order (for a
Gregory patch the inner slots hold the u-points), rows ``16..19`` hold the
v-points of the inner pairs (1,1), (2,1), (1,2), (2,2).  A Bezier patch packs
its inner points into both slots.

The weight convention of the inner pairs follows the bounding algorithm: at
``(u, v)`` the inner point ``(1, 1)`` is ``pv + u / (u + v) * (pu - pv)`` and
likewise for the other three corners with ``u -> 1 - u`` / ``v -> 1 - v``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np
from numba import njit

from ._numeric import cst
from .config import DOMAIN_ONE, JIT_OPTIONS, resolve_dtype

INNER = ((1, 1), (2, 1), (1, 2), (2, 2))
CORNER_CLAMP = 2.0 ** -20


def _as_grid(points, dtype=np.float64) -> np.ndarray:
    arr = np.array(points, dtype=dtype).reshape(4, 4, 3)
    if not np.all(np.isfinite(arr)):
        raise ValueError("control points must be finite")
    return arr


@dataclass(frozen=True, eq=False)
class BezierNet:
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points)
        dtype = pts.dtype if pts.dtype in (np.float32, np.float64) else np.float64
        object.__setattr__(self, "points", _as_grid(pts, dtype))

    is_gregory = False

    def packed(self) -> np.ndarray:
        out = np.empty((20, 3), dtype=self.points.dtype)
        out[:16] = self.points.reshape(16, 3)
        for k, (i, j) in enumerate(INNER):
            out[16 + k] = self.points[i, j]
        return out

    def astype(self, dtype) -> "BezierNet":
        return BezierNet(self.points.astype(dtype))

    def all_points(self) -> np.ndarray:
        return self.points.reshape(16, 3)


@dataclass(frozen=True, eq=False)
class GregoryNet:
    """Gregory patch: 12 boundary points plus four inner pairs.

    ``points`` is a 4x4 grid whose inner slots carry the u-points;
    ``pv[i - 1, j - 1]`` is the v-point of inner pair ``(i, j)``.
    """

    points: np.ndarray
    pv: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points)
        dtype = pts.dtype if pts.dtype in (np.float32, np.float64) else np.float64
        object.__setattr__(self, "points", _as_grid(pts, dtype))
        pv = np.array(self.pv, dtype=dtype).reshape(2, 2, 3)
        if not np.all(np.isfinite(pv)):
            raise ValueError("control points must be finite")
        object.__setattr__(self, "pv", pv)

    is_gregory = True

    @classmethod
    def from_pairs(cls, boundary, pu, pv) -> "GregoryNet":
        """Build from a 4x4 grid (inner entries ignored) and 2x2 u/v point arrays."""
        grid = np.array(boundary, dtype=np.float64).reshape(4, 4, 3)
        pu = np.asarray(pu, dtype=np.float64).reshape(2, 2, 3)
        grid[1:3, 1:3] = pu
        return cls(grid, pv)

    @property
    def pu(self) -> np.ndarray:
        return self.points[1:3, 1:3].copy()

    def packed(self) -> np.ndarray:
        out = np.empty((20, 3), dtype=self.points.dtype)
        out[:16] = self.points.reshape(16, 3)
        for k, (i, j) in enumerate(INNER):
            out[16 + k] = self.pv[i - 1, j - 1]
        return out

    def astype(self, dtype) -> "GregoryNet":
        return GregoryNet(self.points.astype(dtype), self.pv.astype(dtype))

    def all_points(self) -> np.ndarray:
        return np.concatenate([self.points.reshape(16, 3), self.pv.reshape(4, 3)])

    def induced_bezier(self) -> BezierNet:
        """Bezier net obtained when the u- and v-points coincide (uses the u-points)."""
        return BezierNet(self.points.copy())


Patch = Union[BezierNet, GregoryNet]


def unpack(packed: np.ndarray, is_gregory: bool) -> Patch:
    packed = np.asarray(packed)
    grid = packed[:16].reshape(4, 4, 3)
    if not is_gregory:
        return BezierNet(grid)
    pv = np.empty((2, 2, 3), dtype=packed.dtype)
    for k, (i, j) in enumerate(INNER):
        pv[i - 1, j - 1] = packed[16 + k]
    return GregoryNet(grid, pv)


@dataclass(frozen=True)
class Domain:
    u0: float = 0.0
    u1: float = 1.0
    v0: float = 0.0
    v1: float = 1.0

    def __post_init__(self):
        if not (0.0 <= self.u0 <= self.u1 <= 1.0 and 0.0 <= self.v0 <= self.v1 <= 1.0):
            raise ValueError(f"invalid domain {self}")

    @classmethod
    def from_fixed(cls, pos, size) -> "Domain":
        s = float(DOMAIN_ONE)
        return cls(pos[0] / s, (pos[0] + size[0]) / s, pos[1] / s, (pos[1] + size[1]) / s)

    def map(self, s, t):
        """Map local coordinates in [0,1]^2 to this domain."""
        return self.u0 + s * (self.u1 - self.u0), self.v0 + t * (self.v1 - self.v0)

    def contains(self, other: "Domain") -> bool:
        return (self.u0 <= other.u0 and other.u1 <= self.u1
                and self.v0 <= other.v0 and other.v1 <= self.v1)


@dataclass(frozen=True, eq=False)
class BoundResult:
    """Lower-bounding Bezier net and the displacement of its upper box corner."""

    q: BezierNet
    d: np.ndarray

    def box(self):
        from .geometry import Aabb, box_of_points

        b = box_of_points(self.q.points.reshape(16, 3))
        return Aabb(b.lo, b.hi + self.d)


@dataclass(frozen=True, eq=False)
class WeightBounds:
    g_min: np.ndarray = field(default_factory=lambda: np.zeros((2, 2)))
    g_max: np.ndarray = field(default_factory=lambda: np.ones((2, 2)))

    def interval(self, i: int, j: int):
        return float(self.g_min[i - 1, j - 1]), float(self.g_max[i - 1, j - 1])


@njit(**JIT_OPTIONS)
def cubic(a, b, c, d, t):
    """de Casteljau value and derivative of a scalar cubic."""
    one = cst(t, 1.0)
    s = one - t
    ab = s * a + t * b
    bc = s * b + t * c
    cd = s * c + t * d
    e = s * ab + t * bc
    f = s * bc + t * cd
    return s * e + t * f, cst(t, 3.0) * (f - e)


@njit(**JIT_OPTIONS)
def eval_all(p, u, v, out, k):
    """Write position, Du, Dv, DuDv at (u, v) into ``out[k, 0..3]``."""
    for c in range(3):
        r0, d0 = cubic(p[0, 0, c], p[0, 1, c], p[0, 2, c], p[0, 3, c], v)
        r1, d1 = cubic(p[1, 0, c], p[1, 1, c], p[1, 2, c], p[1, 3, c], v)
        r2, d2 = cubic(p[2, 0, c], p[2, 1, c], p[2, 2, c], p[2, 3, c], v)
        r3, d3 = cubic(p[3, 0, c], p[3, 1, c], p[3, 2, c], p[3, 3, c], v)
        val, du = cubic(r0, r1, r2, r3, u)
        dv, duv = cubic(d0, d1, d2, d3, u)
        out[k, 0, c] = val
        out[k, 1, c] = du
        out[k, 2, c] = dv
        out[k, 3, c] = duv


@njit(**JIT_OPTIONS)
def crop_into(p, u0, u1, v0, v1, q, sc):
    """Single-pass crop of a Bezier net to [u0,u1]x[v0,v1]; ``sc`` is (4,4,3) scratch."""
    eval_all(p, u0, v0, sc, 0)
    eval_all(p, u1, v0, sc, 1)
    eval_all(p, u0, v1, sc, 2)
    eval_all(p, u1, v1, sc, 3)
    three = cst(u0, 3.0)
    du = (u1 - u0) / three
    dv = (v1 - v0) / three
    duv = du * dv
    for c in range(3):
        q00 = sc[0, 0, c]
        q30 = sc[1, 0, c]
        q03 = sc[2, 0, c]
        q33 = sc[3, 0, c]
        q10 = q00 + du * sc[0, 1, c]
        q20 = q30 - du * sc[1, 1, c]
        q01 = q00 + dv * sc[0, 2, c]
        q31 = q30 + dv * sc[1, 2, c]
        q02 = q03 - dv * sc[2, 2, c]
        q32 = q33 - dv * sc[3, 2, c]
        q13 = q03 + du * sc[2, 1, c]
        q23 = q33 - du * sc[3, 1, c]
        q[0, 0, c] = q00
        q[3, 0, c] = q30
        q[0, 3, c] = q03
        q[3, 3, c] = q33
        q[1, 0, c] = q10
        q[2, 0, c] = q20
        q[0, 1, c] = q01
        q[3, 1, c] = q31
        q[0, 2, c] = q02
        q[3, 2, c] = q32
        q[1, 3, c] = q13
        q[2, 3, c] = q23
        q[1, 1, c] = q10 + dv * sc[0, 2, c] + duv * sc[0, 3, c]
        q[2, 1, c] = q31 - du * sc[1, 1, c] - duv * sc[1, 3, c]
        q[1, 2, c] = q13 - dv * sc[2, 2, c] - duv * sc[2, 3, c]
        q[2, 2, c] = q23 - dv * sc[3, 2, c] + duv * sc[3, 3, c]


@njit(**JIT_OPTIONS)
def subdivide_into(p, axis, left, right):
    """Bisect at 1/2 along ``axis`` (0 = u, 1 = v) with additions and halvings only."""
    half = cst(p, 0.5)
    for k in range(4):
        for c in range(3):
            if axis == 0:
                a, b, cc, d = p[0, k, c], p[1, k, c], p[2, k, c], p[3, k, c]
            else:
                a, b, cc, d = p[k, 0, c], p[k, 1, c], p[k, 2, c], p[k, 3, c]
            ab = (a + b) * half
            bc = (b + cc) * half
            cd = (cc + d) * half
            e = (ab + bc) * half
            f = (bc + cd) * half
            m = (e + f) * half
            if axis == 0:
                left[0, k, c] = a
                left[1, k, c] = ab
                left[2, k, c] = e
                left[3, k, c] = m
                right[0, k, c] = m
                right[1, k, c] = f
                right[2, k, c] = cd
                right[3, k, c] = d
            else:
                left[k, 0, c] = a
                left[k, 1, c] = ab
                left[k, 2, c] = e
                left[k, 3, c] = m
                right[k, 0, c] = m
                right[k, 1, c] = f
                right[k, 2, c] = cd
                right[k, 3, c] = d


@njit(**JIT_OPTIONS)
def transpose_into(p, out):
    for i in range(4):
        for j in range(4):
            for c in range(3):
                out[j, i, c] = p[i, j, c]


@njit(**JIT_OPTIONS)
def net_box(p):
    lx = hx = p[0, 0, 0]
    ly = hy = p[0, 0, 1]
    lz = hz = p[0, 0, 2]
    for i in range(4):
        for j in range(4):
            x = p[i, j, 0]
            y = p[i, j, 1]
            z = p[i, j, 2]
            if x < lx:
                lx = x
            if x > hx:
                hx = x
            if y < ly:
                ly = y
            if y > hy:
                hy = y
            if z < lz:
                lz = z
            if z > hz:
                hz = z
    return lx, ly, lz, hx, hy, hz


@njit(**JIT_OPTIONS)
def ratio(a, b):
    s = a + b
    if s > cst(a, 0.0):
        return a / s
    return cst(a, 0.0)


@njit(**JIT_OPTIONS)
def bernstein_args(t0, t1):
    """Clamped arguments at which B1 and B2 attain their maxima on [t0, t1]."""
    third = cst(t0, 1.0) / cst(t0, 3.0)
    two_thirds = cst(t0, 2.0) / cst(t0, 3.0)
    if t0 <= third and t1 >= third:
        a1 = third
    elif t1 <= third:
        a1 = t1
    else:
        a1 = t0
    if t0 <= two_thirds and t1 >= two_thirds:
        a2 = two_thirds
    elif t1 < two_thirds:
        a2 = t1
    else:
        a2 = t0
    return a1, a2


@njit(**JIT_OPTIONS)
def bernstein_max(t0, t1):
    a1, a2 = bernstein_args(t0, t1)
    one = cst(t0, 1.0)
    three = cst(t0, 3.0)
    return three * a1 * (one - a1) * (one - a1), three * a2 * a2 * (one - a2)


@njit(**JIT_OPTIONS)
def weight_extremes(u0, u1, v0, v1, out):
    """Weights of the u-point at the two domain corners where each rational weight is extreme.

    ``out`` is (4, 2), one row per inner pair in (1,1), (2,1), (1,2), (2,2) order.
    """
    one = cst(u0, 1.0)
    out[0, 0] = ratio(u0, v1)
    out[0, 1] = ratio(u1, v0)
    out[1, 0] = ratio(one - u0, v0)
    out[1, 1] = ratio(one - u1, v1)
    out[2, 0] = ratio(u1, one - v1)
    out[2, 1] = ratio(u0, one - v0)
    out[3, 0] = ratio(one - u1, one - v0)
    out[3, 1] = ratio(one - u0, one - v1)


@njit(**JIT_OPTIONS)
def bound_into(pk, is_gregory, u0, u1, v0, v1, q, lower, sc):
    """Crop the (lower bounding) net into ``q`` and return the upper displacement."""
    for i in range(4):
        for j in range(4):
            for c in range(3):
                lower[i, j, c] = pk[i * 4 + j, c]
    zero = cst(u0, 0.0)
    one = cst(u0, 1.0)
    dx = zero
    dy = zero
    dz = zero
    if is_gregory:
        wu1, wu2 = bernstein_max(u0, u1)
        wv1, wv2 = bernstein_max(v0, v1)
        # same order as the packed inner pairs
        wa0 = ratio(u0, v1)
        wb0 = ratio(u1, v0)
        wa1 = ratio(one - u0, v0)
        wb1 = ratio(one - u1, v1)
        wa2 = ratio(u1, one - v1)
        wb2 = ratio(u0, one - v0)
        wa3 = ratio(one - u1, one - v0)
        wb3 = ratio(one - u0, one - v1)
        for k in range(4):
            if k == 0:
                i, j, wa, wb, wbar = 1, 1, wa0, wb0, wu1 * wv1
            elif k == 1:
                i, j, wa, wb, wbar = 2, 1, wa1, wb1, wu2 * wv1
            elif k == 2:
                i, j, wa, wb, wbar = 1, 2, wa2, wb2, wu1 * wv2
            else:
                i, j, wa, wb, wbar = 2, 2, wa3, wb3, wu2 * wv2
            for c in range(3):
                pu = pk[i * 4 + j, c]
                pv = pk[16 + k, c]
                diff = pu - pv
                pa = pv + wa * diff
                pb = pv + wb * diff
                if pa < pb:
                    lo, hi = pa, pb
                else:
                    lo, hi = pb, pa
                lower[i, j, c] = lo
                dd = wbar * (hi - lo)
                if c == 0:
                    dx += dd
                elif c == 1:
                    dy += dd
                else:
                    dz += dd
    crop_into(lower, u0, u1, v0, v1, q, sc)
    return dx, dy, dz


@njit(**JIT_OPTIONS)
def calc_fixed(pk, is_gregory, pu, pv, su, sv, q, lower, sc):
    fixed_scale = cst(pk, 1.0) / cst(pk, DOMAIN_ONE)
    u0 = cst(pk, pu) * fixed_scale
    u1 = cst(pk, pu + su) * fixed_scale
    v0 = cst(pk, pv) * fixed_scale
    v1 = cst(pk, pv + sv) * fixed_scale
    return bound_into(pk, is_gregory, u0, u1, v0, v1, q, lower, sc)


@njit(**JIT_OPTIONS)
def blend_weights(u, v):
    """Weights of the u-points for the four inner pairs at (u, v)."""
    zero = cst(u, 0.0)
    one = cst(u, 1.0)
    half = cst(u, 0.5)
    w0 = ratio(u, v)
    if u + v == zero:
        w0 = half
    w1 = ratio(one - u, v)
    if (one - u) + v == zero:
        w1 = half
    w2 = ratio(u, one - v)
    if u + (one - v) == zero:
        w2 = half
    w3 = ratio(one - u, one - v)
    if (one - u) + (one - v) == zero:
        w3 = half
    return w0, w1, w2, w3


@njit(**JIT_OPTIONS)
def blend_into(pk, is_gregory, u, v, net):
    for i in range(4):
        for j in range(4):
            for c in range(3):
                net[i, j, c] = pk[i * 4 + j, c]
    if is_gregory:
        w0, w1, w2, w3 = blend_weights(u, v)
        for k in range(4):
            if k == 0:
                i, j, w = 1, 1, w0
            elif k == 1:
                i, j, w = 2, 1, w1
            elif k == 2:
                i, j, w = 1, 2, w2
            else:
                i, j, w = 2, 2, w3
            for c in range(3):
                pu = pk[i * 4 + j, c]
                pv = pk[16 + k, c]
                net[i, j, c] = pv + w * (pu - pv)


@njit(**JIT_OPTIONS)
def eval_packed(pk, is_gregory, u, v, net, out):
    """Position and derivatives of a packed patch at (u, v) into ``out[0]``."""
    blend_into(pk, is_gregory, u, v, net)
    eval_all(net, u, v, out, 0)


@njit(**JIT_OPTIONS)
def eval_grid(pk, is_gregory, us, vs, out):
    """Positions on the tensor grid ``us x vs`` into ``out[len(us), len(vs), 3]``."""
    net = np.empty((4, 4, 3), pk.dtype)
    tmp = np.empty((1, 4, 3), pk.dtype)
    for a in range(us.shape[0]):
        for b in range(vs.shape[0]):
            eval_packed(pk, is_gregory, us[a], vs[b], net, tmp)
            for c in range(3):
                out[a, b, c] = tmp[0, 0, c]


# --- Python-level API -------------------------------------------------------


def _grid(net) -> np.ndarray:
    if isinstance(net, (BezierNet, GregoryNet)):
        return net.points
    return _as_grid(net)


def _dtype_of(arr, dtype):
    return resolve_dtype(dtype if dtype is not None else
                         (arr.dtype if arr.dtype in (np.float32, np.float64) else np.float64))


def _eval_bezier_all(net, u, v, dtype=None) -> np.ndarray:
    p = _grid(net)
    R = _dtype_of(p, dtype)
    out = np.empty((1, 4, 3), dtype=R)
    eval_all(np.ascontiguousarray(p, dtype=R), R(u), R(v), out, 0)
    return out[0]


def eval_bezier(net, u: float, v: float, dtype=None) -> np.ndarray:
    return _eval_bezier_all(net, u, v, dtype)[0]


def eval_bezier_du(net, u: float, v: float, dtype=None) -> np.ndarray:
    return _eval_bezier_all(net, u, v, dtype)[1]


def eval_bezier_dv(net, u: float, v: float, dtype=None) -> np.ndarray:
    return _eval_bezier_all(net, u, v, dtype)[2]


def eval_bezier_dudv(net, u: float, v: float, dtype=None) -> np.ndarray:
    return _eval_bezier_all(net, u, v, dtype)[3]


def crop_bezier(net, dom: Domain, dtype=None) -> BezierNet:
    p = _grid(net)
    R = _dtype_of(p, dtype)
    q = np.empty((4, 4, 3), dtype=R)
    sc = np.empty((4, 4, 3), dtype=R)
    crop_into(np.ascontiguousarray(p, dtype=R), R(dom.u0), R(dom.u1), R(dom.v0), R(dom.v1), q, sc)
    return BezierNet(q)


def subdivide_de_casteljau(net, axis: int, dtype=None):
    """Split at 1/2 along ``axis`` (0 = u, 1 = v); returns ``(left, right)``."""
    if axis not in (0, 1):
        raise ValueError("axis must be 0 (u) or 1 (v)")
    p = _grid(net)
    R = _dtype_of(p, dtype)
    left = np.empty((4, 4, 3), dtype=R)
    right = np.empty((4, 4, 3), dtype=R)
    subdivide_into(np.ascontiguousarray(p, dtype=R), axis, left, right)
    return BezierNet(left), BezierNet(right)


def transpose(net) -> BezierNet:
    return BezierNet(np.ascontiguousarray(np.swapaxes(_grid(net), 0, 1)))


def gregory_weight_bounds(dom: Domain) -> WeightBounds:
    """Range of the rational u-point weights over ``dom`` (0/0 taken as 0)."""
    ext = np.empty((4, 2))
    weight_extremes(dom.u0, dom.u1, dom.v0, dom.v1, ext)
    g_min = np.empty((2, 2))
    g_max = np.empty((2, 2))
    for n, (i, j) in enumerate(INNER):
        g_min[i - 1, j - 1] = ext[n].min()
        g_max[i - 1, j - 1] = ext[n].max()
    return WeightBounds(g_min, g_max)


def bernstein_max_weights(dom: Domain):
    """Maxima of B1 and B2 (degree 3) over the u and v ranges: ``(wu1, wu2, wv1, wv2)``."""
    wu1, wu2 = bernstein_max(dom.u0, dom.u1)
    wv1, wv2 = bernstein_max(dom.v0, dom.v1)
    return wu1, wu2, wv1, wv2


def calc_points_and_d(patch: Patch, dom: Domain, dtype=None) -> BoundResult:
    pk = patch.packed()
    R = _dtype_of(pk, dtype)
    q = np.empty((4, 4, 3), dtype=R)
    lower = np.empty((4, 4, 3), dtype=R)
    sc = np.empty((4, 4, 3), dtype=R)
    d = bound_into(np.ascontiguousarray(pk, dtype=R), patch.is_gregory,
                   R(dom.u0), R(dom.u1), R(dom.v0), R(dom.v1), q, lower, sc)
    return BoundResult(BezierNet(q), np.array(d, dtype=R))


def gregory_blend_weights(u: float, v: float) -> np.ndarray:
    """u-point weights of the inner pairs at (u, v), as a 2x2 array ``w[i-1, j-1]``."""
    w = blend_weights(float(u), float(v))
    out = np.empty((2, 2))
    for n, (i, j) in enumerate(INNER):
        out[i - 1, j - 1] = w[n]
    return out


def _eval_patch_all(patch: Patch, u, v, dtype=None) -> np.ndarray:
    pk = patch.packed()
    R = _dtype_of(pk, dtype)
    net = np.empty((4, 4, 3), dtype=R)
    out = np.empty((1, 4, 3), dtype=R)
    eval_packed(np.ascontiguousarray(pk, dtype=R), patch.is_gregory, R(u), R(v), net, out)
    return out[0]


def eval_gregory(net: GregoryNet, u: float, v: float, dtype=None) -> np.ndarray:
    return _eval_patch_all(net, u, v, dtype)[0]


def eval_gregory_du(net: GregoryNet, u: float, v: float, dtype=None) -> np.ndarray:
    """u-tangent of the blended Bezier net at (u, v) (inner points held fixed)."""
    return _eval_patch_all(net, u, v, dtype)[1]


def eval_gregory_dv(net: GregoryNet, u: float, v: float, dtype=None) -> np.ndarray:
    return _eval_patch_all(net, u, v, dtype)[2]


def eval_patch(patch: Patch, u: float, v: float, dtype=None) -> np.ndarray:
    return _eval_patch_all(patch, u, v, dtype)[0]


def eval_patch_grid(patch: Patch, us, vs, dtype=None) -> np.ndarray:
    pk = patch.packed()
    R = _dtype_of(pk, dtype)
    us = np.ascontiguousarray(us, dtype=R)
    vs = np.ascontiguousarray(vs, dtype=R)
    out = np.empty((len(us), len(vs), 3), dtype=R)
    eval_grid(np.ascontiguousarray(pk, dtype=R), patch.is_gregory, us, vs, out)
    return out
