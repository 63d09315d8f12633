"""Binned-SAH binary BVH over patch root boxes.

The tree is stored as flat arrays in depth-first order.  Inner nodes have
``count == 0`` and two children ``left``/``right``; leaves reference
``order[first:first + count]``.  Boxes are float64 and contain the patch
boxes exactly (no slack), so the tree is valid for either geometry
precision.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from numba import njit

from .config import JIT_OPTIONS
from .geometry import Aabb, Ray, ray_box, ray_box_intersect

LEAF_SIZE = 4
DEFAULT_BINS = 16
STACK_SIZE = 128


@dataclass(frozen=True, eq=False)
class Bvh:
    lo: np.ndarray        # (M, 3) node boxes
    hi: np.ndarray
    left: np.ndarray      # (M,) child indices, -1 for leaves
    right: np.ndarray
    first: np.ndarray     # (M,) leaf range start into ``order``
    count: np.ndarray     # (M,) leaf size, 0 for inner nodes
    order: np.ndarray     # permutation of patch indices

    @property
    def node_count(self) -> int:
        return len(self.count)

    @property
    def leaf_count(self) -> int:
        return int(np.count_nonzero(self.count))

    def node_box(self, n: int) -> Aabb:
        return Aabb(self.lo[n], self.hi[n])

    def is_leaf(self, n: int) -> bool:
        return bool(self.count[n] > 0)

    def depth(self) -> int:
        """Number of levels (a single leaf root has depth 1)."""
        best = 0
        stack = [(0, 1)]
        while stack:
            n, d = stack.pop()
            best = max(best, d)
            if not self.is_leaf(n):
                stack.append((int(self.left[n]), d + 1))
                stack.append((int(self.right[n]), d + 1))
        return best

    def leaf_of(self) -> np.ndarray:
        """Leaf node index for every patch."""
        out = np.full(len(self.order), -1, dtype=np.int64)
        for n in np.flatnonzero(self.count):
            out[self.order[self.first[n]:self.first[n] + self.count[n]]] = n
        return out

    def dump(self, path) -> None:
        """Write the flat arrays to ``path`` (numpy ``.npz``; debugging aid, not a stable format)."""
        np.savez(path, lo=self.lo, hi=self.hi, left=self.left, right=self.right,
                 first=self.first, count=self.count, order=self.order)

    @classmethod
    def load_dump(cls, path) -> "Bvh":
        with np.load(path) as z:
            return cls(*(z[k] for k in ("lo", "hi", "left", "right", "first", "count", "order")))


def _area(lo, hi) -> np.ndarray:
    e = np.maximum(hi - lo, 0.0)
    return 2.0 * (e[..., 0] * e[..., 1] + e[..., 1] * e[..., 2] + e[..., 2] * e[..., 0])


def sah_split(lo: np.ndarray, hi: np.ndarray, bins: int = DEFAULT_BINS):
    """Best binned split of boxes ``lo``/``hi`` (each ``(n, 3)``).

    Returns ``(cost, axis, boundary, mask_left)`` with the unnormalised cost
    ``sum(area_L * n_L + area_R * n_R)``, or None when all centroids coincide.
    Ties go to the lowest axis, then the lowest bin boundary.
    """
    cen = 0.5 * (lo + hi)
    cmin = cen.min(axis=0)
    cmax = cen.max(axis=0)
    best = None
    for axis in range(3):
        extent = cmax[axis] - cmin[axis]
        if not extent > 0:
            continue
        b = np.minimum(((cen[:, axis] - cmin[axis]) * (bins / extent)).astype(np.int64), bins - 1)
        blo = np.full((bins, 3), np.inf)
        bhi = np.full((bins, 3), -np.inf)
        cnt = np.bincount(b, minlength=bins)
        np.minimum.at(blo, b, lo)
        np.maximum.at(bhi, b, hi)
        # prefix/suffix sweeps over bin boundaries 1..bins-1
        llo = np.minimum.accumulate(blo, axis=0)
        lhi = np.maximum.accumulate(bhi, axis=0)
        rlo = np.minimum.accumulate(blo[::-1], axis=0)[::-1]
        rhi = np.maximum.accumulate(bhi[::-1], axis=0)[::-1]
        lcnt = np.cumsum(cnt)
        for k in range(1, bins):
            nl = lcnt[k - 1]
            nr = len(lo) - nl
            if nl == 0 or nr == 0:
                continue
            cost = _area(llo[k - 1], lhi[k - 1]) * nl + _area(rlo[k], rhi[k]) * nr
            if best is None or cost < best[0]:
                best = (float(cost), axis, k, b < k)
    return best


def build_bvh(boxes: Sequence[Aabb], bin_count: int = DEFAULT_BINS, leaf_size: int = LEAF_SIZE) -> Bvh:
    """Top-down binned-SAH build over ``boxes``."""
    if len(boxes) == 0:
        raise ValueError("build_bvh needs at least one box")
    if bin_count < 2:
        raise ValueError("bin_count must be at least 2")
    lo = np.array([b.lo for b in boxes], dtype=np.float64).reshape(-1, 3)
    hi = np.array([b.hi for b in boxes], dtype=np.float64).reshape(-1, 3)
    return build_bvh_arrays(lo, hi, bin_count, leaf_size)


def build_bvh_arrays(lo: np.ndarray, hi: np.ndarray, bin_count: int = DEFAULT_BINS,
                     leaf_size: int = LEAF_SIZE) -> Bvh:
    n = len(lo)
    nodes_lo, nodes_hi, left, right, first, count = [], [], [], [], [], []
    order = []

    def new_node(idx):
        nodes_lo.append(lo[idx].min(axis=0))
        nodes_hi.append(hi[idx].max(axis=0))
        left.append(-1)
        right.append(-1)
        first.append(0)
        count.append(0)
        return len(count) - 1

    stack = [(new_node(np.arange(n)), np.arange(n))]
    while stack:
        node, idx = stack.pop()
        split = None
        if len(idx) > leaf_size:
            best = sah_split(lo[idx], hi[idx], bin_count)
            if best is None:
                # coincident centroids: median split on the widest axis of the node box
                axis = int(np.argmax(nodes_hi[node] - nodes_lo[node]))
                srt = idx[np.argsort(0.5 * (lo[idx, axis] + hi[idx, axis]), kind="stable")]
                half = len(srt) // 2
                split = (srt[:half], srt[half:])
            else:
                cost, _, _, mask = best
                leaf_cost = float(_area(nodes_lo[node], nodes_hi[node])) * len(idx)
                if cost < leaf_cost:
                    split = (idx[mask], idx[~mask])
        if split is None:
            first[node] = len(order)
            count[node] = len(idx)
            order.extend(int(i) for i in idx)
            continue
        a = new_node(split[0])
        b = new_node(split[1])
        left[node] = a
        right[node] = b
        # push right first so the left subtree is laid out next (depth-first order)
        stack.append((b, split[1]))
        stack.append((a, split[0]))

    return Bvh(np.array(nodes_lo), np.array(nodes_hi), np.array(left, dtype=np.int64),
               np.array(right, dtype=np.int64), np.array(first, dtype=np.int64),
               np.array(count, dtype=np.int64), np.array(order, dtype=np.int64))


def validate_bvh(bvh: Bvh, lo: np.ndarray, hi: np.ndarray) -> None:
    """Raise ``AssertionError`` unless structure and containment invariants hold."""
    seen = np.zeros(bvh.node_count, dtype=bool)
    stack = [0]
    covered = []
    while stack:
        nd = stack.pop()
        assert not seen[nd], "node visited twice"
        seen[nd] = True
        if bvh.count[nd] > 0:
            members = bvh.order[bvh.first[nd]:bvh.first[nd] + bvh.count[nd]]
            assert np.all(bvh.lo[nd] <= lo[members]) and np.all(hi[members] <= bvh.hi[nd])
            covered.extend(members.tolist())
        else:
            for c in (bvh.left[nd], bvh.right[nd]):
                assert np.all(bvh.lo[nd] <= bvh.lo[c]) and np.all(bvh.hi[c] <= bvh.hi[nd])
                stack.append(int(c))
    assert seen.all(), "unreachable nodes"
    assert sorted(covered) == list(range(len(lo))), "patches not referenced exactly once"


def traverse(bvh: Bvh, ray: Ray, visit: Callable[[int, float], Optional[object]]):
    """Ordered front-to-back traversal.

    ``visit(patch_index, t_max)`` returns a hit with attribute ``t`` or None;
    returned hits tighten ``t_max``.  Returns the closest hit or None.
    """
    best = None
    t_max = ray.t_max
    stack = []
    t0 = ray_box_intersect(ray, bvh.node_box(0), np.float64)
    if t0 is not None:
        stack.append((0, t0))
    while stack:
        node, t_entry = stack.pop()
        if t_entry >= t_max:
            continue
        if bvh.is_leaf(node):
            for k in range(bvh.first[node], bvh.first[node] + bvh.count[node]):
                hit = visit(int(bvh.order[k]), t_max)
                if hit is not None and hit.t < t_max:
                    best = hit
                    t_max = hit.t
            continue
        if t_max <= ray.t_min:
            break
        cur = Ray(ray.origin, ray.direction, ray.t_min, t_max)
        kids = []
        for c in (int(bvh.left[node]), int(bvh.right[node])):
            t = ray_box_intersect(cur, bvh.node_box(c), np.float64)
            if t is not None:
                kids.append((t, c))
        # far child pushed first so the near child is popped next
        kids.sort(key=lambda x: -x[0])
        for t, c in kids:
            stack.append((c, t))
    return best


@njit(**JIT_OPTIONS)
def node_entry(node, ox, oy, oz, ix, iy, iz, lo, hi, tmin, tmax):
    return ray_box(ox, oy, oz, ix, iy, iz, lo[node, 0], lo[node, 1], lo[node, 2],
                   hi[node, 0], hi[node, 1], hi[node, 2], tmin, tmax)


@njit(**JIT_OPTIONS)
def next_leaf(stack_n, stack_t, sp, tbest, ox, oy, oz, ix, iy, iz, lo, hi, left, right, count, tmin):
    """Pop nodes until a leaf with entry < ``tbest`` is reached; returns ``(leaf or -1, sp)``.

    All arguments are float64; children are pushed far-first.
    """
    while sp > 0:
        sp -= 1
        nd = stack_n[sp]
        if stack_t[sp] >= tbest:
            continue
        if count[nd] > 0:
            return nd, sp
        a = left[nd]
        b = right[nd]
        ha, ta = node_entry(a, ox, oy, oz, ix, iy, iz, lo, hi, tmin, tbest)
        hb, tb = node_entry(b, ox, oy, oz, ix, iy, iz, lo, hi, tmin, tbest)
        if ha and hb:
            if tb < ta:
                a, b = b, a
                ta, tb = tb, ta
            stack_n[sp] = b
            stack_t[sp] = tb
            stack_n[sp + 1] = a
            stack_t[sp + 1] = ta
            sp += 2
        elif ha:
            stack_n[sp] = a
            stack_t[sp] = ta
            sp += 1
        elif hb:
            stack_n[sp] = b
            stack_t[sp] = tb
            sp += 1
    return -1, sp


def tree_arrays(bvh: Bvh):
    """The arrays consumed by the compiled traversal, in argument order."""
    return (np.ascontiguousarray(bvh.lo), np.ascontiguousarray(bvh.hi), bvh.left, bvh.right,
            bvh.first, bvh.count, bvh.order)


def max_stack_depth(bvh: Bvh) -> int:
    return max(STACK_SIZE, 2 * bvh.depth() + 2)
