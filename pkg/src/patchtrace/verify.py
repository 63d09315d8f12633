"""Randomised verification suites against independent oracles.

Each check returns a :class:`SuiteResult` whose ``violations`` must be zero.
The functions are shared by ``patchtrace verify`` and the acceptance tests;
trial counts are parameters so callers can scale them.

* ``bounds``      -- the Gregory lower net plus displacement contains dense
                     float64 samples of the patch over random subdomains.
* ``traversal``   -- the bit-trail intersector agrees with an explicit-stack
                     twin and never produces a malformed domain cursor.
* ``watertight``  -- no interior crack pixels on the teapot versus the
                     tessellation oracle from random viewpoints.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from numba import njit

from ._numeric import cst
from .config import DOMAIN_ONE, JIT_OPTIONS, resolve_dtype
from .intersect import HitRecord, IntersectConfig, TerminationCriterion, offset_spawn_origin
from .patch import BezierNet, GregoryNet, Patch, bound_into, calc_fixed, eval_packed, eval_patch, net_box
from .scene_io import Camera, Scene
from .tracer import PreparedScene, intersect_pairs


@dataclass
class SuiteResult:
    suite: str
    trials: int
    violations: int
    details: Dict[str, object] = field(default_factory=dict)
    seconds: float = 0.0

    @property
    def ok(self) -> bool:
        return self.violations == 0

    def summary(self) -> str:
        extra = ", ".join(f"{k}={_fmt(v)}" for k, v in self.details.items())
        status = "ok" if self.ok else "FAILED"
        return (f"{self.suite}: {status} -- {self.violations} violations in {self.trials} trials "
                f"({self.seconds:.1f} s){'; ' + extra if extra else ''}")


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.3g}"
    return str(v)


# --- random fixtures ------------------------------------------------------------


def _rotation(rng) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    return q * np.sign(np.diag(r))


def random_grid(rng, curvature: float = 0.6) -> np.ndarray:
    """A curved, randomly placed 4x4 control grid of unit-ish size."""
    i, j = np.meshgrid(np.arange(4) / 3.0, np.arange(4) / 3.0, indexing="ij")
    pts = np.stack([i, j, np.zeros_like(i)], axis=-1)
    pts[..., :2] += rng.uniform(-0.08, 0.08, (4, 4, 2))
    pts[..., 2] = rng.uniform(-curvature, curvature, (4, 4))
    scale = rng.uniform(0.5, 2.0)
    return (pts - 0.5) @ _rotation(rng).T * scale + rng.uniform(-3.0, 3.0, 3)


def random_bezier(rng, curvature: float = 0.6) -> BezierNet:
    return BezierNet(random_grid(rng, curvature))


def random_gregory(rng, curvature: float = 0.6, twist: float = 0.15) -> GregoryNet:
    grid = random_grid(rng, curvature)
    size = np.linalg.norm(grid[3, 3] - grid[0, 0])
    pv = grid[1:3, 1:3] + rng.normal(0.0, twist * size, (2, 2, 3))
    return GregoryNet(grid, pv)


def fixture_patches(count: int = 10, seed: int = 0, gregory_every: int = 2) -> List[Patch]:
    """Deterministic curved fixtures; every ``gregory_every``-th one is a Gregory patch."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xF1]))
    return [random_gregory(rng) if gregory_every and k % gregory_every == 0 else random_bezier(rng)
            for k in range(count)]


def patch_extent(patch: Patch) -> float:
    pts = patch.all_points()
    return float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))


def random_dyadic(rng, max_depth: int = 12):
    """A random dyadic subdomain ``(u0, u1, v0, v1)``."""
    out = []
    for _ in range(2):
        level = int(rng.integers(0, max_depth + 1))
        size = 2.0 ** -level
        k = int(rng.integers(0, 2 ** level))
        out += [k * size, (k + 1) * size]
    return out


def random_domain(rng):
    """Random generic (half the time dyadic) subdomain, including edge-touching ones."""
    if rng.random() < 0.5:
        return random_dyadic(rng)
    out = []
    for _ in range(2):
        a, b = np.sort(rng.random(2))
        r = rng.random()
        if r < 0.1:
            a = 0.0
        elif r < 0.2:
            b = 1.0
        out += [float(a), float(b)]
    return out


# --- bounds ---------------------------------------------------------------------


@njit(**JIT_OPTIONS)
def _bounds_kernel(nets_r, nets64, net_of, doms, samples, extent, slack_rel):
    """Count samples outside the displaced lower-net box (beyond ``slack_rel * extent``).

    Also returns the largest outside distance relative to the extent.
    """
    q = np.empty((4, 4, 3), nets_r.dtype)
    lower = np.empty((4, 4, 3), nets_r.dtype)
    sc = np.empty((4, 4, 3), nets_r.dtype)
    net = np.empty((4, 4, 3), np.float64)
    ev = np.empty((1, 4, 3), np.float64)
    bad = 0
    worst = 0.0
    for k in range(doms.shape[0]):
        n = net_of[k]
        pk = nets_r[n]
        dx, dy, dz = bound_into(pk, True, cst(pk, doms[k, 0]), cst(pk, doms[k, 1]),
                                cst(pk, doms[k, 2]), cst(pk, doms[k, 3]), q, lower, sc)
        lx, ly, lz, hx, hy, hz = net_box(q)
        lo = (np.float64(lx), np.float64(ly), np.float64(lz))
        hi = (np.float64(hx) + np.float64(dx), np.float64(hy) + np.float64(dy), np.float64(hz) + np.float64(dz))
        s = slack_rel * extent[n]
        for a in range(samples):
            u = doms[k, 0] + (doms[k, 1] - doms[k, 0]) * a / (samples - 1)
            for b in range(samples):
                v = doms[k, 2] + (doms[k, 3] - doms[k, 2]) * b / (samples - 1)
                eval_packed(nets64[n], True, u, v, net, ev)
                out = 0.0
                for c in range(3):
                    x = ev[0, 0, c]
                    e = max(lo[c] - x, x - hi[c])
                    if e > out:
                        out = e
                if out > s:
                    bad += 1
                if out / extent[n] > worst:
                    worst = out / extent[n]
    return bad, worst


def _packed_arrays(patches: Sequence[Patch], dtype):
    R = resolve_dtype(dtype)
    pk64 = np.stack([p.packed().astype(np.float64) for p in patches])
    # bounds are computed in the local frame, as the intersector does
    anchors = 0.5 * (pk64.min(axis=1) + pk64.max(axis=1))
    local64 = pk64 - anchors[:, None, :]
    return np.ascontiguousarray(local64.astype(R)), np.ascontiguousarray(local64), anchors


def check_bounds(nets: int = 1000, domains_per_net: int = 100, samples: int = 32, seed: int = 0,
                 dtype=None, slack_rel: float = 1e-5) -> SuiteResult:
    """Gregory bound conservativeness on random nets and subdomains."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xB0]))
    patches = [random_gregory(rng, twist=rng.uniform(0.0, 0.4)) for _ in range(nets)]
    nets_r, nets64, _ = _packed_arrays(patches, dtype)
    # evaluate the original float64 patch; precision-rounded bounds must still contain it
    nets_eval = nets64.copy()
    net_of = np.repeat(np.arange(nets), domains_per_net)
    doms = np.array([random_domain(rng) for _ in range(len(net_of))], dtype=np.float64)
    extent = np.array([patch_extent(p) for p in patches])
    bad, worst = _bounds_kernel(nets_r, nets_eval, net_of, doms, samples, extent, slack_rel)
    return SuiteResult("bounds", len(doms), int(bad),
                       {"nets": nets, "samples": len(doms) * samples * samples, "worst_outside_rel": float(worst),
                        "dtype": resolve_dtype(dtype).__name__},
                       time.perf_counter() - t0)


@njit(**JIT_OPTIONS)
def _displacement_kernel(nets_r, net_of, axes, children, slack):
    """Walk subdivision paths; count increases of d beyond ``slack``."""
    q = np.empty((4, 4, 3), nets_r.dtype)
    lower = np.empty((4, 4, 3), nets_r.dtype)
    sc = np.empty((4, 4, 3), nets_r.dtype)
    bad = 0
    worst = 0.0
    for k in range(axes.shape[0]):
        pk = nets_r[net_of[k]]
        pu = 0
        pv = 0
        su = DOMAIN_ONE
        sv = DOMAIN_ONE
        px, py, pz = calc_fixed(pk, True, pu, pv, su, sv, q, lower, sc)
        for lvl in range(axes.shape[1]):
            if axes[k, lvl] == 0:
                su //= 2
                pu += children[k, lvl] * su
            else:
                sv //= 2
                pv += children[k, lvl] * sv
            dx, dy, dz = calc_fixed(pk, True, pu, pv, su, sv, q, lower, sc)
            inc = max(np.float64(dx) - np.float64(px), np.float64(dy) - np.float64(py),
                      np.float64(dz) - np.float64(pz))
            if inc > slack[net_of[k]]:
                bad += 1
            if inc > worst:
                worst = inc
            px, py, pz = dx, dy, dz
    return bad, worst


def _full_paths(depth: int):
    """Every path of a full binary subdivision tree (alternating axes) to ``depth``."""
    n = 2 ** depth
    children = ((np.arange(n)[:, None] >> np.arange(depth - 1, -1, -1)[None, :]) & 1).astype(np.int64)
    axes = np.broadcast_to(np.arange(depth) % 2, (n, depth)).astype(np.int64)
    return np.ascontiguousarray(axes), children


def check_displacement(patches: int = 1000, paths_per_patch: int = 64, depth: int = 20, full_depth: int = 10,
                       full_patches: int = 8, seed: int = 0, dtype=None, slack_rel: float = 1e-6) -> SuiteResult:
    """Monotone d along subdivision paths, exact zero on degenerate Bernstein arguments."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xD0]))
    nets = [random_gregory(rng, twist=rng.uniform(0.05, 0.4)) for _ in range(patches)]
    R = resolve_dtype(dtype)
    nets_r, _, _ = _packed_arrays(nets, R)
    slack = np.array([slack_rel * patch_extent(p) for p in nets])
    # random paths (random axis per level, capped at the fixed-point resolution per axis)
    m = patches * paths_per_patch
    axes = rng.integers(0, 2, (m, depth))
    children = rng.integers(0, 2, (m, depth))
    net_of = np.repeat(np.arange(patches), paths_per_patch)
    bad, worst = _displacement_kernel(nets_r, net_of, axes, children, slack)
    # full trees on a few patches
    fa, fc = _full_paths(full_depth)
    fb, fw = 0, 0.0
    for k in range(min(full_patches, patches)):
        b, w = _displacement_kernel(nets_r, np.full(len(fa), k, np.int64), fa, fc, slack)
        fb += b
        fw = max(fw, w)
    # degenerate domains at the parametric boundary: clamped arguments are 0 or 1, d must be 0 exactly
    nonzero = 0
    zero_cases = 0
    for k, p in enumerate(nets):
        for _ in range(4):
            a, b = np.sort(rng.random(2))
            edge = float(rng.integers(0, 2))
            for dom in ((edge, edge, a, b), (a, b, edge, edge)):
                res = bound_into(nets_r[k], True, *(R(x) for x in dom), np.empty((4, 4, 3), R),
                                 np.empty((4, 4, 3), R), np.empty((4, 4, 3), R))
                zero_cases += 1
                if any(x != 0 for x in res):
                    nonzero += 1
    total = int(bad + fb + nonzero)
    return SuiteResult("displacement", m * depth + len(fa) * full_depth * min(full_patches, patches) + zero_cases,
                       total, {"monotone_violations": int(bad + fb), "worst_increase": float(max(worst, fw)),
                               "zero_cases": zero_cases, "nonzero_at_degenerate": nonzero},
                       time.perf_counter() - t0)


# --- traversal ------------------------------------------------------------------


def rays_toward(patches: Sequence[Patch], rng, count: int, spread: float = 0.08, distance: float = 2.0):
    """Rays aimed near random surface points; roughly a third miss.

    Returns ``(origins, directions, patch_index)``.
    """
    lo = np.min([p.all_points().min(axis=0) for p in patches], axis=0)
    hi = np.max([p.all_points().max(axis=0) for p in patches], axis=0)
    extent = float(np.linalg.norm(hi - lo))
    pid = rng.integers(0, len(patches), count)
    uv = rng.random((count, 2))
    targets = np.empty((count, 3))
    net = np.empty((4, 4, 3))
    ev = np.empty((1, 4, 3))
    packs = [p.packed().astype(np.float64) for p in patches]
    for k in range(count):
        eval_packed(packs[pid[k]], patches[pid[k]].is_gregory, uv[k, 0], uv[k, 1], net, ev)
        targets[k] = ev[0, 0]
    targets += rng.normal(0.0, spread * extent, (count, 3))
    d = rng.normal(size=(count, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    orig = targets - d * distance * extent
    return orig, d, pid


def check_traversal(trials: int = 10000, seed: int = 0, dtype=None, tol_rel: float = 1e-5,
                    eps_rel: float = 1e-4) -> SuiteResult:
    """Stackless vs explicit-stack agreement on random (ray, patch) pairs."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x7A]))
    pool = [random_gregory(rng) if k % 2 else random_bezier(rng) for k in range(64)]
    orig, dirs, pid = rays_toward(pool, rng, trials, spread=0.1)
    scene = PreparedScene(pool, IntersectConfig(), dtype)
    ext = np.array([patch_extent(p) for p in pool])
    crit = TerminationCriterion.world(eps_rel * float(ext.mean()))
    a = intersect_pairs(scene, orig, dirs, pid, crit, check=True)
    b = intersect_pairs(scene, orig, dirs, pid, crit, reference=True)
    malformed = int(np.count_nonzero(a.iterations < 0))
    miss = int(np.count_nonzero(a.found != b.found))
    both = a.found & b.found
    dt = np.abs(a.t[both] - b.t[both])
    tbad = int(np.count_nonzero(dt > tol_rel * ext[pid][both]))
    return SuiteResult("traversal", trials, malformed + miss + tbad,
                       {"hits": int(both.sum()), "hit_miss_disagree": miss, "t_disagree": tbad,
                        "malformed_cursors": malformed,
                        "max_dt_rel": float((dt / ext[pid][both]).max()) if dt.size else 0.0},
                       time.perf_counter() - t0)


# --- oracle agreement / self-intersection / anchoring ----------------------------------


def _perpendiculars(d):
    a = np.where(np.abs(d[:, :1]) < 0.9, np.array([[1.0, 0, 0]]), np.array([[0, 1.0, 0]]))
    e1 = np.cross(d, a)
    e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
    return e1, np.cross(d, e1)


def check_oracle_agreement(patches: Sequence[Patch], rays: int = 1000, n: int = 256, seed: int = 0,
                           dtype=None, eps_rel: float = 1e-4, oracle=None, name: str = "oracle",
                           config: IntersectConfig = IntersectConfig()) -> SuiteResult:
    """Direct scene tracing vs the tessellation oracle on random rays.

    A hit/miss disagreement is excused only when shifting the ray sideways
    by one tessellation cell makes the oracle agree (cell error band).
    """
    from .oracle import OracleScene

    t0 = time.perf_counter()
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x0C]))
    orig, dirs, _ = rays_toward(patches, rng, rays)
    extent = float(np.linalg.norm(np.ptp(np.concatenate([p.all_points() for p in patches]), axis=0)))
    direct = PreparedScene(patches, config, dtype)
    oracle = oracle if oracle is not None else OracleScene(patches, n)
    a = direct.trace(orig, dirs, scale=0.0, eps=eps_rel * extent)
    b = oracle.trace(orig, dirs)
    skirt = _skirt_hits(direct, patches, orig, dirs, a)
    dis = np.flatnonzero(a.found != b.found)
    cell = max(patch_extent(p) for p in patches) / n
    excused = skirt[dis]
    if len(dis):
        e1, e2 = _perpendiculars(dirs[dis])
        for off in (e1, -e1, e2, -e2):
            r = oracle.trace(orig[dis] + cell * off, dirs[dis])
            excused |= r.found == a.found[dis]
    both = a.found & b.found
    dt = np.abs(a.t[both] - b.t[both])
    tol = extent * 4.0 / n
    tbad = int(np.count_nonzero((dt > tol) & ~skirt[both]))
    agree = 1.0 - len(dis) / rays
    unexcused = int(np.count_nonzero(~excused))
    violations = unexcused + tbad + (1 if agree < 0.999 else 0)
    return SuiteResult(name, rays, violations,
                       {"agreement": agree, "disagree": len(dis), "unexcused": unexcused, "hits": int(both.sum()),
                        "boundary_skirt_hits": int(np.count_nonzero(skirt)),
                        "t_over_tol": tbad, "max_dt_over_tol": float(dt.max() / tol) if dt.size else 0.0},
                       time.perf_counter() - t0)


def _skirt_hits(direct: PreparedScene, patches: Sequence[Patch], orig, dirs, res) -> np.ndarray:
    """Direct hits explained by boundary padding alone.

    Padding deliberately widens boundary boxes so rays cannot slip between
    adjacent patches; on an open edge this appears as a thin skirt.  A hit is
    a skirt hit when its final domain touches the parametric boundary and the
    ray passes no closer to the surface than the padding (plus leaf) width.
    """
    out = np.zeros(len(res), bool)
    if not direct.config.padding:
        return out
    full = DOMAIN_ONE
    for k in np.flatnonzero(res.found):
        pu, pv, su, sv = (int(x) for x in res.domain[k])
        if not (pu == 0 or pv == 0 or pu + su == full or pv + sv == full):
            continue
        p = int(res.patch[k])
        gap = np.linalg.norm(orig[k] + res.t[k] * dirs[k]
                             - eval_patch(patches[p], res.uv[k, 0], res.uv[k, 1], np.float64))
        out[k] = gap <= float(direct.pad_abs[p]) + float(res.leaf_l1[k])
    return out


def check_self_intersection(patches: Sequence[Patch], bounces: int = 10000, seed: int = 0, dtype=None,
                            eps_rel: float = 1e-4) -> SuiteResult:
    """Bounce rays from ``offset_spawn_origin`` must never re-hit their own leaf domain."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5E]))
    scene = PreparedScene(patches, IntersectConfig(), dtype)
    ext = np.array([patch_extent(p) for p in patches])
    hits: List[HitRecord] = []
    while len(hits) < bounces:
        orig, dirs, pid = rays_toward(patches, rng, 2 * (bounces - len(hits)) + 16, spread=0.02)
        crit = TerminationCriterion.world(eps_rel * float(ext.mean()))
        r = intersect_pairs(scene, orig, dirs, pid, crit)
        for k in np.flatnonzero(r.found)[: bounces - len(hits)]:
            pu, pv, su, sv = (int(x) for x in r.domain[k])
            hits.append(HitRecord(int(pid[k]), float(r.t[k]), float(r.uv[k, 0]), float(r.uv[k, 1]),
                                  r.normal[k], float(r.leaf_l1[k]), (pu, pv), (su, sv),
                                  orig[k] + r.t[k] * dirs[k], dirs[k]))
    spawn = np.array([offset_spawn_origin(h) for h in hits])
    nrm = np.array([h.normal for h in hits])
    inc = np.array([h.incoming for h in hits])
    from .render import cosine_directions, face_forward

    nf = face_forward(nrm, inc)
    cosd = cosine_directions(nf, rng.random(len(hits)), rng.random(len(hits)))
    refl = inc - 2.0 * np.einsum("ij,ij->i", inc, nf)[:, None] * nf
    mirror = rng.random(len(hits)) < 0.5
    d2 = np.where(mirror[:, None], refl, cosd)
    pid = np.array([h.patch_id for h in hits])
    crit = TerminationCriterion.world(eps_rel * float(ext.mean()))
    r = intersect_pairs(scene, spawn, d2, pid, crit)
    rehit = 0
    other = 0
    for k in np.flatnonzero(r.found):
        h = hits[k]
        pu, pv, su, sv = r.domain[k]
        overlap = (pu < h.pos[0] + h.size[0] and h.pos[0] < pu + su
                   and pv < h.pos[1] + h.size[1] and h.pos[1] < pv + sv)
        if overlap:
            rehit += 1
        else:
            other += 1
    return SuiteResult("self-intersection", len(hits), rehit,
                       {"same_patch_elsewhere": other, "escaped": int(np.count_nonzero(~r.found))},
                       time.perf_counter() - t0)


@njit(**JIT_OPTIONS)
def _walk_nets(pk, is_gregory, axes, children, out):
    """Lower nets (in the patch's own frame) along each path; ``out`` is (paths, depth, 16, 3) float64."""
    q = np.empty((4, 4, 3), pk.dtype)
    lower = np.empty((4, 4, 3), pk.dtype)
    sc = np.empty((4, 4, 3), pk.dtype)
    for k in range(axes.shape[0]):
        pu = 0
        pv = 0
        su = DOMAIN_ONE
        sv = DOMAIN_ONE
        for lvl in range(axes.shape[1]):
            if axes[k, lvl] == 0:
                su //= 2
                pu += children[k, lvl] * su
            else:
                sv //= 2
                pv += children[k, lvl] * sv
            calc_fixed(pk, is_gregory, pu, pv, su, sv, q, lower, sc)
            for i in range(4):
                for j in range(4):
                    for c in range(3):
                        out[k, lvl, i * 4 + j, c] = np.float64(q[i, j, c])


def check_anchoring(patches: Sequence[Patch], paths: int = 64, depth: int = 10, seed: int = 0,
                    local_frame: bool = True, tol_rel: float = 1e-5) -> SuiteResult:
    """float32 vs float64 recompute cycles; deviation relative to the patch extent."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xA4]))
    worst = 0.0
    bad = 0
    for p in patches:
        pk = p.packed().astype(np.float64)
        anchor = 0.5 * (pk.min(axis=0) + pk.max(axis=0)) if local_frame else np.zeros(3)
        axes = np.broadcast_to(np.arange(depth) % 2, (paths, depth)).astype(np.int64).copy()
        children = rng.integers(0, 2, (paths, depth))
        nets = {}
        for R in (np.float32, np.float64):
            out = np.empty((paths, depth, 16, 3))
            _walk_nets(np.ascontiguousarray((pk - anchor).astype(R)), p.is_gregory, axes, children, out)
            nets[R] = out + anchor
        dev = float(np.abs(nets[np.float32] - nets[np.float64]).max()) / patch_extent(p)
        worst = max(worst, dev)
        bad += int(dev > tol_rel)
    return SuiteResult("anchoring", len(patches) * paths * depth, bad,
                       {"worst_rel": worst, "local_frame": local_frame}, time.perf_counter() - t0)


# --- watertightness ------------------------------------------------------------------


def random_view(rng, scene: Scene, size: int, distance: float = 1.6, vfov: float = 40.0) -> Camera:
    """Camera on a random sphere point around the scene, framing its bounds."""
    b = scene.bounds()
    centre = 0.5 * (b.lo + b.hi)
    radius = 0.5 * float(np.linalg.norm(b.hi - b.lo))
    z = rng.uniform(-0.8, 0.9)
    phi = rng.uniform(0.0, 2.0 * math.pi)
    r = math.sqrt(1.0 - z * z)
    direction = np.array([r * math.cos(phi), r * math.sin(phi), z])
    dist = distance * radius / math.sin(math.radians(vfov) / 2.0)
    origin = centre + dist * direction
    return Camera(origin, centre, (0.0, 0.0, 1.0), vfov, size, size)


def interior_mask(hit: np.ndarray) -> np.ndarray:
    """Pixels hit whose eight neighbours are hit as well."""
    out = hit.copy()
    h, w = hit.shape
    pad = np.pad(hit, 1, constant_values=False)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            out &= pad[1 + dy:1 + dy + h, 1 + dx:1 + dx + w]
    return out


def crack_count(direct, oracle, camera: Camera, footprint: float = 1.0) -> (int, int):
    """``(cracks, interior)``: interior oracle pixels the direct intersector misses."""
    from .render import primary_hits

    d = primary_hits(direct, camera, footprint)
    o = primary_hits(oracle, camera, footprint)
    inner = interior_mask(o)
    return int(np.count_nonzero(inner & ~d)), int(np.count_nonzero(inner))


def check_watertight(views: int = 4, size: int = 256, seed: int = 0, padding: bool = True, oracle_n: int = 512,
                     scene: Optional[Scene] = None, oracle=None, dtype=None, footprint: float = 1.0,
                     distance: float = 1.1, local_frame: bool = True) -> SuiteResult:
    """Crack pixels over random views; ``footprint`` scales the half-pixel termination threshold."""
    from .render import OracleBackend
    from .scene_io import load_teapot

    t0 = time.perf_counter()
    if scene is None:
        scene = Scene.from_patches(load_teapot())
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x3A]))
    direct = PreparedScene(scene.patches, IntersectConfig(padding=padding, local_frame=local_frame), dtype)
    oracle = oracle if oracle is not None else OracleBackend(scene.patches, oracle_n)
    cracks = []
    interior = 0
    for _ in range(views):
        cam = random_view(rng, scene, size, distance)
        c, i = crack_count(direct, oracle, cam, footprint)
        cracks.append(c)
        interior += i
    return SuiteResult("watertight", views, int(sum(cracks)),
                       {"padding": padding, "local_frame": local_frame, "size": size, "footprint": footprint,
                        "interior_pixels": interior,
                        "per_view": ",".join(map(str, cracks))},
                       time.perf_counter() - t0)


DEFAULT_TRIALS = {"bounds": 10000, "traversal": 10000, "watertight": 4}


def run_suite(name: str, trials: Optional[int] = None, seed: int = 0) -> SuiteResult:
    """Run one named suite; ``trials`` counts subdomains / ray pairs / viewpoints."""
    if name not in DEFAULT_TRIALS:
        raise ValueError(f"unknown suite {name!r}")
    trials = DEFAULT_TRIALS[name] if trials is None else trials
    if trials < 1:
        raise ValueError("trials must be positive")
    if name == "bounds":
        per = min(100, trials)
        nets = -(-trials // per)
        return check_bounds(nets, per, seed=seed)
    if name == "traversal":
        return check_traversal(trials, seed)
    return check_watertight(trials, seed=seed)
