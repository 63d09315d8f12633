"""Tile-parallel path tracer with next-event estimation.

Per pixel sample: a pinhole primary ray, a shadow ray per light at the hit,
one bounce (cosine-sampled diffuse or perfect mirror) and shadow rays at the
bounce vertex.  Every tile draws its random numbers from its own stream
(``SeedSequence([seed, tile_index])``), so the image does not depend on the
number of worker threads.  Rays of one tile are traced generation by
generation (primary, secondary, shadow) and each generation is timed.
"""

from __future__ import annotations

import json
import math
import pathlib
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, Optional

import numpy as np

from .intersect import IntersectConfig
from .scene_io import Camera, Scene
from .tracer import PreparedScene, TraceResult

GENERATIONS = ("primary", "secondary", "shadow")
SHADOW_T_SHRINK = 1.0 - 1e-6


@dataclass(frozen=True)
class RenderConfig:
    spp: int = 1
    seed: int = 0
    threads: int = 1
    tile_size: int = 32
    bounce: bool = True
    jitter: bool = True
    backend: str = "direct"            # "direct" or "oracle"
    oracle_resolution: int = 512
    footprint: float = 1.0             # multiple of the half-pixel footprint used for termination
    intersect: IntersectConfig = IntersectConfig()
    dtype: Optional[str] = None

    def __post_init__(self):
        if self.spp < 1:
            raise ValueError("spp must be at least 1")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")
        if self.tile_size < 1:
            raise ValueError("tile size must be at least 1")
        if self.backend not in ("direct", "oracle"):
            raise ValueError(f"unknown backend {self.backend!r}")
        if not self.footprint > 0:
            raise ValueError("footprint must be positive")


@dataclass(frozen=True, eq=False)
class Image:
    rgb: np.ndarray  # (height, width, 3) linear radiance

    @property
    def height(self) -> int:
        return self.rgb.shape[0]

    @property
    def width(self) -> int:
        return self.rgb.shape[1]

    def to_srgb8(self) -> np.ndarray:
        """Clamp to [0, 1], apply gamma 2.2 and quantise to 8 bits."""
        x = np.clip(self.rgb, 0.0, 1.0) ** (1.0 / 2.2)
        return np.floor(x * 255.0 + 0.5).astype(np.uint8)

    @classmethod
    def from_srgb8(cls, px: np.ndarray) -> "Image":
        return cls((np.asarray(px, dtype=np.float64) / 255.0) ** 2.2)


@dataclass
class RayStats:
    rays: Dict[str, int] = field(default_factory=lambda: {g: 0 for g in GENERATIONS})
    seconds: Dict[str, float] = field(default_factory=lambda: {g: 0.0 for g in GENERATIONS})
    wall_seconds: float = 0.0

    def add(self, gen: str, count: int, seconds: float) -> None:
        self.rays[gen] += int(count)
        self.seconds[gen] += float(seconds)

    def merge(self, other: "RayStats") -> None:
        for g in GENERATIONS:
            self.rays[g] += other.rays[g]
            self.seconds[g] += other.seconds[g]

    def rays_per_second(self, gen: Optional[str] = None) -> float:
        if gen is None:
            n = sum(self.rays.values())
            s = sum(self.seconds.values())
        else:
            n, s = self.rays[gen], self.seconds[gen]
        return n / s if s > 0 else 0.0

    @property
    def total_rays(self) -> int:
        return sum(self.rays.values())

    def to_dict(self, **extra) -> dict:
        out = dict(extra)
        out["generations"] = {g: {"rays": self.rays[g], "seconds": round(self.seconds[g], 6),
                                  "rays_per_second": round(self.rays_per_second(g), 1)}
                              for g in GENERATIONS}
        out["total_rays"] = self.total_rays
        out["trace_seconds"] = round(sum(self.seconds.values()), 6)
        out["rays_per_second"] = round(self.rays_per_second(), 1)
        out["wall_seconds"] = round(self.wall_seconds, 6)
        return out

    def to_json(self, **extra) -> str:
        """Single-line JSON record (schema in ``docs/stats-schema.json``)."""
        return json.dumps(self.to_dict(**extra), sort_keys=True)


class OracleBackend:
    """Adapts :class:`~patchtrace.oracle.OracleScene` to the tracer interface.

    The tessellation has no leaf box, so the spawn offset uses the
    termination threshold at the hit instead.
    """

    def __init__(self, patches, n: int):
        from .oracle import OracleScene

        self.scene = OracleScene(patches, n)

    def trace(self, orig, dirs, tmin=0.0, tmax=np.inf, scale=0.0, eps=0.0, any_hit=False, **_) -> TraceResult:
        r = self.scene.trace(orig, dirs, tmin, tmax, any_hit)
        m = len(r.found)
        l1 = np.where(r.found, np.broadcast_to(eps, m) + np.broadcast_to(scale, m) * np.where(r.found, r.t, 0), 0)
        return TraceResult(r.found, r.t, r.patch, r.uv, r.normal, l1, r.domain, r.iterations)


def make_backend(scene: Scene, cfg: RenderConfig):
    if cfg.backend == "oracle":
        return OracleBackend(scene.patches, cfg.oracle_resolution)
    return PreparedScene(scene.patches, cfg.intersect, cfg.dtype)


def _onb(n: np.ndarray):
    """Branchless orthonormal basis around unit normals ``n`` (rows)."""
    sign = np.where(n[:, 2] >= 0, 1.0, -1.0)
    a = -1.0 / (sign + n[:, 2])
    b = n[:, 0] * n[:, 1] * a
    t = np.stack([1.0 + sign * n[:, 0] ** 2 * a, sign * b, -sign * n[:, 0]], axis=1)
    s = np.stack([b, sign + n[:, 1] ** 2 * a, -n[:, 1]], axis=1)
    return t, s


def cosine_directions(n: np.ndarray, r1: np.ndarray, r2: np.ndarray) -> np.ndarray:
    t, s = _onb(n)
    r = np.sqrt(r1)
    phi = 2.0 * math.pi * r2
    x = r * np.cos(phi)
    y = r * np.sin(phi)
    z = np.sqrt(np.maximum(0.0, 1.0 - r1))
    d = x[:, None] * t + y[:, None] * s + z[:, None] * n
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def face_forward(normal: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    """Flip normals toward the side the rays come from."""
    s = np.where(np.einsum("ij,ij->i", normal, dirs) > 0, -1.0, 1.0)
    return normal * s[:, None]


class Renderer:
    def __init__(self, scene: Scene, cfg: RenderConfig = RenderConfig(), backend=None):
        if scene.camera is None:
            raise ValueError("scene has no camera")
        self.scene = scene
        self.cfg = cfg
        self.camera: Camera = scene.camera
        self.backend = backend if backend is not None else make_backend(scene, cfg)
        self.diffuse = np.array([m.diffuse for m in scene.materials])
        self.emission = np.array([m.emission for m in scene.materials])
        self.mirror = np.array([m.mirror for m in scene.materials], dtype=bool)
        self.mat_of = np.array(scene.patch_materials, dtype=np.int64)
        self.light_pos = np.array([l.position for l in scene.lights]).reshape(-1, 3)
        self.light_int = np.array([l.intensity for l in scene.lights]).reshape(-1, 3)
        self.scale = self.camera.half_pixel_scale * cfg.footprint

    def tiles(self):
        ts = self.cfg.tile_size
        w, h = self.camera.width, self.camera.height
        out = []
        for ty in range(0, h, ts):
            for tx in range(0, w, ts):
                out.append((len(out), tx, ty, min(tx + ts, w), min(ty + ts, h)))
        return out

    def _trace(self, stats, gen, orig, dirs, tmin=0.0, tmax=np.inf, scale=0.0, eps=0.0, any_hit=False):
        t0 = time.perf_counter()
        r = self.backend.trace(orig, dirs, tmin, tmax, scale=scale, eps=eps, any_hit=any_hit)
        stats.add(gen, len(orig), time.perf_counter() - t0)
        return r

    def _direct_light(self, stats, points, spawn, normals, eps, diffuse):
        """NEE from every point light: ``diffuse / pi * I * cos / r^2`` where unoccluded.

        Light geometry is measured at the surface points; shadow rays start
        from the offset ``spawn`` origins.
        """
        out = np.zeros((len(points), 3))
        for lp, li in zip(self.light_pos, self.light_int):
            to = lp - points
            dist = np.linalg.norm(to, axis=1)
            ok = dist > 0
            wi = to / np.where(ok, dist, 1.0)[:, None]
            cos = np.einsum("ij,ij->i", normals, wi)
            cand = np.flatnonzero(ok & (cos > 0))
            if len(cand) == 0:
                continue
            so = lp - spawn[cand]
            sdist = np.linalg.norm(so, axis=1)
            sdir = so / np.where(sdist > 0, sdist, 1.0)[:, None]
            sh = self._trace(stats, "shadow", spawn[cand], sdir, 0.0, sdist * SHADOW_T_SHRINK,
                             scale=0.0, eps=eps[cand], any_hit=True)
            lit = cand[~sh.found]
            out[lit] += diffuse[lit] / math.pi * li * (cos[lit] / dist[lit] ** 2)[:, None]
        return out

    def _shade(self, stats, orig, dirs, res: TraceResult, eps, throughput, allow_bounce, rnd):
        """Radiance along ``dirs`` for the rays that hit, plus bounce rays to continue."""
        n = len(dirs)
        radiance = np.zeros((n, 3))
        hit = np.flatnonzero(res.found)
        if len(hit) == 0:
            return radiance, None
        d = dirs[hit]
        p = orig[hit] + res.t[hit, None] * d
        nf = face_forward(res.normal[hit], d)
        mat = self.mat_of[res.patch[hit]]
        spawn = p + nf * res.leaf_l1[hit, None]
        radiance[hit] += self.emission[mat]
        diffuse_hit = ~self.mirror[mat]
        if len(self.light_pos) and diffuse_hit.any():
            k = np.flatnonzero(diffuse_hit)
            radiance[hit[k]] += self._direct_light(stats, p[k], spawn[k], nf[k], eps[hit[k]],
                                                     self.diffuse[mat[k]])
        radiance *= throughput
        if not allow_bounce:
            return radiance, None
        refl = d - 2.0 * np.einsum("ij,ij->i", d, nf)[:, None] * nf
        cosd = cosine_directions(nf, rnd[hit, 0], rnd[hit, 1])
        new_dirs = np.where(self.mirror[mat][:, None], refl, cosd)
        new_thr = throughput[hit] * self.diffuse[mat]
        return radiance, (hit, spawn, new_dirs, new_thr)

    def render_tile(self, tile):
        idx, x0, y0, x1, y1 = tile
        cfg = self.cfg
        stats = RayStats()
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, idx]))
        tw, th = x1 - x0, y1 - y0
        n = tw * th * cfg.spp
        jit = rng.random((n, 2))
        rnd = rng.random((n, 2))
        if not cfg.jitter:
            jit[:] = 0.5
        py, px = np.mgrid[y0:y1, x0:x1]
        px = np.repeat(px.ravel(), cfg.spp) + jit[:, 0]
        py = np.repeat(py.ravel(), cfg.spp) + jit[:, 1]
        dirs = self.camera.ray_directions(px, py)
        orig = np.repeat(self.camera.origin[None], n, axis=0)
        prim = self._trace(stats, "primary", orig, dirs, scale=self.scale, eps=0.0)
        # secondary rays keep the footprint of the primary hit as a world epsilon
        eps = np.where(prim.found, self.scale * np.where(prim.found, prim.t, 0.0), 0.0)
        radiance, cont = self._shade(stats, orig, dirs, prim, eps, np.ones((n, 3)), cfg.bounce, rnd)
        if cont is not None:
            hit, spawn, d2, thr = cont
            sec = self._trace(stats, "secondary", spawn, d2, scale=0.0, eps=eps[hit])
            rad2, _ = self._shade(stats, spawn, d2, sec, eps[hit], thr, False, None)
            radiance[hit] += rad2
        img = radiance.reshape(th, tw, cfg.spp, 3).mean(axis=2)
        return tile, img, stats

    def render(self):
        t0 = time.perf_counter()
        rgb = np.zeros((self.camera.height, self.camera.width, 3))
        stats = RayStats()
        tiles = self.tiles()
        if self.cfg.threads == 1:
            results = map(self.render_tile, tiles)
        else:
            pool = ThreadPoolExecutor(max_workers=self.cfg.threads)
            results = pool.map(self.render_tile, tiles)
        for (idx, x0, y0, x1, y1), img, st in results:
            rgb[y0:y1, x0:x1] = img
            stats.merge(st)
        if self.cfg.threads != 1:
            pool.shutdown()
        stats.wall_seconds = time.perf_counter() - t0
        return Image(rgb), stats


def render_scene(scene: Scene, cfg: RenderConfig = RenderConfig(), backend=None):
    """Render ``scene``; returns ``(Image, RayStats)``."""
    return Renderer(scene, cfg, backend).render()


def primary_hits(backend, camera: Camera, footprint: float = 1.0) -> np.ndarray:
    """Hit mask ``(height, width)`` of pixel-centre primary rays."""
    py, px = np.mgrid[0:camera.height, 0:camera.width]
    dirs = camera.ray_directions(px.ravel() + 0.5, py.ravel() + 0.5)
    orig = np.broadcast_to(camera.origin, dirs.shape)
    r = backend.trace(orig, dirs, 0.0, np.inf, scale=camera.half_pixel_scale * footprint, eps=0.0)
    return r.found.reshape(camera.height, camera.width)


# --- PPM ------------------------------------------------------------------------


def encode_ppm(img: Image) -> bytes:
    px = img.to_srgb8()
    return f"P6\n{img.width} {img.height}\n255\n".encode("ascii") + px.tobytes()


def write_image(img: Image, path) -> None:
    """Binary PPM (P6), 8 bits per channel after clamp and gamma 2.2."""
    pathlib.Path(path).write_bytes(encode_ppm(img))


def decode_ppm(data: bytes) -> np.ndarray:
    """Decode a binary PPM into a ``(height, width, 3)`` uint8 array."""
    fields = []
    pos = 0
    while len(fields) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError("truncated PPM header")
        fields.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    if fields[0] != b"P6":
        raise ValueError("not a binary PPM (P6)")
    w, h, maxval = (int(f) for f in fields[1:])
    if maxval != 255:
        raise ValueError("only 8-bit PPM supported")
    body = data[pos:pos + w * h * 3]
    if len(body) != w * h * 3:
        raise ValueError("truncated PPM pixel data")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w, 3).copy()


def read_image(path) -> np.ndarray:
    return decode_ppm(pathlib.Path(path).read_bytes())


# --- benchmark -------------------------------------------------------------------


def benchmark(scene: Scene, rays: int, kind: str = "primary", seed: int = 0, cfg: RenderConfig = RenderConfig(),
              backend=None) -> RayStats:
    """Throughput of ``rays`` random-pixel camera rays.

    ``primary`` traces camera rays only; ``diffuse`` also traces one
    cosine-sampled bounce and the NEE shadow rays of every hit.
    """
    if kind not in ("primary", "diffuse"):
        raise ValueError(f"unknown benchmark kind {kind!r}")
    if rays < 1:
        raise ValueError("rays must be positive")
    r = Renderer(scene, replace(cfg, seed=seed), backend)
    cam = r.camera
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xBE]))
    stats = RayStats()
    t0 = time.perf_counter()
    px = rng.random(rays) * cam.width
    py = rng.random(rays) * cam.height
    dirs = cam.ray_directions(px, py)
    orig = np.repeat(cam.origin[None], rays, axis=0)
    prim = r._trace(stats, "primary", orig, dirs, scale=r.scale, eps=0.0)
    if kind == "diffuse":
        eps = np.where(prim.found, r.scale * np.where(prim.found, prim.t, 0.0), 0.0)
        rnd = rng.random((rays, 2))
        _, cont = r._shade(stats, orig, dirs, prim, eps, np.ones((rays, 3)), True, rnd)
        if cont is not None:
            hit, spawn, _, _ = cont
            nf = face_forward(prim.normal[hit], dirs[hit])
            d2 = cosine_directions(nf, rnd[hit, 0], rnd[hit, 1])
            sec = r._trace(stats, "secondary", spawn, d2, scale=0.0, eps=eps[hit])
            r._shade(stats, spawn, d2, sec, eps[hit], np.ones((len(hit), 3)), False, None)
    stats.wall_seconds = time.perf_counter() - t0
    return stats
