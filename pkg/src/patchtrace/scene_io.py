"""Scene and bicubic patch (``.bpt``) text formats.

Scene files are line oriented; ``#`` starts a comment.  Records::

    camera ox oy oz  lx ly lz  ux uy uz  vfov_deg width height
    light  px py pz  r g b
    material dr dg db  er eg eb  mirror(0|1)
    patch bezier  [material]      then 16 xyz triples on the following lines
    patch gregory [material]      then 20 xyz triples on the following lines
    bpt <path> [material]         bicubic patches from a .bpt file

Control point numbers may be spread over any number of lines; the next
keyword ends the patch.
Gregory points are the 12 boundary points in row-major order followed by the
pairs ``(pu, pv)`` of the inner points (1,1), (2,1), (1,2), (2,2).  All
values are rounded to float32 on load so that saving with 9 significant
digits reproduces them bit-exactly.  See ``docs/formats.md``.
"""

from __future__ import annotations

import math
import pathlib
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .geometry import Aabb, box_of_points
from .patch import BezierNet, GregoryNet, INNER, Patch

BOUNDARY = tuple((i, j) for i in range(4) for j in range(4) if i in (0, 3) or j in (0, 3))
TEAPOT_BPT = pathlib.Path(__file__).with_name("data") / "teapot.bpt"


class SceneError(ValueError):
    """Malformed or invalid scene / patch file."""

    def __init__(self, message: str, path=None, line: Optional[int] = None):
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)
        self.line = line


def _f32(values) -> np.ndarray:
    return np.asarray(values, dtype=np.float64).astype(np.float32).astype(np.float64)


@dataclass(frozen=True, eq=False)
class Camera:
    origin: np.ndarray
    look_at: np.ndarray
    up: np.ndarray
    vfov: float
    width: int
    height: int

    def __post_init__(self):
        for name in ("origin", "look_at", "up"):
            object.__setattr__(self, name, _f32(getattr(self, name)).reshape(3))
        object.__setattr__(self, "vfov", float(_f32(self.vfov)))
        if not 0.0 < self.vfov < 180.0:
            raise SceneError(f"camera fov must be in (0, 180) degrees, got {self.vfov}")
        if int(self.width) < 1 or int(self.height) < 1:
            raise SceneError("image dimensions must be at least 1")
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "height", int(self.height))
        if not np.all(np.isfinite([*self.origin, *self.look_at, *self.up])):
            raise SceneError("camera values must be finite")
        if not np.any(self.look_at - self.origin):
            raise SceneError("camera look-at equals origin")
        if not np.any(np.cross(self.look_at - self.origin, self.up)):
            raise SceneError("camera up vector is parallel to the view direction")

    def basis(self):
        """Unit ``(forward, right, up)`` vectors (right-handed, image y points down)."""
        fwd = self.look_at - self.origin
        fwd = fwd / np.linalg.norm(fwd)
        right = np.cross(fwd, self.up)
        right /= np.linalg.norm(right)
        up = np.cross(right, fwd)
        return fwd, right, up

    @property
    def half_pixel_scale(self) -> float:
        """Half the pixel height per unit distance along the view direction."""
        return math.tan(math.radians(self.vfov) / 2.0) / self.height

    def ray_directions(self, px: np.ndarray, py: np.ndarray) -> np.ndarray:
        """Unit directions through continuous pixel coordinates (0..width, 0..height)."""
        fwd, right, up = self.basis()
        th = math.tan(math.radians(self.vfov) / 2.0)
        aspect = self.width / self.height
        sx = (2.0 * np.asarray(px, dtype=np.float64) / self.width - 1.0) * th * aspect
        sy = (1.0 - 2.0 * np.asarray(py, dtype=np.float64) / self.height) * th
        d = fwd + sx[..., None] * right + sy[..., None] * up
        return d / np.linalg.norm(d, axis=-1, keepdims=True)


@dataclass(frozen=True, eq=False)
class PointLight:
    position: np.ndarray
    intensity: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", _f32(self.position).reshape(3))
        object.__setattr__(self, "intensity", _f32(self.intensity).reshape(3))
        if not np.all(np.isfinite([*self.position, *self.intensity])):
            raise SceneError("light values must be finite")
        if np.any(self.intensity < 0):
            raise SceneError("light intensity must be non-negative")


@dataclass(frozen=True, eq=False)
class Material:
    diffuse: np.ndarray = field(default_factory=lambda: np.full(3, 0.8))
    emission: np.ndarray = field(default_factory=lambda: np.zeros(3))
    mirror: bool = False

    def __post_init__(self):
        object.__setattr__(self, "diffuse", _f32(self.diffuse).reshape(3))
        object.__setattr__(self, "emission", _f32(self.emission).reshape(3))
        object.__setattr__(self, "mirror", bool(self.mirror))
        vals = [*self.diffuse, *self.emission]
        if not np.all(np.isfinite(vals)) or min(vals) < 0:
            raise SceneError("material values must be finite and non-negative")


@dataclass(frozen=True, eq=False)
class Scene:
    patches: Tuple[Patch, ...]
    patch_materials: Tuple[int, ...]
    materials: Tuple[Material, ...] = (Material(),)
    camera: Optional[Camera] = None
    lights: Tuple[PointLight, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "patches", tuple(self.patches))
        object.__setattr__(self, "patch_materials", tuple(int(m) for m in self.patch_materials))
        object.__setattr__(self, "materials", tuple(self.materials))
        object.__setattr__(self, "lights", tuple(self.lights))
        if not self.patches:
            raise SceneError("scene has no patches")
        if len(self.patch_materials) != len(self.patches):
            raise SceneError("one material id per patch required")
        if not self.materials:
            raise SceneError("scene has no materials")
        for k, (p, m) in enumerate(zip(self.patches, self.patch_materials)):
            if not 0 <= m < len(self.materials):
                raise SceneError(f"patch {k}: material {m} out of range")
            if not np.all(np.isfinite(p.all_points())):
                raise SceneError(f"patch {k}: non-finite control point")

    @classmethod
    def from_patches(cls, patches: Sequence[Patch], camera: Optional[Camera] = None,
                     lights=(), material: Material = Material()) -> "Scene":
        return cls(tuple(patches), (0,) * len(patches), (material,), camera, tuple(lights))

    def root_boxes(self) -> List[Aabb]:
        return [box_of_points(p.all_points()) for p in self.patches]

    def bounds(self) -> Aabb:
        pts = np.concatenate([p.all_points() for p in self.patches])
        return box_of_points(pts)

    @property
    def gregory_count(self) -> int:
        return sum(1 for p in self.patches if p.is_gregory)

    def replace(self, **changes) -> "Scene":
        fields = dict(patches=self.patches, patch_materials=self.patch_materials,
                      materials=self.materials, camera=self.camera, lights=self.lights)
        fields.update(changes)
        return Scene(**fields)


# --- reading ------------------------------------------------------------------


def _tokens(text: str):
    """Yield ``(line_number, [tokens])`` for non-empty lines, comments stripped."""
    for n, line in enumerate(text.splitlines(), 1):
        toks = line.split("#", 1)[0].split()
        if toks:
            yield n, toks


def _numbers(toks, path, line) -> List[float]:
    try:
        vals = [float(t) for t in toks]
    except ValueError as exc:
        raise SceneError(f"expected a number: {exc}", path, line) from None
    if not all(math.isfinite(v) for v in vals):
        raise SceneError("non-finite value", path, line)
    return vals


def _patch_from_numbers(kind: str, vals: List[float], path, line) -> Patch:
    want = 16 if kind == "bezier" else 20
    if len(vals) % 3:
        raise SceneError(f"expected {want} control points, got {len(vals)} numbers "
                         "(not a multiple of 3)", path, line)
    if len(vals) != 3 * want:
        raise SceneError(f"expected {want} control points, got {len(vals) // 3}", path, line)
    pts = _f32(vals).reshape(want, 3)
    if kind == "bezier":
        return BezierNet(pts.reshape(4, 4, 3))
    grid = np.zeros((4, 4, 3))
    for k, (i, j) in enumerate(BOUNDARY):
        grid[i, j] = pts[k]
    pv = np.zeros((2, 2, 3))
    for k, (i, j) in enumerate(INNER):
        grid[i, j] = pts[12 + 2 * k]
        pv[i - 1, j - 1] = pts[13 + 2 * k]
    return GregoryNet(grid, pv)


KEYWORDS = ("camera", "light", "material", "patch", "bpt")


def parse_scene(text: str, path=None, base_dir=None) -> Scene:
    base_dir = pathlib.Path(base_dir) if base_dir is not None else (
        pathlib.Path(path).parent if path is not None else pathlib.Path.cwd())
    camera = None
    lights: List[PointLight] = []
    materials: List[Material] = []
    patches: List[Patch] = []
    patch_mats: List[int] = []
    pending = None  # (kind, material, first line, numbers)

    def flush():
        nonlocal pending
        if pending is not None:
            kind, mat, line, vals = pending
            patches.append(_patch_from_numbers(kind, vals, path, line))
            patch_mats.append(mat)
            pending = None

    for line, toks in _tokens(text):
        head = toks[0]
        if head not in KEYWORDS:
            if pending is None:
                raise SceneError(f"unknown record {head!r}", path, line)
            pending[3].extend(_numbers(toks, path, line))
            continue
        flush()
        args = toks[1:]
        try:
            if head == "camera":
                if len(args) != 12:
                    raise SceneError("camera needs 12 values", path, line)
                v = _numbers(args, path, line)
                if v[10] != int(v[10]) or v[11] != int(v[11]):
                    raise SceneError("image dimensions must be integers", path, line)
                camera = Camera(v[0:3], v[3:6], v[6:9], v[9], int(v[10]), int(v[11]))
            elif head == "light":
                if len(args) != 6:
                    raise SceneError("light needs 6 values", path, line)
                v = _numbers(args, path, line)
                lights.append(PointLight(v[0:3], v[3:6]))
            elif head == "material":
                if len(args) != 7:
                    raise SceneError("material needs 7 values", path, line)
                v = _numbers(args, path, line)
                if v[6] not in (0.0, 1.0):
                    raise SceneError("mirror flag must be 0 or 1", path, line)
                materials.append(Material(v[0:3], v[3:6], bool(v[6])))
            elif head == "patch":
                if not args or args[0] not in ("bezier", "gregory"):
                    raise SceneError("patch type must be 'bezier' or 'gregory'", path, line)
                if len(args) > 2 or (len(args) == 2 and not args[1].isdigit()):
                    raise SceneError("patch header takes only a type and an optional material id; "
                                     "control points start on the next line", path, line)
                mat = int(args[1]) if len(args) == 2 else 0
                pending = (args[0], mat, line, [])
            elif head == "bpt":
                if len(args) not in (1, 2):
                    raise SceneError("bpt needs a path and an optional material id", path, line)
                mat = int(args[1]) if len(args) == 2 else 0
                nets = load_bpt(base_dir / args[0])
                patches.extend(nets)
                patch_mats.extend([mat] * len(nets))
        except SceneError as exc:
            if exc.line is None:
                raise SceneError(str(exc), path, line) from None
            raise
    flush()
    if not materials:
        materials = [Material()]
    if not patches:
        raise SceneError("scene has no patches", path)
    for k, m in enumerate(patch_mats):
        if not 0 <= m < len(materials):
            raise SceneError(f"patch {k}: material {m} out of range ({len(materials)} materials)", path)
    return Scene(tuple(patches), tuple(patch_mats), tuple(materials), camera, tuple(lights))


def load_scene(path) -> Scene:
    path = pathlib.Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SceneError(f"cannot read scene: {exc.strerror}", path) from None
    return parse_scene(text, path)


def load_bpt(path) -> List[BezierNet]:
    """Read a bicubic patch file; point ``k`` of a patch is ``p[k % 4][k // 4]``."""
    path = pathlib.Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SceneError(f"cannot read patch file: {exc.strerror}", path) from None
    return parse_bpt(text, path)


def parse_bpt(text: str, path=None) -> List[BezierNet]:
    lines = list(_tokens(text))
    if not lines:
        raise SceneError("empty patch file", path)
    line, toks = lines[0]
    if len(toks) != 1 or not toks[0].isdigit():
        raise SceneError("expected patch count", path, line)
    count = int(toks[0])
    if count < 1:
        raise SceneError("patch count must be positive", path, line)
    nets = []
    k = 1
    for n in range(count):
        if k >= len(lines):
            raise SceneError(f"file ends before patch {n}", path)
        line, toks = lines[k]
        if len(toks) != 2:
            raise SceneError("expected degree line 'u v'", path, line)
        if toks != ["3", "3"]:
            raise SceneError(f"unsupported degree {' '.join(toks)} (only bicubic '3 3')", path, line)
        if k + 16 > len(lines) - 1:
            raise SceneError(f"patch {n} has fewer than 16 points", path, line)
        pts = np.empty((16, 3))
        for m in range(16):
            line, toks = lines[k + 1 + m]
            if len(toks) != 3:
                raise SceneError("expected an xyz triple", path, line)
            pts[m] = _numbers(toks, path, line)
        grid = np.empty((4, 4, 3))
        for m in range(16):
            grid[m % 4, m // 4] = pts[m]
        nets.append(BezierNet(_f32(grid)))
        k += 17
    if k != len(lines):
        raise SceneError("trailing data after last patch", path, lines[k][0])
    return nets


# --- writing ------------------------------------------------------------------


def _fmt(values) -> str:
    return " ".join(f"{float(v):.9g}" for v in np.ravel(values))


def format_scene(scene: Scene) -> str:
    out = ["# patchtrace scene"]
    c = scene.camera
    if c is not None:
        out.append(f"camera {_fmt(c.origin)}  {_fmt(c.look_at)}  {_fmt(c.up)}  "
                   f"{_fmt([c.vfov])} {c.width} {c.height}")
    for light in scene.lights:
        out.append(f"light {_fmt(light.position)}  {_fmt(light.intensity)}")
    for m in scene.materials:
        out.append(f"material {_fmt(m.diffuse)}  {_fmt(m.emission)}  {int(m.mirror)}")
    for p, mat in zip(scene.patches, scene.patch_materials):
        if p.is_gregory:
            out.append(f"patch gregory {mat}")
            for i, j in BOUNDARY:
                out.append("  " + _fmt(p.points[i, j]))
            for i, j in INNER:
                out.append("  " + _fmt(p.points[i, j]) + "  " + _fmt(p.pv[i - 1, j - 1]))
        else:
            out.append(f"patch bezier {mat}")
            for i in range(4):
                out.append("  " + "  ".join(_fmt(p.points[i, j]) for j in range(4)))
    return "\n".join(out) + "\n"


def save_scene(scene: Scene, path) -> None:
    pathlib.Path(path).write_text(format_scene(scene))


def format_bpt(nets: Sequence[BezierNet]) -> str:
    out = [str(len(nets))]
    for net in nets:
        out.append("3 3")
        for m in range(16):
            out.append(_fmt(net.points[m % 4, m // 4]))
    return "\n".join(out) + "\n"


def load_teapot() -> List[BezierNet]:
    """The 32-patch teapot shipped with the package."""
    return load_bpt(TEAPOT_BPT)
