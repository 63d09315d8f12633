"""Direct ray tracing of bicubic Bezier and Gregory patches.

The intersector subdivides patches with a stackless bit-trail traversal;
a binned-SAH BVH over patches, a tessellation oracle and a small path
tracer build on it.
"""

from .geometry import Aabb, Ray, box_of_points, l1_norm, ray_box_intersect
from .intersect import (DomainCursor, HitRecord, IntersectConfig, TerminationCriterion, intersect_patch,
                        intersect_patch_reference, offset_spawn_origin)
from .patch import BezierNet, Domain, GregoryNet, calc_points_and_d, crop_bezier, eval_patch
from .bvh import Bvh, build_bvh
from .oracle import OracleScene, oracle_intersect, tessellate
from .render import Image, RayStats, RenderConfig, benchmark, read_image, render_scene, write_image
from .scene_io import (Camera, Material, PointLight, Scene, SceneError, load_bpt, load_scene, load_teapot,
                       save_scene)
from .tracer import PreparedScene

__version__ = "0.1.0"

__all__ = [
    "Aabb", "Ray", "box_of_points", "l1_norm", "ray_box_intersect",
    "DomainCursor", "HitRecord", "IntersectConfig", "TerminationCriterion", "intersect_patch",
    "intersect_patch_reference", "offset_spawn_origin",
    "BezierNet", "Domain", "GregoryNet", "calc_points_and_d", "crop_bezier", "eval_patch",
    "Bvh", "build_bvh",
    "OracleScene", "oracle_intersect", "tessellate",
    "Image", "RayStats", "RenderConfig", "benchmark", "read_image", "render_scene", "write_image",
    "Camera", "Material", "PointLight", "Scene", "SceneError", "load_bpt", "load_scene", "load_teapot", "save_scene",
    "PreparedScene",
]
