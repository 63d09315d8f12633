"""``patchtrace`` command line: render, bench, verify, inspect."""

from __future__ import annotations

import argparse
import sys
from typing import List, Optional

import numpy as np

from .scene_io import SceneError, load_scene


def _positive(kind):
    def parse(text):
        try:
            value = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid value {text!r}") from None
        if value < 1:
            raise argparse.ArgumentTypeError(f"must be at least 1, got {text}")
        return value
    return parse


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="patchtrace",
                                     description="Direct ray tracing of Bezier and Gregory patches.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("render", help="render a scene to a binary PPM")
    p.add_argument("--scene", required=True, help="scene file")
    p.add_argument("--out", required=True, help="output image (.ppm)")
    p.add_argument("--spp", type=_positive(int), default=1, help="samples per pixel (default 1)")
    p.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    p.add_argument("--threads", type=_positive(int), default=1, help="worker threads (default 1)")
    p.add_argument("--stats", help="write ray statistics as one-line JSON to this file")

    p = sub.add_parser("bench", help="measure ray throughput per generation")
    p.add_argument("--scene", required=True, help="scene file")
    p.add_argument("--rays", type=_positive(int), required=True, help="number of camera rays")
    p.add_argument("--kind", choices=("primary", "diffuse"), required=True)
    p.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")

    p = sub.add_parser("verify", help="run an oracle verification suite")
    p.add_argument("--suite", choices=("bounds", "traversal", "watertight"), required=True)
    p.add_argument("--trials", type=_positive(int), default=None,
                   help="subdomains (bounds), ray/patch pairs (traversal) or viewpoints (watertight)")
    p.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")

    p = sub.add_parser("inspect", help="print patch counts, root boxes and BVH depth")
    p.add_argument("--scene", required=True, help="scene file")
    return parser


def _render(args) -> int:
    from .render import RenderConfig, render_scene, write_image

    scene = load_scene(args.scene)
    if scene.camera is None:
        raise SceneError("scene has no camera record; render needs one", args.scene)
    img, stats = render_scene(scene, RenderConfig(spp=args.spp, seed=args.seed, threads=args.threads))
    write_image(img, args.out)
    if args.stats:
        with open(args.stats, "w") as fh:
            fh.write(stats.to_json(width=img.width, height=img.height, spp=args.spp, seed=args.seed,
                                   threads=args.threads) + "\n")
    print(f"wrote {args.out} ({img.width}x{img.height}, {args.spp} spp, "
          f"{stats.total_rays} rays in {stats.wall_seconds:.2f} s)")
    return 0


def _bench(args) -> int:
    from .render import GENERATIONS, benchmark

    scene = load_scene(args.scene)
    if scene.camera is None:
        raise SceneError("scene has no camera record; bench needs one", args.scene)
    stats = benchmark(scene, args.rays, args.kind, args.seed)
    for g in GENERATIONS:
        if stats.rays[g]:
            print(f"{g:9s} {stats.rays[g]:10d} rays  {stats.seconds[g]:8.3f} s  "
                  f"{stats.rays_per_second(g) / 1e6:8.3f} Mrays/s")
    print(f"{'total':9s} {stats.total_rays:10d} rays  {sum(stats.seconds.values()):8.3f} s  "
          f"{stats.rays_per_second() / 1e6:8.3f} Mrays/s")
    return 0


def _verify(args) -> int:
    from .verify import run_suite

    result = run_suite(args.suite, args.trials, args.seed)
    print(result.summary())
    return 0 if result.ok else 1


def _inspect(args) -> int:
    from .bvh import build_bvh

    scene = load_scene(args.scene)
    boxes = scene.root_boxes()
    bvh = build_bvh(boxes)
    greg = scene.gregory_count
    print(f"patches: {len(scene.patches)} ({len(scene.patches) - greg} bezier, {greg} gregory)")
    print(f"materials: {len(scene.materials)}  lights: {len(scene.lights)}  "
          f"camera: {'yes' if scene.camera is not None else 'no'}")
    b = scene.bounds()
    print(f"bounds: lo={_vec(b.lo)} hi={_vec(b.hi)}")
    print(f"bvh: depth {bvh.depth()}, {bvh.node_count} nodes, {bvh.leaf_count} leaves")
    print("root boxes:")
    for k, (p, box) in enumerate(zip(scene.patches, boxes)):
        kind = "gregory" if p.is_gregory else "bezier"
        print(f"  {k:5d} {kind:7s} lo={_vec(box.lo)} hi={_vec(box.hi)}")
    return 0


def _vec(v) -> str:
    return "(" + ", ".join(f"{x:.6g}" for x in np.asarray(v, dtype=np.float64)) + ")"


COMMANDS = {"render": _render, "bench": _bench, "verify": _verify, "inspect": _inspect}


def run(argv: Optional[List[str]] = None) -> int:
    """Parse ``argv`` and run the command; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed the usage message
        return int(exc.code) if exc.code else 0
    try:
        return COMMANDS[args.command](args)
    except SceneError as exc:
        print(f"patchtrace: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"patchtrace: error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"patchtrace: error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
