"""Regenerate the teapot golden image with the tessellation oracle backend.

Writes ``tests/data/teapot_golden.ppm`` and the parameters used to
``tests/data/teapot_golden.json``; the render test reads both.
"""

import json
import pathlib
from dataclasses import replace

from patchtrace.render import RenderConfig, render_scene, write_image
from patchtrace.scene_io import load_scene

ROOT = pathlib.Path(__file__).resolve().parents[1]
PARAMS = {"scene": "scenes/teapot.scene", "width": 128, "height": 128, "spp": 1, "seed": 7,
          "footprint": 1.0 / 64.0, "oracle_resolution": 512}


def main():
    scene = load_scene(ROOT / PARAMS["scene"])
    scene = scene.replace(camera=replace(scene.camera, width=PARAMS["width"], height=PARAMS["height"]))
    cfg = RenderConfig(spp=PARAMS["spp"], seed=PARAMS["seed"], footprint=PARAMS["footprint"],
                       backend="oracle", oracle_resolution=PARAMS["oracle_resolution"])
    img, _ = render_scene(scene, cfg)
    out = ROOT / "tests" / "data"
    out.mkdir(parents=True, exist_ok=True)
    write_image(img, out / "teapot_golden.ppm")
    (out / "teapot_golden.json").write_text(json.dumps(PARAMS, indent=2) + "\n")


if __name__ == "__main__":
    main()
