"""Procedural room-box toy data: one-point-perspective wireframes with
flat-shaded renderings.

Each sample is a back wall rectangle, four diagonals running from its corners
to the canvas corners, and a window rectangle inset on the back wall. Scenes
fill the ceiling / floor / side walls / back wall / window regions with flat
per-sample colors. Junction coordinates are integers, so geometric identities
(flips, rescaling) are exact in tests. No two segments are collinear, which
keeps line recovery from rasters unambiguous.
"""

from __future__ import annotations

import numpy as np

from .datasets import PairedSample
from .wireframe import DEFAULT_LINE_WIDTH, Wireframe, rasterize


def make_room_wireframe(rng: np.random.Generator, size: int = 256) -> Wireframe:
    s = size
    x0 = int(rng.integers(round(0.24 * s), round(0.38 * s)))
    x1 = int(rng.integers(round(0.60 * s), round(0.74 * s)))
    y0 = int(rng.integers(round(0.22 * s), round(0.36 * s)))
    y1 = int(rng.integers(round(0.62 * s), round(0.76 * s)))
    # window inset on the back wall
    wx0 = int(rng.integers(x0 + round(0.04 * s), x0 + round(0.10 * s)))
    wx1 = int(rng.integers(x1 - round(0.10 * s), x1 - round(0.04 * s)))
    wy0 = int(rng.integers(y0 + round(0.04 * s), y0 + round(0.10 * s)))
    wy1 = int(rng.integers(y1 - round(0.16 * s), y1 - round(0.08 * s)))
    m = s - 1
    junctions = [
        (x0, y0), (x1, y0), (x1, y1), (x0, y1),  # back wall
        (0, 0), (m, 0), (m, m), (0, m),  # canvas corners
        (wx0, wy0), (wx1, wy0), (wx1, wy1), (wx0, wy1),  # window
    ]
    segments = [
        (0, 1), (1, 2), (2, 3), (3, 0),  # back wall edges
        (0, 4), (1, 5), (2, 6), (3, 7),  # perspective diagonals
        (8, 9), (9, 10), (10, 11), (11, 8),  # window edges
    ]
    return Wireframe(
        junctions=np.array(junctions, dtype=np.float64),
        segments=np.array(segments, dtype=np.int64),
        canvas_size=(s, s),
    )


def _flat_palette(rng: np.random.Generator) -> dict[str, tuple[int, int, int]]:
    def color(lo, hi):
        return tuple(int(v) for v in rng.integers(lo, hi, size=3))

    return {
        "ceiling": color(150, 230),
        "floor": color(60, 140),
        "left": color(100, 200),
        "right": color(100, 200),
        "back": color(140, 220),
        "window": color(40, 250),
    }


def render_room_scene(wf: Wireframe, rng: np.random.Generator) -> np.ndarray:
    """Fill the room regions implied by the wireframe with flat colors."""
    from PIL import Image, ImageDraw

    s = wf.canvas_size[0]
    m = s - 1
    j = wf.junctions
    (x0, y0), (x1, _), (_, y1) = j[0], j[1], j[2]
    palette = _flat_palette(rng)
    img = Image.new("RGB", (s, s), palette["back"])
    draw = ImageDraw.Draw(img)
    draw.polygon([(0, 0), (m, 0), (x1, y0), (x0, y0)], fill=palette["ceiling"])
    draw.polygon([(0, m), (m, m), (x1, y1), (x0, y1)], fill=palette["floor"])
    draw.polygon([(0, 0), (x0, y0), (x0, y1), (0, m)], fill=palette["left"])
    draw.polygon([(m, 0), (x1, y0), (x1, y1), (m, m)], fill=palette["right"])
    draw.rectangle([int(j[8][0]), int(j[8][1]), int(j[10][0]), int(j[10][1])], fill=palette["window"])
    arr = np.asarray(img).astype(np.float32) / 255.0 * 2.0 - 1.0
    return arr


def make_toy_samples(
    n: int,
    seed: int = 0,
    size: int = 256,
    line_width: int = DEFAULT_LINE_WIDTH,
) -> list[PairedSample]:
    rng = np.random.default_rng(seed)
    samples = []
    for i in range(n):
        wf = make_room_wireframe(rng, size)
        scene = render_room_scene(wf, rng)
        samples.append(
            PairedSample(
                wireframe=wf,
                wireframe_raster=rasterize(wf, size, line_width),
                scene=scene,
                id=f"room{i:04}",
            )
        )
    return samples
