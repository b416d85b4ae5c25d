"""Vector wireframe data model: parsing, rasterization, augmentation, color histograms.

A wireframe is a set of junctions (2D points in pixel coordinates) plus line
segments given as index pairs into the junction list. Rasters use the [-1, 1]
intensity convention: background -1, strokes +1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

DEFAULT_LINE_WIDTH = 2


class WireframeError(ValueError):
    """Malformed or invalid wireframe data."""


@dataclass
class Wireframe:
    """Junction/segment graph on a W x H pixel canvas.

    Invariants (enforced on construction):
      * segment indices are valid junction indices and j_a != j_b
      * no duplicate segments under unordered-pair equality
      * junction coordinates lie inside [0, W) x [0, H) after clamping
    """

    junctions: np.ndarray  # (J, 2) float64, columns x, y
    segments: np.ndarray  # (S, 2) int64, indices into junctions
    canvas_size: tuple[int, int]  # (W, H)

    def __post_init__(self):
        self.junctions = np.asarray(self.junctions, dtype=np.float64).reshape(-1, 2)
        self.segments = np.asarray(self.segments, dtype=np.int64).reshape(-1, 2)
        w, h = self.canvas_size
        if w < 1 or h < 1:
            raise WireframeError(f"canvas size must be positive, got {self.canvas_size}")
        if not np.all(np.isfinite(self.junctions)):
            raise WireframeError("junction coordinates must be finite")
        # clamp into the half-open canvas box
        hi = np.nextafter([float(w), float(h)], 0.0)
        np.clip(self.junctions, 0.0, hi, out=self.junctions)
        n = len(self.junctions)
        for k, (a, b) in enumerate(self.segments):
            if not (0 <= a < n):
                raise WireframeError(f"segment {k} references missing junction index {a}")
            if not (0 <= b < n):
                raise WireframeError(f"segment {k} references missing junction index {b}")
            if a == b:
                raise WireframeError(f"segment {k} connects junction {a} to itself")
        seen = set()
        for k, (a, b) in enumerate(self.segments):
            key = (min(a, b), max(a, b))
            if key in seen:
                raise WireframeError(f"duplicate segment {k}: {key}")
            seen.add(key)

    @property
    def n_junctions(self) -> int:
        return len(self.junctions)

    @property
    def n_segments(self) -> int:
        return len(self.segments)

    def segment_endpoints(self) -> np.ndarray:
        """(S, 4) array of x1, y1, x2, y2 per segment."""
        if len(self.segments) == 0:
            return np.zeros((0, 4), dtype=np.float64)
        a = self.junctions[self.segments[:, 0]]
        b = self.junctions[self.segments[:, 1]]
        return np.concatenate([a, b], axis=1)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Wireframe):
            return NotImplemented
        return (
            tuple(self.canvas_size) == tuple(other.canvas_size)
            and self.junctions.shape == other.junctions.shape
            and self.segments.shape == other.segments.shape
            and np.array_equal(self.junctions, other.junctions)
            and np.array_equal(self.segments, other.segments)
        )


def parse_wireframe(data: bytes | str) -> Wireframe:
    """Parse the annotation JSON `{"size":[W,H],"junctions":[[x,y],...],"segments":[[i,j],...]}`."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        obj = json.loads(data)
    except json.JSONDecodeError as e:
        raise WireframeError(f"malformed wireframe JSON: {e}") from e
    if not isinstance(obj, dict):
        raise WireframeError("wireframe JSON must be an object")
    for key in ("size", "junctions", "segments"):
        if key not in obj:
            raise WireframeError(f"wireframe JSON missing key {key!r}")
    size = obj["size"]
    if not (isinstance(size, (list, tuple)) and len(size) == 2):
        raise WireframeError("'size' must be [W, H]")
    junctions = np.asarray(obj["junctions"], dtype=np.float64)
    if junctions.size and junctions.ndim != 2:
        raise WireframeError("'junctions' must be a list of [x, y] pairs")
    segments = np.asarray(obj["segments"], dtype=np.int64)
    if segments.size and segments.ndim != 2:
        raise WireframeError("'segments' must be a list of [i, j] pairs")
    return Wireframe(
        junctions=junctions.reshape(-1, 2),
        segments=segments.reshape(-1, 2),
        canvas_size=(int(size[0]), int(size[1])),
    )


def serialize_wireframe(wf: Wireframe) -> str:
    """Inverse of parse_wireframe; round-trips exactly.

    Canonical form: compact separators and integral coordinates written as
    ints, matching what JSON.stringify produces for the same values, so
    serializations are byte-compatible across the Python and TypeScript
    clients.
    """

    def num(v: float):
        return int(v) if float(v).is_integer() else float(v)

    return json.dumps(
        {
            "size": [int(wf.canvas_size[0]), int(wf.canvas_size[1])],
            "junctions": [[num(x), num(y)] for x, y in wf.junctions],
            "segments": [[int(a), int(b)] for a, b in wf.segments],
        },
        separators=(",", ":"),
    )


def rasterize(
    wf: Wireframe,
    out_size: int | tuple[int, int],
    line_width: int = DEFAULT_LINE_WIDTH,
) -> np.ndarray:
    """Draw a wireframe as an (H, W, 1) float32 raster.

    out_size is either one side of a square raster or an explicit (W, H).
    Background is -1, stroke pixels are +1. A pixel is lit when its center
    lies within line_width / 2 (Euclidean) of a segment, after scaling
    endpoints from canvas coordinates by out / canvas per axis. The predicate
    is closed (<=), so even widths cover both boundary rows of an
    axis-aligned stroke. Zero-length segments always light at least the pixel
    nearest the junction. Pure function of its arguments.
    """
    out_w, out_h = (out_size, out_size) if isinstance(out_size, int) else out_size
    if out_w < 8 or out_h < 8:
        raise ValueError(f"output size must be >= 8 px per side, got {out_w}x{out_h}")
    if line_width < 1:
        raise ValueError(f"line_width must be >= 1, got {line_width}")
    img = np.full((out_h, out_w), -1.0, dtype=np.float32)
    w, h = wf.canvas_size
    sx = out_w / w
    sy = out_h / h
    r = line_width / 2.0
    r2 = r * r
    for a_idx, b_idx in wf.segments:
        ax, ay = wf.junctions[a_idx]
        bx, by = wf.junctions[b_idx]
        ax, ay, bx, by = ax * sx, ay * sy, bx * sx, by * sy
        x_lo = max(int(np.floor(min(ax, bx) - r)), 0)
        x_hi = min(int(np.ceil(max(ax, bx) + r)), out_w - 1)
        y_lo = max(int(np.floor(min(ay, by) - r)), 0)
        y_hi = min(int(np.ceil(max(ay, by) + r)), out_h - 1)
        if x_lo > x_hi or y_lo > y_hi:
            continue
        xs = np.arange(x_lo, x_hi + 1, dtype=np.float64)
        ys = np.arange(y_lo, y_hi + 1, dtype=np.float64)
        px, py = np.meshgrid(xs, ys)
        dx, dy = bx - ax, by - ay
        seg_len2 = dx * dx + dy * dy
        patch = img[y_lo : y_hi + 1, x_lo : x_hi + 1]
        if seg_len2 == 0.0:
            d2 = (px - ax) ** 2 + (py - ay) ** 2
            patch[d2 <= r2] = 1.0
            cx = min(max(int(np.floor(ax + 0.5)), 0), out_w - 1)
            cy = min(max(int(np.floor(ay + 0.5)), 0), out_h - 1)
            img[cy, cx] = 1.0
            continue
        t = ((px - ax) * dx + (py - ay) * dy) / seg_len2
        t = np.clip(t, 0.0, 1.0)
        d2 = (px - (ax + t * dx)) ** 2 + (py - (ay + t * dy)) ** 2
        patch[d2 <= r2] = 1.0
    return img[:, :, None]


def color_histogram(img: np.ndarray) -> np.ndarray:
    """Per-channel 256-bin histogram of an H x W x 3 image in [-1, 1].

    Intensity v maps to level floor((v + 1) / 2 * 255 + 0.5), clamped to
    0..255; counts are divided by the pixel count so each channel sums to 1.
    Returns a (256, 3) float64 array. Invariant to horizontal flips.
    """
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected H x W x 3 image, got shape {img.shape}")
    levels = np.floor((img.astype(np.float64) + 1.0) / 2.0 * 255.0 + 0.5)
    levels = np.clip(levels, 0, 255).astype(np.int64)
    n = img.shape[0] * img.shape[1]
    out = np.zeros((256, 3), dtype=np.float64)
    for c in range(3):
        out[:, c] = np.bincount(levels[:, :, c].ravel(), minlength=256) / n
    return out


@dataclass
class AugmentParams:
    """Training-time augmentation: resize, random crop, flip, photometric jitter.

    Jitter ranges are multiplicative half-widths applied in [0, 1] intensity
    space (factor drawn from U(1 - range, 1 + range)); the magnitudes are a
    project choice, not a published value.
    """

    resize_to: int = 307
    crop_to: int = 256
    flip_prob: float = 0.5
    brightness: float = 0.2
    contrast: float = 0.2
    saturation: float = 0.2
    random_crop: bool = True  # False pins the crop offset to center
    line_width: int = DEFAULT_LINE_WIDTH

    def __post_init__(self):
        if self.crop_to > self.resize_to:
            raise ValueError(
                f"crop_to ({self.crop_to}) must not exceed resize_to ({self.resize_to})"
            )

    @classmethod
    def identity(cls, size: int = 256, line_width: int = DEFAULT_LINE_WIDTH) -> "AugmentParams":
        """No randomness: resize to the crop size, center crop, no flip, no jitter."""
        return cls(
            resize_to=size,
            crop_to=size,
            flip_prob=0.0,
            brightness=0.0,
            contrast=0.0,
            saturation=0.0,
            random_crop=False,
            line_width=line_width,
        )


def _clip_segment(ax, ay, bx, by, lo, hi):
    """Liang-Barsky clip of segment (a, b) against [lo, hi)^2; None if outside."""
    t0, t1 = 0.0, 1.0
    dx, dy = bx - ax, by - ay
    for p, q in (
        (-dx, ax - lo),
        (dx, hi - ax),
        (-dy, ay - lo),
        (dy, hi - ay),
    ):
        if p == 0.0:
            if q < 0.0:
                return None
            continue
        r = q / p
        if p < 0.0:
            if r > t1:
                return None
            t0 = max(t0, r)
        else:
            if r < t0:
                return None
            t1 = min(t1, r)
    if t0 > t1:
        return None
    return (ax + t0 * dx, ay + t0 * dy, ax + t1 * dx, ay + t1 * dy)


def transform_wireframe(
    wf: Wireframe,
    scale: tuple[float, float],
    crop_offset: tuple[float, float],
    crop_size: int,
    flip: bool,
) -> Wireframe:
    """Scale junctions, clip segments to the crop window, optionally mirror.

    Segments crossing the window boundary are clipped (new junctions appear at
    the boundary); segments fully outside are dropped. The horizontal mirror
    maps x to (crop_size - 1) - x, matching a pixel-grid flip.
    """
    sx, sy = scale
    ox, oy = crop_offset
    hi = np.nextafter(float(crop_size), 0.0)
    pts: list[tuple[float, float]] = []
    index: dict[tuple[float, float], int] = {}
    segs: list[tuple[int, int]] = []
    seen_pairs = set()

    def intern(x: float, y: float) -> int:
        key = (min(max(x, 0.0), hi), min(max(y, 0.0), hi))
        if key not in index:
            index[key] = len(pts)
            pts.append(key)
        return index[key]

    for a_idx, b_idx in wf.segments:
        ax, ay = wf.junctions[a_idx]
        bx, by = wf.junctions[b_idx]
        ax, ay = ax * sx - ox, ay * sy - oy
        bx, by = bx * sx - ox, by * sy - oy
        if flip:
            # mirror before clipping so window intersections keep the exact
            # mirrored direction
            ax = (crop_size - 1) - ax
            bx = (crop_size - 1) - bx
        clipped = _clip_segment(ax, ay, bx, by, 0.0, float(crop_size))
        if clipped is None:
            continue
        ia = intern(clipped[0], clipped[1])
        ib = intern(clipped[2], clipped[3])
        if ia == ib:
            continue
        pair = (min(ia, ib), max(ia, ib))
        if pair in seen_pairs:
            continue
        seen_pairs.add(pair)
        segs.append((ia, ib))

    return Wireframe(
        junctions=np.array(pts, dtype=np.float64).reshape(-1, 2),
        segments=np.array(segs, dtype=np.int64).reshape(-1, 2),
        canvas_size=(crop_size, crop_size),
    )


def _resize_bilinear(img: np.ndarray, size: int) -> np.ndarray:
    """Float bilinear resize (per channel, no uint8 quantization)."""
    from PIL import Image

    if img.shape[0] == size and img.shape[1] == size:
        return img.astype(np.float32)
    chans = []
    for c in range(img.shape[2]):
        pil = Image.fromarray(img[:, :, c].astype(np.float32), mode="F")
        chans.append(np.asarray(pil.resize((size, size), Image.BILINEAR)))
    return np.stack(chans, axis=2).astype(np.float32)


def _luma(img01: np.ndarray) -> np.ndarray:
    return 0.299 * img01[:, :, 0] + 0.587 * img01[:, :, 1] + 0.114 * img01[:, :, 2]


def _jitter(scene: np.ndarray, params: AugmentParams, rng: np.random.Generator) -> np.ndarray:
    """Brightness/contrast/saturation jitter in [0, 1] space; scene-only."""
    if params.brightness == 0 and params.contrast == 0 and params.saturation == 0:
        return scene.astype(np.float32)
    img = (scene.astype(np.float64) + 1.0) / 2.0
    if params.brightness > 0:
        f = rng.uniform(1.0 - params.brightness, 1.0 + params.brightness)
        img = img * f
    if params.contrast > 0:
        f = rng.uniform(1.0 - params.contrast, 1.0 + params.contrast)
        mean = _luma(img).mean()
        img = (img - mean) * f + mean
    if params.saturation > 0:
        f = rng.uniform(1.0 - params.saturation, 1.0 + params.saturation)
        gray = _luma(img)[:, :, None]
        img = gray + (img - gray) * f
    return (np.clip(img, 0.0, 1.0) * 2.0 - 1.0).astype(np.float32)


def augment(sample, params: AugmentParams, rng: np.random.Generator):
    """Resize -> crop -> flip both modalities identically; jitter the scene only.

    The wireframe is transformed in vector form and re-rasterized, so the
    output sample keeps the raster-derivable-from-wireframe invariant exactly.
    Reproducible from the rng seed.
    """
    from .datasets import PairedSample

    w, h = sample.wireframe.canvas_size
    scale = (params.resize_to / w, params.resize_to / h)
    span = params.resize_to - params.crop_to
    if span > 0 and params.random_crop:
        ox = int(rng.integers(0, span + 1))
        oy = int(rng.integers(0, span + 1))
    else:
        ox = oy = span // 2
    flip = bool(rng.random() < params.flip_prob) if params.flip_prob > 0 else False

    wf = transform_wireframe(sample.wireframe, scale, (float(ox), float(oy)), params.crop_to, flip)
    raster = rasterize(wf, params.crop_to, params.line_width)

    scene = _resize_bilinear(sample.scene, params.resize_to)
    scene = scene[oy : oy + params.crop_to, ox : ox + params.crop_to]
    if flip:
        scene = scene[:, ::-1].copy()
    scene = _jitter(scene, params, rng)

    return PairedSample(wireframe=wf, wireframe_raster=raster, scene=scene, id=sample.id)
