"""Paired wireframe/scene dataset ingestion.

On-disk layout::

    root/
      images/<id>.png|.jpg      3-channel photos
      annotations/<id>.json     wireframe annotation JSON
      train.txt / test.txt      newline-delimited ids

Samples are returned in sorted-id order regardless of manifest line order.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .wireframe import (
    DEFAULT_LINE_WIDTH,
    Wireframe,
    parse_wireframe,
    rasterize,
    transform_wireframe,
    _resize_bilinear,
)

# published split sizes for the full indoor wireframe dataset
FULL_TRAIN_SIZE = 4511
FULL_TEST_SIZE = 422

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


class DatasetError(RuntimeError):
    """Missing or inconsistent dataset files."""


@dataclass
class PairedSample:
    """A wireframe, its raster, and the corresponding scene photo.

    wireframe_raster must be deterministically derivable from `wireframe` at
    the stored resolution (load_dataset and augment guarantee this).
    """

    wireframe: Wireframe
    wireframe_raster: np.ndarray  # (H, W, 1) float32 in [-1, 1]
    scene: np.ndarray  # (H, W, 3) float32 in [-1, 1]
    id: str


def _read_manifest(path: Path) -> list[str]:
    if not path.is_file():
        raise DatasetError(f"split manifest not found: {path}")
    ids = [line.strip() for line in path.read_text().splitlines()]
    return [i for i in ids if i]


def _find_image(images_dir: Path, sample_id: str) -> Path | None:
    for suffix in IMAGE_SUFFIXES:
        p = images_dir / f"{sample_id}{suffix}"
        if p.is_file():
            return p
    return None


def load_image(path: Path) -> np.ndarray:
    """Load a 3-channel image as (H, W, 3) float32 in [-1, 1]."""
    from PIL import Image

    with Image.open(path) as pil:
        arr = np.asarray(pil.convert("RGB"))
    return arr.astype(np.float32) / 255.0 * 2.0 - 1.0


def check_dataset(root: str | Path, split: str) -> list[str]:
    """Return the split ids; raise DatasetError naming every orphan id."""
    root = Path(root)
    ids = _read_manifest(root / f"{split}.txt")
    missing_ann = [i for i in ids if not (root / "annotations" / f"{i}.json").is_file()]
    missing_img = [i for i in ids if _find_image(root / "images", i) is None]
    if missing_ann or missing_img:
        parts = []
        if missing_ann:
            parts.append(f"ids missing annotations: {', '.join(sorted(missing_ann))}")
        if missing_img:
            parts.append(f"ids missing images: {', '.join(sorted(missing_img))}")
        raise DatasetError("; ".join(parts))
    return sorted(ids)


def load_dataset(
    root: str | Path,
    split: str,
    line_width: int = DEFAULT_LINE_WIDTH,
) -> list[PairedSample]:
    """Load every id in the split manifest as a PairedSample, sorted by id.

    The wireframe raster is drawn at the annotation's canvas size, which must
    match the photo dimensions.
    """
    root = Path(root)
    ids = check_dataset(root, split)
    samples = []
    for sample_id in ids:
        ann_path = root / "annotations" / f"{sample_id}.json"
        wf = parse_wireframe(ann_path.read_bytes())
        img_path = _find_image(root / "images", sample_id)
        scene = load_image(img_path)
        w, h = wf.canvas_size
        if scene.shape[:2] != (h, w):
            raise DatasetError(
                f"id {sample_id}: image is {scene.shape[1]}x{scene.shape[0]} "
                f"but annotation canvas is {w}x{h}"
            )
        raster = rasterize(wf, (w, h), line_width)
        samples.append(PairedSample(wireframe=wf, wireframe_raster=raster, scene=scene, id=sample_id))
    return samples


def resize_sample(sample: PairedSample, size: int, line_width: int = DEFAULT_LINE_WIDTH) -> PairedSample:
    """Rescale directly to the model resolution (inference-time preprocessing).

    The wireframe is scaled in vector form and re-rasterized; the scene is
    bilinearly resized.
    """
    w, h = sample.wireframe.canvas_size
    wf = transform_wireframe(sample.wireframe, (size / w, size / h), (0.0, 0.0), size, flip=False)
    return PairedSample(
        wireframe=wf,
        wireframe_raster=rasterize(wf, size, line_width),
        scene=_resize_bilinear(sample.scene, size),
        id=sample.id,
    )


def batch_to_tensors(samples: list[PairedSample]):
    """Stack samples into channels-first torch tensors (x: N1HW, y: N3HW)."""
    import torch

    x = np.stack([s.wireframe_raster.transpose(2, 0, 1) for s in samples])
    y = np.stack([s.scene.transpose(2, 0, 1) for s in samples])
    return torch.from_numpy(x), torch.from_numpy(y)


def write_dataset(samples: list[PairedSample], root: str | Path, split: str = "train") -> None:
    """Write samples in the documented on-disk layout (PNG images)."""
    from PIL import Image

    from .wireframe import serialize_wireframe

    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "annotations").mkdir(parents=True, exist_ok=True)
    for s in samples:
        arr = ((s.scene.astype(np.float64) + 1.0) / 2.0 * 255.0).round().clip(0, 255).astype(np.uint8)
        Image.fromarray(arr).save(root / "images" / f"{s.id}.png")
        (root / "annotations" / f"{s.id}.json").write_text(serialize_wireframe(s.wireframe))
    manifest = root / f"{split}.txt"
    manifest.write_text("".join(f"{s.id}\n" for s in sorted(samples, key=lambda s: s.id)))
