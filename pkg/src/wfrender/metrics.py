"""Evaluation suite: SSIM, FID, perceptual distance, structural AP, inception score.

Everything here is numpy-based and independent of the (torch) training
losses, so the two paths can cross-check each other. Line sets live in the
128 x 128-normalized coordinate frame used by wireframe detectors.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.signal

SAP_FRAME = 128.0


class MetricError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# SSIM


def _luma(img: np.ndarray) -> np.ndarray:
    if img.ndim == 3 and img.shape[2] == 3:
        return 0.299 * img[:, :, 0] + 0.587 * img[:, :, 1] + 0.114 * img[:, :, 2]
    if img.ndim == 3 and img.shape[2] == 1:
        return img[:, :, 0]
    if img.ndim == 2:
        return img
    raise ValueError(f"cannot convert shape {img.shape} to grayscale")


def _gauss_kernel(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    coords = np.arange(size) - size // 2
    g = np.exp(-(coords**2) / (2 * sigma**2))
    g /= g.sum()
    return np.outer(g, g)


def ssim(a: np.ndarray, b: np.ndarray, data_range: float = 2.0) -> float:
    """Single-scale SSIM with an 11x11 Gaussian window (sigma 1.5).

    Color images are converted to grayscale with ITU-R 601 luma weights.
    Returns the mean over valid window positions; range [-1, 1].
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    ga, gb = _luma(a), _luma(b)
    win = _gauss_kernel()
    if min(ga.shape) < win.shape[0]:
        raise ValueError(f"image {ga.shape} smaller than the {win.shape[0]}x{win.shape[0]} window")
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2

    def blur(x):
        return scipy.signal.convolve2d(x, win, mode="valid")

    mu_a, mu_b = blur(ga), blur(gb)
    var_a = blur(ga * ga) - mu_a**2
    var_b = blur(gb * gb) - mu_b**2
    cov = blur(ga * gb) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return float((num / den).mean())


# ---------------------------------------------------------------------------
# FID


@dataclass
class FeatureStats:
    """Gaussian moments of a feature set."""

    mean: np.ndarray  # (D,)
    cov: np.ndarray  # (D, D)
    count: int

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64).reshape(-1)
        self.cov = np.asarray(self.cov, dtype=np.float64)
        d = self.mean.shape[0]
        if self.cov.shape != (d, d):
            raise ValueError(f"covariance must be {d}x{d}, got {self.cov.shape}")
        if not np.allclose(self.cov, self.cov.T, atol=1e-8):
            raise ValueError("covariance must be symmetric within 1e-8")
        if self.count < 2:
            raise ValueError("need at least 2 samples for covariance")

    @classmethod
    def from_features(cls, feats: np.ndarray) -> "FeatureStats":
        feats = np.asarray(feats, dtype=np.float64)
        if feats.ndim != 2 or feats.shape[0] < 2:
            raise ValueError("features must be (N >= 2, D)")
        cov = np.cov(feats, rowvar=False).reshape(feats.shape[1], feats.shape[1])
        return cls(mean=feats.mean(axis=0), cov=(cov + cov.T) / 2, count=feats.shape[0])


def _psd_sqrt(mat: np.ndarray, clamp: float = 1e-10, tol: float = 1e-6) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition with eigenvalue clamping."""
    sym = (mat + mat.T) / 2
    vals, vecs = np.linalg.eigh(sym)
    if vals.min() < -tol * max(1.0, abs(vals.max())):
        raise MetricError(f"matrix not PSD beyond tolerance: min eigenvalue {vals.min():.3e}")
    vals = np.clip(vals, clamp, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def fid(real: FeatureStats, gen: FeatureStats) -> float:
    """Frechet distance between two feature Gaussians.

    ||mu_r - mu_g||^2 + Tr(S_r + S_g - 2 (S_r S_g)^(1/2)), computed through
    the symmetric form sqrt(S_g) S_r sqrt(S_g) so the square root stays real.
    """
    if real.mean.shape != gen.mean.shape:
        raise ValueError("feature dimensions differ")
    diff = real.mean - gen.mean
    root_g = _psd_sqrt(gen.cov)
    inner = root_g @ real.cov @ root_g
    vals = np.linalg.eigvalsh((inner + inner.T) / 2)
    if vals.min() < -1e-6 * max(1.0, abs(vals.max())):
        raise MetricError(f"cross term not PSD beyond tolerance: {vals.min():.3e}")
    trace_sqrt = np.sqrt(np.clip(vals, 0.0, None)).sum()
    value = float(diff @ diff + np.trace(real.cov) + np.trace(gen.cov) - 2.0 * trace_sqrt)
    return max(value, 0.0)


# ---------------------------------------------------------------------------
# structural average precision


@dataclass
class LineSet:
    """Scored line segments, (N, 5) array of x1, y1, x2, y2, score."""

    lines: np.ndarray

    def __post_init__(self):
        self.lines = np.asarray(self.lines, dtype=np.float64).reshape(-1, 5)
        if self.lines.size and not np.all(np.isfinite(self.lines)):
            raise ValueError("line endpoints and scores must be finite")

    def __len__(self) -> int:
        return len(self.lines)

    @classmethod
    def from_wireframe(cls, wf, score: float = 1.0) -> "LineSet":
        """Ground-truth lines scaled into the 128-normalized frame."""
        ends = wf.segment_endpoints()
        w, h = wf.canvas_size
        scale = np.array([SAP_FRAME / w, SAP_FRAME / h, SAP_FRAME / w, SAP_FRAME / h])
        scores = np.full((len(ends), 1), score)
        return cls(np.concatenate([ends * scale, scores], axis=1) if len(ends) else np.zeros((0, 5)))

    @classmethod
    def from_json(cls, data: str | bytes) -> "LineSet":
        obj = json.loads(data)
        return cls(np.asarray(obj["lines"], dtype=np.float64).reshape(-1, 5))

    def to_json(self, line_id: str) -> str:
        return json.dumps({"id": line_id, "lines": [list(map(float, l)) for l in self.lines]})


def _match_scored_lines(pred: np.ndarray, gt: np.ndarray, theta: float):
    """Greedy match in descending-score order; returns (scores, tp, fp).

    A prediction's candidate is its distance-argmin ground-truth line, where
    the distance is the smaller over the two endpoint orderings of the summed
    squared endpoint distances. The prediction is a true positive when that
    distance is <= theta and the candidate is still unmatched.
    """
    order = np.argsort(-pred[:, 4], kind="stable")
    pred = pred[order]
    scores = pred[:, 4]
    n = len(pred)
    tp = np.zeros(n)
    fp = np.zeros(n)
    if len(gt) == 0:
        fp[:] = 1.0
        return scores, tp, fp
    a_p, b_p = pred[:, None, 0:2], pred[:, None, 2:4]
    a_g, b_g = gt[None, :, 0:2], gt[None, :, 2:4]
    straight = ((a_p - a_g) ** 2).sum(-1) + ((b_p - b_g) ** 2).sum(-1)
    crossed = ((a_p - b_g) ** 2).sum(-1) + ((b_p - a_g) ** 2).sum(-1)
    dist = np.minimum(straight, crossed)
    choice = np.argmin(dist, axis=1)
    best = dist[np.arange(n), choice]
    hit = np.zeros(len(gt), dtype=bool)
    for i in range(n):
        if best[i] <= theta and not hit[choice[i]]:
            hit[choice[i]] = True
            tp[i] = 1.0
        else:
            fp[i] = 1.0
    return scores, tp, fp


def _average_precision(tp: np.ndarray, fp: np.ndarray, n_gt: int):
    """All-points AP from per-rank tp/fp indicators (already score-sorted)."""
    if n_gt == 0:
        return 0.0, np.zeros(0), np.zeros(0)
    cum_tp = np.cumsum(tp)
    cum_fp = np.cumsum(fp)
    recall = cum_tp / n_gt
    precision = cum_tp / np.maximum(cum_tp + cum_fp, 1e-12)
    r = np.concatenate(([0.0], recall, [1.0]))
    p = np.concatenate(([0.0], precision, [0.0]))
    for i in range(len(p) - 1, 0, -1):
        p[i - 1] = max(p[i - 1], p[i])
    idx = np.where(r[1:] != r[:-1])[0]
    ap = float(np.sum((r[idx + 1] - r[idx]) * p[idx + 1]))
    return ap, precision, recall


def sap(pred: LineSet, gt: LineSet, theta: float):
    """Structural AP for one image at squared-distance threshold theta.

    Returns (ap, precision, recall) where precision/recall trace the
    PR curve over descending score ranks. Empty ground truth gives AP 0.
    """
    if len(gt) == 0:
        if len(pred):
            warnings.warn("sAP with empty ground truth and non-empty predictions is 0")
        return 0.0, np.zeros(0), np.zeros(0)
    scores, tp, fp = _match_scored_lines(pred.lines, gt.lines, theta)
    return _average_precision(tp, fp, len(gt))


def sap_pooled(pairs: list[tuple[LineSet, LineSet]], theta: float) -> float:
    """Pooled multi-image sAP: matching per image, ranking across images."""
    all_scores, all_tp, all_fp = [], [], []
    n_gt = 0
    for pred, gt in pairs:
        scores, tp, fp = _match_scored_lines(pred.lines, gt.lines, theta)
        all_scores.append(scores)
        all_tp.append(tp)
        all_fp.append(fp)
        n_gt += len(gt)
    if n_gt == 0:
        return 0.0
    scores = np.concatenate(all_scores)
    order = np.argsort(-scores, kind="stable")
    ap, _, _ = _average_precision(
        np.concatenate(all_tp)[order], np.concatenate(all_fp)[order], n_gt
    )
    return ap


# ---------------------------------------------------------------------------
# inception score


def inception_score(class_probs: np.ndarray) -> float:
    """exp of the mean KL divergence between row distributions and the marginal."""
    p = np.asarray(class_probs, dtype=np.float64)
    if p.ndim != 2:
        raise ValueError("class_probs must be (N, K)")
    if (p < 0).any():
        raise ValueError("class probabilities must be non-negative")
    if not np.allclose(p.sum(axis=1), 1.0, atol=1e-6):
        raise ValueError("each row must sum to 1")
    marginal = p.mean(axis=0, keepdims=True)
    safe = np.where(p > 0, p, 1.0)
    kl = (p * (np.log(safe) - np.log(marginal))).sum(axis=1)
    return float(np.exp(kl.mean()))


# ---------------------------------------------------------------------------
# batch evaluation


class RandomProjectionFeatures:
    """Default desk-scale FID feature extractor: block-mean downsample to
    16x16x3, then a fixed seeded random projection with tanh squashing.

    Dimension-agnostic stand-in for a pretrained 2048-D backbone; any object
    with a features(images) -> (N, D) method can replace it.
    """

    def __init__(self, dim: int = 256, seed: int = 0):
        self.dim = dim
        rng = np.random.default_rng(seed)
        self._proj = rng.standard_normal((16 * 16 * 3, dim)) / np.sqrt(16 * 16 * 3)

    def features(self, images: np.ndarray) -> np.ndarray:
        feats = []
        for img in images:
            h, w = img.shape[:2]
            bh, bw = max(h // 16, 1), max(w // 16, 1)
            crop = img[: bh * 16, : bw * 16]
            pooled = crop.reshape(16, bh, 16, bw, 3).mean(axis=(1, 3))
            feats.append(np.tanh(pooled.reshape(-1) @ self._proj))
        return np.asarray(feats)


def _load_image_dir(path: Path) -> dict[str, np.ndarray]:
    from .datasets import IMAGE_SUFFIXES, load_image

    out = {}
    for p in sorted(path.iterdir()):
        if p.suffix.lower() in IMAGE_SUFFIXES:
            out[p.stem] = load_image(p)
    return out


def evaluate_run(
    gen_dir: str | Path,
    real_dir: str | Path,
    gt_annotations: str | Path,
    detector_dir: str | Path | None = None,
    out_dir: str | Path | None = None,
    feature_extractor=None,
    perceptual=None,
    thetas: tuple[float, ...] = (5.0, 10.0, 15.0),
) -> dict:
    """Evaluate a generated-image directory against aligned real images.

    Emits FID, mean perceptual distance, mean SSIM and pooled sAP at each
    theta (when detector line sets are supplied). Ids are aligned by filename
    stem; any mismatch raises with the orphan ids listed. Writes report.json
    and report.csv when out_dir is given.
    """
    from .wireframe import parse_wireframe

    gen = _load_image_dir(Path(gen_dir))
    real = _load_image_dir(Path(real_dir))
    missing_gen = sorted(set(real) - set(gen))
    missing_real = sorted(set(gen) - set(real))
    if missing_gen or missing_real:
        parts = []
        if missing_gen:
            parts.append(f"ids missing generated images: {', '.join(missing_gen)}")
        if missing_real:
            parts.append(f"ids missing real images: {', '.join(missing_real)}")
        raise MetricError("; ".join(parts))
    if not gen:
        raise MetricError("no images to evaluate")
    ids = sorted(gen)

    extractor = feature_extractor or RandomProjectionFeatures()
    feats_gen = extractor.features(np.stack([gen[i] for i in ids]))
    feats_real = extractor.features(np.stack([real[i] for i in ids]))
    report = {
        "fid": fid(FeatureStats.from_features(feats_real), FeatureStats.from_features(feats_gen)),
        "ssim": float(np.mean([ssim(real[i], gen[i]) for i in ids])),
        "perceptual": _mean_perceptual(real, gen, ids, perceptual),
    }

    if detector_dir is not None:
        ann_dir = Path(gt_annotations)
        pairs = []
        for i in ids:
            det_path = Path(detector_dir) / f"{i}.json"
            ann_path = ann_dir / f"{i}.json"
            if not det_path.is_file():
                raise MetricError(f"missing detector line set for id {i}")
            if not ann_path.is_file():
                raise MetricError(f"missing ground-truth annotation for id {i}")
            gt = LineSet.from_wireframe(parse_wireframe(ann_path.read_bytes()))
            pairs.append((LineSet.from_json(det_path.read_text()), gt))
        for theta in thetas:
            report[f"sap{int(theta)}"] = sap_pooled(pairs, theta)

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(report, indent=2))
        with open(out / "report.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["metric", "value"])
            for k, v in report.items():
                writer.writerow([k, v])
    return report


def _mean_perceptual(real: dict, gen: dict, ids: list[str], extractor) -> float:
    import torch

    from .losses import ConvFeatureExtractor, perceptual_distance

    ext = extractor or ConvFeatureExtractor()
    vals = []
    with torch.no_grad():
        for i in ids:
            a = torch.from_numpy(real[i].transpose(2, 0, 1)[None].copy())
            b = torch.from_numpy(gen[i].transpose(2, 0, 1)[None].copy())
            vals.append(float(perceptual_distance(a, b, ext)))
    return float(np.mean(vals))
