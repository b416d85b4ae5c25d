"""Training objectives: reconstruction, generation, perceptual, adversarial, histogram.

All functions take channels-first torch tensors (N, C, H, W) in [-1, 1] and
return scalar tensors, so every term is differentiable and usable directly in
an optimizer step. Conventions:

  * l1 terms are means over all elements (resolution-independent weights)
  * the structural term in the reconstruction loss is (1 - MS-SSIM)
  * adversarial default is least-squares; the sigmoid cross-entropy form is
    available as mode="bce"
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict

import torch
import torch.nn as nn
import torch.nn.functional as F

# standard published MS-SSIM scale weights
MSSSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)


@dataclass
class LossWeights:
    alpha_w: float = 1.0
    beta_w: float = 1.0
    alpha_s: float = 15.0
    beta_s: float = 4.0
    lam: float = 1.0
    hist_weight: float = 1.0

    def __post_init__(self):
        for name, v in asdict(self).items():
            if v < 0:
                raise ValueError(f"loss weight {name} must be non-negative, got {v}")


@dataclass
class LossReport:
    """Per-term scalars for one step. Component fields are unweighted."""

    rec_l1: float = 0.0
    rec_msssim: float = 0.0  # 1 - MS-SSIM
    gen_l1: float = 0.0
    gen_perc: float = 0.0
    adv_g: float = 0.0
    adv_d: float = 0.0
    hist: float = 0.0
    total: float = 0.0  # generator-side objective
    d_total: float = 0.0  # discriminator-side objective
    step: int | None = None
    epoch: int | None = None

    def to_json_line(self) -> str:
        d = {k: v for k, v in asdict(self).items() if v is not None}
        return json.dumps(d)


def _gaussian_window(win_size: int, sigma: float, dtype, device) -> torch.Tensor:
    coords = torch.arange(win_size, dtype=dtype, device=device) - win_size // 2
    g = torch.exp(-(coords**2) / (2 * sigma**2))
    return (g / g.sum()).reshape(1, 1, -1)


def _gaussian_blur(x: torch.Tensor, win: torch.Tensor) -> torch.Tensor:
    # separable valid-mode filtering, per channel
    c = x.shape[1]
    w = win.expand(c, 1, -1)
    x = F.conv2d(x, w.unsqueeze(2), groups=c)  # 1 x k along width
    x = F.conv2d(x, w.unsqueeze(3), groups=c)  # k x 1 along height
    return x


def _ssim_components(a, b, win, data_range: float):
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2
    mu_a = _gaussian_blur(a, win)
    mu_b = _gaussian_blur(b, win)
    mu_aa, mu_bb, mu_ab = mu_a * mu_a, mu_b * mu_b, mu_a * mu_b
    var_a = _gaussian_blur(a * a, win) - mu_aa
    var_b = _gaussian_blur(b * b, win) - mu_bb
    cov = _gaussian_blur(a * b, win) - mu_ab
    cs_map = (2 * cov + c2) / (var_a + var_b + c2)
    ssim_map = ((2 * mu_ab + c1) / (mu_aa + mu_bb + c1)) * cs_map
    # per-sample means over channels and the valid window positions
    return ssim_map.flatten(1).mean(-1), cs_map.flatten(1).mean(-1)


def ms_ssim(
    a: torch.Tensor,
    b: torch.Tensor,
    scales: int = 5,
    win_size: int = 11,
    sigma: float = 1.5,
    weights: tuple[float, ...] | None = None,
    data_range: float = 2.0,
) -> torch.Tensor:
    """Multi-scale structural similarity in [0, 1] (batch mean), differentiable.

    Uses an 11x11 Gaussian window (sigma 1.5) and the standard published
    exponent weights; with fewer than 5 scales the leading weights are
    renormalized to sum to 1. Inputs must satisfy
    min(H, W) >= 2**(scales-1) * win_size.
    """
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")
    if a.dim() != 4:
        raise ValueError("expected N x C x H x W tensors")
    if scales < 1:
        raise ValueError("scales must be >= 1")
    min_side = min(a.shape[-2], a.shape[-1])
    if min_side < 2 ** (scales - 1) * win_size:
        raise ValueError(
            f"image side {min_side} too small for {scales} scales with "
            f"window {win_size} (needs >= {2 ** (scales - 1) * win_size})"
        )
    if weights is None:
        weights = MSSSIM_WEIGHTS[:scales]
        weights = tuple(w / sum(weights) for w in weights)
    elif len(weights) != scales:
        raise ValueError("need one weight per scale")
    win = _gaussian_window(win_size, sigma, a.dtype, a.device)
    mcs = []
    ssim_val = None
    for level in range(scales):
        ssim_val, cs = _ssim_components(a, b, win, data_range)
        if level < scales - 1:
            mcs.append(torch.relu(cs))
            pad = [s % 2 for s in a.shape[-2:]]
            a = F.avg_pool2d(a, kernel_size=2, padding=pad)
            b = F.avg_pool2d(b, kernel_size=2, padding=pad)
    ssim_val = torch.relu(ssim_val)
    terms = torch.stack(mcs + [ssim_val], dim=0)  # (scales, N)
    w = torch.as_tensor(weights, dtype=terms.dtype, device=terms.device).reshape(-1, 1)
    return torch.prod(terms**w, dim=0).mean()


class PerceptualExtractor(nn.Module):
    """Base for feature pyramids used by the perceptual distance.

    Subclasses return an ordered list of (N, C_l, H_l, W_l) activations from
    forward(); `unit_normalize` controls channel-unit normalization inside
    perceptual_distance.
    """

    unit_normalize: bool = True

    def forward(self, images: torch.Tensor) -> list[torch.Tensor]:  # pragma: no cover
        raise NotImplementedError


class ConvFeatureExtractor(PerceptualExtractor):
    """Fixed random conv pyramid: a deterministic, dependency-free extractor.

    Five taps at strides 1, 2, 4, 8, 16, mirroring the shape of a five-stage
    VGG-style pyramid. Weights are seeded and frozen; a pretrained backbone
    can be swapped in through the same interface when available.
    """

    def __init__(self, in_channels: int = 3, base: int = 8, taps: int = 5, seed: int = 0):
        super().__init__()
        gen = torch.Generator().manual_seed(seed)
        layers = []
        c_in = in_channels
        for i in range(taps):
            c_out = base * (2 ** min(i, 3))
            conv = nn.Conv2d(c_in, c_out, 3, stride=1 if i == 0 else 2, padding=1)
            with torch.no_grad():
                conv.weight.copy_(
                    torch.randn(conv.weight.shape, generator=gen) / math.sqrt(c_in * 9)
                )
                conv.bias.zero_()
            layers.append(conv)
            c_in = c_out
        self.stages = nn.ModuleList(layers)
        for p in self.parameters():
            p.requires_grad_(False)

    def forward(self, images: torch.Tensor) -> list[torch.Tensor]:
        feats = []
        x = images
        for stage in self.stages:
            x = torch.relu(stage(x))
            feats.append(x)
        return feats


class IdentityExtractor(PerceptualExtractor):
    """Single tap phi(v) = v; used as a stub in tests and probes."""

    def __init__(self, unit_normalize: bool = False):
        super().__init__()
        self.unit_normalize = unit_normalize

    def forward(self, images: torch.Tensor) -> list[torch.Tensor]:
        return [images]


def perceptual_distance(
    y: torch.Tensor, y_hat: torch.Tensor, extractor: PerceptualExtractor
) -> torch.Tensor:
    """Sum over taps of squared feature differences divided by H_l * W_l.

    When the extractor requests it, activations are unit-normalized along the
    channel dimension first. Batch inputs return the per-sample mean.
    """
    if extractor is None:
        raise ValueError("perceptual extractor is not initialized")
    if y.shape != y_hat.shape:
        raise ValueError(f"shape mismatch: {tuple(y.shape)} vs {tuple(y_hat.shape)}")
    feats_a = extractor(y)
    feats_b = extractor(y_hat)
    total = y.new_zeros(y.shape[0])
    for fa, fb in zip(feats_a, feats_b):
        if extractor.unit_normalize:
            fa = fa / torch.sqrt((fa**2).sum(dim=1, keepdim=True) + 1e-10)
            fb = fb / torch.sqrt((fb**2).sum(dim=1, keepdim=True) + 1e-10)
        h, w = fa.shape[-2:]
        total = total + ((fa - fb) ** 2).flatten(1).sum(-1) / (h * w)
    return total.mean()


def rec_loss(
    x: torch.Tensor,
    x_hat: torch.Tensor,
    weights: LossWeights | None = None,
    msssim_scales: int = 5,
) -> tuple[torch.Tensor, dict]:
    """Wireframe reconstruction: alpha_w * l1 + beta_w * (1 - MS-SSIM), batch mean."""
    weights = weights or LossWeights()
    l1 = (x - x_hat).abs().flatten(1).mean(-1).mean()
    ms = 1.0 - ms_ssim(x, x_hat, scales=msssim_scales)
    total = weights.alpha_w * l1 + weights.beta_w * ms
    return total, {"rec_l1": float(l1.detach()), "rec_msssim": float(ms.detach())}


def gen_loss(
    y: torch.Tensor,
    y_hat: torch.Tensor,
    extractor: PerceptualExtractor,
    weights: LossWeights | None = None,
) -> tuple[torch.Tensor, dict]:
    """Scene generation: alpha_s * l1 + beta_s * perceptual distance, batch mean."""
    weights = weights or LossWeights()
    l1 = (y - y_hat).abs().flatten(1).mean(-1).mean()
    perc = perceptual_distance(y, y_hat, extractor)
    total = weights.alpha_s * l1 + weights.beta_s * perc
    return total, {"gen_l1": float(l1.detach()), "gen_perc": float(perc.detach())}


def adversarial_losses(
    real_scores: torch.Tensor,
    fake_scores: torch.Tensor,
    mode: str = "lsgan",
) -> tuple[torch.Tensor, torch.Tensor]:
    """(d_loss, g_loss) from patch score maps.

    lsgan: d = 0.5 mean((real-1)^2) + 0.5 mean(fake^2); g = 0.5 mean((fake-1)^2).
    bce: the sigmoid cross-entropy objective taken literally, so the generator
    minimizes E[log(1 - sigmoid(fake))].
    Callers detach fake_scores' inputs for the discriminator phase.
    """
    if real_scores.shape != fake_scores.shape:
        raise ValueError("score maps must have the same shape")
    if mode == "lsgan":
        d = 0.5 * ((real_scores - 1.0) ** 2).mean() + 0.5 * (fake_scores**2).mean()
        g = 0.5 * ((fake_scores - 1.0) ** 2).mean()
    elif mode == "bce":
        d = F.softplus(-real_scores).mean() + F.softplus(fake_scores).mean()
        g = (-F.softplus(fake_scores)).mean()  # log(1 - sigmoid(s))
    else:
        raise ValueError(f"unknown adversarial mode {mode!r}")
    return d, g


def hist_loss(h: torch.Tensor, h_hat: torch.Tensor) -> torch.Tensor:
    """Mean absolute difference over the 256 x 3 histogram entries."""
    if h.shape[-2:] != (256, 3) or h_hat.shape[-2:] != (256, 3):
        raise ValueError("histograms must be 256 x 3")
    if h.shape != h_hat.shape:
        raise ValueError("histogram batch shapes must match")
    return (h - h_hat).abs().mean()


def total_loss(
    rec: float,
    gen: float,
    adv_g: float,
    adv_d: float,
    weights: LossWeights | None = None,
    hist: float = 0.0,
    components: dict | None = None,
) -> LossReport:
    """Combine per-term scalars into the end-to-end objective report.

    Generator side: rec + gen + lam * adv_g (+ hist_weight * hist when the
    guidance branch is active); discriminator side: lam * adv_d.
    """
    weights = weights or LossWeights()
    report = LossReport(**(components or {}))
    report.adv_g = float(adv_g)
    report.adv_d = float(adv_d)
    report.hist = float(hist)
    report.total = float(rec) + float(gen) + weights.lam * float(adv_g) + weights.hist_weight * float(hist)
    report.d_total = weights.lam * float(adv_d)
    return report
