"""Noise-to-(image, wireframe) joint generation on a multi-scale backbone.

A shared trunk maps the noise vector to a joint feature map at the coarsest
scale; separate wireframe/scene branch chains then upsample coarse-to-fine,
emitting an output at every scale through a 3x3 conv block followed by a
7x7 conv + tanh head. Each scale and branch has its own discriminator, so
training does not require paired wireframes and images. Cross-scale pixel
statistics are tied together by a color/structure-consistency term.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import torch
import torch.nn as nn
import torch.nn.functional as F

from .model import SubPixelUp, _norm


@dataclass
class JointGanConfig:
    noise_dim: int = 100
    scales: tuple[int, ...] = (32, 64, 128)
    base_channels: int = 32
    lambda1: float = 1.0
    lambda2: float = 5.0
    alpha_con: float = 50.0
    batch_size: int = 64
    lr: float = 2e-3  # fixed, no decay
    max_epochs: int = 500
    seed: int = 0

    def __post_init__(self):
        self.scales = tuple(int(s) for s in self.scales)
        if len(self.scales) < 2:
            raise ValueError("need at least two scales")
        for a, b in zip(self.scales, self.scales[1:]):
            if b != 2 * a:
                raise ValueError(f"scales must strictly double, got {self.scales}")
        for name in ("lambda1", "lambda2", "alpha_con"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)


class _OutputHead(nn.Module):
    """3x3 conv block (norm + ReLU) then 7x7 conv + tanh."""

    def __init__(self, channels: int, out_channels: int, norm: str = "batch"):
        super().__init__()
        self.body = nn.Sequential(
            nn.ReflectionPad2d(1),
            nn.Conv2d(channels, channels, 3),
            _norm(norm, channels),
            nn.ReLU(inplace=True),
            nn.ReflectionPad2d(3),
            nn.Conv2d(channels, out_channels, 7),
            nn.Tanh(),
        )

    def forward(self, x):
        return self.body(x)


class JointGenerator(nn.Module):
    """Shared trunk + two coarse-to-fine branch chains with per-scale heads."""

    def __init__(self, cfg: JointGanConfig):
        super().__init__()
        torch.manual_seed(cfg.seed)
        self.cfg = cfg
        b = cfg.base_channels
        coarse = cfg.scales[0]
        ups_to_coarse = 0
        side = 4
        while side < coarse:
            side *= 2
            ups_to_coarse += 1
        if side != coarse:
            raise ValueError(f"coarsest scale {coarse} must be 4 * 2**k")
        c0 = b * 2 ** min(ups_to_coarse, 3)
        self.fc = nn.Linear(cfg.noise_dim, 4 * 4 * c0 * 2)
        trunk = [nn.BatchNorm2d(c0 * 2), nn.ReLU(inplace=True)]
        c_in = c0 * 2
        for _ in range(ups_to_coarse):
            c_out = max(c_in // 2, b)
            trunk.append(SubPixelUp(c_in, c_out))
            c_in = c_out
        self.trunk = nn.Sequential(*trunk)
        self.trunk_channels = c_in

        def branch_chain():
            ups = nn.ModuleList()
            c = self.trunk_channels
            for _ in range(len(cfg.scales) - 1):
                c_next = max(c // 2, b)
                ups.append(SubPixelUp(c, c_next))
                c = c_next
            return ups

        self.ups_w = branch_chain()
        self.ups_s = branch_chain()
        chans = [self.trunk_channels]
        c = self.trunk_channels
        for _ in range(len(cfg.scales) - 1):
            c = max(c // 2, b)
            chans.append(c)
        self.heads_w = nn.ModuleList([_OutputHead(c, 1) for c in chans])
        self.heads_s = nn.ModuleList([_OutputHead(c, 3) for c in chans])

    def forward(self, z: torch.Tensor) -> dict[str, list[torch.Tensor]]:
        if z.dim() != 2 or z.shape[1] != self.cfg.noise_dim:
            raise ValueError(
                f"noise must be (N, {self.cfg.noise_dim}), got {tuple(z.shape)}"
            )
        base = self.fc(z).reshape(z.shape[0], -1, 4, 4)
        joint = self.trunk(base)
        out = {"wireframe": [], "scene": []}
        for key, ups, heads in (
            ("wireframe", self.ups_w, self.heads_w),
            ("scene", self.ups_s, self.heads_s),
        ):
            feats = joint
            out[key].append(heads[0](feats))
            for up, head in zip(ups, heads[1:]):
                feats = up(feats)
                out[key].append(head(feats))
        return out

    def trunk_parameters(self):
        return list(self.fc.parameters()) + list(self.trunk.parameters())


class ScaleDiscriminator(nn.Module):
    """DCGAN-style downsampler emitting one logit per sample."""

    def __init__(self, in_channels: int, size: int, base: int = 32, seed: int = 0):
        super().__init__()
        torch.manual_seed(seed)
        layers = [
            nn.Conv2d(in_channels, base, 4, stride=2, padding=1),
            nn.LeakyReLU(0.2, inplace=True),
        ]
        c = base
        side = size // 2
        while side > 4:
            layers += [
                nn.Conv2d(c, min(c * 2, base * 8), 4, stride=2, padding=1),
                nn.BatchNorm2d(min(c * 2, base * 8)),
                nn.LeakyReLU(0.2, inplace=True),
            ]
            c = min(c * 2, base * 8)
            side //= 2
        layers.append(nn.Conv2d(c, 1, side, stride=1, padding=0))
        self.model = nn.Sequential(*layers)

    def forward(self, x):
        return self.model(x).reshape(x.shape[0])


def pixel_stats(images: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    """Per-sample channel mean and channel covariance over spatial positions.

    (N, C, H, W) -> mean (N, C) and covariance (N, C, C).
    """
    n, c, h, w = images.shape
    flat = images.reshape(n, c, h * w)
    mu = flat.mean(dim=2)
    centered = flat - mu.unsqueeze(2)
    cov = centered @ centered.transpose(1, 2) / (h * w)
    return mu, cov


def consistency_loss(
    wireframes: list[torch.Tensor],
    scenes: list[torch.Tensor],
    lambda1: float = 1.0,
    lambda2: float = 5.0,
) -> torch.Tensor:
    """Cross-scale statistic matching over both branches.

    For each adjacent scale pair (i-1, i) and each branch, adds
    ||lambda1 * mu_i - mu_{i-1}||^2 + ||lambda2 * Sigma_i - Sigma_{i-1}||^2,
    averaged over the batch. Statistics are computed per scale directly; the
    scale factors multiply the higher scale's statistics exactly as stated.
    """
    if len(wireframes) < 2 or len(scenes) < 2:
        raise ValueError("consistency loss needs outputs at two or more scales")
    total = None
    for outputs in (wireframes, scenes):
        stats = [pixel_stats(o) for o in outputs]
        for (mu_lo, cov_lo), (mu_hi, cov_hi) in zip(stats, stats[1:]):
            mu_term = ((lambda1 * mu_hi - mu_lo) ** 2).sum(dim=1)
            cov_term = ((lambda2 * cov_hi - cov_lo) ** 2).sum(dim=(1, 2))
            term = (mu_term + cov_term).mean()
            total = term if total is None else total + term
    return total


@dataclass
class JointGanReport:
    d_losses: list[float] = field(default_factory=list)
    g_adv: float = 0.0
    g_con: float = 0.0
    g_total: float = 0.0


class JointGanTrainer:
    """Alternating updates for the per-scale, per-branch discriminators and
    the shared generator. Real wireframes and images need not be paired."""

    def __init__(self, cfg: JointGanConfig):
        self.cfg = cfg
        self.generator = JointGenerator(cfg)
        self.disc_w = nn.ModuleList(
            [
                ScaleDiscriminator(1, s, cfg.base_channels, seed=cfg.seed + i)
                for i, s in enumerate(cfg.scales)
            ]
        )
        self.disc_s = nn.ModuleList(
            [
                ScaleDiscriminator(3, s, cfg.base_channels, seed=cfg.seed + 100 + i)
                for i, s in enumerate(cfg.scales)
            ]
        )
        self.opt_g = torch.optim.Adam(self.generator.parameters(), lr=cfg.lr, betas=(0.5, 0.999))
        self.opt_d = torch.optim.Adam(
            list(self.disc_w.parameters()) + list(self.disc_s.parameters()),
            lr=cfg.lr,
            betas=(0.5, 0.999),
        )
        self.step_count = 0

    @staticmethod
    def _scale_pyramid(images: torch.Tensor, scales: tuple[int, ...]) -> list[torch.Tensor]:
        return [
            images
            if images.shape[-1] == s
            else F.interpolate(images, size=(s, s), mode="area")
            for s in scales
        ]

    def train_step(
        self,
        real_wireframes: torch.Tensor,
        real_scenes: torch.Tensor,
        z: torch.Tensor,
    ) -> JointGanReport:
        """One discriminator pass (adversarial loss only) then one generator
        pass (adversarial sum + alpha_con * consistency)."""
        cfg = self.cfg
        self.generator.train()
        fake = self.generator(z)
        reals_w = self._scale_pyramid(real_wireframes, cfg.scales)
        reals_s = self._scale_pyramid(real_scenes, cfg.scales)

        d_losses = []
        d_total = None
        for i in range(len(cfg.scales)):
            for disc, real, fake_out in (
                (self.disc_w[i], reals_w[i], fake["wireframe"][i]),
                (self.disc_s[i], reals_s[i], fake["scene"][i]),
            ):
                real_logit = disc(real)
                fake_logit = disc(fake_out.detach())
                loss = F.softplus(-real_logit).mean() + F.softplus(fake_logit).mean()
                d_losses.append(float(loss.detach()))
                d_total = loss if d_total is None else d_total + loss
        self.opt_d.zero_grad(set_to_none=True)
        d_total.backward()
        self.opt_d.step()

        g_adv = None
        for i in range(len(cfg.scales)):
            for disc, fake_out in (
                (self.disc_w[i], fake["wireframe"][i]),
                (self.disc_s[i], fake["scene"][i]),
            ):
                term = F.softplus(-disc(fake_out)).mean()  # non-saturating
                g_adv = term if g_adv is None else g_adv + term
        g_con = consistency_loss(fake["wireframe"], fake["scene"], cfg.lambda1, cfg.lambda2)
        g_total = g_adv + cfg.alpha_con * g_con
        self.opt_g.zero_grad(set_to_none=True)
        g_total.backward()
        self.opt_g.step()
        self.step_count += 1

        report = JointGanReport(
            d_losses=d_losses,
            g_adv=float(g_adv.detach()),
            g_con=float(g_con.detach()),
            g_total=float(g_total.detach()),
        )
        for v in [report.g_adv, report.g_con, report.g_total, *report.d_losses]:
            if not torch.isfinite(torch.tensor(v)):
                raise RuntimeError(f"non-finite joint-GAN loss: {report}")
        return report

    @torch.no_grad()
    def sample(self, n: int, seed: int = 0) -> dict[str, list[torch.Tensor]]:
        self.generator.eval()
        gen = torch.Generator().manual_seed(seed)
        z = torch.randn(n, self.cfg.noise_dim, generator=gen)
        return self.generator(z)
