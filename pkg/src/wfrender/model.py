"""Joint structure-appearance network.

One shared encoder maps a rasterized wireframe (optionally concatenated with a
projected color-histogram plane) to a 16x-downsampled latent code; two
mirror-image decoders reconstruct the wireframe and synthesize the scene from
that code; a conditional patch discriminator scores (wireframe, scene) pairs.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import torch
import torch.nn as nn


@dataclass
class EncoderConfig:
    in_channels: int = 1
    base_channels: int = 64
    downsamples: int = 4
    residual_blocks: int = 4
    norm: str = "batch"
    leaky_slope: float = 0.2
    input_size: int = 256

    def channel_schedule(self) -> list[int]:
        """Output channels of the stride-1 block and each downsample block."""
        cap = self.base_channels * 8
        return [min(self.base_channels * 2**i, cap) for i in range(self.downsamples + 1)]

    @property
    def latent_channels(self) -> int:
        return self.channel_schedule()[-1]

    @property
    def latent_size(self) -> int:
        return self.input_size // 2**self.downsamples


@dataclass
class DecoderConfig:
    out_channels: int = 3
    base_channels: int = 64
    upsamples: int = 4
    norm: str = "batch"


@dataclass
class DiscriminatorConfig:
    in_channels: int = 4
    base_channels: int = 64
    stride2_layers: int = 3  # canonical 70x70 receptive-field patch layout
    leaky_slope: float = 0.2
    norm: str = "batch"


@dataclass
class GuidanceConfig:
    enabled: bool = False
    histogram_dim: int = 768  # 256 bins x 3 channels


@dataclass
class RendererConfig:
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    wireframe_decoder: DecoderConfig = field(default_factory=lambda: DecoderConfig(out_channels=1))
    scene_decoder: DecoderConfig = field(default_factory=lambda: DecoderConfig(out_channels=3))
    discriminator: DiscriminatorConfig = field(default_factory=DiscriminatorConfig)
    guidance: GuidanceConfig = field(default_factory=GuidanceConfig)
    seed: int = 0

    def __post_init__(self):
        if self.encoder.downsamples != self.wireframe_decoder.upsamples:
            raise ValueError("wireframe decoder upsample count must match encoder downsamples")
        if self.encoder.downsamples != self.scene_decoder.upsamples:
            raise ValueError("scene decoder upsample count must match encoder downsamples")

    @classmethod
    def build(cls, base_channels: int = 64, input_size: int = 256, guidance: bool = False, seed: int = 0):
        in_ch = 2 if guidance else 1
        return cls(
            encoder=EncoderConfig(in_channels=in_ch, base_channels=base_channels, input_size=input_size),
            wireframe_decoder=DecoderConfig(out_channels=1, base_channels=base_channels),
            scene_decoder=DecoderConfig(out_channels=3, base_channels=base_channels),
            discriminator=DiscriminatorConfig(base_channels=base_channels),
            guidance=GuidanceConfig(enabled=guidance),
            seed=seed,
        )

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RendererConfig":
        return cls(
            encoder=EncoderConfig(**d["encoder"]),
            wireframe_decoder=DecoderConfig(**d["wireframe_decoder"]),
            scene_decoder=DecoderConfig(**d["scene_decoder"]),
            discriminator=DiscriminatorConfig(**d["discriminator"]),
            guidance=GuidanceConfig(**d["guidance"]),
            seed=d.get("seed", 0),
        )


def _norm(kind: str, channels: int) -> nn.Module:
    if kind == "batch":
        return nn.BatchNorm2d(channels)
    if kind == "instance":
        return nn.InstanceNorm2d(channels, affine=True)
    if kind == "none":
        return nn.Identity()
    raise ValueError(f"unknown norm kind {kind!r}")


def init_weights(module: nn.Module, std: float = 0.02) -> None:
    """Gaussian conv init; keeps first-step decoder outputs out of tanh saturation."""
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.Linear)):
            nn.init.normal_(m.weight, 0.0, std)
            if m.bias is not None:
                nn.init.zeros_(m.bias)
        elif isinstance(m, nn.BatchNorm2d):
            nn.init.normal_(m.weight, 1.0, std)
            nn.init.zeros_(m.bias)


class ResidualBlock(nn.Module):
    def __init__(self, channels: int, norm: str = "batch"):
        super().__init__()
        self.body = nn.Sequential(
            nn.ReflectionPad2d(1),
            nn.Conv2d(channels, channels, 3),
            _norm(norm, channels),
            nn.ReLU(inplace=True),
            nn.ReflectionPad2d(1),
            nn.Conv2d(channels, channels, 3),
            _norm(norm, channels),
        )

    def forward(self, x):
        return x + self.body(x)


class Encoder(nn.Module):
    """7x7 stride-1 block, four 3x3 stride-2 blocks, four residual blocks."""

    def __init__(self, cfg: EncoderConfig):
        super().__init__()
        self.cfg = cfg
        sched = cfg.channel_schedule()
        blocks = [
            nn.Sequential(
                nn.ReflectionPad2d(3),
                nn.Conv2d(cfg.in_channels, sched[0], 7, stride=1),
                _norm(cfg.norm, sched[0]),
                nn.LeakyReLU(cfg.leaky_slope, inplace=True),
            )
        ]
        for i in range(cfg.downsamples):
            blocks.append(
                nn.Sequential(
                    nn.ReflectionPad2d(1),
                    nn.Conv2d(sched[i], sched[i + 1], 3, stride=2),
                    _norm(cfg.norm, sched[i + 1]),
                    nn.LeakyReLU(cfg.leaky_slope, inplace=True),
                )
            )
        self.blocks = nn.Sequential(*blocks)
        self.residuals = nn.Sequential(
            *[ResidualBlock(sched[-1], cfg.norm) for _ in range(cfg.residual_blocks)]
        )

    def forward(self, x):
        n = self.cfg.input_size
        if x.dim() != 4 or x.shape[-2:] != (n, n):
            raise ValueError(f"encoder expects {n}x{n} input, got {tuple(x.shape)}")
        if x.shape[1] != self.cfg.in_channels:
            raise ValueError(
                f"encoder expects {self.cfg.in_channels} input channels, got {x.shape[1]}"
            )
        return self.residuals(self.blocks(x))


class SubPixelUp(nn.Module):
    """3x3 conv into 4x channels, pixel shuffle by 2, norm, ReLU."""

    def __init__(self, c_in: int, c_out: int, norm: str = "batch"):
        super().__init__()
        self.body = nn.Sequential(
            nn.ReflectionPad2d(1),
            nn.Conv2d(c_in, c_out * 4, 3),
            nn.PixelShuffle(2),
            _norm(norm, c_out),
            nn.ReLU(inplace=True),
        )

    def forward(self, x):
        return self.body(x)


class Decoder(nn.Module):
    """Four sub-pixel upsample blocks, then 7x7 conv + tanh (no norm)."""

    def __init__(self, cfg: DecoderConfig, latent_channels: int):
        super().__init__()
        self.cfg = cfg
        cap = cfg.base_channels * 8
        # mirror the encoder schedule back down to base_channels
        chans = [min(cfg.base_channels * 2**i, cap) for i in range(cfg.upsamples)][::-1]
        ups = []
        c_in = latent_channels
        for c_out in chans:
            ups.append(SubPixelUp(c_in, c_out, cfg.norm))
            c_in = c_out
        self.ups = nn.Sequential(*ups)
        self.head = nn.Sequential(
            nn.ReflectionPad2d(3),
            nn.Conv2d(c_in, cfg.out_channels, 7),
            nn.Tanh(),
        )

    def forward(self, e, return_features: bool = False):
        feats = self.ups(e)
        out = self.head(feats)
        if return_features:
            return out, feats
        return out


class PatchDiscriminator(nn.Module):
    """70x70-receptive-field conditional patch scorer.

    Three stride-2 4x4 convs (no norm on the first), one stride-1 4x4 conv,
    then a 1-channel stride-1 projection: 256x256 pairs give a 30x30 map of
    unbounded scores.
    """

    def __init__(self, cfg: DiscriminatorConfig):
        super().__init__()
        self.cfg = cfg
        b = cfg.base_channels
        layers = [
            nn.Conv2d(cfg.in_channels, b, 4, stride=2, padding=1),
            nn.LeakyReLU(cfg.leaky_slope, inplace=True),
        ]
        c_in = b
        for i in range(1, cfg.stride2_layers):
            c_out = min(b * 2**i, b * 8)
            layers += [
                nn.Conv2d(c_in, c_out, 4, stride=2, padding=1),
                _norm(cfg.norm, c_out),
                nn.LeakyReLU(cfg.leaky_slope, inplace=True),
            ]
            c_in = c_out
        c_out = min(b * 2**cfg.stride2_layers, b * 8)
        layers += [
            nn.Conv2d(c_in, c_out, 4, stride=1, padding=1),
            _norm(cfg.norm, c_out),
            nn.LeakyReLU(cfg.leaky_slope, inplace=True),
            nn.Conv2d(c_out, 1, 4, stride=1, padding=1),
        ]
        self.model = nn.Sequential(*layers)
        init_weights(self)

    def forward(self, x_raster, scene):
        if x_raster.shape[-2:] != scene.shape[-2:] or x_raster.shape[0] != scene.shape[0]:
            raise ValueError(
                f"discriminator inputs must align: {tuple(x_raster.shape)} vs {tuple(scene.shape)}"
            )
        pair = torch.cat([x_raster, scene], dim=1)
        if pair.shape[1] != self.cfg.in_channels:
            raise ValueError(
                f"discriminator expects {self.cfg.in_channels} channels, got {pair.shape[1]}"
            )
        return self.model(pair)


class GuidanceProjector(nn.Module):
    """Affine map from a flattened 256x3 histogram to one input-sized plane."""

    def __init__(self, histogram_dim: int, input_size: int):
        super().__init__()
        self.input_size = input_size
        self.proj = nn.Linear(histogram_dim, input_size * input_size)

    def forward(self, hist):
        n = hist.shape[0]
        plane = self.proj(hist.reshape(n, -1))
        return plane.reshape(n, 1, self.input_size, self.input_size)


class HistogramHead(nn.Module):
    """Reconstruct the color histogram from penultimate scene-decoder features."""

    def __init__(self, feature_channels: int, histogram_dim: int = 768):
        super().__init__()
        self.fc = nn.Linear(feature_channels, histogram_dim)

    def forward(self, feats):
        pooled = feats.mean(dim=(2, 3))
        return torch.sigmoid(self.fc(pooled)).reshape(-1, 256, 3)


class WireframeRenderer(nn.Module):
    """Encoder + wireframe/scene decoders (+ optional color-guidance branch)."""

    def __init__(self, config: RendererConfig):
        super().__init__()
        torch.manual_seed(config.seed)
        self.config = config
        self.encoder = Encoder(config.encoder)
        latent = config.encoder.latent_channels
        self.decoder_w = Decoder(config.wireframe_decoder, latent)
        self.decoder_s = Decoder(config.scene_decoder, latent)
        if config.guidance.enabled:
            if config.encoder.in_channels != 2:
                raise ValueError("guidance-enabled encoder needs in_channels = raster + plane = 2")
            self.guidance_proj = GuidanceProjector(
                config.guidance.histogram_dim, config.encoder.input_size
            )
            self.hist_head = HistogramHead(config.scene_decoder.base_channels)
        else:
            self.guidance_proj = None
            self.hist_head = None
        init_weights(self)

    def encode(self, x: torch.Tensor, guidance: torch.Tensor | None = None) -> torch.Tensor:
        if guidance is not None:
            if not self.config.guidance.enabled:
                raise RuntimeError("guidance input given but the guidance branch is disabled")
            x = torch.cat([x, self.guidance_proj(guidance)], dim=1)
        elif self.config.guidance.enabled:
            raise RuntimeError("guidance branch is enabled; a histogram input is required")
        return self.encoder(x)

    def decode_wireframe(self, e: torch.Tensor) -> torch.Tensor:
        return self.decoder_w(e)

    def decode_scene(self, e: torch.Tensor, return_features: bool = False):
        return self.decoder_s(e, return_features=return_features)

    def reconstruct_histogram(self, scene_features: torch.Tensor) -> torch.Tensor:
        if self.hist_head is None:
            raise RuntimeError("histogram reconstruction requires the guidance branch")
        return self.hist_head(scene_features)

    def forward(self, x: torch.Tensor, guidance: torch.Tensor | None = None) -> dict:
        e = self.encode(x, guidance)
        x_hat = self.decode_wireframe(e)
        out = {"latent": e, "wireframe": x_hat}
        if self.config.guidance.enabled:
            y_hat, feats = self.decode_scene(e, return_features=True)
            out["scene"] = y_hat
            out["histogram"] = self.reconstruct_histogram(feats)
        else:
            out["scene"] = self.decode_scene(e)
        return out

    # optimizer grouping: the guidance projector feeds the encoder input and
    # trains with it; the histogram head belongs to the scene-decoder group
    def encoder_parameters(self):
        params = list(self.encoder.parameters())
        if self.guidance_proj is not None:
            params += list(self.guidance_proj.parameters())
        return params

    def wireframe_decoder_parameters(self):
        return list(self.decoder_w.parameters())

    def scene_decoder_parameters(self):
        params = list(self.decoder_s.parameters())
        if self.hist_head is not None:
            params += list(self.hist_head.parameters())
        return params
