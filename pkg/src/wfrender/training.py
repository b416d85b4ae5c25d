"""End-to-end optimization: alternating D/G updates, schedule, checkpoints, resume."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
import torch

from . import __version__
from .datasets import PairedSample, batch_to_tensors, resize_sample
from .losses import (
    ConvFeatureExtractor,
    LossReport,
    LossWeights,
    adversarial_losses,
    gen_loss,
    hist_loss,
    perceptual_distance,
    rec_loss,
    total_loss,
)
from .model import PatchDiscriminator, RendererConfig, WireframeRenderer
from .wireframe import AugmentParams, augment, color_histogram


class CheckpointError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    lr: float = 2e-3
    lr_decay_rate: float = 0.5
    lr_decay_every: int = 30  # epochs
    batch_size: int = 16
    max_epochs: int = 500
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adv_mode: str = "lsgan"
    guidance: bool = False
    base_channels: int = 64
    input_size: int = 256
    line_width: int = 2
    msssim_scales: int = 5
    augment: bool = True
    checkpoint_every: int = 5  # epochs
    val_every: int = 5  # epochs
    weights: LossWeights = field(default_factory=LossWeights)

    def __post_init__(self):
        # lr 0 is allowed: it gives the frozen-optimizer smoke mode
        if self.lr < 0:
            raise ValueError(f"lr must be non-negative, got {self.lr}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if isinstance(self.weights, dict):
            self.weights = LossWeights(**self.weights)

    def lr_at(self, epoch: int) -> float:
        return self.lr * self.lr_decay_rate ** (epoch // self.lr_decay_every)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)

    @classmethod
    def from_file(cls, path: str | Path) -> "TrainConfig":
        """Read a JSON or TOML config file."""
        path = Path(path)
        text = path.read_text()
        if path.suffix.lower() == ".toml":
            try:
                import tomllib
            except ModuleNotFoundError:
                import tomli as tomllib
            data = tomllib.loads(text)
        else:
            data = json.loads(text)
        return cls.from_dict(data)

    def renderer_config(self) -> RendererConfig:
        return RendererConfig.build(
            base_channels=self.base_channels,
            input_size=self.input_size,
            guidance=self.guidance,
            seed=self.seed,
        )


@dataclass
class TrainState:
    epoch: int = 0  # next epoch to run
    global_step: int = 0
    best_val: float = float("inf")


def batch_histograms(samples: list[PairedSample]) -> torch.Tensor:
    hists = np.stack([color_histogram(s.scene) for s in samples]).astype(np.float32)
    return torch.from_numpy(hists)


# model-structural config keys that must match between a checkpoint and the
# trainer loading it
_STRUCTURAL_KEYS = ("base_channels", "input_size", "guidance", "adv_mode", "line_width")


class Trainer:
    """Owns the renderer, the patch discriminator, and their two optimizers.

    Parameter partition: the generator optimizer covers encoder + both
    decoders (with the histogram head in the scene-decoder group); the
    discriminator optimizer covers only the discriminator.
    """

    def __init__(self, config: TrainConfig, work_dir: str | Path | None = None):
        self.config = config
        self.work_dir = Path(work_dir) if work_dir is not None else None
        torch.manual_seed(config.seed)
        self.model = WireframeRenderer(config.renderer_config())
        self.discriminator = PatchDiscriminator(config.renderer_config().discriminator)
        self.extractor = ConvFeatureExtractor(seed=config.seed)
        betas = (config.adam_beta1, config.adam_beta2)
        gen_params = (
            self.model.encoder_parameters()
            + self.model.wireframe_decoder_parameters()
            + self.model.scene_decoder_parameters()
        )
        self.opt_g = torch.optim.Adam(gen_params, lr=config.lr, betas=betas)
        self.opt_d = torch.optim.Adam(self.discriminator.parameters(), lr=config.lr, betas=betas)
        self.state = TrainState()

    # ------------------------------------------------------------------
    # single step

    def set_lr(self, lr: float) -> None:
        for opt in (self.opt_g, self.opt_d):
            for group in opt.param_groups:
                group["lr"] = lr

    def train_step(
        self,
        x: torch.Tensor,
        y: torch.Tensor,
        h: torch.Tensor | None = None,
    ) -> LossReport:
        """One discriminator update, then one generator update.

        The discriminator sees (x, y) as real and the detached generated pair
        as fake. Reported values are post-forward, pre-update for each phase.
        Aborts on non-finite losses with a dump of the term magnitudes.
        """
        cfg = self.config
        self.model.train()
        self.discriminator.train()
        if cfg.guidance and h is None:
            raise ValueError("guidance training requires histogram inputs")

        e = self.model.encode(x, h if cfg.guidance else None)
        x_hat = self.model.decode_wireframe(e)
        if cfg.guidance:
            y_hat, feats = self.model.decode_scene(e, return_features=True)
            h_hat = self.model.reconstruct_histogram(feats)
        else:
            y_hat = self.model.decode_scene(e)
            h_hat = None

        # discriminator phase (generated pair detached)
        real_scores = self.discriminator(x, y)
        fake_scores = self.discriminator(x_hat.detach(), y_hat.detach())
        d_adv, _ = adversarial_losses(real_scores, fake_scores, cfg.adv_mode)
        d_objective = cfg.weights.lam * d_adv
        self.opt_d.zero_grad(set_to_none=True)
        d_objective.backward()
        self.opt_d.step()

        # generator phase (fresh scores through the updated discriminator)
        fake_scores_g = self.discriminator(x_hat, y_hat)
        _, g_adv = adversarial_losses(real_scores.detach(), fake_scores_g, cfg.adv_mode)
        rec, rec_parts = rec_loss(x, x_hat, cfg.weights, cfg.msssim_scales)
        gen, gen_parts = gen_loss(y, y_hat, self.extractor, cfg.weights)
        g_objective = rec + gen + cfg.weights.lam * g_adv
        hist_term = torch.zeros(())
        if cfg.guidance:
            hist_term = hist_loss(h, h_hat)
            g_objective = g_objective + cfg.weights.hist_weight * hist_term
        self.opt_g.zero_grad(set_to_none=True)
        g_objective.backward()
        self.opt_g.step()

        report = total_loss(
            float(rec.detach()),
            float(gen.detach()),
            float(g_adv.detach()),
            float(d_adv.detach()),
            cfg.weights,
            hist=float(hist_term.detach()),
            components={**rec_parts, **gen_parts},
        )
        report.step = self.state.global_step
        report.epoch = self.state.epoch
        self.state.global_step += 1
        values = asdict(report)
        if not all(np.isfinite(v) for k, v in values.items() if isinstance(v, float)):
            raise RuntimeError(f"non-finite loss encountered; term magnitudes: {values}")
        return report

    # ------------------------------------------------------------------
    # full runs

    def _prepare(self, sample: PairedSample, epoch: int, idx: int) -> PairedSample:
        cfg = self.config
        if cfg.augment:
            rng = np.random.default_rng([cfg.seed, epoch, idx])
            resize_to = max(round(cfg.input_size * 307 / 256), cfg.input_size)
            params = AugmentParams(
                resize_to=resize_to, crop_to=cfg.input_size, line_width=cfg.line_width
            )
            return augment(sample, params, rng)
        if sample.wireframe_raster.shape[0] != cfg.input_size:
            return resize_sample(sample, cfg.input_size, cfg.line_width)
        return sample

    def _step_batch(self, samples: list[PairedSample]) -> LossReport:
        x, y = batch_to_tensors(samples)
        h = batch_histograms(samples) if self.config.guidance else None
        return self.train_step(x, y, h)

    def evaluate_perceptual(self, samples: list[PairedSample]) -> float:
        """Mean perceptual distance between generated and real scenes."""
        self.model.eval()
        vals = []
        with torch.no_grad():
            for s in samples:
                s = (
                    resize_sample(s, self.config.input_size, self.config.line_width)
                    if s.wireframe_raster.shape[0] != self.config.input_size
                    else s
                )
                x, y = batch_to_tensors([s])
                h = batch_histograms([s]) if self.config.guidance else None
                e = self.model.encode(x, h)
                y_hat = self.model.decode_scene(e)
                vals.append(float(perceptual_distance(y, y_hat, self.extractor)))
        return float(np.mean(vals))

    def fit(
        self,
        train_samples: list[PairedSample],
        val_samples: list[PairedSample] | None = None,
    ) -> list[Path]:
        """Train from the current state to max_epochs; returns checkpoint paths.

        lr(epoch) = lr * decay_rate ** floor(epoch / decay_every). Batch
        composition and augmentation depend only on (seed, epoch), so an
        interrupted run resumed from its last checkpoint continues the exact
        trajectory without repeating steps.
        """
        if not train_samples:
            raise ValueError("training dataset is empty")
        cfg = self.config
        log_path = self.work_dir / "metrics.jsonl" if self.work_dir else None
        if self.work_dir:
            self.work_dir.mkdir(parents=True, exist_ok=True)
        written = []
        for epoch in range(self.state.epoch, cfg.max_epochs):
            self.state.epoch = epoch
            self.set_lr(cfg.lr_at(epoch))
            order = np.random.default_rng([cfg.seed, epoch]).permutation(len(train_samples))
            log_fh = open(log_path, "a") if log_path else None
            try:
                for start in range(0, len(order), cfg.batch_size):
                    idxs = order[start : start + cfg.batch_size]
                    batch = [
                        self._prepare(train_samples[i], epoch, int(i)) for i in idxs
                    ]
                    report = self._step_batch(batch)
                    if log_fh:
                        log_fh.write(report.to_json_line() + "\n")
            finally:
                if log_fh:
                    log_fh.close()
            self.state.epoch = epoch + 1
            if self.work_dir and (
                (epoch + 1) % cfg.checkpoint_every == 0 or epoch + 1 == cfg.max_epochs
            ):
                path = self.work_dir / f"ckpt_e{epoch + 1:04}.bin"
                self.save_checkpoint(path)
                written.append(path)
            if val_samples and (epoch + 1) % cfg.val_every == 0:
                score = self.evaluate_perceptual(val_samples)
                if score < self.state.best_val:
                    self.state.best_val = score
                    if self.work_dir:
                        best = self.work_dir / "best.bin"
                        self.save_checkpoint(best)
                        if best not in written:
                            written.append(best)
        return written

    # ------------------------------------------------------------------
    # checkpoints

    def save_checkpoint(self, path: str | Path) -> Path:
        """Write the weight archive plus a JSON sidecar with config + version."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        torch.save(
            {
                "model": self.model.state_dict(),
                "discriminator": self.discriminator.state_dict(),
                "opt_g": self.opt_g.state_dict(),
                "opt_d": self.opt_d.state_dict(),
                "state": asdict(self.state),
            },
            path,
        )
        sidecar = {
            "version": __version__,
            "train_config": self.config.to_dict(),
            "model_config": self.config.renderer_config().to_dict(),
        }
        Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=2))
        return path

    @staticmethod
    def read_sidecar(path: str | Path) -> dict:
        sidecar_path = Path(str(path) + ".json")
        if not sidecar_path.is_file():
            raise CheckpointError(f"checkpoint sidecar not found: {sidecar_path}")
        sidecar = json.loads(sidecar_path.read_text())
        if sidecar.get("version") != __version__:
            raise CheckpointError(
                f"checkpoint version {sidecar.get('version')!r} does not match "
                f"code version {__version__!r}"
            )
        return sidecar

    @classmethod
    def load_checkpoint(
        cls,
        path: str | Path,
        expect_config: TrainConfig | None = None,
        work_dir: str | Path | None = None,
    ) -> "Trainer":
        """Restore a trainer. With expect_config given, every model-structural
        key must match the archive; the first divergent key is named."""
        path = Path(path)
        sidecar = cls.read_sidecar(path)
        config = TrainConfig.from_dict(sidecar["train_config"])
        if expect_config is not None:
            for key in _STRUCTURAL_KEYS:
                ours = getattr(expect_config, key)
                theirs = getattr(config, key)
                if ours != theirs:
                    raise CheckpointError(
                        f"config mismatch on {key!r}: checkpoint has {theirs!r}, "
                        f"expected {ours!r}"
                    )
            config = expect_config
        trainer = cls(config, work_dir=work_dir)
        blob = torch.load(path, weights_only=True)
        trainer.model.load_state_dict(blob["model"])
        trainer.discriminator.load_state_dict(blob["discriminator"])
        trainer.opt_g.load_state_dict(blob["opt_g"])
        trainer.opt_d.load_state_dict(blob["opt_d"])
        trainer.state = TrainState(**blob["state"])
        return trainer


def load_model(path: str | Path) -> tuple[WireframeRenderer, TrainConfig, dict]:
    """Inference-only load: the renderer in eval mode plus config and sidecar."""
    sidecar = Trainer.read_sidecar(path)
    config = TrainConfig.from_dict(sidecar["train_config"])
    model = WireframeRenderer(RendererConfig.from_dict(sidecar["model_config"]))
    blob = torch.load(Path(path), weights_only=True)
    model.load_state_dict(blob["model"])
    model.eval()
    return model, config, sidecar
