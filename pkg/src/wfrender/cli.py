"""Operator command line: train, evaluate, render, dataset-check, serve, plus
toy-data and joint-GAN utilities.

Flag names mirror TrainConfig fields in kebab-case; a JSON/TOML config file
provides defaults that individual flags override. Exit codes: 0 success,
1 runtime failure (message on stderr), 2 usage error.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


@click.group()
@click.version_option(__version__)
def main():
    """Wireframe-to-image translation toolkit."""


def _train_config(config_path, overrides):
    from .training import TrainConfig

    cfg = TrainConfig.from_file(config_path) if config_path else TrainConfig()
    fields = {k: v for k, v in overrides.items() if v is not None}
    if fields:
        d = cfg.to_dict()
        d.update(fields)
        cfg = TrainConfig.from_dict(d)
    return cfg


_WEIGHT_FLAGS = ("alpha_w", "beta_w", "alpha_s", "beta_s", "lam", "hist_weight")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--dataset", "dataset_root", type=click.Path(file_okay=False), required=True)
@click.option("--out", "work_dir", type=click.Path(file_okay=False), default="runs/train")
@click.option("--lr", type=float, default=None)
@click.option("--lr-decay-rate", type=float, default=None)
@click.option("--lr-decay-every", type=int, default=None)
@click.option("--batch-size", type=int, default=None)
@click.option("--max-epochs", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--adam-beta1", type=float, default=None)
@click.option("--adam-beta2", type=float, default=None)
@click.option("--adv-mode", type=click.Choice(["lsgan", "bce"]), default=None)
@click.option("--base-channels", type=int, default=None)
@click.option("--input-size", type=int, default=None)
@click.option("--line-width", type=int, default=None)
@click.option("--msssim-scales", type=int, default=None)
@click.option("--checkpoint-every", type=int, default=None)
@click.option("--val-every", type=int, default=None)
@click.option("--guidance/--no-guidance", default=None)
@click.option("--augment/--no-augment", default=None)
@click.option("--alpha-w", type=float, default=None)
@click.option("--beta-w", type=float, default=None)
@click.option("--alpha-s", type=float, default=None)
@click.option("--beta-s", type=float, default=None)
@click.option("--lam", type=float, default=None)
@click.option("--hist-weight", type=float, default=None)
@click.option("--resume", type=click.Path(exists=True, dir_okay=False), default=None)
def train(config_path, dataset_root, work_dir, resume, **overrides):
    """Train the wireframe-to-image model on a dataset directory."""
    from .datasets import DatasetError, load_dataset
    from .training import Trainer

    try:
        weight_overrides = {
            k: overrides.pop(k) for k in _WEIGHT_FLAGS if overrides.get(k) is not None
        }
        for k in _WEIGHT_FLAGS:
            overrides.pop(k, None)
        cfg = _train_config(config_path, overrides)
        if weight_overrides:
            from dataclasses import asdict

            from .losses import LossWeights

            cfg.weights = LossWeights(**{**asdict(cfg.weights), **weight_overrides})
        try:
            samples = load_dataset(dataset_root, "train", cfg.line_width)
        except (DatasetError, FileNotFoundError) as e:
            _fail(str(e))
        val = None
        try:
            val = load_dataset(dataset_root, "test", cfg.line_width)
        except Exception:
            pass  # validation split is optional
        if resume:
            trainer = Trainer.load_checkpoint(resume, expect_config=cfg, work_dir=work_dir)
        else:
            trainer = Trainer(cfg, work_dir=work_dir)
        written = trainer.fit(samples, val)
        click.echo(f"finished at epoch {trainer.state.epoch}; checkpoints: "
                   f"{', '.join(str(p) for p in written) or 'none'}")
    except SystemExit:
        raise
    except Exception as e:
        _fail(str(e))


@main.command("dataset-check")
@click.argument("root", type=click.Path(exists=True, file_okay=False))
@click.option("--split", default="train")
def dataset_check(root, split):
    """Validate a dataset directory; lists orphan ids on failure."""
    from .datasets import DatasetError, check_dataset

    try:
        ids = check_dataset(root, split)
    except DatasetError as e:
        _fail(str(e))
    click.echo(f"ok: {len(ids)} samples in split {split!r}")


@main.command()
@click.option("--checkpoint", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--wireframe", "wireframe_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--reference", type=click.Path(exists=True, dir_okay=False), default=None,
              help="reference image whose color histogram guides the rendering")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default="renders")
def render(checkpoint, wireframe_path, reference, out_dir):
    """Render a wireframe JSON file to a scene PNG + reconstructed wireframe PNG."""
    import torch

    from .datasets import load_image
    from .training import load_model
    from .wireframe import color_histogram, parse_wireframe, rasterize

    try:
        model, cfg, _ = load_model(checkpoint)
        wf = parse_wireframe(Path(wireframe_path).read_bytes())
        hist = None
        if reference is not None:
            hist = color_histogram(load_image(Path(reference)))
        if cfg.guidance and hist is None:
            _fail("this checkpoint requires --reference for color guidance")
        if not cfg.guidance and hist is not None:
            _fail("this checkpoint was trained without color guidance")
        raster = rasterize(wf, cfg.input_size, cfg.line_width)
        x = torch.from_numpy(raster.transpose(2, 0, 1)[None].copy())
        h = torch.from_numpy(hist.astype(np.float32)[None]) if hist is not None else None
        with torch.no_grad():
            e = model.encode(x, h)
            rec = model.decode_wireframe(e)[0].numpy().transpose(1, 2, 0)
            scene = model.decode_scene(e)[0].numpy().transpose(1, 2, 0)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        stem = Path(wireframe_path).stem
        _save_png(scene, out / f"{stem}_scene.png")
        _save_png(rec, out / f"{stem}_wireframe.png")
        click.echo(f"wrote {out / f'{stem}_scene.png'} and {out / f'{stem}_wireframe.png'}")
    except SystemExit:
        raise
    except Exception as e:
        _fail(str(e))


def _save_png(img: np.ndarray, path: Path) -> None:
    from PIL import Image

    arr = ((img.astype(np.float64) + 1.0) / 2.0 * 255.0).round().clip(0, 255).astype(np.uint8)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    Image.fromarray(arr).save(path)


@main.command()
@click.option("--gen-dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--real-dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--annotations", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--detector-dir", type=click.Path(exists=True, file_okay=False), default=None)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default="reports")
def evaluate(gen_dir, real_dir, annotations, detector_dir, out_dir):
    """Compute FID / perceptual / SSIM / sAP over directories of images."""
    from .metrics import MetricError, evaluate_run

    try:
        report = evaluate_run(gen_dir, real_dir, annotations, detector_dir, out_dir)
    except MetricError as e:
        _fail(str(e))
    click.echo(json.dumps(report, indent=2))


@main.command()
@click.option("--checkpoint", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
@click.option("--max-inflight", type=int, default=4)
def serve(checkpoint, host, port, max_inflight):
    """Run the HTTP render service (WR_CHECKPOINT overrides --checkpoint)."""
    from .service import serve as run_service

    try:
        run_service(checkpoint, host=host, port=port, max_inflight=max_inflight)
    except Exception as e:
        _fail(str(e))


@main.command("make-toy")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@click.option("--n", type=int, default=8)
@click.option("--seed", type=int, default=0)
@click.option("--size", type=int, default=256)
@click.option("--split", default="train")
def make_toy(out_dir, n, seed, size, split):
    """Write a procedural room-box toy dataset in the standard layout."""
    from .datasets import write_dataset
    from .toydata import make_toy_samples

    samples = make_toy_samples(n, seed=seed, size=size)
    write_dataset(samples, out_dir, split=split)
    click.echo(f"wrote {n} samples to {out_dir}")


@main.command("joint-train")
@click.option("--dataset", "dataset_root", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--out", "work_dir", type=click.Path(file_okay=False), default="runs/joint")
@click.option("--steps", type=int, default=None, help="cap the number of steps (smoke runs)")
@click.option("--batch-size", type=int, default=64)
@click.option("--max-epochs", type=int, default=500)
@click.option("--base-channels", type=int, default=32)
@click.option("--noise-dim", type=int, default=100)
@click.option("--seed", type=int, default=0)
def joint_train(dataset_root, work_dir, steps, batch_size, max_epochs, base_channels, noise_dim, seed):
    """Train the noise-to-(image, wireframe) joint GAN."""
    import torch

    from .datasets import batch_to_tensors, load_dataset, resize_sample
    from .joint_gan import JointGanConfig, JointGanTrainer

    try:
        cfg = JointGanConfig(
            noise_dim=noise_dim,
            base_channels=base_channels,
            batch_size=batch_size,
            max_epochs=max_epochs,
            seed=seed,
        )
        samples = load_dataset(dataset_root, "train")
        samples = [resize_sample(s, cfg.scales[-1]) for s in samples]
        trainer = JointGanTrainer(cfg)
        work = Path(work_dir)
        work.mkdir(parents=True, exist_ok=True)
        rng = np.random.default_rng(seed)
        done = 0
        with open(work / "metrics.jsonl", "a") as log:
            for epoch in range(max_epochs):
                order = rng.permutation(len(samples))
                for start in range(0, len(order), batch_size):
                    idxs = order[start : start + batch_size]
                    # unpaired: wireframes and scenes are drawn independently
                    x, _ = batch_to_tensors([samples[i] for i in idxs])
                    _, y = batch_to_tensors([samples[i] for i in rng.permutation(idxs)])
                    z = torch.randn(len(idxs), cfg.noise_dim)
                    report = trainer.train_step(x, y, z)
                    log.write(json.dumps(report.__dict__) + "\n")
                    done += 1
                    if steps is not None and done >= steps:
                        break
                if steps is not None and done >= steps:
                    break
        torch.save(trainer.generator.state_dict(), work / "generator.bin")
        (work / "generator.bin.json").write_text(
            json.dumps({"version": __version__, "config": cfg.to_dict()}, indent=2)
        )
        click.echo(f"completed {done} steps; generator saved to {work / 'generator.bin'}")
    except SystemExit:
        raise
    except Exception as e:
        _fail(str(e))


@main.command("joint-sample")
@click.option("--generator", "gen_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default="joint_samples.png")
@click.option("--n", type=int, default=8)
@click.option("--seed", type=int, default=0)
def joint_sample(gen_path, out_path, n, seed):
    """Sample the joint GAN and write a PNG grid of (scene, wireframe) pairs."""
    import torch

    from .joint_gan import JointGanConfig, JointGenerator

    try:
        meta = json.loads(Path(str(gen_path) + ".json").read_text())
        cfg = JointGanConfig(**meta["config"])
        gen = JointGenerator(cfg)
        gen.load_state_dict(torch.load(gen_path, weights_only=True))
        gen.eval()
        rng = torch.Generator().manual_seed(seed)
        z = torch.randn(n, cfg.noise_dim, generator=rng)
        with torch.no_grad():
            out = gen(z)
        scenes = out["scene"][-1].numpy()
        frames = out["wireframe"][-1].numpy()
        size = scenes.shape[-1]
        grid = np.full((2 * size, n * size, 3), -1.0, dtype=np.float32)
        for i in range(n):
            grid[:size, i * size : (i + 1) * size] = scenes[i].transpose(1, 2, 0)
            grid[size:, i * size : (i + 1) * size] = np.repeat(
                frames[i].transpose(1, 2, 0), 3, axis=2
            )
        _save_png(grid, Path(out_path))
        click.echo(f"wrote {out_path}")
    except SystemExit:
        raise
    except Exception as e:
        _fail(str(e))


if __name__ == "__main__":
    main()
