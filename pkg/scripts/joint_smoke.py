#!/usr/bin/env python3
"""Short unpaired joint-generation run on toy data, then a sample grid."""

import argparse

import numpy as np
import torch

from wfrender.datasets import batch_to_tensors
from wfrender.joint_gan import JointGanConfig, JointGanTrainer
from wfrender.toydata import make_toy_samples


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=64)
    ap.add_argument("--n-samples", type=int, default=16)
    ap.add_argument("--batch", type=int, default=8)
    ap.add_argument("--scales", type=int, nargs="+", default=[8, 16, 32])
    ap.add_argument("--out", default="joint_grid.png")
    args = ap.parse_args()

    cfg = JointGanConfig(
        noise_dim=32,
        scales=tuple(args.scales),
        base_channels=16,
        batch_size=args.batch,
        seed=0,
    )
    trainer = JointGanTrainer(cfg)
    samples = make_toy_samples(args.n_samples, seed=0, size=cfg.scales[-1])
    x, y = batch_to_tensors(samples)
    rng = np.random.default_rng(0)
    for step in range(args.steps):
        idx = rng.permutation(args.n_samples)[: args.batch]
        pair = rng.permutation(args.n_samples)[: args.batch]  # unpaired draw
        report = trainer.train_step(x[idx], y[pair], torch.randn(args.batch, cfg.noise_dim))
        if step % 16 == 0 or step == args.steps - 1:
            print(
                f"step {step:3d}  g_adv {report.g_adv:.3f}  g_con {report.g_con:.4f}  "
                f"d mean {np.mean(report.d_losses):.3f}"
            )

    out = trainer.sample(8, seed=1)
    scenes = out["scene"][-1].numpy()
    frames = out["wireframe"][-1].numpy()
    size = scenes.shape[-1]
    grid = np.full((2 * size, 8 * size, 3), -1.0, dtype=np.float32)
    for i in range(8):
        grid[:size, i * size : (i + 1) * size] = scenes[i].transpose(1, 2, 0)
        grid[size:, i * size : (i + 1) * size] = np.repeat(frames[i].transpose(1, 2, 0), 3, axis=2)
    from PIL import Image

    arr = ((grid + 1.0) / 2.0 * 255.0).round().clip(0, 255).astype(np.uint8)
    Image.fromarray(arr).save(args.out)
    print(f"sample grid written to {args.out}")


if __name__ == "__main__":
    main()
