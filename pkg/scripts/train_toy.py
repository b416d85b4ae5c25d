#!/usr/bin/env python3
"""Overfit the renderer on a small procedural room-box set and report
reconstruction quality. Desk-scale sanity experiment; finishes on a CPU.
"""

import argparse
import time

import numpy as np
import torch

from wfrender.datasets import batch_to_tensors
from wfrender.toydata import make_toy_samples
from wfrender.training import TrainConfig, Trainer


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=500)
    ap.add_argument("--n-samples", type=int, default=8)
    ap.add_argument("--size", type=int, default=128)
    ap.add_argument("--base-channels", type=int, default=16)
    ap.add_argument("--lr", type=float, default=5e-4, help="fallback profile rate")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default=None, help="optional checkpoint path")
    args = ap.parse_args()

    cfg = TrainConfig(
        input_size=args.size,
        base_channels=args.base_channels,
        batch_size=args.n_samples,
        augment=False,
        msssim_scales=3 if args.size < 176 else 5,
        lr=args.lr,
        adam_beta1=0.5,
        seed=args.seed,
    )
    trainer = Trainer(cfg)
    samples = make_toy_samples(args.n_samples, seed=args.seed, size=args.size)
    x, y = batch_to_tensors(samples)

    start = time.time()
    report = None
    for step in range(args.steps):
        report = trainer.train_step(x, y)
        if step % 50 == 0 or step == args.steps - 1:
            print(
                f"step {step:4d}  rec_l1 {report.rec_l1:.4f}  rec_msssim {report.rec_msssim:.4f}  "
                f"gen_l1 {report.gen_l1:.4f}  adv_g {report.adv_g:.3f}  adv_d {report.adv_d:.3f}"
            )

    trainer.model.eval()
    with torch.no_grad():
        x_hat = trainer.model.decode_wireframe(trainer.model.encode(x))
    ious = []
    for i in range(len(samples)):
        pred = x_hat[i, 0].numpy() > 0
        gt = x[i, 0].numpy() > 0
        ious.append(np.logical_and(pred, gt).sum() / max(np.logical_or(pred, gt).sum(), 1))
    print(
        f"done in {time.time() - start:.0f}s: rec_l1 {report.rec_l1:.4f}, "
        f"gen_l1 {report.gen_l1:.4f}, mean wireframe IoU {np.mean(ious):.3f}"
    )
    if args.out:
        path = trainer.save_checkpoint(args.out)
        print(f"checkpoint written to {path}")


if __name__ == "__main__":
    main()
