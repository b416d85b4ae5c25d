#!/usr/bin/env python3
"""Compare high-frequency FFT energy of the sub-pixel decoder against a
transpose-convolution baseline on random latent codes.

Diagnostic only: transpose convolutions are known to concentrate energy in
checkerboard bands; the sub-pixel upsampling path should not.
"""

import argparse

import torch
import torch.nn as nn

from wfrender.model import Decoder, DecoderConfig


class TransposeConvBaseline(nn.Module):
    def __init__(self, latent_channels: int, base: int = 8, ups: int = 2):
        super().__init__()
        layers = []
        c = latent_channels
        for _ in range(ups):
            layers += [
                nn.ConvTranspose2d(c, max(c // 2, base), 4, stride=2, padding=1),
                nn.ReLU(inplace=True),
            ]
            c = max(c // 2, base)
        layers += [nn.Conv2d(c, 1, 7, padding=3), nn.Tanh()]
        self.body = nn.Sequential(*layers)

    def forward(self, e):
        return self.body(e)


def band_energy(img: torch.Tensor, band: int = 5) -> float:
    spectrum = torch.fft.rfft2(img.double()).abs() ** 2
    return float(spectrum[..., -band:, :].mean() + spectrum[..., :, -band:].mean())


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--batch", type=int, default=8)
    ap.add_argument("--latent-channels", type=int, default=32)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    torch.manual_seed(args.seed)
    subpixel = Decoder(DecoderConfig(out_channels=1, base_channels=8, upsamples=2),
                       args.latent_channels).eval()
    baseline = TransposeConvBaseline(args.latent_channels).eval()
    e = torch.randn(args.batch, args.latent_channels, 16, 16)
    with torch.no_grad():
        e_sub = band_energy(subpixel(e))
        e_tc = band_energy(baseline(e))
    print(f"nyquist-band energy  sub-pixel: {e_sub:.4e}")
    print(f"nyquist-band energy  transpose: {e_tc:.4e}")
    print(f"ratio (transpose / sub-pixel): {e_tc / max(e_sub, 1e-12):.2f}")


if __name__ == "__main__":
    main()
