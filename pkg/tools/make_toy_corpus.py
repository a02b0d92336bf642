#!/usr/bin/env python3
"""Generate the checked-in toy JPEG corpus used by the acceptance suite.

100 synthetic 96x96 photographs-of-nothing: smooth two-tone gradients,
a few translucent rectangles for edges, and mild sensor noise, saved as
JPEG quality 92.  The mix is tuned so the re-encoded size curve over
qualities {10, 25, 50, 75, 90} is steep: roughly 0.18x to 0.92x of the
original size, which makes packed counts strictly decreasing and the
low-to-high compression-rate ratio comfortably above 3 under a
20-original budget.

Deterministic for a fixed seed and Pillow version.  Regenerate with:

    python3 tools/make_toy_corpus.py [--out tests/data/toy_corpus]
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np
from PIL import Image

SEED = 2024
COUNT = 100
SIDE = 96
NOISE = 0.05
SAVE_QUALITY = 92


def make_image(rng: np.random.Generator) -> Image.Image:
    yy, xx = np.mgrid[0:SIDE, 0:SIDE].astype(np.float64) / SIDE
    img = np.zeros((SIDE, SIDE, 3))
    for ch in range(3):
        lo, hi, phase = rng.uniform(0, 1, 3)
        fx, fy = rng.uniform(1, 3, 2)
        img[:, :, ch] = lo + (hi - lo) * (
            np.sin(np.pi * fx * xx + phase) ** 2 * np.cos(np.pi * fy * yy) ** 2
        )
    for _ in range(rng.integers(2, 5)):
        x0, y0 = rng.integers(0, SIDE - 8, 2)
        w, h = rng.integers(4, SIDE // 3, 2)
        img[y0 : y0 + h, x0 : x0 + w] += rng.uniform(-0.4, 0.4, 3)
    img += rng.normal(0, NOISE, img.shape)
    return Image.fromarray((np.clip(img, 0, 1) * 255).astype(np.uint8), "RGB")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--out",
        type=Path,
        default=Path(__file__).resolve().parent.parent / "tests" / "data" / "toy_corpus",
    )
    args = parser.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(SEED)
    for i in range(COUNT):
        image = make_image(rng)
        image.save(args.out / f"img{i:03d}.jpg", format="JPEG", quality=SAVE_QUALITY)
    print(f"wrote {COUNT} images to {args.out}")


if __name__ == "__main__":
    main()
