"""Sharpness ranking and fusion of the sharpest registered frames."""

import csv
import math
from dataclasses import dataclass

import numpy as np

from .imgio import as_image, as_sequence
from .registration import build_reference


@dataclass(frozen=True)
class SharpnessScore:
    frame_index: int
    score: float


@dataclass
class SelectionParams:
    """How many frames survive selection.

    ``K = max(min_keep, round(keep_fraction * N))``, capped at ``N``.
    """

    keep_fraction: float = 0.5
    min_keep: int = 8

    def __post_init__(self):
        if not 0.0 < self.keep_fraction <= 1.0:
            raise ValueError(f"keep_fraction must lie in (0, 1], got {self.keep_fraction}")
        if self.min_keep < 1:
            raise ValueError(f"min_keep must be >= 1, got {self.min_keep}")

    def n_keep(self, n_frames):
        k = max(self.min_keep, math.floor(self.keep_fraction * n_frames + 0.5))
        return min(k, n_frames)


def sobel_xy(img):
    """Sobel responses on the interior pixels, shape ``(h-2, w-2)`` each."""
    a = img
    gx = (a[:-2, 2:] + 2.0 * a[1:-1, 2:] + a[2:, 2:]) - (a[:-2, :-2] + 2.0 * a[1:-1, :-2] + a[2:, :-2])
    gy = (a[2:, :-2] + 2.0 * a[2:, 1:-1] + a[2:, 2:]) - (a[:-2, :-2] + 2.0 * a[:-2, 1:-1] + a[:-2, 2:])
    return gx, gy


def sharpness(img):
    """Tenengrad energy: mean of ``Gx**2 + Gy**2`` over interior pixels.

    ``Gx`` and ``Gy`` are 3x3 Sobel responses; the one-pixel border where the
    operator is undefined is excluded.
    """
    img = as_image(img)
    if img.shape[0] < 3 or img.shape[1] < 3:
        raise ValueError(f"sharpness needs an image of at least 3x3, got {img.shape}")
    gx, gy = sobel_xy(img)
    return float(np.mean(gx * gx + gy * gy))


def rank_frames(seq):
    """Score every frame and sort sharpest first (ties: lower index first)."""
    seq = as_sequence(seq)
    scores = [SharpnessScore(i, sharpness(f)) for i, f in enumerate(seq)]
    return sorted(scores, key=lambda s: (-s.score, s.frame_index))


def select_and_average(seq, params=None):
    """Average the ``K`` sharpest frames of ``seq`` into one fused image."""
    params = params or SelectionParams()
    seq = as_sequence(seq)
    ranked = rank_frames(seq)
    k = params.n_keep(len(seq))
    keep = sorted(s.frame_index for s in ranked[:k])
    return build_reference(seq[keep])


def write_scores_csv(scores, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame_index", "score"])
        for s in scores:
            writer.writerow([s.frame_index, repr(s.score)])
