"""Synthetic test charts."""

import numpy as np
from scipy import ndimage

from .rng import Rng


def checkerboard(size=256, cell=16, low=0.0, high=1.0):
    yy, xx = np.mgrid[0:size, 0:size]
    board = ((yy // cell + xx // cell) % 2).astype(np.float64)
    return low + (high - low) * board


def smooth_texture(size=256, sigma=2.0, seed=0):
    """Gaussian-filtered white noise rescaled to ``[0, 1]``."""
    noise = Rng(seed).normal((size, size))
    tex = ndimage.gaussian_filter(noise, sigma, mode="wrap")
    return (tex - tex.min()) / (tex.max() - tex.min())


def textured_checkerboard(size=256, cell=32, seed=0, texture_weight=0.35):
    """Checkerboard with a fine random texture, values in ``[0.05, 0.95]``."""
    board = checkerboard(size, cell)
    tex = smooth_texture(size, 1.5, seed)
    chart = (1.0 - texture_weight) * board + texture_weight * tex
    return 0.05 + 0.9 * chart


def test_corpus(n=20, size=96, seed=0):
    """``n`` varied textured images used for sharpness property checks."""
    rng = Rng(seed)
    images = []
    for i in range(n):
        kind = i % 4
        s = int(rng.integers_below(1 << 30))
        if kind == 0:
            images.append(textured_checkerboard(size, cell=8 + 4 * (i % 3), seed=s))
        elif kind == 1:
            images.append(smooth_texture(size, 0.8 + 0.5 * (i % 3), seed=s))
        elif kind == 2:
            images.append(checkerboard(size, 6 + 2 * (i % 5), 0.1, 0.9))
        else:
            yy, xx = np.mgrid[0:size, 0:size] / size
            f = 3 + i % 7
            img = 0.5 + 0.4 * np.sin(2 * np.pi * f * xx) * np.cos(2 * np.pi * (f - 1) * yy)
            images.append(0.8 * img + 0.2 * smooth_texture(size, 1.0, seed=s))
    return images
