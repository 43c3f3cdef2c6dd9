"""Final refinement of the deblurred image: ringing clip, then contrast stretch."""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .errors import ShapeMismatchError
from .imgio import as_image

DEFAULT_RINGING_RADIUS = 16


@dataclass
class PostprocessParams:
    stretch_low_percentile: float = 1.0
    stretch_high_percentile: float = 99.0
    ringing_guide_blend: float = 1.0
    # None: use the deblur PSF radius (16 for a 33-pixel kernel)
    ringing_radius: Optional[int] = None
    enable_stretch: bool = True
    enable_ringing: bool = True

    def __post_init__(self):
        if not 0.0 <= self.stretch_low_percentile < self.stretch_high_percentile <= 100.0:
            raise ValueError("need 0 <= stretch_low_percentile < stretch_high_percentile <= 100")
        if not 0.0 <= self.ringing_guide_blend <= 1.0:
            raise ValueError("ringing_guide_blend must lie in [0, 1]")
        if self.ringing_radius is not None and self.ringing_radius < 0:
            raise ValueError("ringing_radius must be >= 0")


def contrast_stretch(img, low_pct=1.0, high_pct=99.0):
    """Map the ``low_pct``/``high_pct`` percentiles to 0/1 and clamp.

    Images whose percentile range is below 1e-6 are returned unchanged.
    """
    if not low_pct < high_pct:
        raise ValueError(f"low percentile {low_pct} must be below high percentile {high_pct}")
    img = as_image(img)
    p_low, p_high = np.percentile(img, [low_pct, high_pct])
    if p_high - p_low < 1e-6:
        return img.copy()
    return np.clip((img - p_low) / (p_high - p_low), 0.0, 1.0)


def guide_envelope(guide, radius):
    """Local minimum and maximum of ``guide`` over ``(2r+1)^2`` windows."""
    guide = as_image(guide, "guide")
    return kernels.min_filter(guide, radius), kernels.max_filter(guide, radius)


def suppress_ringing(deblurred, guide, blend=1.0, radius=DEFAULT_RINGING_RADIUS):
    """Pull values that overshoot the guide's local envelope back towards it.

    With ``m``/``M`` the local min/max of ``guide``, the overshoot of ``v`` is
    ``max(0, v - M) + min(0, v - m)`` and the output is ``v - blend * overshoot``.
    Values inside the envelope are untouched.
    """
    deblurred = as_image(deblurred, "deblurred")
    guide = as_image(guide, "guide")
    if deblurred.shape != guide.shape:
        raise ShapeMismatchError(f"deblurred {deblurred.shape} and guide {guide.shape} differ")
    if not 0.0 <= blend <= 1.0:
        raise ValueError("blend must lie in [0, 1]")
    low, high = guide_envelope(guide, radius)
    overshoot = np.maximum(0.0, deblurred - high) + np.minimum(0.0, deblurred - low)
    return deblurred - blend * overshoot


def postprocess(img, guide, params=None):
    params = params or PostprocessParams()
    img = as_image(img)
    out = img
    if params.enable_ringing:
        radius = params.ringing_radius
        if radius is None:
            radius = DEFAULT_RINGING_RADIUS
        out = suppress_ringing(out, guide, params.ringing_guide_blend, radius)
    if params.enable_stretch:
        out = contrast_stretch(out, params.stretch_low_percentile, params.stretch_high_percentile)
    return np.clip(out, 0.0, 1.0)
