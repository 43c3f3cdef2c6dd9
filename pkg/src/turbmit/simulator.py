"""Synthetic turbulence degradation of clean images.

Parameters are drawn per sequence from three strength tiers:

========  ===========  ===============  ===================  ============
strength  probability  aperture D (m)   D/r0 choices         distance (m)
========  ===========  ===============  ===================  ============
weak      0.5          U(0.001, 0.005)  0.4, 0.8, 1.2, 1.5   U(150, 600)
medium    0.3          U(0.04, 0.1)     0.8, 1.0, 1.6        U(500, 800)
strong    0.2          U(0.1, 0.2)      1.6, 2.0, 2.4        U(1000, 1500)
========  ===========  ===============  ===================  ============

Every tier uses a 33-pixel kernel and a spatial-correlation value drawn
from {-1, -0.1, -0.5, -0.05}.

Each frame is the clean image warped by a fresh spatially correlated tilt
field, blurred by a Gaussian long-exposure PSF and corrupted with white
Gaussian noise. Tilt rms and PSF width both scale linearly with D/r0 (see
:class:`DegradationModel`); the distance is recorded but does not enter the
image formation.
"""

import math
from dataclasses import asdict, dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy import fft

from .deblur import convolve, delta_psf, gaussian_psf
from .imgio import as_image
from .registration import FlowField, warp
from .rng import Rng

STRENGTHS = ("weak", "medium", "strong")
KERNEL_SIZE = 33
CORR_CHOICES = (-1.0, -0.1, -0.5, -0.05)

TIERS = {
    "weak": {
        "probability": 0.5,
        "aperture_d": (0.001, 0.005),
        "d_over_r0": (0.4, 0.8, 1.2, 1.5),
        "distance": (150.0, 600.0),
    },
    "medium": {
        "probability": 0.3,
        "aperture_d": (0.04, 0.1),
        "d_over_r0": (0.8, 1.0, 1.6),
        "distance": (500.0, 800.0),
    },
    "strong": {
        "probability": 0.2,
        "aperture_d": (0.1, 0.2),
        "d_over_r0": (1.6, 2.0, 2.4),
        "distance": (1000.0, 1500.0),
    },
}

# Challenge level names accepted as aliases of the three simulator tiers.
ALIASES = {"low": "weak", "high": "strong"}


def canonical_strength(name):
    name = ALIASES.get(name, name)
    if name not in TIERS:
        raise ValueError(f"unknown strength {name!r}; choose from {STRENGTHS} or {tuple(ALIASES)}")
    return name


@dataclass
class TurbulenceParams:
    strength: str
    kernel_size: int
    aperture_d: float
    d_over_r0: float
    distance: float
    corr: float
    noise_sigma: float = 0.01

    def __post_init__(self):
        if self.kernel_size % 2 == 0 or self.kernel_size < 1:
            raise ValueError("kernel_size must be odd and positive")
        if self.aperture_d <= 0 or self.d_over_r0 <= 0 or self.distance <= 0:
            raise ValueError("aperture_d, d_over_r0 and distance must be positive")
        if self.corr >= 0:
            raise ValueError("corr must be negative")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        return cls(**data)


@dataclass
class DegradationModel:
    """Calibration from D/r0 to pixel units.

    ``tilt_rms`` overrides the D/r0-derived tilt rms when set.
    """

    tilt_px_per_ratio: float = 0.8
    blur_px_per_ratio: float = 1.2
    jitter_low: float = 0.8
    jitter_high: float = 1.2
    tilt_rms: Optional[float] = None

    def tilt_rms_for(self, params):
        if self.tilt_rms is not None:
            return self.tilt_rms
        return self.tilt_px_per_ratio * params.d_over_r0

    def blur_sigma_for(self, params):
        return self.blur_px_per_ratio * params.d_over_r0


DEFAULT_MODEL = DegradationModel()


def sample_strength(rng):
    u = rng.random()
    if u < TIERS["weak"]["probability"]:
        return "weak"
    if u < TIERS["weak"]["probability"] + TIERS["medium"]["probability"]:
        return "medium"
    return "strong"


def sample_params(strength, rng, noise_sigma=0.01):
    """Draw one parameter set for ``strength`` (order: D, D/r0, distance, corr)."""
    tier = TIERS[canonical_strength(strength)]
    aperture = rng.uniform(*tier["aperture_d"])
    ratio = rng.choice(tier["d_over_r0"])
    distance = rng.uniform(*tier["distance"])
    corr = rng.choice(CORR_CHOICES)
    return TurbulenceParams(
        strength=canonical_strength(strength),
        kernel_size=KERNEL_SIZE,
        aperture_d=aperture,
        d_over_r0=ratio,
        distance=distance,
        corr=corr,
        noise_sigma=noise_sigma,
    )


def correlation_length(corr, width, height):
    return max(1, math.ceil(abs(corr) * min(width, height) / 2))


def _correlated_noise(shape, length, rng):
    white = rng.normal(shape)
    h, w = shape
    fy = fft.fftfreq(h)[:, None]
    fx = fft.rfftfreq(w)[None, :]
    # transfer function of a Gaussian kernel with std `length` (periodic boundary)
    transfer = np.exp(-2.0 * (np.pi * length) ** 2 * (fx * fx + fy * fy))
    field = fft.irfft2(fft.rfft2(white) * transfer, s=shape)
    return field - field.mean()


def _rescale(field, rms):
    cur = np.sqrt(np.mean(field * field))
    if rms == 0 or cur == 0:
        return np.zeros_like(field)
    return field * (rms / cur)


def correlated_tilt_field(width, height, corr, rms, rng):
    """Zero-mean smooth random displacement field with per-component rms ``rms``.

    White Gaussian noise is filtered with a Gaussian kernel whose standard
    deviation is ``ceil(|corr| * min(width, height) / 2)`` pixels.
    """
    if rms < 0:
        raise ValueError("rms must be >= 0")
    length = correlation_length(corr, width, height)
    dx = _correlated_noise((height, width), length, rng)
    dy = _correlated_noise((height, width), length, rng)
    return FlowField(_rescale(dx, rms), _rescale(dy, rms))


def long_exposure_psf(params, model=DEFAULT_MODEL, jitter=1.0):
    sigma = model.blur_sigma_for(params) * jitter
    if sigma <= 0:
        return delta_psf(params.kernel_size)
    return gaussian_psf(sigma, params.kernel_size)


def degrade_frame_with_tilt(clean, params, rng, model=DEFAULT_MODEL):
    """Degrade one frame; returns ``(frame, tilt_field)``.

    Draw order from ``rng``: tilt dx field, tilt dy field, PSF jitter, noise.
    """
    clean = as_image(clean)
    h, w = clean.shape
    tilt = correlated_tilt_field(w, h, params.corr, model.tilt_rms_for(params), rng)
    out = warp(clean, tilt)
    jitter = rng.uniform(model.jitter_low, model.jitter_high)
    psf = long_exposure_psf(params, model, jitter)
    if psf.max() < 1.0:  # skip the identity kernel
        out = convolve(out, psf)
    if params.noise_sigma > 0:
        out = out + params.noise_sigma * rng.normal((h, w))
    return np.clip(out, 0.0, 1.0), tilt


def degrade_frame(clean, params, rng, model=DEFAULT_MODEL):
    return degrade_frame_with_tilt(clean, params, rng, model)[0]


class SimulatedSequence(NamedTuple):
    frames: np.ndarray
    tilts: list
    params: TurbulenceParams


def degrade_sequence(clean, strength=None, n_frames=100, seed=0, model=DEFAULT_MODEL,
                     noise_sigma=0.01):
    """Simulate ``n_frames`` degraded observations of ``clean``.

    One parameter set is drawn for the whole sequence (the strength too, when
    ``strength`` is None); every frame then gets its own child generator, so
    frames can be produced in any order with identical results.
    """
    if n_frames < 1:
        raise ValueError("n_frames must be >= 1")
    rng = Rng(seed)
    if strength is None:
        strength = sample_strength(rng)
    params = sample_params(strength, rng, noise_sigma=noise_sigma)
    frames = []
    tilts = []
    for child in rng.spawn(n_frames):
        frame, tilt = degrade_frame_with_tilt(clean, params, child, model)
        frames.append(frame)
        tilts.append(tilt)
    return SimulatedSequence(np.stack(frames), tilts, params)
