"""Single-image deblurring of the fused frame.

Classical deconvolution (Wiener or Richardson-Lucy) with a Gaussian PSF whose
width is either given or estimated blindly. Anything implementing the
:class:`Deblurrer` protocol (image in, image out) can replace
:class:`ClassicalDeblurrer` in the pipeline, e.g. a learned restoration
network.
"""

from dataclasses import dataclass, field
from typing import Optional, Protocol, runtime_checkable

import numpy as np
from scipy import fft, signal

from .imgio import as_image
from .selection import sharpness

DEFAULT_PSF_SIZE = 33
METHODS = ("wiener", "richardson_lucy")


def _default_grid():
    return [0.5 + 0.25 * i for i in range(15)]  # 0.5 .. 4.0


@dataclass
class DeblurParams:
    method: str = "wiener"
    nsr: float = 1e-3
    rl_iterations: int = 30
    psf_sigma_grid: list = field(default_factory=_default_grid)
    psf_size: int = DEFAULT_PSF_SIZE
    # fixed PSF width; skips blind estimation when set
    psf_sigma: Optional[float] = None
    # admissible mean out-of-range distance (fraction of the input range)
    ringing_tolerance: float = 0.0175

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown deblur method {self.method!r}; choose from {METHODS}")
        if self.nsr < 0:
            raise ValueError("nsr must be >= 0")
        if self.rl_iterations < 1:
            raise ValueError("rl_iterations must be >= 1")
        if not self.psf_sigma_grid or min(self.psf_sigma_grid) <= 0:
            raise ValueError("psf_sigma_grid must be non-empty and positive")
        if self.psf_size < 1 or self.psf_size % 2 == 0:
            raise ValueError("psf_size must be a positive odd number")
        if self.ringing_tolerance < 0:
            raise ValueError("ringing_tolerance must be >= 0")
        if self.psf_sigma is not None and self.psf_sigma <= 0:
            raise ValueError("psf_sigma must be positive")
        self.psf_sigma_grid = [float(s) for s in self.psf_sigma_grid]

    @property
    def psf_radius(self):
        return self.psf_size // 2


def validate_psf(psf):
    psf = np.asarray(psf, dtype=np.float64)
    if psf.ndim != 2 or psf.shape[0] != psf.shape[1] or psf.shape[0] % 2 == 0:
        raise ValueError(f"PSF must be square with odd size, got shape {psf.shape}")
    if np.any(psf < 0) or not np.all(np.isfinite(psf)):
        raise ValueError("PSF weights must be finite and nonnegative")
    if abs(psf.sum() - 1.0) > 1e-6:
        raise ValueError(f"PSF must sum to 1, sums to {psf.sum()}")
    return psf


def delta_psf(size=1):
    if size % 2 == 0:
        raise ValueError("PSF size must be odd")
    psf = np.zeros((size, size))
    psf[size // 2, size // 2] = 1.0
    return psf


def gaussian_psf(sigma, size=DEFAULT_PSF_SIZE):
    """Sampled isotropic Gaussian of odd ``size``, normalized to unit sum."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if size < 1 or size % 2 == 0:
        raise ValueError(f"size must be a positive odd integer, got {size}")
    r = size // 2
    x = np.arange(-r, r + 1, dtype=np.float64)
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    psf = np.outer(g, g)
    return psf / psf.sum()


def convolve(img, psf):
    """2-D convolution with edge-replicate padding; output has the input shape."""
    img = as_image(img)
    psf = np.asarray(psf, dtype=np.float64)
    if psf.shape[0] > img.shape[0] or psf.shape[1] > img.shape[1]:
        raise ValueError(f"PSF {psf.shape} larger than image {img.shape}")
    ry, rx = psf.shape[0] // 2, psf.shape[1] // 2
    padded = np.pad(img, ((ry, ry), (rx, rx)), mode="edge")
    return signal.fftconvolve(padded, psf, mode="valid")


def _otf(psf, shape):
    """Real FFT of ``psf`` embedded in ``shape`` with its center at the origin."""
    buf = np.zeros(shape)
    ky, kx = psf.shape
    buf[:ky, :kx] = psf
    buf = np.roll(buf, (-(ky // 2), -(kx // 2)), axis=(0, 1))
    return fft.rfft2(buf)


def wiener_deconvolve(img, psf, nsr):
    """Frequency-domain Wiener filter ``conj(H) G / (|H|^2 + nsr)``.

    The image is edge-replicated by the PSF radius, mean-subtracted and
    zero-padded to a fast transform size; the mean is restored after
    filtering. The result is not clamped.
    """
    img = as_image(img)
    psf = validate_psf(psf)
    if nsr < 0:
        raise ValueError("nsr must be >= 0")
    h, w = img.shape
    r = psf.shape[0] // 2
    ext = np.pad(img, r, mode="edge")
    mean = ext.mean()
    shape = (fft.next_fast_len(h + 4 * r, real=True), fft.next_fast_len(w + 4 * r, real=True))
    buf = np.zeros(shape)
    buf[: ext.shape[0], : ext.shape[1]] = ext - mean
    H = _otf(psf, shape)
    G = fft.rfft2(buf)
    power = np.maximum(np.abs(H) ** 2, 1e-12)
    out = fft.irfft2(np.conj(H) * G / (power + nsr), s=shape)
    return out[r : r + h, r : r + w] + mean


def richardson_lucy(img, psf, iterations):
    """Multiplicative Richardson-Lucy iterations; output is nonnegative."""
    img = as_image(img)
    psf = validate_psf(psf)
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    observed = np.maximum(img, 1e-6)
    mirror = psf[::-1, ::-1]
    est = observed.copy()
    for _ in range(iterations):
        blurred = np.maximum(convolve(est, psf), 1e-12)
        est = est * convolve(observed / blurred, mirror)
        np.maximum(est, 0.0, out=est)
    return est


def ringing_energy(img, low=0.0, high=1.0):
    """Mean distance of pixel values outside ``[low, high]``."""
    return float(np.mean(np.abs(img - np.clip(img, low, high))))


def blind_scores(img, params):
    """Per-sigma ``(sharpness, ringing)`` of the candidate Wiener restorations.

    Both terms use the input's own intensity range ``[low, high]``:
    sharpness of the restoration clamped to that range divided by
    ``span**2``, and mean out-of-range distance divided by ``span``. This
    makes them invariant to affine contrast changes of the input. A flat
    input scores ``(0, 0)`` everywhere.
    """
    img = as_image(img)
    low, high = float(img.min()), float(img.max())
    span = high - low
    if span < 1e-12:
        return [(0.0, 0.0)] * len(params.psf_sigma_grid)
    scores = []
    for sigma in params.psf_sigma_grid:
        out = wiener_deconvolve(img, gaussian_psf(sigma, params.psf_size), params.nsr)
        sharp = sharpness(np.clip(out, low, high)) / span**2
        scores.append((sharp, ringing_energy(out, low, high) / span))
    return scores


def estimate_sigma_blind(img, params=None):
    """Sharpest candidate sigma whose restoration does not ring.

    Sigmas are scanned in ascending order up to (not including) the first
    one whose normalised ringing exceeds ``params.ringing_tolerance``; over
    that prefix the normalised sharpness is maximised, ties going to the
    smaller sigma. With no admissible sigma the smallest is returned.
    """
    params = params or DeblurParams()
    scores = blind_scores(img, params)
    order = sorted(range(len(scores)), key=lambda i: params.psf_sigma_grid[i])
    best = order[0]
    for i in order:
        sharp, ringing = scores[i]
        if ringing > params.ringing_tolerance:
            break
        if sharp > scores[best][0]:
            best = i
    return params.psf_sigma_grid[best]


def estimate_psf_blind(img, params=None):
    """Gaussian PSF of the blindly estimated width (see :func:`estimate_sigma_blind`)."""
    params = params or DeblurParams()
    return gaussian_psf(estimate_sigma_blind(img, params), params.psf_size)


def deblur_with_psf(img, params=None, psf=None):
    """Deblur ``img`` and also return the PSF that was used."""
    params = params or DeblurParams()
    img = as_image(img)
    if psf is None:
        if params.psf_sigma is not None:
            psf = gaussian_psf(params.psf_sigma, params.psf_size)
        else:
            psf = estimate_psf_blind(img, params)
    psf = validate_psf(psf)
    if params.method == "wiener":
        out = wiener_deconvolve(img, psf, params.nsr)
    else:
        out = richardson_lucy(img, psf, params.rl_iterations)
    return out, psf


def deblur(img, params=None, psf=None):
    return deblur_with_psf(img, params, psf)[0]


@runtime_checkable
class Deblurrer(Protocol):
    def __call__(self, img: np.ndarray) -> np.ndarray: ...


class ClassicalDeblurrer:
    """Wiener / Richardson-Lucy deblurrer behind the :class:`Deblurrer` protocol."""

    def __init__(self, params=None, psf=None):
        self.params = params or DeblurParams()
        self.psf = psf

    def __call__(self, img):
        return deblur(img, self.params, self.psf)
