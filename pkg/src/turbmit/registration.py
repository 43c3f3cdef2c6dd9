"""Dense optical-flow registration of a frame sequence to its mean.

Flow follows the backward-warp convention: ``flow`` at reference pixel
``(x, y)`` points to where that content sits in the moving frame, so
``warp(moving, flow)`` is aligned with the reference.
"""

import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import ndimage

from . import kernels
from .errors import ShapeMismatchError
from .imgio import as_image, as_sequence


@dataclass
class FlowField:
    dx: np.ndarray
    dy: np.ndarray
    # set when the inputs carried no usable texture and the flow was zeroed
    low_texture: bool = False

    def __post_init__(self):
        self.dx = np.asarray(self.dx, dtype=np.float64)
        self.dy = np.asarray(self.dy, dtype=np.float64)
        if self.dx.shape != self.dy.shape or self.dx.ndim != 2:
            raise ShapeMismatchError("dx and dy must be 2-D arrays of one shape")

    @classmethod
    def zeros(cls, shape, low_texture=False):
        return cls(np.zeros(shape), np.zeros(shape), low_texture)

    @property
    def shape(self):
        return self.dx.shape

    def magnitude(self):
        return np.hypot(self.dx, self.dy)

    def save_raw(self, path):
        """Write ``<u4 width, <u4 height`` then the dx and dy planes as ``<f4``."""
        h, w = self.shape
        with open(path, "wb") as fh:
            fh.write(struct.pack("<II", w, h))
            fh.write(self.dx.astype("<f4").tobytes())
            fh.write(self.dy.astype("<f4").tobytes())

    @classmethod
    def load_raw(cls, path):
        with open(path, "rb") as fh:
            w, h = struct.unpack("<II", fh.read(8))
            planes = np.frombuffer(fh.read(), dtype="<f4")
        if planes.size != 2 * w * h:
            raise ValueError(f"{path}: expected {2 * w * h} samples, found {planes.size}")
        return cls(planes[: w * h].reshape(h, w), planes[w * h :].reshape(h, w))


@dataclass
class FlowParams:
    pyramid_levels: int = 4
    iterations_per_level: int = 10
    window_radius: int = 7
    smoothing_sigma: float = 1.0
    # displacement clamp in pixels; None means min(width, height) / 4
    max_flow: Optional[float] = None
    damping: float = 1e-4
    # box radius applied to the flow after every update (0 disables)
    flow_smoothing_radius: int = 3

    def __post_init__(self):
        if self.pyramid_levels < 1:
            raise ValueError("pyramid_levels must be >= 1")
        if self.iterations_per_level < 1:
            raise ValueError("iterations_per_level must be >= 1")
        if self.window_radius < 1:
            raise ValueError("window_radius must be >= 1")
        if self.smoothing_sigma < 0:
            raise ValueError("smoothing_sigma must be >= 0")
        if self.flow_smoothing_radius < 0:
            raise ValueError("flow_smoothing_radius must be >= 0")

    def flow_limit(self, shape):
        if self.max_flow is not None:
            return float(self.max_flow)
        return min(shape) / 4.0


def build_reference(seq):
    """Per-pixel mean of all frames.

    Accumulated as an offset from the first frame, so a sequence of identical
    frames reproduces that frame bit for bit.
    """
    seq = as_sequence(seq)
    return seq[0] + (seq - seq[0]).mean(axis=0)


def warp(img, flow):
    """Backward-warp ``img`` by ``flow`` with bilinear sampling.

    Samples falling outside the image take the nearest border value; the
    output is clamped to ``[0, 1]``.
    """
    img = as_image(img)
    if flow.shape != img.shape:
        raise ShapeMismatchError(f"flow shape {flow.shape} does not match image {img.shape}")
    return np.clip(kernels.warp_bilinear(img, flow.dx, flow.dy), 0.0, 1.0)


def _smooth(img, sigma):
    if sigma <= 0:
        return img
    return ndimage.gaussian_filter(img, sigma, mode="nearest")


def _pyramid(img, levels):
    pyr = [img]
    for _ in range(levels - 1):
        prev = pyr[-1]
        if min(prev.shape) < 16:
            break
        pyr.append(ndimage.gaussian_filter(prev, 1.0, mode="nearest")[::2, ::2])
    return pyr


def _upsample_axis(a, n, axis):
    """Bilinear x2 upsampling along ``axis`` to length ``n`` (edge clamped)."""
    a = np.moveaxis(a, axis, 0)
    nxt = np.concatenate([a[1:], a[-1:]])
    out = np.empty((n,) + a.shape[1:])
    out[0::2] = a[: (n + 1) // 2]
    out[1::2] = 0.5 * (a + nxt)[: n // 2]
    return np.moveaxis(out, 0, axis)


def _upsample_flow(dx, dy, shape):
    """Resample a coarse flow onto the next finer grid (fine x maps to x/2)."""
    h, w = shape
    up = []
    for c in (dx, dy):
        c = _upsample_axis(_upsample_axis(c, h, 0), w, 1)
        up.append(np.ascontiguousarray(2.0 * c))
    return up[0], up[1]


def _reject_worse_than_zero(mov, ref, dx, dy, radius):
    """Zero the inherited flow wherever it fits the window worse than no motion.

    Guards against coarse levels that locked onto an aliased period of a
    repetitive pattern. Works in place.
    """
    fit = kernels.box_mean((kernels.warp_bilinear(mov, dx, dy) - ref) ** 2, radius)
    still = kernels.box_mean((mov - ref) ** 2, radius)
    worse = still < fit
    dx[worse] = 0.0
    dy[worse] = 0.0


def estimate_flow(moving, reference, params=None):
    """Coarse-to-fine dense Lucas-Kanade flow from ``reference`` to ``moving``.

    At each pyramid level the moving image is warped by the current flow, a
    damped 2x2 least-squares increment is solved over a square window around
    every pixel, and the updated flow is lightly box-filtered. Flow inherited
    from a coarser level is dropped where zero motion explains the window
    better. A constant (texture-free) input yields zero flow with
    ``low_texture=True``.
    """
    params = params or FlowParams()
    moving = as_image(moving, "moving")
    reference = as_image(reference, "reference")
    if moving.shape != reference.shape:
        raise ShapeMismatchError(f"moving {moving.shape} and reference {reference.shape} differ")
    shape = reference.shape
    if np.ptp(moving) < 1e-9 or np.ptp(reference) < 1e-9:
        return FlowField.zeros(shape, low_texture=True)

    limit = params.flow_limit(shape)
    pyr_mov = _pyramid(_smooth(moving, params.smoothing_sigma), params.pyramid_levels)
    pyr_ref = _pyramid(_smooth(reference, params.smoothing_sigma), params.pyramid_levels)
    n_levels = len(pyr_ref)

    dx = np.zeros(pyr_ref[-1].shape)
    dy = np.zeros(pyr_ref[-1].shape)

    for level in range(n_levels - 1, -1, -1):
        mov = pyr_mov[level]
        ref = pyr_ref[level]
        if dx.shape != ref.shape:
            dx, dy = _upsample_flow(dx, dy, ref.shape)
            _reject_worse_than_zero(mov, ref, dx, dy, params.window_radius)
        kernels.lk_level(
            mov, ref, dx, dy, params.iterations_per_level,
            params.window_radius, params.damping, limit / 2.0**level,
            params.flow_smoothing_radius,
        )

    if not (np.all(np.isfinite(dx)) and np.all(np.isfinite(dy))):
        return FlowField.zeros(shape, low_texture=True)
    return FlowField(dx, dy)


def register_with_flows(seq, params=None, refinement_passes=2):
    """Register ``seq`` and also return the per-frame flows of the final pass.

    Pass 1 aligns every frame to the plain frame mean. Each further pass
    rebuilds the reference from the previous pass's registered frames and
    re-estimates flow from the original frames, so every output frame is
    interpolated exactly once.
    """
    params = params or FlowParams()
    if refinement_passes < 1:
        raise ValueError("refinement_passes must be >= 1")
    seq = as_sequence(seq)
    reference = build_reference(seq)
    registered = seq
    flows = []
    for _ in range(refinement_passes):
        flows = [estimate_flow(frame, reference, params) for frame in seq]
        registered = np.stack([warp(frame, f) for frame, f in zip(seq, flows)])
        reference = build_reference(registered)
    return registered, flows


def register_sequence(seq, params=None, refinement_passes=2):
    """Align every frame of ``seq`` to a (refined) mean reference."""
    return register_with_flows(seq, params, refinement_passes)[0]
