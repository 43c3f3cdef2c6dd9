"""Binary grid targets and their decoder.

A target is a ``rows x cols`` grid of square cells inside a white quiet
border. Bit 1 is a black cell, bit 0 a white one. Decoding averages the
central half of every cell and splits the cell means with Otsu's method,
so the result does not depend on global contrast or offset.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ShapeMismatchError
from .imgio import as_image


@dataclass
class CodedTarget:
    rows: int = 8
    cols: int = 8
    cell_px: int = 16
    # None means 2 * cell_px
    quiet_border_px: Optional[int] = None
    payload: list = field(default_factory=list)

    def __post_init__(self):
        if self.rows < 2 or self.cols < 2:
            raise ValueError("rows and cols must be >= 2")
        if self.cell_px < 4:
            raise ValueError("cell_px must be >= 4")
        if self.quiet_border_px is None:
            self.quiet_border_px = 2 * self.cell_px
        if self.quiet_border_px < 0:
            raise ValueError("quiet_border_px must be >= 0")
        if not self.payload:
            self.payload = [0] * (self.rows * self.cols)
        self.payload = [int(b) for b in self.payload]
        if len(self.payload) != self.rows * self.cols:
            raise ValueError(f"payload needs {self.rows * self.cols} bits, got {len(self.payload)}")
        if any(b not in (0, 1) for b in self.payload):
            raise ValueError("payload bits must be 0 or 1")

    @classmethod
    def random(cls, rng, rows=8, cols=8, cell_px=16, quiet_border_px=None):
        bits = (rng.random((rows * cols,)) < 0.5).astype(int).tolist()
        return cls(rows, cols, cell_px, quiet_border_px, bits)

    @property
    def shape(self):
        b = self.quiet_border_px
        return (self.rows * self.cell_px + 2 * b, self.cols * self.cell_px + 2 * b)

    def geometry(self):
        """Layout fields without the payload (what the decoder needs)."""
        return {
            "rows": self.rows,
            "cols": self.cols,
            "cell_px": self.cell_px,
            "quiet_border_px": self.quiet_border_px,
        }

    def to_dict(self):
        return {**self.geometry(), "payload": format_bits(self.payload)}

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        payload = data.pop("payload", "")
        return cls(**data, payload=parse_bits(payload) if payload else [])


def generate_target(target):
    img = np.ones(target.shape)
    b, c = target.quiet_border_px, target.cell_px
    grid = 1.0 - np.asarray(target.payload, dtype=np.float64).reshape(target.rows, target.cols)
    img[b : b + target.rows * c, b : b + target.cols * c] = np.kron(grid, np.ones((c, c)))
    return img


def cell_means(img, target):
    """Mean of the central 50% x 50% of every cell, shape ``(rows, cols)``."""
    img = as_image(img)
    if img.shape != target.shape:
        raise ShapeMismatchError(f"image {img.shape} does not match target layout {target.shape}")
    b, c = target.quiet_border_px, target.cell_px
    lo = c // 4
    hi = c - c // 4
    grid = img[b : b + target.rows * c, b : b + target.cols * c]
    cells = grid.reshape(target.rows, c, target.cols, c)
    return cells[:, lo:hi, :, lo:hi].mean(axis=(1, 3))


def otsu_split(values):
    """Otsu's two-class split of a 1-D sample.

    Returns ``(threshold, low_mean, high_mean)`` where the threshold is the
    midpoint of the two class means. Computed exactly over the sorted
    sample rather than a histogram.
    """
    v = np.sort(np.asarray(values, dtype=np.float64).ravel())
    n = v.size
    csum = np.cumsum(v)
    total = csum[-1]
    k = np.arange(1, n)
    m0 = csum[:-1] / k
    m1 = (total - csum[:-1]) / (n - k)
    between = k * (n - k) * (m0 - m1) ** 2
    best = int(np.argmax(between))
    return 0.5 * (m0[best] + m1[best]), m0[best], m1[best]


def _border_mean(img, target):
    b = target.quiet_border_px
    if b == 0:
        return None
    mask = np.ones(img.shape, dtype=bool)
    mask[b:-b, b:-b] = False
    return float(img[mask].mean())


def decode_target(img, target):
    """Decode the payload bits (flat, row-major) from ``img``."""
    img = as_image(img)
    means = cell_means(img, target).ravel()
    if np.ptp(means) < 1e-6:
        # one uniform class: compare against the white quiet border
        white = _border_mean(img, target)
        bit = 1 if white is not None and white - means[0] > 1e-6 else 0
        return np.full(means.size, bit, dtype=np.uint8)
    threshold, _, _ = otsu_split(means)
    return (means < threshold).astype(np.uint8)


def bit_score(decoded, truth):
    decoded = np.asarray(decoded).ravel()
    truth = np.asarray(truth).ravel()
    if decoded.size != truth.size:
        raise ValueError(f"bit strings differ in length: {decoded.size} vs {truth.size}")
    if decoded.size == 0:
        raise ValueError("empty bit strings")
    return float(np.mean(decoded == truth))


def format_bits(bits):
    return "".join("1" if int(b) else "0" for b in bits)


def parse_bits(text):
    text = text.strip()
    if not text or set(text) - {"0", "1"}:
        raise ValueError("payload must be a non-empty string of '0' and '1'")
    return [int(ch) for ch in text]


def read_payload(path):
    with open(path) as fh:
        return parse_bits(fh.read())


def write_payload(bits, path):
    with open(path, "w") as fh:
        fh.write(format_bits(bits) + "\n")
