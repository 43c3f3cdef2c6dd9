"""Image and frame-sequence I/O.

Images live in memory as 2-D ``float64`` arrays with values in ``[0, 1]``.
A frame sequence is a 3-D array of shape ``(n_frames, height, width)``.
On disk a sequence is a directory of ``frame_0000.png``, ``frame_0001.png``,
... (``.pgm`` is accepted on input).
"""

import os
import re
import tempfile
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import (
    CorruptImageError,
    ImageNotFoundError,
    SequenceLayoutError,
    ShapeMismatchError,
    UnsupportedFormatError,
)

FRAME_PATTERN = "frame_{:04d}.png"
_FRAME_RE = re.compile(r"^frame_(\d{4})\.(png|pgm)$", re.IGNORECASE)

# BT.601 luma
_LUMA = np.array([0.299, 0.587, 0.114])

_MAGIC = {
    b"\x89PNG\r\n\x1a\n": "png",
    b"P2": "pnm",
    b"P3": "pnm",
    b"P5": "pnm",
    b"P6": "pnm",
}


def _sniff(path):
    with open(path, "rb") as fh:
        head = fh.read(8)
    for magic, kind in _MAGIC.items():
        if head.startswith(magic):
            return kind
    return None


def as_image(data, name="image"):
    """Validate ``data`` as a 2-D finite image and return it as float64."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ShapeMismatchError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def as_sequence(frames, name="sequence"):
    """Stack ``frames`` into an ``(n, h, w)`` float64 array, checking shapes."""
    if isinstance(frames, np.ndarray):
        arr = np.asarray(frames, dtype=np.float64)
        if arr.ndim != 3:
            raise ShapeMismatchError(f"{name} must be 3-D (frames, h, w), got {arr.shape}")
    else:
        frames = [np.asarray(f, dtype=np.float64) for f in frames]
        if frames and any(f.shape != frames[0].shape for f in frames):
            raise ShapeMismatchError(f"{name} frames do not share one shape")
        arr = np.stack(frames) if frames else np.empty((0, 0, 0))
    if arr.shape[0] == 0:
        raise ValueError(f"{name} is empty")
    return arr


def load_image(path):
    """Load a grayscale or RGB PNG/PGM/PPM file as a float image in [0, 1].

    8-bit files are divided by 255, 16-bit files by 65535; RGB is reduced
    to BT.601 luma. Raises ``ImageNotFoundError``, ``UnsupportedFormatError``
    or ``CorruptImageError``.
    """
    path = Path(path)
    if not path.is_file():
        raise ImageNotFoundError(f"no such image file: {path}")
    if _sniff(path) is None:
        raise UnsupportedFormatError(f"{path}: not a PNG or PNM file")
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode == "P":
                im = im.convert("RGBA" if "transparency" in im.info else "RGB")
                mode = im.mode
            arr = np.asarray(im)
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise CorruptImageError(f"{path}: {exc}") from exc

    if mode in ("L", "LA"):
        gray = (arr[..., 0] if arr.ndim == 3 else arr) / 255.0
    elif mode in ("RGB", "RGBA"):
        gray = arr[..., :3].astype(np.float64) @ _LUMA / 255.0
    elif mode.startswith("I;16") or mode == "I":
        gray = arr.astype(np.float64) / 65535.0
    elif mode == "1":
        gray = arr.astype(np.float64)
    else:
        raise UnsupportedFormatError(f"{path}: unsupported pixel mode {mode!r}")
    return np.clip(np.ascontiguousarray(gray, dtype=np.float64), 0.0, 1.0)


def to_uint8(img):
    return np.round(np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0) * 255.0).astype(np.uint8)


def save_image(img, path):
    """Write ``img`` as an 8-bit grayscale PNG.

    The file is written to a temporary name and renamed into place, so a
    failed write never leaves a partial file at ``path``.
    """
    path = Path(path)
    data = to_uint8(img)
    if data.ndim != 2:
        raise ShapeMismatchError(f"expected a 2-D image, got shape {data.shape}")
    fd, tmp = tempfile.mkstemp(prefix=".tmp_", suffix=".png", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            Image.fromarray(data, mode="L").save(fh, format="PNG")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sequence_files(directory):
    """Return the frame files of ``directory`` ordered by index."""
    directory = Path(directory)
    if not directory.is_dir():
        raise SequenceLayoutError(f"not a directory: {directory}")
    indexed = {}
    for entry in directory.iterdir():
        m = _FRAME_RE.match(entry.name)
        if m is None:
            continue
        idx = int(m.group(1))
        if idx in indexed:
            raise SequenceLayoutError(f"duplicate frame index {idx} in {directory}")
        indexed[idx] = entry
    if not indexed:
        raise SequenceLayoutError(f"no frame_NNNN.png/pgm files in {directory}")
    missing = sorted(set(range(max(indexed) + 1)) - set(indexed))
    if missing:
        raise SequenceLayoutError(f"gap in frame indices of {directory}: missing {missing[:5]}")
    return [indexed[i] for i in range(len(indexed))]


def load_sequence(directory):
    """Load ``frame_%04d`` files from ``directory`` as an ``(n, h, w)`` array."""
    frames = []
    for path in sequence_files(directory):
        img = load_image(path)
        if frames and img.shape != frames[0].shape:
            raise ShapeMismatchError(
                f"{path.name} has shape {img.shape}, expected {frames[0].shape}"
            )
        frames.append(img)
    return np.stack(frames)


def save_sequence(frames, directory):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(frames):
        save_image(frame, directory / FRAME_PATTERN.format(i))
