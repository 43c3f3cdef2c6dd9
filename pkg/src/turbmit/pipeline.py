"""The four-stage restoration pipeline.

register -> select and average -> deblur -> postprocess (guided by the
fused image). Every stage output is kept so callers can dump or score it.
"""

import time
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .config import PipelineConfig
from .deblur import deblur_with_psf
from .errors import NumericError
from .imgio import as_sequence, load_sequence, save_image
from .postprocess import postprocess
from .registration import build_reference, register_with_flows
from .selection import rank_frames, select_and_average

STAGES = ("load", "registration", "selection", "deblur", "postprocess")


@dataclass
class StageArtifacts:
    reference: np.ndarray
    registered: np.ndarray
    fused: np.ndarray
    deblurred: np.ndarray
    psf: np.ndarray
    output: np.ndarray
    kept: list
    timings: dict = field(default_factory=dict)


@contextmanager
def _stage(name, timings):
    """Tag any exception escaping the block with ``.stage`` and time it."""
    start = time.perf_counter()
    try:
        yield
    except Exception as exc:
        if getattr(exc, "stage", None) is None:
            exc.stage = name
        raise
    timings[name] = time.perf_counter() - start


def _check_finite(name, arr):
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"{name} produced non-finite values")


def finish(fused, config=None, deblurrer=None):
    """Deblur and postprocess a fused image; returns ``(deblurred, psf, output, timings)``.

    ``deblurrer`` is any callable image -> image; it replaces the classical
    deblur stage (the returned psf is then None).
    """
    config = config or PipelineConfig()
    timings = {}
    with _stage("deblur", timings):
        if deblurrer is None:
            deblurred, psf = deblur_with_psf(fused, config.deblur)
        else:
            deblurred, psf = np.asarray(deblurrer(fused), dtype=np.float64), None
        _check_finite("deblur", deblurred)
        # stage boundary: the emitted image is clamped like every other stage
        deblurred = np.clip(deblurred, 0.0, 1.0)
    with _stage("postprocess", timings):
        post = config.postprocess
        if post.ringing_radius is None:
            post = replace(post, ringing_radius=config.ringing_radius)
        output = postprocess(deblurred, fused, post)
        _check_finite("postprocess", output)
    return deblurred, psf, output, timings


def restore_sequence(frames, config=None, deblurrer=None):
    """Run every stage on an in-memory ``(n, h, w)`` sequence."""
    config = config or PipelineConfig()
    timings = {}
    with _stage("registration", timings):
        frames = as_sequence(frames)
        registered, _ = register_with_flows(frames, config.flow, config.refinement_passes)
        _check_finite("registration", registered)
        reference = build_reference(registered)
    with _stage("selection", timings):
        ranked = rank_frames(registered)
        kept = sorted(s.frame_index for s in ranked[: config.selection.n_keep(len(registered))])
        fused = select_and_average(registered, config.selection)
        _check_finite("selection", fused)
    deblurred, psf, output, more = finish(fused, config, deblurrer)
    timings.update(more)
    return StageArtifacts(reference, registered, fused, deblurred, psf, output, kept, timings)


def dump_stages(artifacts, directory):
    """Write reference, fused and deblurred images as PNG plus exact ``.npy`` copies."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name in ("reference", "fused", "deblurred"):
        arr = getattr(artifacts, name)
        save_image(arr, directory / f"{name}.png")
        np.save(directory / f"{name}.npy", arr)


def restore(input_dir, output_path, config=None, dump_dir=None, deblurrer=None):
    """Load a sequence directory, restore it and write the final image.

    Nothing is written unless every stage succeeds.
    """
    timings = {}
    with _stage("load", timings):
        frames = load_sequence(input_dir)
    artifacts = restore_sequence(frames, config, deblurrer)
    artifacts.timings = {**timings, **artifacts.timings}
    if dump_dir is not None:
        dump_stages(artifacts, dump_dir)
    save_image(artifacts.output, output_path)
    return artifacts
