import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import ndimage

from conftest import crop_shift, endpoint_errors
from turbmit.charts import checkerboard, textured_checkerboard
from turbmit.errors import ShapeMismatchError
from turbmit.registration import (
    FlowField,
    FlowParams,
    _upsample_flow,
    build_reference,
    estimate_flow,
    register_sequence,
    register_with_flows,
    warp,
)
from turbmit.rng import Rng
from turbmit.simulator import correlated_tilt_field

M = 16


def _interior(a, m=M):
    return a[m:-m, m:-m]


def _epe(flow, dx, dy, m=M):
    return float(np.mean(np.hypot(_interior(flow.dx - dx, m), _interior(flow.dy - dy, m))))


@pytest.fixture(scope="module")
def big_chart():
    return textured_checkerboard(160, 16, seed=11)


def test_reference_identical_frames(chart96):
    np.testing.assert_array_equal(build_reference([chart96] * 5), chart96)


def test_reference_black_white():
    np.testing.assert_array_equal(build_reference([np.zeros((4, 4)), np.ones((4, 4))]), np.full((4, 4), 0.5))


def test_reference_matches_direct_sum(chart96, rng):
    sigma = 0.05
    seq = chart96 + rng.uniform(-np.sqrt(3) * sigma, np.sqrt(3) * sigma, (100,) + chart96.shape)
    direct = np.zeros_like(chart96)
    for f in seq:
        direct += f
    direct /= len(seq)
    ref = build_reference(seq)
    np.testing.assert_allclose(ref, direct, atol=1e-12)
    assert np.all(np.abs(ref - chart96) < 3 * sigma / np.sqrt(100) * 2)  # loose per-pixel bound
    assert np.mean(np.abs(ref - chart96) < 3 * sigma / np.sqrt(100)) > 0.99


def test_zero_motion(chart96):
    assert estimate_flow(chart96, chart96).magnitude().mean() < 0.1


def test_integer_shift_recovered(big_chart):
    ref = crop_shift(big_chart, 0, 0, 128)
    mov = crop_shift(big_chart, -3, 0, 128)  # content sits 3 px to the right in the moving frame
    flow = estimate_flow(mov, ref)
    assert _epe(flow, 3.0, 0.0) < 0.5


def test_sinusoidal_warp_on_checkerboard():
    base = checkerboard(128, 8, 0.1, 0.9)
    yy, xx = np.mgrid[0:128, 0:128]
    dx = 2.0 * np.sin(2 * np.pi * yy / 64)
    dy = 2.0 * np.cos(2 * np.pi * xx / 64)
    truth = FlowField(dx, dy)
    ref = warp(base, truth)  # warp(base, truth) == ref, so truth is the flow from ref to base
    flow = estimate_flow(base, ref)
    assert _epe(flow, dx, dy) < 0.75


def test_zero_flow_identity(chart96):
    np.testing.assert_array_equal(warp(chart96, FlowField.zeros(chart96.shape)), chart96)


def test_integer_flow_on_ramp():
    ramp = np.tile(np.linspace(0, 1, 20), (10, 1))
    out = warp(ramp, FlowField(np.ones_like(ramp), np.zeros_like(ramp)))
    np.testing.assert_array_equal(out[:, :-1], ramp[:, 1:])


def test_shift_then_warp_back(big_chart):
    f = crop_shift(big_chart, 0, 0, 128)
    shifted = crop_shift(big_chart, -2, 1, 128)
    back = warp(shifted, FlowField(np.full(f.shape, 2.0), np.full(f.shape, -1.0)))
    assert np.max(np.abs(_interior(back, 4) - _interior(f, 4))) < 2 / 255


def test_identical_sequence_unchanged(chart96):
    out = register_sequence([chart96] * 4)
    assert np.max(np.abs(out - chart96)) < 2 / 255


def test_low_texture_flag():
    flow = estimate_flow(np.full((32, 32), 0.4), np.full((32, 32), 0.4))
    assert flow.low_texture and np.all(flow.dx == 0)


def test_shape_mismatch(chart96):
    with pytest.raises(ShapeMismatchError):
        estimate_flow(chart96, chart96[:-1])
    with pytest.raises(ShapeMismatchError):
        warp(chart96, FlowField.zeros((3, 3)))


def test_flow_raw_round_trip(tmp_path, rng):
    flow = FlowField(rng.normal(size=(5, 7)), rng.normal(size=(5, 7)))
    flow.save_raw(tmp_path / "f.raw")
    assert (tmp_path / "f.raw").stat().st_size == 8 + 2 * 4 * 35
    back = FlowField.load_raw(tmp_path / "f.raw")
    np.testing.assert_array_equal(back.dx, flow.dx.astype(np.float32))
    np.testing.assert_array_equal(back.dy, flow.dy.astype(np.float32))


@pytest.mark.parametrize("shape", [(16, 16), (17, 23)])
def test_flow_upsampling_matches_map_coordinates(shape, rng):
    coarse = rng.normal(size=((shape[0] + 1) // 2, (shape[1] + 1) // 2))
    up, _ = _upsample_flow(coarse, coarse, shape)
    yy, xx = np.mgrid[0 : shape[0], 0 : shape[1]] / 2.0
    expected = 2.0 * ndimage.map_coordinates(coarse, [yy, xx], order=1, mode="nearest")
    np.testing.assert_allclose(up, expected, atol=1e-12)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10**6), max_flow=st.floats(0.5, 8))
def test_flow_finite_and_clamped(seed, max_flow):
    g = np.random.default_rng(seed)
    a, b = g.random((2, 32, 32))
    flow = estimate_flow(a, b, FlowParams(max_flow=max_flow, pyramid_levels=2, iterations_per_level=3))
    assert np.all(np.isfinite(flow.dx)) and np.all(np.isfinite(flow.dy))
    assert flow.magnitude().max() <= max_flow + 1e-9


def _tilted_sequence(clean, n, rms, seed):
    rng = Rng(seed)
    h, w = clean.shape
    frames, tilts = [], []
    for child in rng.spawn(n):
        tilt = correlated_tilt_field(w, h, -0.1, rms, child)
        frames.append(warp(clean, tilt))
        tilts.append(tilt)
    return np.stack(frames), tilts


def test_more_passes_do_not_hurt():
    clean = textured_checkerboard(96, 12, seed=4)
    seq, tilts = _tilted_sequence(clean, 16, 1.5, seed=9)
    errs = []
    for passes in (1, 2):
        _, flows = register_with_flows(seq, refinement_passes=passes)
        res, raw = endpoint_errors(flows, tilts, 8)
        errs.append(res.mean())
    assert errs[1] <= errs[0] < raw.mean()


def test_permutation_covariant(chart96):
    seq, _ = _tilted_sequence(chart96, 5, 1.0, seed=2)
    perm = [3, 0, 4, 1, 2]
    a = register_sequence(seq)[perm]
    b = register_sequence(seq[perm])
    np.testing.assert_allclose(a, b, atol=1e-6)


def test_params_validation():
    with pytest.raises(ValueError):
        FlowParams(pyramid_levels=0)
    with pytest.raises(ValueError):
        register_sequence(np.zeros((2, 8, 8)), refinement_passes=0)
