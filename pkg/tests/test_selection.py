import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import ndimage

from turbmit.charts import test_corpus as make_corpus
from turbmit.registration import build_reference
from turbmit.selection import SelectionParams, rank_frames, select_and_average, sharpness, write_scores_csv


def _sobel_oracle(img):
    # direct double loop with the textbook kernels
    kx = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], float)
    ky = kx.T
    h, w = img.shape
    acc = []
    for y in range(1, h - 1):
        for x in range(1, w - 1):
            win = img[y - 1 : y + 2, x - 1 : x + 2]
            acc.append((win * kx).sum() ** 2 + (win * ky).sum() ** 2)
    return float(np.mean(acc))


def test_constant_image_is_zero():
    assert sharpness(np.full((9, 9), 0.3)) == 0.0


def test_vertical_step_matches_hand_value():
    img = np.zeros((10, 12))
    img[:, 6:] = 1.0
    # two interior columns respond with Gx = 4, out of 10 interior columns
    assert sharpness(img) == pytest.approx(2 * 16 / 10)
    assert sharpness(img) == pytest.approx(_sobel_oracle(img))


def test_random_image_matches_oracle(rng):
    img = rng.random((15, 11))
    assert sharpness(img) == pytest.approx(_sobel_oracle(img), rel=1e-12)


def test_too_small_raises():
    with pytest.raises(ValueError):
        sharpness(np.zeros((2, 5)))


def test_blur_monotone_on_corpus():
    for img in make_corpus(n=5, size=64, seed=3):
        vals = [sharpness(img)] + [sharpness(ndimage.gaussian_filter(img, s, mode="nearest")) for s in (0.5, 1, 2, 4)]
        assert all(a > b for a, b in zip(vals, vals[1:]))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6), c=st.floats(-0.5, 0.5), k=st.floats(0.1, 3.0))
def test_offset_invariance_and_quadratic_scaling(seed, c, k):
    img = np.random.default_rng(seed).random((12, 12)) * 0.3
    s = sharpness(img)
    assert sharpness(img + c) == pytest.approx(s, rel=1e-9, abs=1e-12)
    assert sharpness(k * img) == pytest.approx(k * k * s, rel=1e-9)


def test_rank_sharp_before_blurred(chart96):
    order = [s.frame_index for s in rank_frames([chart96, ndimage.gaussian_filter(chart96, 2)])]
    assert order == [0, 1]


def test_ties_keep_input_order(chart96):
    assert [s.frame_index for s in rank_frames([chart96] * 5)] == [0, 1, 2, 3, 4]


def test_mixture_top_k_are_sharp(chart96):
    blurred = ndimage.gaussian_filter(chart96, 3)
    seq = [chart96 + 0.001 * i if i % 2 == 0 else blurred for i in range(20)]
    top = sorted(s.frame_index for s in rank_frames(seq)[:10])
    assert top == list(range(0, 20, 2))


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 300), kf=st.floats(0.01, 1.0), mk=st.integers(1, 20))
def test_n_keep_bounds(n, kf, mk):
    k = SelectionParams(kf, mk).n_keep(n)
    assert 1 <= k <= n
    assert k >= min(mk, n)


def test_n_keep_examples():
    assert SelectionParams(0.5).n_keep(100) == 50
    assert SelectionParams(0.1, 8).n_keep(4) == 4
    assert SelectionParams(0.25, 1).n_keep(10) == 3  # 2.5 rounds up


def test_full_fraction_equals_reference(rng):
    seq = rng.random((7, 6, 6))
    np.testing.assert_array_equal(select_and_average(seq, SelectionParams(1.0, 1)), build_reference(seq))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(1, 12), kf=st.floats(0.05, 1.0))
def test_rank_permutation_and_fused_bounds(seed, n, kf):
    seq = np.random.default_rng(seed).random((n, 5, 5))
    ranked = rank_frames(seq)
    assert sorted(s.frame_index for s in ranked) == list(range(n))
    params = SelectionParams(kf, 1)
    kept = [s.frame_index for s in ranked[: params.n_keep(n)]]
    fused = select_and_average(seq, params)
    assert np.all(fused >= seq[kept].min(axis=0) - 1e-12)
    assert np.all(fused <= seq[kept].max(axis=0) + 1e-12)


def test_invalid_params():
    with pytest.raises(ValueError):
        SelectionParams(0.0)
    with pytest.raises(ValueError):
        SelectionParams(0.5, 0)


def test_scores_csv(tmp_path, rng):
    path = tmp_path / "s.csv"
    write_scores_csv(rank_frames(rng.random((3, 5, 5))), path)
    lines = path.read_text().splitlines()
    assert lines[0] == "frame_index,score" and len(lines) == 4
