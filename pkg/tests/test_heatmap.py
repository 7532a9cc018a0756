import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from handgeom.errors import DimensionMismatch, EmptyStack, NonPositiveSigma
from handgeom.heatmap import (
    MIN_BOX_SIDE,
    attention_loss,
    extract_box,
    heatmap_2d_loss,
    is_present,
    presence_score,
    render_gaussian,
    square_box,
)


def gaussian_oracle(u, v, w, h, sigma):
    out = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            out[y, x] = math.exp(-((x - u) ** 2 + (y - v) ** 2) / (2 * sigma * sigma))
    return out


def brute_sq_sum(a, b):
    total = 0.0
    for x, y in zip(np.ravel(a), np.ravel(b)):
        total += (x - y) ** 2
    return total


def stack_with_peaks(points, w=64, h=64):
    return render_gaussian(np.asarray(points, float), w, h, sigma=1.0)


def test_gaussian_peak_at_grid_center():
    kp = np.full((21, 2), 32.0)
    maps = render_gaussian(kp, 64, 64, 2.0)
    assert maps.shape == (21, 64, 64)
    for m in maps:
        assert np.unravel_index(m.argmax(), m.shape) == (32, 32)
        assert m[32, 32] == 1.0


def test_gaussian_value_two_pixels_away():
    kp = np.zeros((21, 2))
    kp[0] = [10, 10]
    maps = render_gaussian(kp, 32, 32, 2.0)
    assert maps[0, 10, 12] == pytest.approx(math.exp(-4 / 8), abs=1e-15)
    assert maps[0, 10, 12] == pytest.approx(0.60653, abs=1e-5)


def test_gaussian_matches_formula(rng):
    kp = rng.uniform(0, 15, (21, 2))
    maps = render_gaussian(kp, 16, 12, 1.7)
    for j in (0, 7, 20):
        u, v = np.trunc(kp[j])
        assert np.allclose(maps[j], gaussian_oracle(u, v, 16, 12, 1.7), atol=1e-15)


def test_invisible_joint_renders_zero():
    vis = np.ones(21, bool)
    vis[4] = False
    maps = render_gaussian(np.full((21, 2), 5.0), 16, 16, 2.0, vis)
    assert maps[4].sum() == 0.0
    assert maps[3].max() == 1.0


def test_render_rejects_bad_sigma_and_size():
    with pytest.raises(NonPositiveSigma):
        render_gaussian(np.zeros((21, 2)), 16, 16, 0.0)
    with pytest.raises(DimensionMismatch):
        render_gaussian(np.zeros((21, 2)), 4, 16, 1.0)


def test_attention_loss_examples(rng):
    gl = rng.random((21, 8, 8))
    gr = rng.random((21, 8, 8))
    assert attention_loss(gl, gr, gl, gr)[0] == 0.0
    pl = gl.copy()
    pl[3, 2, 5] += 0.5
    assert attention_loss(pl, gr, gl, gr)[0] == pytest.approx(0.25, abs=1e-15)


def test_attention_loss_brute_force(rng):
    a, b, c, d = (rng.random((21, 4, 4)) for _ in range(4))
    loss, (ga, gb) = attention_loss(a, b, c, d)
    assert loss == pytest.approx(brute_sq_sum(a, c) + brute_sq_sum(b, d), rel=1e-12)
    assert np.allclose(ga, 2 * (a - c)) and np.allclose(gb, 2 * (b - d))


def test_heatmap_2d_loss_examples(rng):
    gt = rng.random((21, 8, 8))
    assert heatmap_2d_loss(gt, gt)[0] == 0.0
    pred = gt.copy()
    pred[5] = 0.0
    assert heatmap_2d_loss(pred, gt)[0] == pytest.approx(float(np.sum(gt[5] ** 2)), rel=1e-12)
    p2 = rng.random((21, 8, 8))
    assert heatmap_2d_loss(p2, gt)[0] == pytest.approx(brute_sq_sum(p2, gt), rel=1e-12)


def test_losses_reject_mismatched_shapes():
    a = np.zeros((21, 8, 8))
    with pytest.raises(DimensionMismatch):
        heatmap_2d_loss(a, np.zeros((21, 8, 9)))
    with pytest.raises(DimensionMismatch):
        attention_loss(a, a, a, np.zeros((21, 9, 8)))


@given(st.integers(0, 2**32 - 1))
def test_losses_nonnegative_and_zero_iff_equal(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.random((2, 21, 8, 8))
    assert heatmap_2d_loss(a, b)[0] > 0
    assert attention_loss(a, b, a, b)[0] == 0
    assert attention_loss(a, a, b, b)[0] > 0


def test_presence_examples():
    assert presence_score(np.zeros((21, 16, 16))) == 0.0
    assert not is_present(np.zeros((21, 16, 16)), 1e-9)
    same = render_gaussian(np.full((21, 2), 8.0), 16, 16, 2.0)
    assert presence_score(same) == 1.0
    assert is_present(same, 0.25)
    # far-apart peaks: the mean map is dominated by one Gaussian
    pts = [(5 + 20 * (j % 7), 5 + 20 * (j // 7)) for j in range(21)]
    sparse = render_gaussian(np.array(pts, float), 150, 70, 1.0)
    assert presence_score(sparse) == pytest.approx(1 / 21, rel=1e-6)


@given(st.integers(0, 2**32 - 1))
def test_presence_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    stack = rng.random((21, 8, 8))
    perm = rng.permutation(21)
    assert presence_score(stack[perm]) == pytest.approx(presence_score(stack), rel=1e-15)


def test_extract_box_tight_and_padded():
    pts = np.full((21, 2), 40.0)
    pts[0] = [20, 30]
    pts[1] = [60, 50]
    stack = stack_with_peaks(pts, 128, 128)
    b = extract_box(stack, 0.0)
    assert (b.side, b.center) == (40.0, (40.0, 40.0))
    b = extract_box(stack, 0.25)
    assert b.side == 60.0 and b.center == (40.0, 40.0)
    assert b.is_square()


def test_extract_box_degenerate_gets_minimum_side():
    stack = stack_with_peaks(np.full((21, 2), 30.0))
    b = extract_box(stack, 0.0)
    assert b.side == MIN_BOX_SIDE
    assert b.center == (30.0, 30.0)


def test_extract_box_empty_stack():
    with pytest.raises(EmptyStack):
        extract_box(np.zeros((21, 16, 16)))


def test_box_shifted_into_bounds():
    b = square_box(0, 0, 10, 30, 64, 64)
    assert (b.x1, b.y1, b.side) == (0.0, 0.0, 30.0)
    b = square_box(50, 50, 63, 63, 64, 64, pad=0.5)
    assert b.x2 == 63.0 and b.y2 == 63.0 and b.is_square()


@given(st.integers(0, 2**32 - 1), st.floats(0.0, 1.0), st.integers(8, 80), st.integers(8, 80))
def test_extract_box_always_square_and_inside(seed, pad, w, h):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0, [w - 1, h - 1], (21, 2))
    vis = rng.random(21) < 0.8
    vis[0] = True
    stack = render_gaussian(pts, w, h, 1.0, vis)
    b = extract_box(stack, pad)
    assert b.is_square(1e-9)
    assert b.x1 >= -1e-9 and b.y1 >= -1e-9
    assert b.x2 <= w - 1 + 1e-9 and b.y2 <= h - 1 + 1e-9
