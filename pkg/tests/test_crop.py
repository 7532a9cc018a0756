import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from handgeom.crop import (
    IDENTITY,
    apply_affine,
    crop_loss,
    crop_pose,
    descend_crop,
    detector_loss,
    solve_localizer,
)
from handgeom.errors import DegenerateBox
from handgeom.gradcheck import central_difference, relative_error
from handgeom.heatmap import SquareBox, extract_box, render_gaussian


def affine_oracle(theta, x, y):
    (a, b, tx), (c, d, ty) = theta
    return a * x + b * y + tx, c * x + d * y + ty


def test_apply_affine_examples():
    box = SquareBox(1, 1, 3, 3)
    assert np.array_equal(apply_affine(IDENTITY, box), [[1, 1], [3, 3]])
    assert np.array_equal(apply_affine([[2, 0, 0], [0, 2, 0]], box), [[2, 2], [6, 6]])


def test_apply_affine_matches_scalar_oracle(rng):
    for _ in range(20):
        theta = rng.normal(size=(2, 3))
        x1, y1 = rng.uniform(0, 100, 2)
        s = rng.uniform(1, 50)
        out = apply_affine(theta, [x1, y1, x1 + s, y1 + s])
        assert np.allclose(out[0], affine_oracle(theta, x1, y1))
        assert np.allclose(out[1], affine_oracle(theta, x1 + s, y1 + s))


def test_crop_loss_examples():
    assert crop_loss(IDENTITY, [0, 0, 63, 63], 64, 64)[0] == 0.0
    s = 63 / 64
    theta = [[s, 0, -10 * s], [0, s, -10 * s]]
    assert crop_loss(theta, [10, 10, 74, 74], 64, 64)[0] == pytest.approx(0.0, abs=1e-24)


def test_solve_localizer_examples():
    assert np.array_equal(solve_localizer([0, 0, 63, 63], 64, 64), IDENTITY)
    theta = solve_localizer(SquareBox(10, 10, 74, 74), 64, 64)
    assert theta[0, 0] == 0.984375 and theta[1, 1] == 0.984375
    assert theta[0, 2] == -9.84375 and theta[1, 2] == -9.84375
    with pytest.raises(DegenerateBox):
        solve_localizer([5, 5, 5, 9], 64, 64)


@given(st.floats(0, 500), st.floats(0, 500), st.floats(0.5, 500), st.integers(2, 256))
def test_localizer_is_optimal(x1, y1, side, w):
    box = [x1, y1, x1 + side, y1 + side]
    assert crop_loss(solve_localizer(box, w, w), box, w, w)[0] < 1e-12


@given(st.integers(0, 2**32 - 1))
def test_crop_loss_nonnegative_and_gradient(seed):
    rng = np.random.default_rng(seed)
    theta = rng.normal(size=(2, 3))
    x1, y1 = rng.uniform(0, 100, 2)
    box = [x1, y1, x1 + 20, y1 + 20]
    loss, g = crop_loss(theta, box, 32, 32)
    assert loss >= 0
    gn = central_difference(lambda t: crop_loss(t, box, 32, 32)[0], theta, 1e-4)
    assert relative_error(g, gn) < 1e-6


def test_crop_pose():
    pts = np.arange(42, dtype=float).reshape(21, 2)
    assert np.array_equal(crop_pose(IDENTITY, pts), pts)
    moved = crop_pose([[1, 0, 3], [0, 1, -2]], pts)
    assert np.array_equal(moved, pts + [3, -2])


def test_crop_pose_keeps_keypoints_inside(rng):
    for _ in range(20):
        kp = rng.uniform(10, 110, (21, 2))
        stack = render_gaussian(kp, 128, 128, 2.0)
        box = extract_box(stack, 0.1)
        theta = solve_localizer(box, 64, 64)
        out = crop_pose(theta, np.trunc(kp))
        assert np.all(out >= -1e-9) and np.all(out <= 63 + 1e-9)


def test_detector_loss():
    assert detector_loss(2.0, 3.0) == 5.0
    assert detector_loss(2.0, 3.0, lam=0.5) == 3.5


@given(st.floats(0, 400), st.floats(0, 400), st.floats(2, 400), st.integers(8, 128))
def test_descent_from_identity_converges_within_500_steps(x1, y1, side, w):
    box = [x1, y1, x1 + side, y1 + side]
    res = descend_crop(box, w, w, max_steps=500)
    assert res.converged and res.loss < 1e-8
    assert res.steps <= 500
