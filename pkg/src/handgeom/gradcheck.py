"""Finite-difference check of every analytic loss gradient.

Each loss is evaluated on ``n`` seeded random inputs and its gradient is
compared with central differences.  The relative error of one input is
``|g_analytic - g_numeric| / max(|g_analytic|, |g_numeric|)`` over the checked
coordinates; inputs whose gradient norm is at most ``min_norm`` are skipped.
Heatmap losses are checked at 10 random pixels per input, everything else at
every coordinate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .anatomy import AnatomyStats, angle_range_loss, mean_ratio, ratio_loss, smooth_l1_depth, uniform_ranges
from .crop import crop_loss
from .hand_model import HandPose, random_fk_params
from .heatmap import attention_loss, heatmap_2d_loss, render_gaussian

LOSS_NAMES = ("attention_loss", "heatmap_2d_loss", "crop_loss", "ratio_loss",
              "angle_range_loss", "smooth_l1_depth")


@dataclass
class CheckResult:
    name: str
    checked: int = 0
    skipped: int = 0
    max_rel_error: float = 0.0
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures and self.checked > 0


def central_difference(f, x: np.ndarray, h: float = 1e-4, coords=None) -> np.ndarray:
    """Numeric gradient of scalar ``f`` at ``x`` over flat ``coords`` (all by default)."""
    x = np.array(x, float)
    flat = x.ravel()
    coords = range(flat.size) if coords is None else coords
    out = np.zeros(len(coords))
    for k, i in enumerate(coords):
        old = flat[i]
        flat[i] = old + h
        fp = f(x)
        flat[i] = old - h
        fm = f(x)
        flat[i] = old
        out[k] = (fp - fm) / (2.0 * h)
    return out


def relative_error(ga, gn) -> float:
    ga, gn = np.ravel(ga), np.ravel(gn)
    scale = max(np.linalg.norm(ga), np.linalg.norm(gn))
    return float(np.linalg.norm(ga - gn) / scale) if scale > 0 else 0.0


def _record(res: CheckResult, i, ga, gn, tol, min_norm):
    if max(np.linalg.norm(ga), np.linalg.norm(gn)) <= min_norm:
        res.skipped += 1
        return
    err = relative_error(ga, gn)
    res.checked += 1
    res.max_rel_error = max(res.max_rel_error, err)
    if not err < tol:
        res.failures.append((i, err))


def _noisy_pose(rng):
    pose = random_fk_params(rng).build()
    return pose.with_joints3d(pose.joints3d + rng.normal(0.0, 3.0, (21, 3)))


def _random_stack(rng, w=16, h=16):
    kp = rng.uniform(0, [w - 1, h - 1], (21, 2))
    return render_gaussian(kp, w, h, sigma=rng.uniform(1.0, 3.0))


def _pixels(rng, shape, count=10):
    return rng.choice(int(np.prod(shape)), size=count, replace=False)


def check_attention(rng, i, res, h, tol, min_norm):
    gl, gr = _random_stack(rng), _random_stack(rng)
    pl = gl + rng.normal(0, 0.1, gl.shape)
    pr = gr + rng.normal(0, 0.1, gr.shape)
    _, (dl, dr) = attention_loss(pl, pr, gl, gr)
    side = rng.integers(2)
    if side == 0:
        px = _pixels(rng, pl.shape)
        gn = central_difference(lambda x: attention_loss(x, pr, gl, gr)[0], pl, h, px)
        _record(res, i, dl.ravel()[px], gn, tol, min_norm)
    else:
        px = _pixels(rng, pr.shape)
        gn = central_difference(lambda x: attention_loss(pl, x, gl, gr)[0], pr, h, px)
        _record(res, i, dr.ravel()[px], gn, tol, min_norm)


def check_heatmap_2d(rng, i, res, h, tol, min_norm):
    gt = _random_stack(rng)
    pred = gt + rng.normal(0, 0.1, gt.shape)
    _, g = heatmap_2d_loss(pred, gt)
    px = _pixels(rng, pred.shape)
    gn = central_difference(lambda x: heatmap_2d_loss(x, gt)[0], pred, h, px)
    _record(res, i, g.ravel()[px], gn, tol, min_norm)


def check_crop(rng, i, res, h, tol, min_norm):
    w = int(rng.integers(16, 129))
    x1, y1 = rng.uniform(0, 200, 2)
    side = rng.uniform(10, 200)
    box = np.array([x1, y1, x1 + side, y1 + side])
    theta = np.array([[1, 0, 0], [0, 1, 0]], float) + rng.normal(0, 0.3, (2, 3))
    _, g = crop_loss(theta, box, w, w)
    gn = central_difference(lambda t: crop_loss(t, box, w, w)[0], theta, h)
    _record(res, i, g, gn, tol, min_norm)


def check_ratio(rng, i, res, h, tol, min_norm):
    pose = _noisy_pose(rng)
    rbar = mean_ratio(pose) + rng.choice([-1, 1]) * rng.uniform(0.01, 0.1)
    _, g = ratio_loss(pose, rbar)
    gn = central_difference(lambda x: ratio_loss(x, rbar)[0], pose.joints3d, h)
    _record(res, i, g, gn, tol, min_norm)


def check_angle(rng, i, res, h, tol, min_norm):
    pose = _noisy_pose(rng)
    lo = rng.uniform(5, 25)
    stats = AnatomyStats(1.0, 0.0, uniform_ranges(lo, lo + rng.uniform(10, 40), (-5.0, 5.0)))
    side = pose.side
    _, g = angle_range_loss(pose, stats)
    gn = central_difference(lambda x: angle_range_loss(x, stats, side)[0], pose.joints3d, h)
    _record(res, i, g, gn, tol, min_norm)


def check_smooth_l1(rng, i, res, h, tol, min_norm):
    delta = rng.uniform(1.0, 20.0)
    literal = bool(i % 2)
    gt = rng.uniform(400, 700, 21)
    if literal:
        r = rng.normal(0, 1, 21)
        r *= np.sqrt(delta * rng.choice([rng.uniform(0.1, 0.8), rng.uniform(1.25, 4.0)])) / np.linalg.norm(r)
    else:
        r = rng.uniform(-3 * delta, 3 * delta, 21)
        near = np.abs(np.abs(r) - delta) < 1e-2 * delta
        r[near] *= 0.5
    pred = gt + r
    _, g = smooth_l1_depth(pred, gt, delta, literal)
    gn = central_difference(lambda z: smooth_l1_depth(z, gt, delta, literal)[0], pred, h)
    _record(res, i, g, gn, tol, min_norm)


CHECKS = {
    "attention_loss": check_attention,
    "heatmap_2d_loss": check_heatmap_2d,
    "crop_loss": check_crop,
    "ratio_loss": check_ratio,
    "angle_range_loss": check_angle,
    "smooth_l1_depth": check_smooth_l1,
}


def run_suite(seed: int = 0, n: int = 200, h: float = 1e-4, tol: float = 1e-5,
              min_norm: float = 1e-8, names=LOSS_NAMES) -> list[CheckResult]:
    """Run the named checks; each loss gets its own seeded stream."""
    results = []
    for k, name in enumerate(names):
        rng = np.random.default_rng([seed, k])
        res = CheckResult(name)
        for i in range(n):
            CHECKS[name](rng, i, res, h, tol, min_norm)
        results.append(res)
    return results
