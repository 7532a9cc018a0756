"""Affine box transform, cropping loss and a closed-form localizer.

``theta`` is a 2x3 matrix ``[[a, b, tx], [c, d, ty]]`` acting on pixel
coordinates.  The crop target for ``w x h`` output maps is the corner pair
``(0, 0), (w-1, h-1)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateBox, HandGeomError
from .heatmap import SquareBox

IDENTITY = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])


def as_theta(theta) -> np.ndarray:
    theta = np.asarray(theta, float)
    if theta.shape != (2, 3) or not np.all(np.isfinite(theta)):
        raise HandGeomError("theta must be a finite 2x3 matrix")
    return theta


def _corners(box) -> np.ndarray:
    b = box.as_array() if isinstance(box, SquareBox) else np.asarray(box, float)
    return b.reshape(2, 2)


def apply_affine(theta, box) -> np.ndarray:
    """Transformed corners ``[[x1', y1'], [x2', y2']]``."""
    theta = as_theta(theta)
    c = _corners(box)
    return c @ theta[:, :2].T + theta[:, 2]


def crop_pose(theta, pose2d) -> np.ndarray:
    theta = as_theta(theta)
    pts = np.asarray(pose2d, float)
    return pts @ theta[:, :2].T + theta[:, 2]


def crop_target(w: int, h: int) -> np.ndarray:
    return np.array([[0.0, 0.0], [w - 1.0, h - 1.0]])


def crop_loss(theta, box, w: int, h: int):
    """Squared distance between the transformed corners and the crop target.

    Returns ``(loss, grad)`` with ``grad`` shaped like ``theta``.
    """
    theta = as_theta(theta)
    c = _corners(box)
    r = apply_affine(theta, c) - crop_target(w, h)
    homog = np.hstack([c, np.ones((2, 1))])
    grad = 2.0 * r.T @ homog
    return float(np.sum(r * r)), grad


def detector_loss(att: float, crop: float, lam: float = 1.0) -> float:
    """Joint fine-tuning objective: attention loss plus weighted crop loss."""
    return att + lam * crop


def solve_localizer(box, w: int, h: int) -> np.ndarray:
    """Scale+translation theta mapping ``box`` exactly onto the crop target."""
    (x1, y1), (x2, y2) = _corners(box)
    if not (x2 > x1 and y2 > y1):
        raise DegenerateBox(f"box has no extent: {(x1, y1, x2, y2)}")
    sx = (w - 1.0) / (x2 - x1)
    sy = (h - 1.0) / (y2 - y1)
    return np.array([[sx, 0.0, -sx * x1], [0.0, sy, -sy * y1]])


@dataclass
class DescentResult:
    theta: np.ndarray
    loss: float
    steps: int
    converged: bool


def descend_crop(box, w: int, h: int, theta0=IDENTITY, step: float = 0.1,
                 max_steps: int = 2000, tol: float = 1e-8) -> DescentResult:
    """Gradient descent on :func:`crop_loss`, starting from ``theta0``.

    Pixel coordinates make the loss badly conditioned (corner coordinates of
    order 1e2 next to the unit translation column), so the descent runs on
    theta expressed in box-normalised coordinates: ``c = m + s * c_hat`` with
    ``m`` the box centre and ``s`` its half side.  The gradient is the
    crop-loss gradient pulled back through that linear change of variables.
    """
    c = _corners(box)
    m = c.mean(axis=0)
    s = 0.5 * float(np.max(c[1] - c[0]))
    if not s > 0:
        raise DegenerateBox("box has no extent")
    theta = as_theta(theta0).copy()
    # phi = [s*A | A m + t]
    phi = np.hstack([s * theta[:, :2], (theta[:, :2] @ m + theta[:, 2])[:, None]])

    def to_theta(p):
        a = p[:, :2] / s
        return np.hstack([a, (p[:, 2] - a @ m)[:, None]])

    loss, g = crop_loss(theta, c, w, h)
    steps = 0
    while loss >= tol and steps < max_steps:
        ga, gt = g[:, :2], g[:, 2]
        gphi = np.hstack([ga / s - np.outer(gt, m) / s, gt[:, None]])
        phi = phi - step * gphi
        theta = to_theta(phi)
        loss, g = crop_loss(theta, c, w, h)
        steps += 1
    return DescentResult(theta, loss, steps, loss < tol)
