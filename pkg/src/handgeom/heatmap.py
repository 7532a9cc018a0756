"""Gaussian keypoint heatmaps, heatmap regression losses and box extraction.

Stacks are float arrays of shape ``(K, h, w)``; pixel ``(x, y)`` is
``stack[:, y, x]`` and pixel centres sit at integer coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyStack, HandGeomError, NonPositiveSigma

MIN_BOX_SIDE = 9.0
MIN_MAP_SIZE = 8


@dataclass(frozen=True)
class SquareBox:
    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        if not (self.x2 > self.x1 and self.y2 > self.y1):
            raise HandGeomError(f"invalid box {self.as_array()}")

    @property
    def side(self) -> float:
        return self.x2 - self.x1

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.x1 + self.x2), 0.5 * (self.y1 + self.y2))

    def is_square(self, tol: float = 1e-9) -> bool:
        return abs((self.x2 - self.x1) - (self.y2 - self.y1)) <= tol

    def as_array(self) -> np.ndarray:
        return np.array([self.x1, self.y1, self.x2, self.y2], float)


def render_gaussian(keypoints2d, w: int, h: int, sigma: float = 2.0, visibility=None) -> np.ndarray:
    """Render one unit-peak Gaussian per keypoint.

    Keypoints are truncated to their pixel before rendering so every visible
    keypoint inside the grid has a peak of exactly 1.  Invisible keypoints get
    an all-zero map.
    """
    if not sigma > 0:
        raise NonPositiveSigma(f"sigma must be positive, got {sigma}")
    if w < MIN_MAP_SIZE or h < MIN_MAP_SIZE:
        raise DimensionMismatch(f"heatmaps must be at least {MIN_MAP_SIZE}x{MIN_MAP_SIZE}, got {w}x{h}")
    kp = np.asarray(keypoints2d, float)
    vis = np.ones(len(kp), bool) if visibility is None else np.asarray(visibility, bool)
    centers = np.trunc(kp)
    xs = np.arange(w, dtype=float)
    ys = np.arange(h, dtype=float)
    dx2 = (xs[None, :] - centers[:, 0:1]) ** 2
    dy2 = (ys[None, :] - centers[:, 1:2]) ** 2
    maps = np.exp(-(dy2[:, :, None] + dx2[:, None, :]) / (2.0 * sigma**2))
    maps[~vis] = 0.0
    return maps


def _check_same(*stacks):
    shape = np.shape(stacks[0])
    for s in stacks[1:]:
        if np.shape(s) != shape:
            raise DimensionMismatch(f"stack shapes differ: {shape} vs {np.shape(s)}")


def heatmap_2d_loss(pred, gt):
    """Sum over joints of squared Frobenius distances; returns (loss, d loss / d pred)."""
    _check_same(pred, gt)
    diff = np.asarray(pred, float) - np.asarray(gt, float)
    return float(np.sum(diff * diff)), 2.0 * diff


def attention_loss(pred_left, pred_right, gt_left, gt_right):
    """Left plus right heatmap loss for a single sample.

    Returns ``(loss, (grad_left, grad_right))``.  Averaging over a batch is
    left to the caller.
    """
    _check_same(pred_left, pred_right, gt_left, gt_right)
    l_left, g_left = heatmap_2d_loss(pred_left, gt_left)
    l_right, g_right = heatmap_2d_loss(pred_right, gt_right)
    return l_left + l_right, (g_left, g_right)


def presence_score(stack) -> float:
    """Peak of the joint-averaged map."""
    stack = np.asarray(stack, float)
    return float(np.max(stack.mean(axis=0)))


def is_present(stack, tau: float = 0.25) -> bool:
    return presence_score(stack) >= tau


def peak_locations(stack):
    """Argmax ``(x, y)`` of every nonzero map, plus the mask of nonzero maps."""
    stack = np.asarray(stack, float)
    k, h, w = stack.shape
    flat = stack.reshape(k, -1)
    nonzero = flat.max(axis=1) > 0
    idx = flat.argmax(axis=1)
    xy = np.stack([idx % w, idx // w], axis=1).astype(float)
    return xy[nonzero], nonzero


def square_box(x1, y1, x2, y2, w: int, h: int, pad: float = 0.0,
               min_side: float = MIN_BOX_SIDE) -> SquareBox:
    """Pad a tight box, grow it to a square and fit it inside the image."""
    bw, bh = x2 - x1, y2 - y1
    x1, x2 = x1 - pad * bw, x2 + pad * bw
    y1, y2 = y1 - pad * bh, y2 + pad * bh
    side = max(x2 - x1, y2 - y1, min_side)
    cx, cy = 0.5 * (x1 + x2), 0.5 * (y1 + y2)
    # shift first, shrink only if the square cannot fit at all
    side = min(side, float(w - 1), float(h - 1))
    half = 0.5 * side
    cx = min(max(cx, half), (w - 1) - half)
    cy = min(max(cy, half), (h - 1) - half)
    return SquareBox(cx - half, cy - half, cx + half, cy + half)


def extract_box(stack, pad: float = 0.0) -> SquareBox:
    """Square box around the heatmap peaks, within the map bounds."""
    stack = np.asarray(stack, float)
    xy, _ = peak_locations(stack)
    if len(xy) == 0:
        raise EmptyStack("all heatmaps are zero")
    _, h, w = stack.shape
    (x1, y1), (x2, y2) = xy.min(axis=0), xy.max(axis=0)
    return square_box(x1, y1, x2, y2, w, h, pad)
