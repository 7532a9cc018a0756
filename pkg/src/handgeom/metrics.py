"""Pose evaluation: endpoint error, PCK / AUC and per-joint-group errors.

Errors are pooled over all joints of all samples before taking means,
medians or PCK fractions.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import BadThresholds, CountMismatch
from .hand_model import DIP, MCP, PIP, TIP, HandPose

JOINT_GROUPS = {
    "PALM": np.array([0]),
    "MCP": MCP,
    "PIP": PIP,
    "DIP": DIP,
    "TIP": TIP,
}
AXES = ("X", "Y", "Z")


def default_thresholds(lo: float = 20.0, hi: float = 50.0, steps: int = 31) -> np.ndarray:
    return np.linspace(lo, hi, steps)


def _stack(poses, space: str) -> np.ndarray:
    if isinstance(poses, np.ndarray):
        return poses.astype(float)
    if space == "3d":
        return np.array([p.joints3d for p in poses], float)
    return np.array([p.joints2d for p in poses], float)


def _pair(pred, gt, space="3d"):
    if space not in ("2d", "3d"):
        raise ValueError(f"space must be '2d' or '3d', got {space!r}")
    p, g = _stack(pred, space), _stack(gt, space)
    if p.shape != g.shape:
        raise CountMismatch(f"prediction shape {p.shape} != ground truth shape {g.shape}")
    return p, g


def joint_errors(pred, gt, space: str = "3d", align_wrist: bool = False) -> np.ndarray:
    """Per-joint Euclidean distances, shape ``(N, 21)``."""
    p, g = _pair(pred, gt, space)
    if align_wrist:
        p = p - p[:, :1]
        g = g - g[:, :1]
    return np.linalg.norm(p - g, axis=-1)


def epe(pred, gt, space: str = "3d", align_wrist: bool = False) -> tuple[float, float]:
    """Mean and median endpoint error over the pooled joints."""
    err = joint_errors(pred, gt, space, align_wrist).ravel()
    if err.size == 0:
        return 0.0, 0.0
    return float(np.mean(err)), float(np.median(err))


@dataclass
class PckCurve:
    thresholds: np.ndarray
    values: np.ndarray

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["threshold", "value"])
        for t, v in zip(self.thresholds, self.values):
            w.writerow([repr(float(t)), repr(float(v))])
        return buf.getvalue()


def _check_thresholds(thresholds) -> np.ndarray:
    t = np.asarray(thresholds, float)
    if t.ndim != 1 or len(t) < 2 or np.any(np.diff(t) <= 0) or not np.all(np.isfinite(t)):
        raise BadThresholds("thresholds must be a strictly increasing list of >= 2 values")
    return t


def pck_from_errors(errors, thresholds, method: str = "exact"):
    """PCK curve and normalised area under it.

    ``method="exact"`` integrates the empirical PCK step function over the
    threshold span in closed form, i.e. the mean over joints of
    ``clip((t_max - e) / (t_max - t_min), 0, 1)``.  ``method="trapezoid"``
    applies the trapezoidal rule to the sampled curve instead.
    """
    t = _check_thresholds(thresholds)
    e = np.asarray(errors, float).ravel()
    if e.size == 0:
        raise CountMismatch("no errors to evaluate")
    values = (e[None, :] <= t[:, None]).mean(axis=1)
    span = t[-1] - t[0]
    if method == "exact":
        auc = float(np.mean(np.clip((t[-1] - e) / span, 0.0, 1.0)))
    elif method == "trapezoid":
        auc = float(np.sum(0.5 * (values[1:] + values[:-1]) * np.diff(t)) / span)
    else:
        raise ValueError(f"unknown AUC method {method!r}")
    return PckCurve(t, values), auc


def pck_auc(pred, gt, thresholds=None, space: str = "3d", align_wrist: bool = False,
            method: str = "exact"):
    thresholds = default_thresholds() if thresholds is None else thresholds
    return pck_from_errors(joint_errors(pred, gt, space, align_wrist), thresholds, method)


def joint_group_errors(pred, gt) -> dict:
    """Mean absolute X/Y/Z error within each joint group (3D poses)."""
    p, g = _pair(pred, gt, "3d")
    diff = np.abs(p - g)
    out = {}
    for name, idx in JOINT_GROUPS.items():
        m = diff[:, idx].reshape(-1, 3).mean(axis=0) if len(diff) else np.zeros(3)
        out[name] = {ax: float(v) for ax, v in zip(AXES, m)}
    return out


def evaluate(pred, gt, thresholds=None, space: str = "3d", align_wrist: bool = False) -> dict:
    """All metrics in one JSON-ready dict."""
    mean, median = epe(pred, gt, space, align_wrist)
    curve, auc = pck_auc(pred, gt, thresholds, space, align_wrist)
    report = {
        "space": space,
        "count": int(len(_stack(pred, space))),
        "epe_mean": mean,
        "epe_median": median,
        "auc": auc,
        "pck": {"thresholds": curve.thresholds.tolist(), "values": curve.values.tolist()},
    }
    if space == "3d":
        report["joint_groups"] = joint_group_errors(pred, gt)
    return report, curve
