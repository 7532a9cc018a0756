"""Constraint-driven pose refinement by gradient descent.

This is a test-time stand-in for training a depth regressor with the anatomy
losses: the same objective and gradients, applied to one pose at a time.  By
default only the depth (z) coordinates move.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .anatomy import AnatomyStats, LossConfig, geometric_loss
from .errors import DivergedLoss, HandGeomError
from .hand_model import HandPose

DIVERGENCE_PATIENCE = 20
ARMIJO = 1e-4


@dataclass
class RefineReport:
    iterations: int
    initial_loss: float
    final_loss: float
    initial_epe: Optional[float] = None
    final_epe: Optional[float] = None
    trajectory: list = field(default_factory=list)

    def to_dict(self, with_trajectory: bool = False) -> dict:
        d = asdict(self)
        if not with_trajectory:
            d.pop("trajectory")
        return d


def _mean_epe(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.mean(np.linalg.norm(a - b, axis=1)))


def refine_pose(init: HandPose, stats: AnatomyStats, cfg: LossConfig = None,
                gt: Optional[HandPose] = None, record_trajectory: bool = True):
    """Minimise ``beta_fr * L_fr + beta_ar * L_ar`` starting from ``init``.

    With ``cfg.line_search`` (default) each step starts from the previous
    step size times two and is halved until the Armijo condition holds, so the
    recorded losses never increase; if no step above ``cfg.min_step`` helps,
    the pose is treated as stationary.  Without line search a fixed step of
    ``cfg.step`` is used and :class:`DivergedLoss` is raised after
    ``DIVERGENCE_PATIENCE`` consecutive increases, or when the run ends above the
starting loss.

    Returns ``(refined_pose, RefineReport)``.
    """
    cfg = cfg or LossConfig()
    mask = np.ones((21, 3)) if cfg.refine_xyz else np.array([0.0, 0.0, 1.0])[None, :].repeat(21, 0)

    def objective(x):
        try:
            f, g = geometric_loss(init.with_joints3d(x), stats, cfg)
        except HandGeomError:
            return np.inf, None
        return f, g * mask

    x = init.joints3d.copy()
    f, g = objective(x)
    if not np.isfinite(f):
        raise HandGeomError("objective is undefined at the initial pose")
    report = RefineReport(0, f, f)
    if gt is not None:
        report.initial_epe = _mean_epe(x, gt.joints3d)
    if record_trajectory:
        report.trajectory.append(f)

    step = cfg.step
    increases = 0
    for _ in range(cfg.max_iterations):
        gg = float(np.sum(g * g))
        if f <= cfg.tolerance or gg == 0.0:
            break
        if cfg.line_search:
            while step >= cfg.min_step:
                xn = x - step * g
                fn, gn = objective(xn)
                if fn <= f - ARMIJO * step * gg:
                    break
                step *= 0.5
            else:
                break
        else:
            xn = x - step * g
            fn, gn = objective(xn)
            if not np.isfinite(fn):
                raise DivergedLoss("objective became undefined")
            increases = increases + 1 if fn > f else 0
            if increases >= DIVERGENCE_PATIENCE:
                raise DivergedLoss(f"loss increased for {increases} consecutive steps")
        change = f - fn
        x, f, g = xn, fn, gn
        report.iterations += 1
        if record_trajectory:
            report.trajectory.append(f)
        if cfg.line_search:
            step *= 2.0
        if abs(change) < cfg.tolerance:
            break

    if f > report.initial_loss:
        # only reachable without line search
        raise DivergedLoss(f"loss ended above its start ({f:.6g} > {report.initial_loss:.6g})")
    report.final_loss = f
    if gt is not None:
        report.final_epe = _mean_epe(x, gt.joints3d)
    return init.with_joints3d(x), report


def refine_many(poses: Sequence[HandPose], stats: AnatomyStats, cfg: LossConfig = None,
                gts: Optional[Sequence[HandPose]] = None, threads: int = 1):
    """Refine a batch; results keep input order whatever ``threads`` is."""
    gts = list(gts) if gts is not None else [None] * len(poses)
    if len(gts) != len(poses):
        raise HandGeomError("need one ground-truth pose per input pose")
    jobs = list(zip(poses, gts))

    def run(job):
        return refine_pose(job[0], stats, cfg, job[1], record_trajectory=False)

    if threads <= 1:
        return [run(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(run, jobs))
