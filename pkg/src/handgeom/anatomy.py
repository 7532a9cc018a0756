"""Anatomical constraints: finger-length ratios and digit angle ranges.

Angles are in degrees.  Every loss returns ``(value, gradient)`` where the
gradient is taken with respect to the ``(21, 3)`` joint array; it is derived
by hand (reverse-mode chain rule through dot, cross, normalisation and
atan2), and checked against central differences in the test-suite.

Angle conventions
-----------------
Flexion of finger ``n`` is measured about an axis ``k`` perpendicular to its
proximal phalanx ``b`` and lying in the plane spanned by ``b`` and the MCP
row vector ``a`` (``MCP[n+1] - MCP[n]``; for the little finger
``MCP[little] - MCP[index]``).  The inward (palm-side) normal is
``side * unit(b x a)``, and ``k = side * unit(b x (b x a))`` so that a bend
toward the inward normal is positive.  Both flexion angles of a finger are
measured about the same ``k``::

    angle = atan2((u x v) . k, u . v)  mod 360

with ``u`` the proximal-ward and ``v`` the distal-ward digit.  Straight
digits give 0, palm-ward bends land in (0, 180) and backward (reflex) bends in
(180, 360).  Abduction between adjacent proximal phalanges is measured the
same way about the palm normal ``unit((INDEX_MCP - WRIST) x (LITTLE_MCP -
WRIST))``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, fields
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import (
    CollinearJoints,
    ConfigError,
    EmptyCorpus,
    HandGeomError,
    ZeroLengthDigit,
    ZeroLengthFinger,
)
from .hand_model import (
    DIP,
    MCP,
    NUM_FINGERS,
    PIP,
    TIP,
    HandPose,
    HandSample,
    HandSide,
    JointId,
)
from .heatmap import heatmap_2d_loss

DEG = 180.0 / math.pi
_EPS = 1e-12

N_PAIRS = NUM_FINGERS * (NUM_FINGERS - 1) // 2  # 10


class AngleKind(enum.Enum):
    PROX_MID = "prox_mid"
    MID_DIST = "mid_dist"
    ABDUCTION = "abduction"


@dataclass(frozen=True)
class AngleId:
    """``finger`` is the finger index, or for ABDUCTION the lower finger of the pair."""

    kind: AngleKind
    finger: int

    def __post_init__(self):
        limit = 4 if self.kind is AngleKind.ABDUCTION else 5
        if not 0 <= self.finger < limit:
            raise HandGeomError(f"no {self.kind.value} angle for finger {self.finger}")

    def __lt__(self, other):
        return ANGLE_IDS.index(self) < ANGLE_IDS.index(other)

    @property
    def label(self) -> str:
        return f"{self.kind.value}:{self.finger}"


ANGLE_IDS: tuple[AngleId, ...] = (
    tuple(AngleId(AngleKind.PROX_MID, f) for f in range(5))
    + tuple(AngleId(AngleKind.MID_DIST, f) for f in range(5))
    + tuple(AngleId(AngleKind.ABDUCTION, f) for f in range(4))
)
ANGLE_INDEX = {a: i for i, a in enumerate(ANGLE_IDS)}

# MCP row vectors a = X[head] - X[tail]
_A_HEAD = MCP[[1, 2, 3, 4, 4]]
_A_TAIL = MCP[[0, 1, 2, 3, 1]]


def _xyz(pose) -> np.ndarray:
    return pose.joints3d if isinstance(pose, HandPose) else np.asarray(pose, float)


def _side_sign(pose, side) -> float:
    if side is None:
        side = pose.side if isinstance(pose, HandPose) else HandSide.RIGHT
    return HandSide(side).sign


def _dot(a, b):
    return np.einsum("...i,...i->...", a, b)


# ---------------------------------------------------------------------------
# finger lengths and ratios


def finger_lengths(pose) -> np.ndarray:
    """Length of each finger (thumb..little): sum of its three digit lengths."""
    x = _xyz(pose)
    segs = np.stack([x[PIP] - x[MCP], x[DIP] - x[PIP], x[TIP] - x[DIP]], axis=1)
    return np.linalg.norm(segs, axis=2).sum(axis=1)


def finger_length(pose, finger: int) -> float:
    return float(finger_lengths(pose)[int(finger)])


def ratio_from_lengths(lengths) -> float:
    """Average over the 10 finger pairs of (sum of later fingers) / finger.

    The little finger has no later fingers and contributes 0, but the divisor
    stays at 10.
    """
    lengths = np.asarray(lengths, float)
    if np.any(~(lengths > 0)):
        raise ZeroLengthFinger(f"finger lengths must be positive: {lengths}")
    later = np.cumsum(lengths[::-1])[::-1] - lengths
    return float(np.sum(later / lengths) / N_PAIRS)


def _ratio_length_grad(lengths):
    inv = 1.0 / lengths
    later = np.cumsum(lengths[::-1])[::-1] - lengths
    earlier_inv = np.cumsum(inv) - inv
    return (earlier_inv - later * inv**2) / N_PAIRS


def mean_ratio(pose) -> float:
    return ratio_from_lengths(finger_lengths(pose))


def ratio_loss(pose, stats: "AnatomyStats | float"):
    """Squared gap between the pose's mean ratio and the corpus mean."""
    x = _xyz(pose)
    rbar = stats.mean_ratio if isinstance(stats, AnatomyStats) else float(stats)
    segs = np.stack([x[PIP] - x[MCP], x[DIP] - x[PIP], x[TIP] - x[DIP]], axis=1)
    norms = np.linalg.norm(segs, axis=2)
    lengths = norms.sum(axis=1)
    r = ratio_from_lengths(lengths)
    diff = r - rbar
    g_len = 2.0 * diff * _ratio_length_grad(lengths)
    with np.errstate(invalid="ignore", divide="ignore"):
        units = np.where(norms[..., None] > 0, segs / norms[..., None], 0.0)
    g_seg = g_len[:, None, None] * units
    grad = np.zeros((21, 3))
    for s, (lo, hi) in enumerate(((MCP, PIP), (PIP, DIP), (DIP, TIP))):
        grad[hi] += g_seg[:, s]
        grad[lo] -= g_seg[:, s]
    return diff * diff, grad


# ---------------------------------------------------------------------------
# angles


def _unit(v, what):
    n = np.linalg.norm(v, axis=-1)
    if np.any(n < _EPS):
        raise CollinearJoints(f"degenerate {what}")
    return v / n[..., None], n


def _wrap360(deg):
    out = np.mod(deg, 360.0)
    # mod of a tiny negative number rounds up to exactly 360
    return np.where(out >= 360.0, 0.0, out)


def _forward(x, s):
    a = x[_A_HEAD] - x[_A_TAIL]
    b = x[PIP] - x[MCP]
    m = x[DIP] - x[PIP]
    d = x[TIP] - x[DIP]
    for name, v in (("proximal", b), ("middle", m), ("distal", d)):
        if np.any(np.linalg.norm(v, axis=1) < _EPS):
            raise ZeroLengthDigit(f"zero-length {name} digit")
    c = np.cross(b, a)
    cn = np.linalg.norm(c, axis=1)
    if np.any(cn <= 1e-9 * np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1)):
        raise CollinearJoints("proximal phalanx parallel to the MCP row")
    w = np.cross(b, c)
    w_hat, wn = _unit(w, "flexion axis")
    k = s * w_hat

    p = np.cross(b, m)
    y1, x1 = _dot(p, k), _dot(b, m)
    q = np.cross(m, d)
    y2, x2 = _dot(q, k), _dot(m, d)

    vi = x[JointId.INDEX_MCP] - x[JointId.WRIST]
    vl = x[JointId.LITTLE_MCP] - x[JointId.WRIST]
    e = np.cross(vi, vl)
    en = np.linalg.norm(e)
    if en <= 1e-9 * np.linalg.norm(vi) * np.linalg.norm(vl):
        raise CollinearJoints("wrist, index MCP and little MCP are collinear")
    palm = e / en
    r = np.cross(b[:-1], b[1:])
    y3, x3 = r @ palm, _dot(b[:-1], b[1:])

    ys = np.concatenate([y1, y2, y3])
    xs = np.concatenate([x1, x2, x3])
    cache = dict(s=s, a=a, b=b, m=m, d=d, c=c, w_hat=w_hat, wn=wn, k=k, p=p, q=q,
                 vi=vi, vl=vl, palm=palm, en=en, r=r, ys=ys, xs=xs)
    return _wrap360(np.arctan2(ys, xs) * DEG), cache


def _backward(cache, g_ang):
    """Pull a gradient on the 14 angles back onto the joints."""
    ys, xs = cache["ys"], cache["xs"]
    den = xs * xs + ys * ys
    gy = g_ang * DEG * xs / den
    gx = -g_ang * DEG * ys / den
    gy1, gy2, gy3 = gy[:5], gy[5:10], gy[10:]
    gx1, gx2, gx3 = gx[:5], gx[5:10], gx[10:]
    a, b, m, d, c, k = (cache[n] for n in "abmdck")
    p, q, r, palm = cache["p"], cache["q"], cache["r"], cache["palm"]

    g_b = gx1[:, None] * m
    g_m = gx1[:, None] * b
    g_p = gy1[:, None] * k
    g_k = gy1[:, None] * p
    g_b += np.cross(m, g_p)
    g_m += np.cross(g_p, b)

    g_m += gx2[:, None] * d
    g_d = gx2[:, None] * m
    g_q = gy2[:, None] * k
    g_k += gy2[:, None] * q
    g_m += np.cross(d, g_q)
    g_d += np.cross(g_q, m)

    w_hat, wn, s = cache["w_hat"], cache["wn"], cache["s"]
    g_what = s * g_k
    g_w = (g_what - w_hat * _dot(w_hat, g_what)[:, None]) / wn[:, None]
    g_b += np.cross(c, g_w)
    g_c = np.cross(g_w, b)
    g_b += np.cross(a, g_c)
    g_a = np.cross(g_c, b)

    g_b[:-1] += gx3[:, None] * b[1:]
    g_b[1:] += gx3[:, None] * b[:-1]
    g_r = gy3[:, None] * palm
    g_palm = gy3 @ r
    g_b[:-1] += np.cross(b[1:], g_r)
    g_b[1:] += np.cross(g_r, b[:-1])
    g_e = (g_palm - palm * (palm @ g_palm)) / cache["en"]
    vi, vl = cache["vi"], cache["vl"]
    g_vi = np.cross(vl, g_e)
    g_vl = np.cross(g_e, vi)

    grad = np.zeros((21, 3))
    grad[PIP] += g_b
    grad[MCP] -= g_b
    grad[DIP] += g_m
    grad[PIP] -= g_m
    grad[TIP] += g_d
    grad[DIP] -= g_d
    np.add.at(grad, _A_HEAD, g_a)
    np.add.at(grad, _A_TAIL, -g_a)
    grad[JointId.INDEX_MCP] += g_vi
    grad[JointId.LITTLE_MCP] += g_vl
    grad[JointId.WRIST] -= g_vi + g_vl
    return grad


def all_angles(pose, side: Optional[HandSide] = None) -> np.ndarray:
    """The 14 digit angles in ``ANGLE_IDS`` order, each in [0, 360)."""
    angles, _ = _forward(_xyz(pose), _side_sign(pose, side))
    return angles


def digit_angle(pose, angle: AngleId, side: Optional[HandSide] = None) -> float:
    return float(all_angles(pose, side)[ANGLE_INDEX[angle]])


def signed_angle(u, v, axis) -> float:
    """Angle from ``u`` to ``v`` about ``axis``, in [0, 360) degrees."""
    u, v, axis = (np.asarray(t, float) for t in (u, v, axis))
    return float(_wrap360(math.degrees(math.atan2(np.cross(u, v) @ axis, u @ v))))


def inward_normal(pose, angle: AngleId, side: Optional[HandSide] = None) -> np.ndarray:
    """Unit vector pointing to the palm side of the digit pair ``angle``.

    A positive bend moves the distal-ward digit toward this vector.  For
    PROX_MID it is the normal of the plane through MCP[n], the neighbouring
    MCP and PIP[n]; for MID_DIST it is ``unit(k x middle digit)`` using the
    finger's flexion axis ``k``; for ABDUCTION the palm normal.  Left hands are
    handled by multiplying with -1.
    """
    _, cache = _forward(_xyz(pose), _side_sign(pose, side))
    s, f = cache["s"], angle.finger
    if angle.kind is AngleKind.PROX_MID:
        return s * cache["c"][f] / np.linalg.norm(cache["c"][f])
    if angle.kind is AngleKind.MID_DIST:
        n = np.cross(cache["k"][f], cache["m"][f])
        return n / np.linalg.norm(n)
    return s * cache["palm"]


def _hinge(angles, lo, hi):
    """Quadratic penalty on the circular distance outside [lo, hi].

    An angle outside its range is charged against whichever boundary is
    nearer going around the circle, so a slightly hyperextended straight digit
    (e.g. 359.5 with lo = 0.3) is pulled forward past 0 rather than dragged
    backward toward hi.
    """
    width = np.mod(hi - lo, 360.0)
    full = (hi - lo) >= 360.0
    pos = np.mod(angles - lo, 360.0)
    above = pos - width
    below = 360.0 - pos
    outside = (pos > width) & ~full
    use_above = above <= below
    v = np.where(outside, np.where(use_above, above, below), 0.0)
    dv = np.where(outside, np.where(use_above, 1.0, -1.0), 0.0)
    return v, dv


def angle_range_loss(pose, stats: "AnatomyStats", side: Optional[HandSide] = None):
    """Sum over the 14 angles of the squared range violation (deg^2)."""
    x = _xyz(pose)
    angles, cache = _forward(x, _side_sign(pose, side))
    lo, hi = stats.range_arrays()
    v, dv = _hinge(angles, lo, hi)
    loss = float(np.sum(v * v))
    g_ang = 2.0 * v * dv
    if not np.any(g_ang):
        return loss, np.zeros((21, 3))
    return loss, _backward(cache, g_ang)


def angle_violations(pose, stats: "AnatomyStats", side=None) -> np.ndarray:
    """Per-angle distance outside the allowed range (0 inside)."""
    lo, hi = stats.range_arrays()
    return _hinge(all_angles(pose, side), lo, hi)[0]


# ---------------------------------------------------------------------------
# depth loss


def smooth_l1_depth(pred_z, gt_z, delta: float = 10.0, literal: bool = False):
    """Huber loss on depth residuals; returns ``(loss, d loss / d pred_z)``.

    By default the Huber function is applied to every joint residual and
    summed.  ``literal=True`` instead applies it once to the squared residual
    norm ``e = ||pred_z - gt_z||^2``.
    """
    if not delta > 0:
        raise HandGeomError("delta must be positive")
    r = np.asarray(pred_z, float) - np.asarray(gt_z, float)
    if literal:
        e = float(r @ r)
        if e <= delta:
            return 0.5 * e * e, 2.0 * e * r
        return delta * (e - 0.5 * delta), 2.0 * delta * r
    ar = np.abs(r)
    small = ar <= delta
    per = np.where(small, 0.5 * r * r, delta * (ar - 0.5 * delta))
    grad = np.where(small, r, delta * np.sign(r))
    return float(per.sum()), grad


# ---------------------------------------------------------------------------
# statistics and configuration


@dataclass
class AnatomyStats:
    mean_ratio: float
    ratio_variance: float
    angle_ranges: dict
    finger_lengths_norm: np.ndarray = field(default_factory=lambda: np.full(5, np.nan))

    def __post_init__(self):
        if not self.mean_ratio > 0:
            raise HandGeomError("mean ratio must be positive")
        missing = set(ANGLE_IDS) - set(self.angle_ranges)
        if missing:
            raise HandGeomError(f"missing angle ranges: {sorted(a.label for a in missing)}")
        for a, (lo, hi) in self.angle_ranges.items():
            if not lo <= hi:
                raise HandGeomError(f"range for {a.label} has min > max")
        self.finger_lengths_norm = np.asarray(self.finger_lengths_norm, float)

    def range_arrays(self):
        lo = np.array([self.angle_ranges[a][0] for a in ANGLE_IDS], float)
        hi = np.array([self.angle_ranges[a][1] for a in ANGLE_IDS], float)
        return lo, hi

    def to_dict(self) -> dict:
        return {
            "mean_ratio": self.mean_ratio,
            "ratio_variance": self.ratio_variance,
            "angle_ranges": [
                {"kind": a.kind.value, "finger": a.finger,
                 "min_deg": self.angle_ranges[a][0], "max_deg": self.angle_ranges[a][1]}
                for a in ANGLE_IDS
            ],
            "finger_lengths_norm": [float(v) for v in self.finger_lengths_norm],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AnatomyStats":
        ranges = {
            AngleId(AngleKind(r["kind"]), int(r["finger"])): (float(r["min_deg"]), float(r["max_deg"]))
            for r in d["angle_ranges"]
        }
        return cls(float(d["mean_ratio"]), float(d["ratio_variance"]), ranges,
                   np.asarray(d.get("finger_lengths_norm", [np.nan] * 5), float))


def uniform_ranges(lo: float, hi: float, abduction: Optional[tuple] = None) -> dict:
    """Convenience: the same flexion range for every finger."""
    abd = abduction if abduction is not None else (lo, hi)
    return {a: (abd if a.kind is AngleKind.ABDUCTION else (lo, hi)) for a in ANGLE_IDS}


def _signed(angles):
    return np.mod(angles + 180.0, 360.0) - 180.0


def fit_stats(corpus: Iterable[HandSample | HandPose]) -> AnatomyStats:
    """Corpus mean/variance of the finger ratio, angle ranges and finger lengths.

    Angle ranges are taken over angles wrapped to [-180, 180) so a slightly
    hyperextended digit widens the range to a small negative minimum instead
    of pushing the maximum to ~360.  The variance is the population variance.
    """
    ratios, angles, lengths = [], [], []
    for item in corpus:
        pose = item.pose if isinstance(item, HandSample) else item
        if isinstance(item, HandSample) and not item.has_3d:
            raise HandGeomError(f"sample {item.id} has no 3D annotation")
        ls = finger_lengths(pose)
        ratios.append(ratio_from_lengths(ls))
        angles.append(_signed(all_angles(pose)))
        lengths.append(10.0 * ls / ls[2])
    if not ratios:
        raise EmptyCorpus("cannot fit statistics on an empty corpus")
    ratios = np.array(ratios)
    angles = np.array(angles)
    # shift by the first sample so a constant corpus gives exactly zero variance
    d = ratios - ratios[0]
    dm = np.mean(d)
    mean = float(ratios[0] + dm)
    var = float(np.mean((d - dm) ** 2))
    lo, hi = angles.min(axis=0), angles.max(axis=0)
    ranges = {a: (float(lo[i]), float(hi[i])) for i, a in enumerate(ANGLE_IDS)}
    return AnatomyStats(mean, var, ranges, np.mean(lengths, axis=0))


@dataclass
class LossConfig:
    """Loss weights and optimiser settings.

    ``step`` is the refiner's initial step size; the line search doubles or
    halves it from there.
    """

    lam: float = 1.0
    lambda_reg: float = 1.0
    lambda_geo: float = 1.0
    beta_fr: float = 1000.0
    beta_ar: float = 1.0
    delta: float = 10.0
    sigma: float = 2.0
    tau: float = 0.25
    step: float = 1e-2
    min_step: float = 1e-12
    max_iterations: int = 2000
    tolerance: float = 1e-9
    line_search: bool = True
    refine_xyz: bool = False
    literal_depth: bool = False
    crop_step: float = 0.1
    crop_max_steps: int = 2000

    def __post_init__(self):
        for name in ("lam", "lambda_reg", "lambda_geo", "beta_fr", "beta_ar"):
            if not getattr(self, name) >= 0:
                raise ConfigError(f"{name} must be >= 0")
        for name in ("delta", "sigma", "step", "min_step", "tolerance", "crop_step"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0")
        if not 0 <= self.tau <= 1:
            raise ConfigError("tau must lie in [0, 1]")
        if self.max_iterations < 0 or self.crop_max_steps < 0:
            raise ConfigError("iteration limits must be >= 0")

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


# ---------------------------------------------------------------------------
# composite losses


def geometric_loss(pose, stats: AnatomyStats, cfg: LossConfig):
    """``beta_fr * L_fr + beta_ar * L_ar`` with its joint gradient."""
    value, grad = 0.0, np.zeros((21, 3))
    if cfg.beta_fr:
        l, g = ratio_loss(pose, stats)
        value += cfg.beta_fr * l
        grad += cfg.beta_fr * g
    if cfg.beta_ar:
        l, g = angle_range_loss(pose, stats)
        value += cfg.beta_ar * l
        grad += cfg.beta_ar * g
    return value, grad


def _depth_term(pred_pose, gt_pose, cfg):
    l, gz = smooth_l1_depth(pred_pose.joints3d[:, 2], gt_pose.joints3d[:, 2], cfg.delta, cfg.literal_depth)
    g = np.zeros((21, 3))
    g[:, 2] = gz
    return l, g


def stage_loss(sample: HandSample, pred_heatmaps, pred_pose: HandPose, gt_heatmaps,
               stats: AnatomyStats, cfg: LossConfig, stage: int):
    """Stage-wise training loss for one sample.

    Stage 1 is 2D heatmap loss plus smooth-L1 depth loss and needs 3D
    annotation.  Stage 2 falls back to stage 1 for 3D samples and otherwise
    replaces the depth term by the weighted anatomy losses.

    Returns ``(value, {"heatmaps": grad, "joints3d": grad})``.
    """
    if stage not in (1, 2):
        raise HandGeomError(f"stage must be 1 or 2, got {stage}")
    l2d, ghm = heatmap_2d_loss(pred_heatmaps, gt_heatmaps)
    if sample.has_3d:
        ld, gj = _depth_term(pred_pose, sample.pose, cfg)
    elif stage == 1:
        raise HandGeomError(f"stage 1 needs 3D annotation (sample {sample.id})")
    else:
        ld, gj = geometric_loss(pred_pose, stats, cfg)
    return l2d + ld, {"heatmaps": ghm, "joints3d": gj}


def overall_loss(sample: HandSample, pred_heatmaps, pred_pose: HandPose, gt_heatmaps,
                 stats: AnatomyStats, cfg: LossConfig):
    """2D loss + smooth-L1 depth + both weighted anatomy terms."""
    if not sample.has_3d:
        raise HandGeomError("the combined loss needs 3D annotation")
    l2d, ghm = heatmap_2d_loss(pred_heatmaps, gt_heatmaps)
    ld, gj = _depth_term(pred_pose, sample.pose, cfg)
    lg, gg = geometric_loss(pred_pose, stats, cfg)
    return l2d + ld + lg, {"heatmaps": ghm, "joints3d": gj + gg}


def base_loss(sample: HandSample, pred_heatmaps, pred_pose: HandPose, gt_heatmaps,
              stats: AnatomyStats, cfg: LossConfig):
    """Baseline objective: 2D loss plus weighted L2 depth regression, or the
    weighted geometric constraints when the sample has no 3D annotation."""
    l2d, ghm = heatmap_2d_loss(pred_heatmaps, gt_heatmaps)
    if sample.has_3d:
        r = pred_pose.joints3d[:, 2] - sample.pose.joints3d[:, 2]
        gj = np.zeros((21, 3))
        gj[:, 2] = 2.0 * cfg.lambda_reg * r
        return l2d + cfg.lambda_reg * float(r @ r), {"heatmaps": ghm, "joints3d": gj}
    lg, gg = geometric_loss(pred_pose, stats, cfg)
    return l2d + cfg.lambda_geo * lg, {"heatmaps": ghm, "joints3d": cfg.lambda_geo * gg}
