"""Hand skeleton topology, pose containers and a forward-kinematics generator.

Joint ordering is canonical for the whole package: WRIST first, then for each
finger thumb -> little the MCP, PIP, DIP and TIP joints, so finger ``i`` joint
``j`` lives at index ``1 + 4*i + j``.  Dataset-native orders are remapped at
ingestion (see :mod:`handgeom.io`).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import HandGeomError, NonPositiveLength

NUM_JOINTS = 21
NUM_FINGERS = 5


class Finger(enum.IntEnum):
    THUMB = 0
    INDEX = 1
    MIDDLE = 2
    RING = 3
    LITTLE = 4


class JointId(enum.IntEnum):
    WRIST = 0
    THUMB_MCP = 1
    THUMB_PIP = 2
    THUMB_DIP = 3
    THUMB_TIP = 4
    INDEX_MCP = 5
    INDEX_PIP = 6
    INDEX_DIP = 7
    INDEX_TIP = 8
    MIDDLE_MCP = 9
    MIDDLE_PIP = 10
    MIDDLE_DIP = 11
    MIDDLE_TIP = 12
    RING_MCP = 13
    RING_PIP = 14
    RING_DIP = 15
    RING_TIP = 16
    LITTLE_MCP = 17
    LITTLE_PIP = 18
    LITTLE_DIP = 19
    LITTLE_TIP = 20

    @property
    def finger(self) -> Optional[Finger]:
        if self == JointId.WRIST:
            return None
        return Finger((self - 1) // 4)


def joint_index(finger: int, j: int) -> int:
    """Canonical index of joint ``j`` (0=MCP .. 3=TIP) on ``finger``."""
    return 1 + 4 * int(finger) + j


MCP = np.array([joint_index(f, 0) for f in range(NUM_FINGERS)])
PIP = np.array([joint_index(f, 1) for f in range(NUM_FINGERS)])
DIP = np.array([joint_index(f, 2) for f in range(NUM_FINGERS)])
TIP = np.array([joint_index(f, 3) for f in range(NUM_FINGERS)])


class HandSide(enum.Enum):
    LEFT = "left"
    RIGHT = "right"

    @property
    def sign(self) -> float:
        """+1 for right hands, -1 for left; flips inward-normal orientation."""
        return 1.0 if self is HandSide.RIGHT else -1.0


class Segment(enum.IntEnum):
    PROXIMAL = 0
    MIDDLE = 1
    DISTAL = 2


@dataclass(frozen=True)
class Digit:
    finger: Finger
    segment: Segment

    @property
    def endpoints(self) -> tuple[int, int]:
        start = joint_index(self.finger, int(self.segment))
        return start, start + 1


DIGITS = tuple(Digit(Finger(f), Segment(s)) for f in range(NUM_FINGERS) for s in range(3))


def _frozen(a, shape, dtype=float):
    arr = np.array(a, dtype=dtype)
    if arr.shape != shape:
        raise HandGeomError(f"expected array of shape {shape}, got {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class HandPose:
    """21 joints of one hand. 3D in millimetres (camera frame), 2D in pixels."""

    side: HandSide
    joints3d: np.ndarray
    joints2d: np.ndarray = None
    visibility: np.ndarray = None

    def __post_init__(self):
        j3 = _frozen(self.joints3d, (NUM_JOINTS, 3))
        j2 = j3[:, :2] if self.joints2d is None else self.joints2d
        j2 = _frozen(j2, (NUM_JOINTS, 2))
        vis = np.ones(NUM_JOINTS, bool) if self.visibility is None else self.visibility
        vis = _frozen(vis, (NUM_JOINTS,), bool)
        if not (np.all(np.isfinite(j3)) and np.all(np.isfinite(j2))):
            raise HandGeomError("pose coordinates must be finite")
        object.__setattr__(self, "side", HandSide(self.side))
        object.__setattr__(self, "joints3d", j3)
        object.__setattr__(self, "joints2d", j2)
        object.__setattr__(self, "visibility", vis)

    def with_joints3d(self, joints3d) -> "HandPose":
        return HandPose(self.side, joints3d, self.joints2d, self.visibility)

    def translated(self, offset) -> "HandPose":
        return self.with_joints3d(self.joints3d + np.asarray(offset, float))

    def mirrored(self, x0: float = 0.0) -> "HandPose":
        """Reflect through the plane x = x0 and swap the side label."""
        j3 = self.joints3d.copy()
        j3[:, 0] = 2.0 * x0 - j3[:, 0]
        other = HandSide.LEFT if self.side is HandSide.RIGHT else HandSide.RIGHT
        return HandPose(other, j3, self.joints2d, self.visibility)

    def __eq__(self, other):
        if not isinstance(other, HandPose):
            return NotImplemented
        return (
            self.side is other.side
            and np.array_equal(self.joints3d, other.joints3d)
            and np.array_equal(self.joints2d, other.joints2d)
            and np.array_equal(self.visibility, other.visibility)
        )


@dataclass(frozen=True)
class Intrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def project(self, xyz: np.ndarray) -> np.ndarray:
        xyz = np.asarray(xyz, float)
        z = xyz[..., 2]
        if np.any(z <= 0):
            raise HandGeomError("cannot project points with z <= 0")
        u = self.fx * xyz[..., 0] / z + self.cx
        v = self.fy * xyz[..., 1] / z + self.cy
        return np.stack([u, v], axis=-1)


DEFAULT_INTRINSICS = Intrinsics(600.0, 600.0, 160.0, 160.0)


@dataclass(frozen=True, eq=False)
class HandSample:
    id: str
    pose: HandPose
    intrinsics: Optional[Intrinsics] = None
    has_3d: bool = True

    def __post_init__(self):
        if not self.id:
            raise HandGeomError("sample id must be non-empty")

    def __eq__(self, other):
        if not isinstance(other, HandSample):
            return NotImplemented
        return (self.id == other.id and self.pose == other.pose
                and self.intrinsics == other.intrinsics and self.has_3d == other.has_3d)


def digit_vector(pose: HandPose | np.ndarray, digit: Digit) -> np.ndarray:
    """Vector from the proximal to the distal endpoint of ``digit`` (mm)."""
    xyz = pose.joints3d if isinstance(pose, HandPose) else np.asarray(pose)
    a, b = digit.endpoints
    return xyz[b] - xyz[a]


# ---------------------------------------------------------------------------
# forward kinematics

# Bone lengths (mm) per finger: proximal, middle, distal.  Finger totals are
# in the proportions 6.4 : 9.5 : 10 : 9 : 7.4.
DEFAULT_BONE_LENGTHS = np.array([
    [28.0, 20.0, 16.0],
    [42.0, 30.0, 23.0],
    [45.0, 30.0, 25.0],
    [41.0, 27.0, 22.0],
    [33.0, 22.0, 19.0],
]).ravel()

# MCP positions in the palm plane relative to the wrist, fingers along +y,
# thumb on the -x side of a right hand.
DEFAULT_MCP_LAYOUT = np.array([
    [-45.0, 35.0],
    [-24.0, 80.0],
    [-5.0, 84.0],
    [13.0, 80.0],
    [29.0, 70.0],
])

DEFAULT_ABDUCTION = np.array([30.0, 8.0, 8.0, 10.0])


def _rotate(v, axis, angle_deg):
    """Rotate ``v`` about unit ``axis`` (perpendicular to ``v``)."""
    t = np.deg2rad(angle_deg)
    return v * np.cos(t) + np.cross(axis, v) * np.sin(t)


def synth_hand(
    side: HandSide = HandSide.RIGHT,
    bone_lengths: Sequence[float] = DEFAULT_BONE_LENGTHS,
    flexion_angles: Sequence[float] = (0.0,) * 10,
    abduction_angles: Sequence[float] = DEFAULT_ABDUCTION,
    root: Sequence[float] = (0.0, 0.0, 500.0),
    mcp_spread: float = 1.0,
    intrinsics: Optional[Intrinsics] = DEFAULT_INTRINSICS,
) -> HandPose:
    """Deterministic forward-kinematics hand.

    The wrist sits at ``root``, MCP joints lie in the palm plane z = root.z and
    proximal phalanges fan within that plane.  The middle finger points along
    +y; ``abduction_angles`` are the angles between adjacent proximal
    phalanges, thumb-index first.  ``flexion_angles`` holds the five
    proximal-middle angles followed by the five middle-distal angles (thumb to
    little), each bending the finger toward -z (the palm side).  A LEFT hand is
    the RIGHT hand reflected through the plane x = root.x.

    The generator is the inverse of :func:`handgeom.anatomy.all_angles` and of
    the digit-length measurements, which is what the tests rely on.
    """
    lengths = np.asarray(bone_lengths, float).reshape(NUM_FINGERS, 3)
    if np.any(~(lengths > 0)):
        raise NonPositiveLength("bone lengths must be positive")
    flex = np.asarray(flexion_angles, float)
    abd = np.asarray(abduction_angles, float)
    if flex.shape != (10,) or abd.shape != (4,):
        raise HandGeomError("need 10 flexion and 4 abduction angles")
    if not (np.all(np.isfinite(flex)) and np.all(np.isfinite(abd))):
        raise HandGeomError("angles must be finite")
    root = np.asarray(root, float)

    # heading of each proximal phalanx, measured from +y toward +x
    heading = np.zeros(NUM_FINGERS)
    heading[1] = -abd[1]
    heading[0] = heading[1] - abd[0]
    heading[3] = abd[2]
    heading[4] = heading[3] + abd[3]

    palm_side = np.array([0.0, 0.0, -1.0])
    xyz = np.zeros((NUM_JOINTS, 3))
    xyz[0] = root
    for f in range(NUM_FINGERS):
        mcp = root + np.array([DEFAULT_MCP_LAYOUT[f, 0] * mcp_spread, DEFAULT_MCP_LAYOUT[f, 1], 0.0])
        h = np.deg2rad(heading[f])
        u = np.array([np.sin(h), np.cos(h), 0.0])
        axis = np.cross(u, palm_side)
        m = _rotate(u, axis, flex[f])
        d = _rotate(m, axis, flex[5 + f])
        i = joint_index(f, 0)
        xyz[i] = mcp
        xyz[i + 1] = mcp + lengths[f, 0] * u
        xyz[i + 2] = xyz[i + 1] + lengths[f, 1] * m
        xyz[i + 3] = xyz[i + 2] + lengths[f, 2] * d

    side = HandSide(side)
    if side is HandSide.LEFT:
        xyz[:, 0] = 2.0 * root[0] - xyz[:, 0]
    uv = intrinsics.project(xyz) if intrinsics is not None else xyz[:, :2].copy()
    return HandPose(side, xyz, uv, np.ones(NUM_JOINTS, bool))


@dataclass
class FKParams:
    side: HandSide
    bone_lengths: np.ndarray
    flexion_angles: np.ndarray
    abduction_angles: np.ndarray
    root: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 500.0]))

    def build(self, **kw) -> HandPose:
        return synth_hand(self.side, self.bone_lengths, self.flexion_angles,
                          self.abduction_angles, self.root, **kw)


def random_fk_params(
    rng: np.random.Generator,
    flex_range=(5.0, 80.0),
    abduction_range=(5.0, 20.0),
    length_scale_range=(0.85, 1.15),
    length_jitter: float = 0.0,
    side: Optional[HandSide] = None,
) -> FKParams:
    """Draw FK parameters; bone lengths keep the default proportions unless jittered."""
    scale = rng.uniform(*length_scale_range)
    lengths = DEFAULT_BONE_LENGTHS * scale
    if length_jitter:
        lengths = lengths * (1.0 + rng.uniform(-length_jitter, length_jitter, lengths.shape))
    flex = rng.uniform(*flex_range, size=10)
    abd = rng.uniform(*abduction_range, size=4)
    if side is None:
        side = HandSide.RIGHT if rng.random() < 0.5 else HandSide.LEFT
    root = np.array([rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(400, 700)])
    return FKParams(side, lengths, flex, abd, root)
