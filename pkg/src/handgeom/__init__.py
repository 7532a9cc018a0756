"""Anatomy-constrained 3D hand-pose geometry: heatmaps, crops, constraint losses,
refinement and evaluation."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .hand_model import (
    DEFAULT_INTRINSICS, DIGITS, Digit, Finger, FKParams, HandPose, HandSample, HandSide,
    Intrinsics, JointId, Segment, joint_index, random_fk_params, synth_hand,
)
from .heatmap import (
    SquareBox, attention_loss, extract_box, heatmap_2d_loss, is_present, peak_locations,
    presence_score, render_gaussian, square_box,
)
from .crop import apply_affine, crop_loss, crop_pose, descend_crop, detector_loss, solve_localizer
from .anatomy import (
    ANGLE_IDS, AnatomyStats, AngleId, AngleKind, LossConfig, all_angles, angle_range_loss,
    base_loss, digit_angle, finger_lengths, fit_stats, geometric_loss, inward_normal,
    mean_ratio, overall_loss, ratio_from_lengths, ratio_loss, signed_angle, smooth_l1_depth,
    stage_loss, uniform_ranges,
)
from .refine import RefineReport, refine_many, refine_pose
from .metrics import PckCurve, epe, evaluate, joint_errors, joint_group_errors, pck_auc, pck_from_errors
from .io import RunConfig, ingest, load_config, write_manifest, write_samples
