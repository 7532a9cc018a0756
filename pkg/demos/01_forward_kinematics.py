# %% [markdown]
# Forward-kinematics hands
#
# The synthetic generator builds a hand from bone lengths, flexion angles and
# abduction angles. Every test oracle in the package starts here, so it is
# worth checking that measuring a generated hand gives the inputs back.

# %%
import numpy as np

from handgeom import DIGITS, HandSide, all_angles, random_fk_params, synth_hand
from handgeom.hand_model import JointId, digit_vector

rng = np.random.default_rng(0)

# %% rest pose: fingers point along +y, palm faces +z for a right hand
rest = synth_hand(HandSide.RIGHT)
print("wrist", rest.joints3d[JointId.WRIST])
print("index tip", rest.joints3d[JointId.INDEX_TIP])
print("all flexion angles at rest:", all_angles(rest)[:10])

# %% a random hand and its round trip
params = random_fk_params(rng)
hand = params.build()
lengths = np.array([np.linalg.norm(digit_vector(hand, d)) for d in DIGITS])
print("max bone length error (mm):", np.abs(lengths - params.bone_lengths).max())
angles = all_angles(hand)
print("max flexion error (deg):", np.abs(angles[:10] - params.flexion_angles).max())
print("max abduction error (deg):", np.abs(angles[10:] - params.abduction_angles).max())

# %% left hands are mirror images through the plane x = root.x
params.side = HandSide.LEFT
left = params.build()
print("left vs mirrored right:", np.abs(left.joints3d - hand.mirrored(params.root[0]).joints3d).max())

# %% 2D keypoints come from the pinhole projection
print("projected wrist (px):", hand.joints2d[0])
