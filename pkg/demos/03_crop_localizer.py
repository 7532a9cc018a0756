# %% [markdown]
# Crop transform: closed form vs gradient descent
#
# The crop loss measures how far the transformed box corners are from the
# output frame corners. The localizer solves it exactly; gradient descent
# from the identity gets there too.

# %%
import numpy as np

from handgeom import crop_loss, crop_pose, descend_crop, solve_localizer
from handgeom.heatmap import SquareBox

box = SquareBox(10, 10, 74, 74)
theta = solve_localizer(box, 64, 64)
print(theta)
print("loss at the closed form:", crop_loss(theta, box, 64, 64)[0])

# %%
res = descend_crop(box, 64, 64)
print(f"descent: loss {res.loss:.2e} after {res.steps} steps")
print(np.abs(res.theta - theta).max())

# %% keypoints inside the box land inside the 64x64 crop
pts = np.random.default_rng(2).uniform(10, 74, (21, 2))
mapped = crop_pose(theta, pts)
print("crop range:", mapped.min(axis=0).round(2), mapped.max(axis=0).round(2))
