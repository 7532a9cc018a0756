# %% [markdown]
# Anatomy statistics and constraint losses

# %%
import numpy as np

from handgeom import (
    ANGLE_IDS,
    angle_range_loss,
    fit_stats,
    mean_ratio,
    random_fk_params,
    ratio_from_lengths,
    ratio_loss,
    signed_angle,
)

rng = np.random.default_rng(3)
corpus = [random_fk_params(rng).build() for _ in range(500)]
stats = fit_stats(corpus)
print("mean ratio", round(stats.mean_ratio, 5), "variance", stats.ratio_variance)
print("finger lengths (middle = 10):", stats.finger_lengths_norm.round(2))
for a in ANGLE_IDS[:3]:
    print(a.label, np.round(stats.angle_ranges[a], 1))

# %% the finger ratio only depends on finger lengths
print("equal fingers:", ratio_from_lengths([8] * 5))
print("6.4, 9.5, 10, 9, 7.4:", round(ratio_from_lengths([6.4, 9.5, 10.0, 9.0, 7.4]), 5))

# %% directional angles tell a palm-ward bend from a reflex bend
print(signed_angle((0, 1, 0), (1, 0, 0), (0, 0, -1)), signed_angle((0, 1, 0), (-1, 0, 0), (0, 0, -1)))

# %% a pose from the corpus satisfies its own statistics...
pose = corpus[0]
print("ratio loss", ratio_loss(pose, stats)[0], "angle loss", angle_range_loss(pose, stats)[0])

# %% ...a depth-stretched finger does not
x = pose.joints3d.copy()
x[7:9, 2] += 0.6 * (x[7, 2] - x[6, 2])
bad = pose.with_joints3d(x)
print("ratio", round(mean_ratio(bad), 4), "loss", ratio_loss(bad, stats)[0])
loss, grad = angle_range_loss(bad, stats)
print("angle loss", round(loss, 3), "gradient rows touched:", int(np.any(grad != 0, axis=1).sum()))
