# %% [markdown]
# Keypoint heatmaps, presence and the square hand box

# %%
import numpy as np

from handgeom import extract_box, heatmap_2d_loss, presence_score, random_fk_params, render_gaussian

rng = np.random.default_rng(1)
hand = random_fk_params(rng).build()

# %% render on a 64x64 grid; image pixels are scaled down by 5
kp = hand.joints2d * 0.2
stack = render_gaussian(kp, 64, 64, sigma=2.0)
print("stack shape", stack.shape, "peak of map 0:", stack[0].max())

# %% the presence score is the peak of the mean map
print("presence, hand:", round(presence_score(stack), 3))
print("presence, empty:", presence_score(np.zeros_like(stack)))

# %% a blurry prediction and its loss
pred = stack + rng.normal(0, 0.05, stack.shape)
loss, grad = heatmap_2d_loss(pred, stack)
print("2D heatmap loss:", round(loss, 3), "grad norm:", round(float(np.linalg.norm(grad)), 3))

# %% square box around the peaks, padded by 10%
box = extract_box(stack, pad=0.1)
print("box", box.as_array().round(2), "side", round(box.side, 2), "square:", box.is_square())
