# %% [markdown]
# Evaluation: EPE, PCK curve, AUC and per-group errors

# %%
import numpy as np

from handgeom import evaluate, pck_from_errors, random_fk_params
from handgeom.metrics import default_thresholds

rng = np.random.default_rng(4)
gt = np.array([random_fk_params(rng).build().joints3d for _ in range(50)])
pred = gt + rng.normal(0, 15, gt.shape)

report, curve = evaluate(pred, gt)
print(f"EPE mean {report['epe_mean']:.2f} mm, median {report['epe_median']:.2f} mm, AUC {report['auc']:.3f}")
for group, axes in report["joint_groups"].items():
    print(group, {k: round(v, 2) for k, v in axes.items()})

# %% the curve is plot-ready CSV
print(curve.to_csv()[:80])

# %% constant 25 mm error on a 20..50 mm grid
_, exact = pck_from_errors(np.full(10, 25.0), default_thresholds())
_, trap = pck_from_errors(np.full(10, 25.0), default_thresholds(), method="trapezoid")
print("exact", exact, "trapezoid", trap)
