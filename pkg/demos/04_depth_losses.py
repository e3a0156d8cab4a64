"""
Depth supervision without scale
===============================

A monocular depth head is only meaningful up to an affine map. The
scale-shift-invariant loss aligns the prediction to the teacher in closed
form and then measures the mean absolute residual.
"""

# %%
import numpy as np

from vita.geo_losses import GeoLossWeights, align_least_squares, smooth_l1, smooth_l1_geo, ssi_loss

rng = np.random.default_rng(0)
teacher = rng.uniform(5, 30, (16, 16))

for a, c in [(1.0, 0.0), (0.01, 3.0), (250.0, -40.0)]:
    print(f"pred = {a} * teacher + {c}: SSI loss {ssi_loss(a * teacher + c, teacher)[0]:.2e}")

# %%
# A prediction that really differs keeps a positive loss, and the
# alignment tells you which affine map was removed.
pred = 0.5 * teacher + 2 + rng.normal(0, 0.3, teacher.shape)
fit = align_least_squares(pred, teacher)
print(f"scale {fit.scale:.3f} shift {fit.shift:.3f} loss {ssi_loss(pred, teacher)[0]:.4f}")

# %%
# Risk heads are regressed onto the geometric pseudo-labels with Smooth L1.
e = np.array([[-2.0, -0.5, 0.0, 0.5, 2.0]])
print("smooth L1 per-pixel mean", smooth_l1(e, np.zeros_like(e))[0])
pred = {"slope": np.full((4, 4), 0.2), "elev": np.full((4, 4), 0.9)}
target = {"slope": np.zeros((4, 4)), "elev": np.full((4, 4), 0.1)}
total, grads = smooth_l1_geo(pred, target, GeoLossWeights(lambda_slope=1.0, lambda_elev=0.5))
print("weighted geometric loss", round(total, 4))
