"""
Conservative fusion
===================

The final score is the confidence-weighted mean probability, discounted by
the average geometric risk, so any single source can veto a pixel.
"""

# %%
import numpy as np

from vita.fusion import fuse, total_loss

cell = lambda x: np.full((1, 1), x)
print("worked example:", fuse(cell(0.3), cell(0.8), cell(0.4), cell(0.2))[0, 0])
print("no hazard:", fuse(cell(1.0), cell(0.7), cell(0.0), cell(0.0))[0, 0])
print("both risks saturated:", fuse(cell(0.9), cell(0.8), cell(1.0), cell(1.0))[0, 0])

# %%
# Sweep slope risk on a confident, likely-traversable pixel.
for r in np.linspace(0, 1, 5):
    print(f"slope risk {r:.2f} -> T {fuse(cell(0.95), cell(0.9), cell(r), cell(0.1))[0, 0]:.4f}")

# %%
# The training objective weights the geometric terms by lambda_geo = 2.
print("total loss", total_loss(1.2, 0.1, 0.05))
