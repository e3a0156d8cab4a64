"""
Geometric hazards from depth alone
==================================

Pixels plus depth become pseudo 3-D points. A plane is fitted to the points
labelled traversable, and every pixel is scored by how much its surface
tilts away from that plane and how high it sits above it.
"""

# %%
import numpy as np
from scipy.stats import spearmanr

from vita.geometry import fit_ground_plane, height_to_risk, pseudo_risk_labels, surface_normals
from vita.scenes import SceneParams, generate_scene

# A tilted plane is recovered exactly.
v, u = np.mgrid[0:20, 0:20].astype(float)
depth = 30.0 + 0.2 * u - 0.1 * v
plane = fit_ground_plane(depth, np.ones_like(depth))
want = np.array([0.2, -0.1, -1.0]) / np.linalg.norm([0.2, -0.1, -1.0])
print("normal", plane.normal.round(6), "offset", round(plane.offset, 6))
# the sign is chosen so that points nearer the camera count as raised
print("angle to the planted normal (deg)", np.degrees(np.arccos(min(1.0, abs(plane.normal @ want)))))

# %%
# Elevation risk saturates smoothly. With beta = 3 a height of ln(2)/3 maps
# to exactly one half.
h = np.array([[0.0, np.log(2) / 3, 0.5, 1.0, 3.0]])
print("height", h.round(3), "-> risk", height_to_risk(h, 3.0).round(4))

# %%
# On a synthetic slope scene the slope score tracks the true gradient.
scene = generate_scene(SceneParams(0, preset="slope_hazard"))
labels = pseudo_risk_labels(scene.depth, scene.label)
m = scene.params.margin + 1
inner = (slice(m, -m), slice(m, -m))
rho = spearmanr(labels.slope[inner].ravel(), scene.oracle["slope"][inner].ravel())[0]
print(f"slope risk vs true gradient: Spearman rho {rho:.3f}")
print("normals shape", surface_normals(scene.depth).shape)

# %%
# Obstacles show up as elevation risk.
scene = generate_scene(SceneParams(0, preset="elevated_obstacle"))
labels = pseudo_risk_labels(scene.depth, scene.label)
raised = scene.oracle["height"] > 0
print(f"mean elevation risk on obstacles {labels.elevation[raised].mean():.3f}, elsewhere {labels.elevation[~raised].mean():.3f}")
