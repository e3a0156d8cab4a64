"""
Training a token bank
=====================

Generate synthetic scenes, fit the token bank with AdamW, then inspect the
per-pixel maps it produces on an unseen scene.
"""

# %%
import numpy as np

from vita.model import infer
from vita.scenes import SceneParams, generate_dataset
from vita.training import TrainConfig, train

base = SceneParams(preset="mixed", height=48, width=48)
train_scenes = generate_dataset(60, base, start_seed=0)
test_scene = generate_dataset(1, base, start_seed=5000)[0]

history = []
# A short demo run; the default 5e-4 rate needs the full 10 epochs on 200 scenes.
config = TrainConfig(epochs=5, seed=0, learning_rate=2e-2, depth_learning_rate=2e-2)
bank = train(train_scenes, config, history=history)
for epoch, row in enumerate(history, start=1):
    print(f"epoch {epoch}: total {row['total']:.4f} (sem {row['L_sem']:.4f}, geo {row['L_geo']:.4f}, distill {row['L_distill']:.4f})")

# %%
out = infer(bank, test_scene.rgb)
for name, m in out.maps().items():
    print(f"{name:8s} min {m.min():.3f} mean {m.mean():.3f} max {m.max():.3f}")

# %%
# Thresholding the fused score gives the traversable mask.
pred = out.score >= 0.5
gt = test_scene.label > 0
print("IoU on the held-out scene", round((pred & gt).sum() / (pred | gt).sum(), 4))
# Depth is learned only up to an affine map, and the least-squares scale may
# be negative, so R^2 is the meaningful agreement measure.
r = np.corrcoef(out.depth.ravel(), test_scene.depth.ravel())[0, 1]
print("R^2 between predicted and scene depth:", round(r * r, 3))
