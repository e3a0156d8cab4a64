"""
Metrics and robustness
======================

Score a trained model with micro-averaged IoU and precision/recall, then
repeat the evaluation under appearance corruptions of rising severity.
"""

# %%
import numpy as np

from vita.evaluation import CORRUPTION_TABLE, CorruptionSpec, binary_metrics, corrupt, evaluate_dataset, format_table
from vita.scenes import SceneParams, generate_dataset
from vita.training import TrainConfig, train

gt = np.array([[1, 1, 1], [1, 0, 0], [0, 0, 0]], float)
pred = np.array([[1, 1, 1], [0, 1, 0], [0, 0, 0]], float)
print(binary_metrics(pred, gt).to_dict())

# %%
base = SceneParams(preset="mixed", height=48, width=48)
fast = TrainConfig(epochs=5, seed=0, learning_rate=2e-2, depth_learning_rate=2e-2)
bank = train(generate_dataset(60, base, start_seed=0), fast)
test = generate_dataset(8, base, start_seed=7000)
print(format_table(evaluate_dataset(bank, test)))

# %%
# Each corruption has a fixed severity table; deviation from the clean
# image grows with severity.
img = test[0].rgb
for kind, table in CORRUPTION_TABLE.items():
    mads = [np.abs(corrupt(img, CorruptionSpec(kind, s)) - img).mean() for s in range(1, 6)]
    print(f"{kind:15s} params {table} MAD {np.round(mads, 4).tolist()}")

# %%
for kind in CORRUPTION_TABLE:
    ious = [evaluate_dataset(bank, test, corruption=CorruptionSpec(kind, s)).overall.iou for s in (1, 3, 5)]
    print(f"{kind:15s} IoU at severity 1/3/5: {np.round(ious, 4).tolist()}")
