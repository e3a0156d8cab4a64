"""
Asymmetric segmentation losses
==============================

Each hypothesis token is trained with focal loss plus a Tversky loss whose
false-positive and false-negative weights differ. This script shows how the
weights shift the loss for the same mistakes.
"""

# %%
import numpy as np

from vita.pdt_losses import DEFAULT_PERSPECTIVES, TOKEN_NAMES, focal_loss, tversky_from_counts, tversky_loss

# Soft counts from a hypothetical prediction: 50 hits, 10 false alarms, 20 misses.
for name, cfg in zip(TOKEN_NAMES, DEFAULT_PERSPECTIVES):
    loss = tversky_from_counts(50, 10, 20, cfg.alpha_fp, cfg.alpha_fn)
    print(f"{name}: alpha_fp={cfg.alpha_fp} alpha_fn={cfg.alpha_fn} -> Tversky {loss:.5f}")

# %%
# The conservative token pays most for false alarms, the aggressive token
# for misses. Flip the error mix and the ranking flips with it.
for name, cfg in zip(TOKEN_NAMES, DEFAULT_PERSPECTIVES):
    print(name, "mostly FP:", round(tversky_from_counts(50, 20, 2, cfg.alpha_fp, cfg.alpha_fn), 4),
          "mostly FN:", round(tversky_from_counts(50, 2, 20, cfg.alpha_fp, cfg.alpha_fn), 4))

# %%
# Focal loss down-weights pixels that are already right. Larger gamma means
# confident pixels contribute less.
logits = np.array([[4.0, 0.2], [-0.3, -4.0]])
labels = np.array([[1.0, 1.0], [1.0, 0.0]])
for gamma in (0.0, 0.5, 2.0):
    value, grad = focal_loss(logits, labels, gamma)
    print(f"gamma={gamma}: loss {value:.4f}, |grad| per pixel\n{np.abs(grad).round(4)}")

# %%
# Both losses return analytic gradients with respect to the logits.
value, grad = tversky_loss(logits, labels, DEFAULT_PERSPECTIVES[0])
print("Tversky (con)", round(value, 4), "gradient\n", grad.round(4))
