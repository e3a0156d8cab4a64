"""
Disagreement as uncertainty
===========================

Three sigmoided hypothesis masks are averaged into a probability map. Their
population variance is normalized per image and turned into a confidence
map in [1 - alpha, 1].
"""

# %%
import numpy as np

from vita.pdt_losses import HypothesisSet
from vita.uncertainty import confidence_from_variance, estimate_uncertainty, mean_and_variance

# A 1x3 strip. Left: all tokens agree. Middle: mild disagreement. Right:
# the tokens split as far apart as sigmoids allow.
logit = lambda p: np.log(p / (1 - p))
strip = np.array([[0.9, 0.9, 0.999999]]), np.array([[0.9, 0.6, 0.5]]), np.array([[0.9, 0.3, 0.000001]])
hyp = HypothesisSet(tuple(logit(p) for p in strip))
mean, var = mean_and_variance(hyp)
print("mean P  ", mean.round(4))
print("variance", var.round(4), "(upper bound 2/9 =", round(2 / 9, 4), ")")

# %%
# Confidence rescales the variance by its per-image maximum.
for alpha in (0.0, 0.7, 1.0):
    print(f"alpha={alpha}: C =", confidence_from_variance(var, alpha).round(6))

# %%
# The bundled helper returns everything at once.
out = estimate_uncertainty(hyp)
print("defaults: alpha", out.alpha, "epsilon", out.epsilon)
print("C", out.confidence.round(4))
