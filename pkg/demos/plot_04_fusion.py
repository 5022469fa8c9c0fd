"""
Logistic-regression fusion
==========================

Three detectors that each catch a different half of the attacks are combined
by prior-weighted logistic regression. The fused score beats each input.
"""

import numpy as np

from ssdetect.evaluation import compute_eer
from ssdetect.fusion import apply_fusion, fuse_detectors

def detectors(seed, n=600):
    rng = np.random.default_rng(seed)
    natural = np.arange(n) % 2 == 0
    kind = (np.arange(n) // 2) % 3
    x = rng.normal(0, 1, (n, 3))
    for j in range(3):
        x[~natural & (kind == j), j] -= 2.5
    return x, natural

x_dev, y_dev = detectors(0)
x_eval, y_eval = detectors(1)
model = fuse_detectors(x_dev, y_dev)
print("weights", np.round(model.weights, 3), "bias %.3f" % model.bias)
for j, name in enumerate(model.labels):
    print("%-9s EER %.2f%%" % (name, 100 * compute_eer(x_eval[y_eval, j], x_eval[~y_eval, j])))
fused = apply_fusion(model, x_eval)
print("fused     EER %.2f%%" % (100 * compute_eer(fused[y_eval], fused[~y_eval])))
print("threshold stored with the model: %.3f" % model.threshold)
