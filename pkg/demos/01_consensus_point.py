"""
The weighted consensus point
============================

The consensus point is a softmax-weighted mean of the particles: weights are
``exp(-alpha f(x))``, so a larger inverse temperature ``alpha`` pulls the point
toward the best particle.
"""

import numpy as np

from kcbo import delta_alpha, make_objective, weighted_consensus

f = make_objective("ackley", 2)
rng = np.random.default_rng(1)
X = rng.normal(scale=2.0, size=(50, 2))
best = X[np.argmin(f.eval(X))]

# sweep alpha and watch the point travel from the plain mean to the best particle
for alpha in (0.0, 0.5, 2.0, 10.0, 100.0):
    point = weighted_consensus(X, alpha, f).point
    gap = np.linalg.norm(point - best)
    shift = np.linalg.norm(delta_alpha(X, alpha, f))
    print(f"alpha={alpha:6.1f}  consensus={point.round(3)}  |to best|={gap:.3f}  |mean - consensus|={shift:.3f}")

# huge alpha does not overflow: weights are evaluated with log-sum-exp
print("alpha=1e6:", weighted_consensus(X, 1e6, f).point.round(6), "best:", best.round(6))
