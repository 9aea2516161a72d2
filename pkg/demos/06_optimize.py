"""
Minimizing a test function
==========================

Kinetic dynamics next to the first-order scheme under the same noise. Every
shipped objective has its minimizer at the origin.
"""

from kcbo.experiments import ExperimentConfig, run_optimize

cfg = ExperimentConfig(objective="cosine_well", J=100, R=5, T=10.0, first_order=True, record_stride=1000)
result = run_optimize(cfg)
print("success fraction:", result.summary["success_fraction"])
for t, f_kinetic, f_first in result.rows:
    print(f"t={t:5.1f}  f(consensus) kinetic={f_kinetic:.2e}  first-order={f_first:.2e}")
