"""
Monte Carlo error of the weighted mean
======================================

For i.i.d. samples the empirical weighted mean converges to its population
value with mean squared error of order ``1/J``.
"""

from kcbo.experiments import ExperimentConfig, run_wm_mc_rate

cfg = ExperimentConfig(R=30, proxy_size=200_000, alpha=1.0)
result = run_wm_mc_rate(cfg, J_list=[100, 1000, 10_000])
for J, mse in result.rows:
    print(f"J={J:>6}  mse={mse:.3e}")
print(f"slope {result.summary['fit'].slope:.2f}")
