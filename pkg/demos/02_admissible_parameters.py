"""
Finding parameters the decay estimates cover
============================================

``suggest_admissible`` searches mass, friction and noise until every clause
of the requested profiles holds; ``check_assumptions`` reports each clause
with its margin.
"""

from dataclasses import replace

from kcbo import CenteredDecay, PoC, Stability, check_assumptions, decay_rates, make_objective, suggest_admissible

f = make_objective("cosine_well", 2)
profiles = [CenteredDecay(2), CenteredDecay(8), PoC(4), Stability(1)]
params, report = suggest_admissible(f, profiles, alpha=1.0, dt=1e-3)
print(params)
print(report.format())

rates = decay_rates(params, f, [2, 8])
print(f"predicted decay rates: lambda_2={rates[2]:.4f}  lambda_8={rates[8]:.4f}")

# much louder noise breaks the small-noise clauses; the report says which
louder = replace(params, sigma=40 * params.sigma)
for check in check_assumptions(louder, f, profiles).failing():
    print("fails:", check.clause, f"margin={check.margin:.3g}")
