"""Goodness metrics and statistical comparison machinery.

Per-counterfactual metrics (necessity, sufficiency) come from extra
simulations; generator comparisons use the Mann-Whitney U test and the
Vargha-Delaney A12 effect size over per-input validity outcomes.
"""

import numpy as np

from decaf import CFParams, generate, get_plant, parse, select, validate
from decaf.evaluation import (a12_category, mann_whitney_u, necessity,
                              sufficiency, vargha_delaney_a12)
from decaf.learn import identify_failures, make_causal_model, transform
from decaf.plants import monotone_toy_plant
from decaf.testgen import SAParams, build_training_set

# closed-form sanity check on the toy plant: output equals the mean of
# the control points, so the pass region of "y < 50" is mean <= 50
toy = monotone_toy_plant()
toy_phi = parse("always[0,10] (y < 50)")

plant, requirements = get_plant("at")
phi = requirements[0].formula
spec = plant.input_spec
ts = build_training_set(plant, phi, spec, n_runs=3,
                        params=SAParams(max_iters=60), seed=17,
                        retain="all-evaluated")
d = transform(ts)
cm = make_causal_model(d, "m5")
x_f = d.X[identify_failures(d)[0]]
params = CFParams()
rng = np.random.default_rng(np.random.SeedSequence((17, params.seed, 0)))
cfs = select(validate(plant, phi, generate("kd", x_f, cm, d, spec, params,
                                           rng)), params.k_max)

cf = cfs[0]
print(f"necessity of the closest counterfactual: "
      f"{necessity(plant, phi, cf)}")
s = sufficiency(plant, phi, cf, n=50, rng=np.random.default_rng(1))
print(f"sufficiency (50 held-point completions): "
      f"{'n/a' if s is None else f'{s:.2f}'}")

a = [0.9, 0.8, 1.0, 0.7, 0.95]
b = [0.4, 0.5, 0.3, 0.6, 0.45]
u, p = mann_whitney_u(a, b)
v, cat = vargha_delaney_a12(a, b)
print(f"\nMann-Whitney U={u}, p={p:.4f}")
print(f"A12={v:.2f} ({cat}); category of 0.53: {a12_category(0.53)}")
