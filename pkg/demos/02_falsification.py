"""Falsification-driven data generation.

Simulated annealing minimizes STL robustness over the control-point
space; retaining every evaluated input yields a labeled training set
that mixes passing and failing behavior around the failure region.
"""

import numpy as np

from decaf import get_plant
from decaf.testgen import SAParams, build_training_set, simulated_annealing

plant, requirements = get_plant("at")
req = requirements[0]
params = SAParams(max_iters=60)

log: list = []
best = simulated_annealing(plant, req.formula, plant.input_spec, params,
                           np.random.default_rng(17), log=log)
print(f"one annealing run: best robustness {best.robustness:.3f} "
      f"({best.verdict})")
print("robustness trajectory (every 10th step):")
print("  " + " ".join(f"{rb:7.2f}" for _, rb in log[::10]))

ts = build_training_set(plant, req.formula, plant.input_spec, n_runs=3,
                        params=params, seed=17, retain="all-evaluated")
print(f"\ntraining set: {len(ts.rows)} rows, {ts.n_fail} failing")
print("CSV head:")
print("\n".join(ts.to_csv().splitlines()[:3]))
