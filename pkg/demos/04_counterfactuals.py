"""Counterfactual explanations for a failing input.

Three generators propose minimally-changed variants the causal model
predicts to pass; every candidate is replayed in the simulator, and only
simulator-confirmed passes survive selection.
"""

import numpy as np

from decaf import CFParams, generate, get_plant, select, validate
from decaf.assertions import explain_nl
from decaf.cfgen import proximity
from decaf.learn import identify_failures, make_causal_model, transform
from decaf.testgen import SAParams, build_training_set

plant, requirements = get_plant("at")
phi = requirements[0].formula
spec = plant.input_spec
ts = build_training_set(plant, phi, spec, n_runs=3,
                        params=SAParams(max_iters=60), seed=17,
                        retain="all-evaluated")
d = transform(ts)
cm = make_causal_model(d, "m5")
x_f = d.X[identify_failures(d)[0]]
print("failing input:", np.array2string(x_f, precision=1))

params = CFParams()
for method in ("rs", "ga", "kd"):
    rng = np.random.default_rng(np.random.SeedSequence((17, params.seed, 0)))
    candidates = generate(method, x_f, cm, d, spec, params, rng)
    chosen = select(validate(plant, phi, candidates), params.k_max)
    print(f"\n{method}: {len(candidates)} candidates, "
          f"{len(chosen)} simulator-valid")
    if chosen:
        best = chosen[0]
        rho, _ = best.validated
        print(f"  closest (proximity "
              f"{proximity(x_f, best.modified.as_vector(), spec):.3f}, "
              f"validated robustness {rho:.3f}):")
        for line in explain_nl(best, spec):
            print(f"    {line}")
