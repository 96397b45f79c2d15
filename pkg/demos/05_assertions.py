"""Success-assertion inference and temporal translation.

A small model tree separates the valid counterfactuals from nearby
failing inputs; its pass leaves become a disjunction of control-point
bound conjunctions, which is pruned and rewritten as a temporal
(forall-over-segment) assertion.
"""

import numpy as np

from decaf import CFParams, generate, get_plant, infer, prune, select, \
    translate, validate
from decaf.assertions import contrast_rows
from decaf.evaluation import g_score, predicate_count
from decaf.learn import identify_failures, make_causal_model, transform
from decaf.signals import TestInput
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
params = CFParams()
rng = np.random.default_rng(np.random.SeedSequence((17, params.seed, 0)))
cfs = select(validate(plant, phi, generate("kd", x_f, cm, d, spec, params,
                                           rng)), params.k_max)
print(f"{len(cfs)} valid counterfactuals for the failing input")

contrast = contrast_rows(d, x_f, spec, n=50)
raw = infer(cfs, TestInput.from_vector(spec, x_f), contrast, spec)
pruned = prune(raw)
print(f"\nraw assertion: {len(raw.dnf)} conjunctions, "
      f"{predicate_count(raw)} predicates, G-score {g_score(raw, cfs):.2f}")
print(f"pruned: {len(pruned.dnf)} conjunctions, "
      f"{predicate_count(pruned)} predicates, "
      f"G-score {g_score(pruned, cfs):.2f}")

print("\ncontrol-point form:")
print(f"  {pruned}")
print("\ntemporal form:")
print(f"  {translate(pruned, spec).render()}")
