"""Learning causal models of requirement violation.

Both model variants regress robustness on the control points; an input
is predicted to pass iff the estimate is non-negative.  The M5 model
tree stays small and readable; the random forest trades readability for
variance reduction.
"""

from decaf import get_plant
from decaf.learn import (classifier_metrics, identify_failures,
                         make_causal_model, train_test_split, transform)
from decaf.testgen import SAParams, build_training_set

plant, requirements = get_plant("at")
ts = build_training_set(plant, requirements[0].formula, plant.input_spec,
                        n_runs=3, params=SAParams(max_iters=60), seed=17,
                        retain="all-evaluated")
d = transform(ts)
print(f"dataset: {len(d)} rows, {len(identify_failures(d))} failing")

train, holdout = train_test_split(d, test_fraction=0.2, seed=17)
for variant in ("m5", "rf"):
    cm = make_causal_model(train, variant)
    accuracy, recall, f1 = classifier_metrics(cm, holdout)
    print(f"\n{variant}: holdout accuracy {accuracy:.3f}, "
          f"recall {recall:.3f}, f1 {f1:.3f}")
    est, label = cm.predict(d.X[identify_failures(d)[0]])
    print(f"  first failing input: estimated robustness {est:.3f} "
          f"-> predicted {label}")
