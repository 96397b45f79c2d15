"""Piecewise-constant test inputs and quantitative STL monitoring.

A test input is one value per control point per signal; each signal is
rendered as a step function over equal-width segments of the horizon.
Robustness is a signed margin: positive means satisfied with room to
spare, negative means violated.
"""

import numpy as np

from decaf import get_plant, parse, robustness, simulate, verdict
from decaf.signals import TestInput, random_input

plant, requirements = get_plant("at")
spec = plant.input_spec
print(f"plant: {plant.name}, horizon {spec.horizon}s")
for s in spec.signals:
    print(f"  input {s.name}: {s.n_points} control points in "
          f"[{s.range_lo}, {s.range_hi}]")

x = TestInput.from_vector(spec, np.array(
    [80, 80, 40, 40, 20, 20, 20, 0, 200, 0], dtype=float))
trace = simulate(plant, x)
print(f"\nsimulated outputs: {sorted(trace.channels)}")

req = requirements[0]
print(f"\nrequirement {req.id}: {req.formula}")
rho = robustness(req.formula, trace)
print(f"robustness {rho:.3f} -> verdict {verdict(rho)}")

phi = parse("always[0,30] (Speed < 200 and RPM < 4800)")
print(f"\nad-hoc formula: {phi}")
rng = np.random.default_rng(17)
for _ in range(3):
    xi = random_input(spec, rng)
    rho = robustness(phi, simulate(plant, xi))
    print(f"  random input -> robustness {rho:8.3f} ({verdict(rho)})")
