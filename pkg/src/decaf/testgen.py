"""Simulated-annealing generation of labeled training inputs.

Each annealing run minimizes requirement robustness to steer toward
failure-inducing inputs; repeating the run with independent seeds yields a
labeled training set for the causal models.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from math import exp

import numpy as np

from .plants import Plant, simulate
from .signals import InputSpec, TestInput, random_input
from .stl import Formula, robustness, verdict

__all__ = ["SAParams", "LabeledInput", "TrainingSet", "tweak",
           "simulated_annealing", "build_training_set"]


@dataclass(frozen=True)
class SAParams:
    """Annealing knobs: initial temperature, geometric cooling rate, budget
    and tweak strength (fraction of each signal's range used as noise sigma).

    The temperature acts on robustness normalized by the first sample's
    magnitude, so acceptance behaves the same across plants with very
    different robustness scales.
    """

    initial_temp: float = 1.0
    cooling_rate: float = 0.97
    max_iters: int = 300
    tweak_strength: float = 0.1

    def __post_init__(self):
        if self.initial_temp <= 0:
            raise ValueError("initial_temp must be positive")
        if not 0 < self.cooling_rate < 1:
            raise ValueError("cooling_rate must be in (0, 1)")
        if self.max_iters < 0:
            raise ValueError("max_iters must be non-negative")
        if not 0 < self.tweak_strength <= 1:
            raise ValueError("tweak_strength must be in (0, 1]")


@dataclass(frozen=True)
class LabeledInput:
    input: TestInput
    robustness: float
    verdict: str

    def __post_init__(self):
        if self.verdict != verdict(self.robustness):
            raise ValueError("verdict does not match robustness sign")


@dataclass
class TrainingSet:
    spec: InputSpec
    rows: list[LabeledInput] = field(default_factory=list)

    @property
    def n_fail(self) -> int:
        return sum(1 for r in self.rows if r.verdict == "fail")

    @property
    def n_pass(self) -> int:
        return len(self.rows) - self.n_fail

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.spec.feature_names() + ["robustness", "verdict"])
        for r in self.rows:
            vec = [repr(float(v)) for v in r.input.as_vector()]
            w.writerow(vec + [repr(float(r.robustness)), r.verdict])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, spec: InputSpec) -> "TrainingSet":
        rdr = csv.reader(io.StringIO(text))
        header = next(rdr)
        expected = spec.feature_names() + ["robustness", "verdict"]
        if header != expected:
            raise ValueError(f"CSV header {header} does not match spec {expected}")
        rows = []
        for rec in rdr:
            x = np.array([float(v) for v in rec[: spec.dimension]])
            rows.append(LabeledInput(
                input=TestInput.from_vector(spec, x),
                robustness=float(rec[spec.dimension]),
                verdict=rec[spec.dimension + 1],
            ))
        return cls(spec=spec, rows=rows)


def tweak(inp: TestInput, spec: InputSpec, strength: float,
          rng: np.random.Generator) -> TestInput:
    """Perturb every control point with zero-mean Gaussian noise.

    Noise sigma is ``strength`` times the signal's range width; the result is
    clamped back into range.
    """
    if not 0 < strength <= 1:
        raise ValueError("strength must be in (0, 1]")
    values = {}
    for s in spec.signals:
        noise = rng.normal(0.0, strength * s.width, size=s.n_points)
        values[s.name] = np.clip(inp.values[s.name] + noise, s.range_lo, s.range_hi)
    return TestInput(values=values, spec=spec)


def simulated_annealing(plant: Plant, phi: Formula, spec: InputSpec,
                        params: SAParams, rng: np.random.Generator,
                        log: list | None = None) -> LabeledInput:
    """One annealing run minimizing robustness; returns the best input found.

    Acceptance of an uphill candidate uses probability
    ``exp(-(rb' - rb) / (t * scale))`` where ``scale`` normalizes by the
    magnitude of the first sample's robustness; the temperature cools
    geometrically each iteration.  ``log`` (optional) collects every
    evaluated ``(TestInput, robustness)`` pair.
    """
    def evaluate(u):
        rb = robustness(phi, simulate(plant, u))
        if log is not None:
            log.append((u, rb))
        return rb

    u = random_input(spec, rng)
    rb = evaluate(u)
    scale = max(abs(rb), 1e-9)
    u_best, rb_best = u, rb
    t = params.initial_temp
    for _ in range(params.max_iters):
        u_new = tweak(u, spec, params.tweak_strength, rng)
        rb_new = evaluate(u_new)
        if rb_new < rb or rng.random() < exp(min((rb - rb_new) / (t * scale), 0.0)):
            u, rb = u_new, rb_new
        if rb < rb_best:
            u_best, rb_best = u, rb
        t *= params.cooling_rate
    return LabeledInput(input=u_best, robustness=rb_best, verdict=verdict(rb_best))


def build_training_set(plant: Plant, phi: Formula, spec: InputSpec,
                       n_runs: int, params: SAParams, seed: int,
                       retain: str = "best",
                       require_failures: bool = True) -> TrainingSet:
    """Run ``n_runs`` independent annealing executions and collect a set.

    ``retain='best'`` keeps one row per run (the run's best input);
    ``retain='all-evaluated'`` keeps every simulated candidate.  Per-run
    generators are spawned from the master seed, so results are reproducible
    and order-deterministic.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    if retain not in ("best", "all-evaluated"):
        raise ValueError(f"unknown retain mode {retain!r}")
    rows: list[LabeledInput] = []
    for run in range(n_runs):
        rng = np.random.default_rng(np.random.SeedSequence((seed, run)))
        log: list = []
        best = simulated_annealing(plant, phi, spec, params, rng, log=log)
        if retain == "best":
            rows.append(best)
        else:
            rows.extend(LabeledInput(input=u, robustness=rb, verdict=verdict(rb))
                        for u, rb in log)
    ts = TrainingSet(spec=spec, rows=rows)
    if require_failures and ts.n_fail == 0:
        raise RuntimeError(
            f"no failing inputs found for {plant.name!r} after {n_runs} runs; "
            "nothing to explain"
        )
    return ts
