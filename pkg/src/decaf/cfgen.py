"""Counterfactual generation for failing test inputs.

Three generators propose candidate inputs that the causal model predicts to
pass: random search with a widening perturbation radius, a genetic
algorithm with feasible/infeasible population partitioning, and KD-tree
nearest passing neighbors from the training data.  Every candidate is then
replayed in the simulator, which remains the source of truth for validity.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .learn import CausalModel, Dataset
from .neighbors import KDTree
from .plants import Plant, SimulationDiverged, simulate
from .signals import InputSpec, TestInput, segment_interval
from .stl import Formula, robustness, verdict

__all__ = ["Counterfactual", "CFParams", "proximity", "diversity",
           "generate_rs", "generate_ga", "generate_kd", "generate",
           "validate", "select", "cf_set_to_json"]

_CHANGE_TOL = 1e-9


@dataclass(frozen=True)
class Counterfactual:
    original: TestInput
    modified: TestInput
    changed_points: frozenset  # of (signal name, control-point index)
    predicted_verdict: str
    validated: tuple[float, str] | None = None
    diagnostic: str = ""

    @property
    def valid(self) -> bool:
        return self.validated is not None and self.validated[1] == "pass"

    @property
    def proximity(self) -> float:
        return proximity(self.original.as_vector(), self.modified.as_vector(),
                         self.original.spec)


def make_counterfactual(original: TestInput, modified: TestInput,
                        predicted_verdict: str) -> Counterfactual:
    changed = frozenset(
        (name, j)
        for (name, j), a, b in zip(original.spec.feature_targets(),
                                   original.as_vector(), modified.as_vector())
        if abs(a - b) > _CHANGE_TOL
    )
    return Counterfactual(original=original, modified=modified,
                          changed_points=changed,
                          predicted_verdict=predicted_verdict)


@dataclass(frozen=True)
class CFParams:
    k_max: int = 7
    mutation_p: float = 0.1
    crossover_p: float = 0.5
    population: int = 50
    generations: int = 50
    diversity_weight: float = 0.1
    seed: int = 17
    mutable_mask: tuple[bool, ...] | None = None  # None: all points mutable
    rs_rounds: int = 10
    rs_samples_per_round: int = 50
    tournament_size: int = 2
    mutation_sigma_frac: float = 0.1

    def __post_init__(self):
        if self.k_max < 1:
            raise ValueError("k_max must be >= 1")
        for p in (self.mutation_p, self.crossover_p):
            if not 0.0 <= p <= 1.0:
                raise ValueError("probabilities must be in [0, 1]")

    def mask_for(self, spec: InputSpec) -> np.ndarray:
        if self.mutable_mask is None:
            return np.ones(spec.dimension, dtype=bool)
        m = np.asarray(self.mutable_mask, dtype=bool)
        if m.shape != (spec.dimension,):
            raise ValueError("mutable_mask length must match feature count")
        return m


# ---------------------------------------------------------------------------
# Distance measures

def proximity(x, x2, spec: InputSpec) -> float:
    """Mean per-feature absolute difference, normalized by range width."""
    x = np.asarray(x, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if x.shape != x2.shape or x.shape != (spec.dimension,):
        raise ValueError("feature vectors must both match the spec dimension")
    lo, hi = spec.bounds()
    return float(np.mean(np.abs(x - x2) / (hi - lo)))


def diversity(vectors, spec: InputSpec) -> float:
    """Mean pairwise proximity; 0 for a singleton."""
    vs = [np.asarray(v, dtype=float) for v in vectors]
    if not vs:
        raise ValueError("diversity needs at least one vector")
    if len(vs) == 1:
        return 0.0
    total, pairs = 0.0, 0
    for i in range(len(vs)):
        for j in range(i + 1, len(vs)):
            total += proximity(vs[i], vs[j], spec)
            pairs += 1
    return total / pairs


# ---------------------------------------------------------------------------
# Generators

def _predicted_pass(cm: CausalModel, X: np.ndarray) -> np.ndarray:
    return cm.predict_batch(X) >= cm.threshold


def _rank_key(x_f: np.ndarray, spec: InputSpec):
    def key(vec):
        return (proximity(x_f, vec, spec), tuple(vec))
    return key


def _dedupe(vectors) -> list[np.ndarray]:
    seen, out = set(), []
    for v in vectors:
        t = tuple(v)
        if t not in seen:
            seen.add(t)
            out.append(v)
    return out


def _as_counterfactuals(x_f, vectors, spec, verdict="pass"):
    orig = TestInput.from_vector(spec, x_f)
    return [make_counterfactual(orig, TestInput.from_vector(spec, v), verdict)
            for v in vectors]


def generate_rs(x_f, cm: CausalModel, spec: InputSpec, p: CFParams,
                rng: np.random.Generator) -> list[Counterfactual]:
    """Random perturbations in boxes of widening radius around the failing
    input; keeps model-predicted passes, ranked by proximity."""
    x_f = np.asarray(x_f, dtype=float)
    lo, hi = spec.bounds()
    width = hi - lo
    mask = p.mask_for(spec)
    if not mask.any():
        return []
    found: list[np.ndarray] = []
    for r in range(1, p.rs_rounds + 1):
        radius = width * (r / p.rs_rounds)
        box_lo = np.maximum(lo, x_f - radius)
        box_hi = np.minimum(hi, x_f + radius)
        cand = rng.uniform(box_lo, box_hi,
                           size=(p.rs_samples_per_round, spec.dimension))
        cand[:, ~mask] = x_f[~mask]
        ok = _predicted_pass(cm, cand)
        found.extend(cand[ok])
    ranked = sorted(_dedupe(found), key=_rank_key(x_f, spec))
    return _as_counterfactuals(x_f, ranked[:p.k_max], spec)


def generate_ga(x_f, cm: CausalModel, spec: InputSpec, p: CFParams,
                rng: np.random.Generator, seed_rows=None,
                log: list | None = None) -> list[Counterfactual]:
    """Genetic search toward model-predicted passing inputs near x_f.

    The population is split into feasible members (predicted pass), ranked
    by proximity minus a diversity bonus, and infeasible members, ranked by
    how far their predicted robustness falls short of the pass threshold.
    Feasible members found in any generation are archived; the best
    feasible member survives unchanged (elitism).  ``seed_rows`` vectors
    are injected into the initial population.  ``log``, if given, receives
    the best archived proximity after each generation.
    """
    x_f = np.asarray(x_f, dtype=float)
    lo, hi = spec.bounds()
    width = hi - lo
    mask = p.mask_for(spec)

    def clamp(X):
        X = np.clip(X, lo, hi)
        X[:, ~mask] = x_f[~mask]
        return X

    pop = rng.uniform(lo, hi, size=(p.population, spec.dimension))
    pop = clamp(pop)
    if seed_rows is not None:
        for i, row in enumerate(seed_rows[:p.population]):
            pop[i] = np.asarray(row, dtype=float)

    archive: dict[tuple, float] = {}  # vector -> proximity

    def score_population(X):
        est = cm.predict_batch(X)
        feasible = est >= cm.threshold
        prox = np.mean(np.abs(X - x_f) / width, axis=1)
        for v, pr in zip(X[feasible], prox[feasible]):
            archive.setdefault(tuple(v), float(pr))
        # lower is better; feasible members always beat infeasible ones
        fitness = np.where(feasible, prox, 1e6 + (cm.threshold - est))
        if feasible.sum() > 1:
            # reward spread among feasible members
            fi = np.flatnonzero(feasible)
            F = X[fi] / width
            spread = np.abs(F[:, None, :] - F[None, :, :]).mean(axis=(1, 2))
            spread *= len(fi) / max(len(fi) - 1, 1)  # exclude self-distance
            fitness[fi] = fitness[fi] - p.diversity_weight * spread
        return fitness

    fitness = score_population(pop)
    if log is not None:
        log.append(min(archive.values()) if archive else np.inf)

    for _ in range(p.generations):
        elite = pop[int(np.argmin(fitness))].copy()
        children = []
        while len(children) < p.population - 1:
            idx = rng.integers(0, p.population, size=(2, p.tournament_size))
            pa = pop[idx[0][np.argmin(fitness[idx[0]])]]
            pb = pop[idx[1][np.argmin(fitness[idx[1]])]]
            take = rng.random(spec.dimension) < p.crossover_p
            child = np.where(take, pb, pa)
            mut = rng.random(spec.dimension) < p.mutation_p
            noise = rng.normal(0.0, p.mutation_sigma_frac * width)
            child = np.where(mut, child + noise, child)
            children.append(child)
        pop = clamp(np.vstack([elite[None, :]] + [c[None, :] for c in children]))
        fitness = score_population(pop)
        if log is not None:
            log.append(min(archive.values()) if archive else np.inf)

    ranked = sorted(archive, key=lambda t: (archive[t], t))
    # quantile-spaced slice of the archive: the tightest member first, then
    # progressively looser ones; candidates deep inside the predicted-pass
    # region hedge against model error at the decision boundary
    if len(ranked) > p.k_max:
        pick = np.unique(np.linspace(0, len(ranked) - 1, p.k_max).round()
                         .astype(int))
        ranked = [ranked[i] for i in pick]
    best = [np.array(t) for t in ranked]
    return _as_counterfactuals(x_f, best, spec)


def generate_kd(x_f, d: Dataset, spec: InputSpec, k: int) -> list[Counterfactual]:
    """The k nearest passing training rows by the proximity metric."""
    x_f = np.asarray(x_f, dtype=float)
    passing = np.flatnonzero(d.y_label == "pass")
    if len(passing) == 0:
        raise ValueError("dataset has no passing rows")
    lo, hi = spec.bounds()
    width = hi - lo
    tree = KDTree(d.X[passing] / width)
    hits = tree.query(x_f / width, min(k, len(passing)))
    rows = [d.X[passing[i]] for _, i in hits]
    return _as_counterfactuals(x_f, rows, spec)


def generate(method: str, x_f, cm: CausalModel, d: Dataset, spec: InputSpec,
             p: CFParams, rng: np.random.Generator) -> list[Counterfactual]:
    if method == "rs":
        return generate_rs(x_f, cm, spec, p, rng)
    if method == "ga":
        return generate_ga(x_f, cm, spec, p, rng)
    if method == "kd":
        return generate_kd(x_f, d, spec, p.k_max)
    raise ValueError(f"unknown generator {method!r} (use 'rs', 'ga' or 'kd')")


# ---------------------------------------------------------------------------
# Validation and selection

def validate(plant: Plant, phi: Formula,
             candidates: list[Counterfactual]) -> list[Counterfactual]:
    """Replay every candidate in the simulator and record the true result."""
    out = []
    for c in candidates:
        try:
            rb = robustness(phi, simulate(plant, c.modified))
            out.append(replace(c, validated=(rb, verdict(rb))))
        except SimulationDiverged as e:
            out.append(replace(c, validated=(-np.inf, "fail"),
                               diagnostic=f"simulation diverged: {e}"))
    return out


def select(candidates: list[Counterfactual], k_max: int) -> list[Counterfactual]:
    """Valid candidates, ascending proximity, ties by feature order."""
    valid = [c for c in candidates if c.valid]
    ranked = sorted(valid,
                    key=lambda c: (c.proximity, tuple(c.modified.as_vector())))
    return ranked[:k_max]


# ---------------------------------------------------------------------------
# Serialization

def cf_set_to_json(cfs: list[Counterfactual], spec: InputSpec) -> str:
    docs = []
    for c in cfs:
        changes = []
        for name, j in sorted(c.changed_points):
            t_lo, t_hi = segment_interval(spec.signal(name), j)
            changes.append({
                "signal": name, "index": j,
                "interval": [t_lo, t_hi],
                "old": float(c.original.values[name][j]),
                "new": float(c.modified.values[name][j]),
            })
        doc = {
            "original": [float(v) for v in c.original.as_vector()],
            "modified": [float(v) for v in c.modified.as_vector()],
            "changed_points": changes,
            "predicted_verdict": c.predicted_verdict,
            "proximity": c.proximity,
        }
        if c.validated is not None:
            rb = float(c.validated[0])
            doc["validated"] = {"robustness": rb if np.isfinite(rb) else None,
                                "verdict": c.validated[1]}
        if c.diagnostic:
            doc["diagnostic"] = c.diagnostic
        docs.append(doc)
    return json.dumps(docs, sort_keys=True)
