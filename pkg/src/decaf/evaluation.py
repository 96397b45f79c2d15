"""Quality metrics for counterfactuals and assertions, plus the
nonparametric comparison machinery (Mann-Whitney U, Vargha-Delaney A12).

Division-by-zero cases (no generated counterfactuals, no unchanged control
points) are reported as None, rendered "--" in tables, never as a silent 0.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .assertions import Assertion, covers
from .cfgen import Counterfactual
from .plants import Plant, simulate
from .signals import TestInput
from .stl import Formula, robustness, verdict

__all__ = ["InputRecord", "ConfigResult", "success_rate",
           "relative_success_rate", "necessity", "sufficiency",
           "predicate_count", "g_score", "safety", "mann_whitney_u",
           "vargha_delaney_a12", "a12_category", "config_table", "table_to_csv",
           "table_to_json", "validity_vector"]


@dataclass
class InputRecord:
    """Per-failing-input outcome for one configuration."""

    index: int
    generated: int
    valid: int
    necessity_flag: bool | None = None
    sufficiency_fraction: float | None = None
    predicates: int | None = None
    g: float | None = None
    safety_fraction: float | None = None

    def __post_init__(self):
        if not 0 <= self.valid <= self.generated:
            raise ValueError("need 0 <= valid <= generated")


@dataclass
class ConfigResult:
    system: str
    generator: str  # 'rs', 'ga' or 'kd'
    model: str      # 'm5' or 'rf'
    records: list[InputRecord] = field(default_factory=list)


# ---------------------------------------------------------------------------
# Rates

def success_rate(records: list[InputRecord]) -> float | None:
    """Fraction of failing inputs repaired by at least one valid cf."""
    if not records:
        return None
    return sum(1 for r in records if r.valid > 0) / len(records)


def relative_success_rate(records: list[InputRecord]) -> float | None:
    """Valid counterfactuals over generated ones; None when none generated."""
    generated = sum(r.generated for r in records)
    if generated == 0:
        return None
    return sum(r.valid for r in records) / generated


# ---------------------------------------------------------------------------
# Simulation-backed counterfactual metrics

def necessity(plant: Plant, phi: Formula, cf: Counterfactual) -> bool:
    """Revert each changed input signal to its failing values, one signal
    at a time; the changes are necessary iff every reversion fails again."""
    if not cf.valid:
        raise ValueError("necessity is defined for valid counterfactuals")
    if not cf.changed_points:
        raise ValueError("counterfactual changes nothing")
    signals = sorted({name for name, _ in cf.changed_points})
    for name in signals:
        values = {s: np.array(v) for s, v in cf.modified.values.items()}
        for sig, j in cf.changed_points:
            if sig == name:
                values[sig][j] = cf.original.values[sig][j]
        variant = TestInput(values=values, spec=cf.modified.spec)
        rb = robustness(phi, simulate(plant, variant))
        if verdict(rb) == "pass":
            return False
    return True


def sufficiency(plant: Plant, phi: Formula, cf: Counterfactual, n: int = 50,
                rng: np.random.Generator | None = None) -> float | None:
    """Hold the changed points, randomize the rest; fraction that pass.

    None (not applicable) when every control point was changed.
    """
    if not cf.valid:
        raise ValueError("sufficiency is defined for valid counterfactuals")
    spec = cf.modified.spec
    changed = cf.changed_points
    free = [(s.name, j) for s in spec.signals for j in range(s.n_points)
            if (s.name, j) not in changed]
    if not free:
        return None
    rng = rng if rng is not None else np.random.default_rng(0)
    passes = 0
    for _ in range(n):
        values = {s: np.array(v) for s, v in cf.modified.values.items()}
        for name, j in free:
            s = spec.signal(name)
            values[name][j] = rng.uniform(s.range_lo, s.range_hi)
        variant = TestInput(values=values, spec=spec)
        rb = robustness(phi, simulate(plant, variant))
        passes += verdict(rb) == "pass"
    return passes / n


def predicate_count(a: Assertion) -> int:
    return a.predicate_count()


def g_score(a: Assertion, valid_cfs: list[Counterfactual]) -> float:
    """Proportion of valid counterfactuals the assertion covers."""
    if not valid_cfs:
        raise ValueError("g_score needs at least one counterfactual")
    return sum(covers(a, c.modified) for c in valid_cfs) / len(valid_cfs)


def _bounds_for(conj, signal: str, index: int, lo: float, hi: float):
    """Intersect a conjunction's bounds on one target with the range."""
    for p in conj:
        if (p.signal, p.index) != (signal, index):
            continue
        if p.op in ("<", "<="):
            hi = min(hi, p.bound)
        elif p.op in (">", ">="):
            lo = max(lo, p.bound)
        elif p.op == "=":
            lo = hi = p.bound
    return lo, hi


def safety(plant: Plant, phi: Formula, a: Assertion, cf: Counterfactual,
           n: int = 50, rng: np.random.Generator | None = None) -> float:
    """Sample the changed points inside the assertion's bounds (others held
    at the counterfactual's values); fraction of samples that pass."""
    if not cf.valid:
        raise ValueError("safety is defined for valid counterfactuals")
    spec = cf.modified.spec
    conj = next((c for c in a.dnf
                 if all(p.holds(float(cf.modified.values[p.signal][p.index]))
                        for p in c)), None)
    if conj is None:
        raise ValueError("assertion does not cover the counterfactual")
    targets = {(p.signal, p.index) for p in conj}
    if not targets & cf.changed_points:
        raise ValueError("assertion constrains none of the changed points")
    boxes = {}
    for name, j in sorted(cf.changed_points):
        s = spec.signal(name)
        lo, hi = _bounds_for(conj, name, j, s.range_lo, s.range_hi)
        if lo > hi:
            raise ValueError(
                f"infeasible assertion clause for {name} point {j}: "
                f"empty region [{lo}, {hi}]")
        boxes[(name, j)] = (lo, hi)
    rng = rng if rng is not None else np.random.default_rng(0)
    passes = 0
    for _ in range(n):
        values = {s: np.array(v) for s, v in cf.modified.values.items()}
        for (name, j), (lo, hi) in boxes.items():
            values[name][j] = rng.uniform(lo, hi)
        rb = robustness(phi, simulate(plant, TestInput(values=values, spec=spec)))
        passes += verdict(rb) == "pass"
    return passes / n


# ---------------------------------------------------------------------------
# Statistics

def _ranks(values: np.ndarray) -> np.ndarray:
    """Average ranks (1-based) with ties sharing their mean rank."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def _exact_u_cdf(n1: int, n2: int, u: float) -> float:
    """P(U <= u) for tie-free samples, by dynamic programming over the
    number of subsets of ranks with a given rank sum."""
    max_u = n1 * n2
    # f[k][s]: number of ways to pick k ranks with U-statistic s
    f = [[0] * (max_u + 1) for _ in range(n1 + 1)]
    f[0][0] = 1
    for rank in range(1, n1 + n2 + 1):
        for k in range(min(rank, n1), 0, -1):
            # adding this rank as the k-th chosen contributes rank - k to U
            add = rank - k
            row, prev = f[k], f[k - 1]
            for s in range(max_u, add - 1, -1):
                row[s] += prev[s - add]
    total = math.comb(n1 + n2, n1)
    return sum(f[n1][s] for s in range(int(math.floor(u)) + 1)) / total


def mann_whitney_u(a, b) -> tuple[float, float]:
    """Two-sided Mann-Whitney U test; returns (min(U1, U2), p).

    Exact enumeration for tie-free samples with both sizes <= 20,
    otherwise the normal approximation with tie correction.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("both samples must be non-empty")
    n1, n2 = len(a), len(b)
    combined = np.concatenate([a, b])
    ranks = _ranks(combined)
    r1 = float(np.sum(ranks[:n1]))
    u1 = r1 - n1 * (n1 + 1) / 2
    u2 = n1 * n2 - u1
    u = min(u1, u2)
    has_ties = len(np.unique(combined)) < len(combined)
    if not has_ties and max(n1, n2) <= 20:
        p = min(1.0, 2 * _exact_u_cdf(n1, n2, u))
        return u, p
    mu = n1 * n2 / 2
    n = n1 + n2
    _, counts = np.unique(combined, return_counts=True)
    tie_term = np.sum(counts ** 3 - counts) / (n * (n - 1))
    var = n1 * n2 / 12 * ((n + 1) - tie_term)
    if var <= 0:
        return u, 1.0
    z = (u - mu) / math.sqrt(var)
    p = min(1.0, 2 * 0.5 * (1 + math.erf(z / math.sqrt(2))))
    return u, p


def a12_category(value: float, thresholds=(0.06, 0.14, 0.21)) -> str:
    d = abs(value - 0.5)
    if d < thresholds[0]:
        return "None"
    if d < thresholds[1]:
        return "Small"
    if d < thresholds[2]:
        return "Medium"
    return "Large"


def vargha_delaney_a12(a, b, thresholds=(0.06, 0.14, 0.21)) -> tuple[float, str]:
    """Probability of superiority of a over b with the usual categories."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("both samples must be non-empty")
    wins = np.sum(a[:, None] > b[None, :])
    ties = np.sum(a[:, None] == b[None, :])
    value = float((wins + 0.5 * ties) / (len(a) * len(b)))
    return value, a12_category(value, thresholds)


def validity_vector(records: list[InputRecord]) -> np.ndarray:
    """Per-counterfactual binary validity outcomes, used as the samples
    when comparing configurations."""
    out = []
    for r in records:
        out.extend([1.0] * r.valid + [0.0] * (r.generated - r.valid))
    return np.array(out)


# ---------------------------------------------------------------------------
# Tables

_COLUMNS = ["system", "generator", "model", "n_fail", "n_generated",
            "n_valid", "success", "relative", "necessity", "sufficiency",
            "predicates", "g_score", "safety"]


def _mean_of(records, attr):
    vals = [getattr(r, attr) for r in records if getattr(r, attr) is not None]
    return sum(vals) / len(vals) if vals else None


def config_table(results: list[ConfigResult]) -> list[dict]:
    """One row per configuration with averaged metrics (None = '--')."""
    rows = []
    for cr in results:
        rec = cr.records
        nec = [r.necessity_flag for r in rec if r.necessity_flag is not None]
        rows.append({
            "system": cr.system,
            "generator": cr.generator,
            "model": cr.model,
            "n_fail": len(rec),
            "n_generated": sum(r.generated for r in rec),
            "n_valid": sum(r.valid for r in rec),
            "success": success_rate(rec),
            "relative": relative_success_rate(rec),
            "necessity": sum(nec) / len(nec) if nec else None,
            "sufficiency": _mean_of(rec, "sufficiency_fraction"),
            "predicates": _mean_of(rec, "predicates"),
            "g_score": _mean_of(rec, "g"),
            "safety": _mean_of(rec, "safety_fraction"),
        })
    return rows


def _cell(v):
    if v is None:
        return "--"
    if isinstance(v, float):
        return f"{v:.4f}"
    return str(v)


def table_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(_COLUMNS)
    for row in rows:
        w.writerow([_cell(row[c]) for c in _COLUMNS])
    return buf.getvalue()


def table_to_json(rows: list[dict]) -> str:
    return json.dumps(rows, sort_keys=True)
