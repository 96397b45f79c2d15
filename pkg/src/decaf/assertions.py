"""Success-assertion inference from valid counterfactuals.

A model tree is trained to separate the counterfactuals (which pass) from
the failing input and nearby failing training rows; the root-to-leaf paths
of passing leaves become conjunctions of control-point predicates.  After
pruning, each predicate translates to a universally quantified condition
over its control point's time segment.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .cfgen import Counterfactual, proximity
from .learn import Dataset, M5Params, train_m5
from .signals import InputSpec, TestInput, segment_interval

__all__ = ["Predicate", "Assertion", "TemporalAssertion", "infer",
           "contrast_rows", "prune", "translate", "covers", "explain_nl",
           "assertion_to_json"]


@dataclass(frozen=True)
class Predicate:
    signal: str
    index: int
    op: str
    bound: float

    _OPS = ("<", "<=", ">", ">=", "=", "!=")

    def __post_init__(self):
        if self.op not in self._OPS:
            raise ValueError(f"unknown op {self.op!r}")

    def holds(self, value: float) -> bool:
        v, r = value, self.bound
        return {"<": v < r, "<=": v <= r, ">": v > r, ">=": v >= r,
                "=": v == r, "!=": v != r}[self.op]

    def __str__(self):
        return f"c_{{{self.signal},{self.index}}} {self.op} {self.bound:.2f}"


@dataclass(frozen=True)
class Assertion:
    """DNF over control-point predicates; the toolkit emits pass verdicts."""

    dnf: tuple[tuple[Predicate, ...], ...]
    verdict: str = "pass"

    def __post_init__(self):
        object.__setattr__(self, "dnf",
                           tuple(tuple(c) for c in self.dnf))

    @property
    def trivial(self) -> bool:
        """True when some conjunction is empty (condition always holds)."""
        return any(len(c) == 0 for c in self.dnf)

    def predicate_count(self) -> int:
        return sum(len(c) for c in self.dnf)

    def __str__(self):
        if not self.dnf:
            return "false"
        parts = []
        for conj in self.dnf:
            if not conj:
                return "true"
            parts.append(" and ".join(f"({p})" for p in conj))
        return " or ".join(parts)


def covers(a: Assertion, x: TestInput) -> bool:
    """True iff some conjunction is satisfied by x's control points."""
    for conj in a.dnf:
        if all(p.holds(float(x.values[p.signal][p.index])) for p in conj):
            return True
    return False


# ---------------------------------------------------------------------------
# Inference

def contrast_rows(d: Dataset, failing_vec, spec: InputSpec,
                  n: int = 50) -> np.ndarray:
    """The n failing-labeled rows nearest the failing input (tie: row index)."""
    failing_vec = np.asarray(failing_vec, dtype=float)
    idx = np.flatnonzero(d.y_label == "fail")
    dist = [proximity(failing_vec, d.X[i], spec) for i in idx]
    order = sorted(range(len(idx)), key=lambda k: (dist[k], idx[k]))
    return d.X[[idx[k] for k in order[:n]]]


def _leaf_path_for(tree, x) -> list[tuple[int, str, float]]:
    nd, path = tree.root, []
    while not nd.is_leaf:
        if x[nd.feature] <= nd.threshold:
            path.append((nd.feature, "<=", nd.threshold))
            nd = nd.left
        else:
            path.append((nd.feature, ">", nd.threshold))
            nd = nd.right
    return path


def infer(cf_set: list[Counterfactual], failing: TestInput, contrast,
          spec: InputSpec,
          m5_params: M5Params = M5Params(prune=True)) -> Assertion:
    """Learn a DNF condition separating the counterfactuals from failure.

    The tree regresses +1 (counterfactuals) against -1 (the failing input
    and the contrast rows); leaves with non-negative mean become pass
    leaves and contribute their path as one conjunction.  Counterfactuals
    routed to a fail leaf contribute their own path, so every
    counterfactual in cf_set is covered by construction.
    """
    if not cf_set:
        raise ValueError("cannot infer an assertion from zero counterfactuals")
    if not all(c.valid for c in cf_set):
        raise ValueError("all counterfactuals must be simulator-validated passes")
    pos = np.stack([c.modified.as_vector() for c in cf_set])
    contrast = np.atleast_2d(np.asarray(contrast, dtype=float))
    neg = np.vstack([failing.as_vector()[None, :], contrast])
    X = np.vstack([pos, neg])
    y = np.concatenate([np.ones(len(pos)), -np.ones(len(neg))])
    labels = np.where(y > 0, "pass", "fail")
    tree = train_m5(Dataset(spec.feature_names(), X, y, labels), m5_params)

    targets = spec.feature_targets()

    def to_conj(path):
        return tuple(Predicate(targets[f][0], targets[f][1], op, float(thr))
                     for f, op, thr in path)

    conjunctions = [to_conj(path) for path, leaf in tree.paths()
                    if leaf.value >= 0]
    a = Assertion(dnf=tuple(conjunctions))
    for c in cf_set:
        if not covers(a, c.modified):
            extra = to_conj(_leaf_path_for(tree, c.modified.as_vector()))
            a = Assertion(dnf=a.dnf + (extra,))
    return a


# ---------------------------------------------------------------------------
# Pruning

_UPPER = {"<", "<="}
_LOWER = {">", ">="}


def _tighten(preds: list[Predicate]) -> list[Predicate] | None:
    """Tightest bound pair per target; None when unsatisfiable."""
    by_target: dict[tuple[str, int], dict] = {}
    order: list[tuple[str, int]] = []
    passthrough: list[Predicate] = []
    for p in preds:
        key = (p.signal, p.index)
        if p.op in _UPPER or p.op in _LOWER:
            if key not in by_target:
                by_target[key] = {"up": None, "lo": None}
                order.append(key)
            slot = "up" if p.op in _UPPER else "lo"
            cur = by_target[key][slot]
            if cur is None or _bound_tighter(p, cur):
                by_target[key][slot] = p
        else:
            passthrough.append(p)
    out = []
    for key in order:
        lo, up = by_target[key]["lo"], by_target[key]["up"]
        if lo is not None and up is not None:
            if lo.bound > up.bound:
                return None
            if lo.bound == up.bound and (lo.op == ">" or up.op == "<"):
                return None
        if lo is not None:
            out.append(lo)
        if up is not None:
            out.append(up)
    return out + passthrough


def _bound_tighter(p: Predicate, q: Predicate) -> bool:
    """p tighter than q within the same bound direction."""
    if p.op in _UPPER:
        return p.bound < q.bound or (p.bound == q.bound and p.op == "<")
    return p.bound > q.bound or (p.bound == q.bound and p.op == ">")


def _implies_pred(p: Predicate, q: Predicate) -> bool:
    """Everything satisfying p also satisfies q (same target, same kind)."""
    if (p.signal, p.index) != (q.signal, q.index):
        return False
    if p.op in _UPPER and q.op in _UPPER:
        return p.bound < q.bound or (p.bound == q.bound and
                                     (p.op == q.op or q.op == "<="))
    if p.op in _LOWER and q.op in _LOWER:
        return p.bound > q.bound or (p.bound == q.bound and
                                     (p.op == q.op or q.op == ">="))
    return p == q


def _conj_implies(a: tuple[Predicate, ...], b: tuple[Predicate, ...]) -> bool:
    """Every point satisfying conjunction a satisfies conjunction b."""
    return all(any(_implies_pred(pa, pb) for pa in a) for pb in b)


def prune(a: Assertion) -> Assertion:
    """Drop redundant predicates and implied or duplicate conjunctions."""
    conjs: list[tuple[Predicate, ...]] = []
    for conj in a.dnf:
        tight = _tighten(list(conj))
        if tight is None:
            continue
        t = tuple(tight)
        if t not in conjs:
            conjs.append(t)
    keep = []
    for i, c in enumerate(conjs):
        redundant = False
        for j, other in enumerate(conjs):
            if i == j:
                continue
            if _conj_implies(c, other):
                # for equivalent conjunctions the first one survives
                if _conj_implies(other, c) and i < j:
                    continue
                redundant = True
                break
        if not redundant:
            keep.append(c)
    return Assertion(dnf=tuple(keep), verdict=a.verdict)


# ---------------------------------------------------------------------------
# Temporal translation

def _fmt_time(x: float) -> str:
    s = f"{x:.2f}".rstrip("0").rstrip(".")
    return s if s else "0"


@dataclass(frozen=True)
class TemporalAssertion:
    """Universally quantified per-segment clauses, grouped per conjunction."""

    groups: tuple[tuple[tuple[str, float, float, str, float], ...], ...]

    def render(self) -> str:
        if not self.groups:
            return "false"
        parts = []
        for clauses in self.groups:
            if not clauses:
                return "true"
            bits = [
                f"(forall t in [{_fmt_time(t0)},{_fmt_time(t1)}]: "
                f"{sig}(t) {op} {bound:.2f})"
                for sig, t0, t1, op, bound in clauses
            ]
            parts.append(" and ".join(bits))
        if len(parts) == 1:
            return parts[0]
        return " or ".join(f"({p})" for p in parts)

    def __str__(self):
        return self.render()


def _merge_adjacent(clauses):
    """Fuse clauses on the same signal/op/bound with touching intervals."""
    merged = []
    for c in clauses:
        if merged:
            sig, t0, t1, op, bound = merged[-1]
            if (sig, op, bound) == (c[0], c[3], c[4]) and \
                    abs(t1 - c[1]) < 1e-9:
                merged[-1] = (sig, t0, c[2], op, bound)
                continue
        merged.append(c)
    return merged


def translate(a: Assertion, spec: InputSpec) -> TemporalAssertion:
    """Rewrite each control-point predicate as a condition over its segment."""
    groups = []
    for conj in a.dnf:
        clauses = []
        for p in sorted(conj, key=lambda p: (_signal_order(spec, p.signal),
                                             p.index, p.op, p.bound)):
            t0, t1 = segment_interval(spec.signal(p.signal), p.index)
            clauses.append((p.signal, t0, t1, p.op, p.bound))
        groups.append(tuple(_merge_adjacent(clauses)))
    return TemporalAssertion(groups=tuple(groups))


def _signal_order(spec: InputSpec, name: str) -> int:
    for i, s in enumerate(spec.signals):
        if s.name == name:
            return i
    raise KeyError(f"unknown signal {name!r}")


# ---------------------------------------------------------------------------
# Explanations and serialization

def explain_nl(cf: Counterfactual, spec: InputSpec) -> list[str]:
    """One line per changed control point, ordered by (signal, index)."""
    lines = []
    for name, j in sorted(cf.changed_points,
                          key=lambda t: (_signal_order(spec, t[0]), t[1])):
        t0, t1 = segment_interval(spec.signal(name), j)
        old = float(cf.original.values[name][j])
        new = float(cf.modified.values[name][j])
        lines.append(f"Input {name} at time [{t0:.1f}–{t1:.1f}s] "
                     f"changed from {old:.2f} to {new:.2f}")
    return lines


def assertion_to_json(a: Assertion, spec: InputSpec) -> str:
    temporal = translate(a, spec)
    doc = {
        "verdict": a.verdict,
        "dnf": [
            [{"signal": p.signal, "index": p.index, "op": p.op,
              "bound": p.bound,
              "interval": list(segment_interval(spec.signal(p.signal), p.index))}
             for p in conj]
            for conj in a.dnf
        ],
        "control_point_form": str(a),
        "temporal_form": temporal.render(),
    }
    return json.dumps(doc, sort_keys=True)
