"""Causal-model learning: dataset transform, M5 model tree, random forest.

Both learners regress on the requirement robustness (strictly more
informative than pass/fail labels, and available from data generation);
verdicts are derived from the sign of the prediction with the same boundary
convention as the trace-level verdict (estimate >= 0 means pass).  A
label-regression mode (fail = -1, pass = +1) is kept for fidelity
experiments.

Trees are grown on variance reduction and stored as flat arrays so batches
of candidate inputs can be routed without per-sample recursion.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .signals import InputSpec, TestInput
from .testgen import TrainingSet

__all__ = ["Dataset", "ModelTree", "Forest", "CausalModel", "M5Params",
           "ForestParams", "transform", "train_m5", "train_forest",
           "make_causal_model", "classifier_metrics", "identify_failures",
           "train_test_split", "model_to_json", "model_from_json"]

MODEL_FORMAT = "decaf-model"
MODEL_VERSION = 1


# ---------------------------------------------------------------------------
# Dataset

@dataclass
class Dataset:
    feature_names: list[str]
    X: np.ndarray
    y_rb: np.ndarray
    y_label: np.ndarray  # array of 'pass'/'fail' strings

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y_rb = np.asarray(self.y_rb, dtype=float)
        self.y_label = np.asarray(self.y_label)
        n = len(self.X)
        if self.X.ndim != 2 or self.X.shape[1] != len(self.feature_names):
            raise ValueError("X shape does not match feature_names")
        if len(self.y_rb) != n or len(self.y_label) != n:
            raise ValueError("inconsistent row counts")

    def __len__(self):
        return len(self.X)


def transform(ts: TrainingSet) -> Dataset:
    """Flatten a training set: one column per control point, in spec order."""
    if not ts.rows:
        raise ValueError("empty training set")
    X = np.stack([r.input.as_vector() for r in ts.rows])
    return Dataset(
        feature_names=ts.spec.feature_names(),
        X=X,
        y_rb=np.array([r.robustness for r in ts.rows]),
        y_label=np.array([r.verdict for r in ts.rows]),
    )


def rows_as_inputs(d: Dataset, spec: InputSpec) -> list[TestInput]:
    """Reconstruct TestInputs from dataset rows (inverse of transform)."""
    return [TestInput.from_vector(spec, x) for x in d.X]


def identify_failures(d: Dataset) -> list[int]:
    """Indices of failing rows, by ground-truth label (simulator truth)."""
    return [i for i, lab in enumerate(d.y_label) if lab == "fail"]


def train_test_split(d: Dataset, test_fraction: float = 0.2,
                     seed: int = 17) -> tuple[Dataset, Dataset]:
    """Stratified (by verdict) split for holdout evaluation."""
    rng = np.random.default_rng(seed)
    test_idx = []
    for label in ("pass", "fail"):
        idx = np.flatnonzero(d.y_label == label)
        rng.shuffle(idx)
        k = int(round(len(idx) * test_fraction))
        test_idx.extend(idx[:k])
    mask = np.zeros(len(d), dtype=bool)
    mask[test_idx] = True

    def subset(m):
        return Dataset(d.feature_names, d.X[m], d.y_rb[m], d.y_label[m])

    return subset(~mask), subset(mask)


# ---------------------------------------------------------------------------
# Tree growing (shared by M5 and the forest)

@dataclass
class _Node:
    feature: int = -1
    threshold: float = 0.0
    left: "_Node | None" = None
    right: "_Node | None" = None
    value: float = 0.0            # constant prediction (mean target)
    coef: np.ndarray | None = None  # linear leaf model, M5 only
    intercept: float = 0.0
    n: int = 0
    indices: np.ndarray | None = None  # training rows routed here

    @property
    def is_leaf(self):
        return self.left is None


def _best_split(X, y, feat_candidates, min_leaf):
    """Best (feature, threshold) by variance reduction, or None."""
    n = len(y)
    base = np.var(y) * n
    best = None
    best_gain = 1e-12
    for f in feat_candidates:
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        ys = y[order]
        csum = np.cumsum(ys)
        csq = np.cumsum(ys * ys)
        total, total_sq = csum[-1], csq[-1]
        # split after position k: left has k+1 rows
        ks = np.arange(min_leaf - 1, n - min_leaf)
        if len(ks) == 0:
            continue
        valid = xs[ks] < xs[ks + 1]  # distinct neighbouring values only
        ks = ks[valid]
        if len(ks) == 0:
            continue
        nl = ks + 1.0
        nr = n - nl
        sse_l = csq[ks] - csum[ks] ** 2 / nl
        sse_r = (total_sq - csq[ks]) - (total - csum[ks]) ** 2 / nr
        gain = base - (sse_l + sse_r)
        k = ks[np.argmax(gain)]
        g = gain[np.argmax(gain)]
        if g > best_gain:
            best_gain = g
            best = (f, (xs[k] + xs[k + 1]) / 2.0)
    return best


def _grow(X, y, indices, min_leaf, max_features, rng, std_floor):
    node = _Node(value=float(np.mean(y[indices])), n=len(indices),
                 indices=indices)
    if len(indices) < 2 * min_leaf or np.std(y[indices]) <= std_floor:
        return node
    n_feat = X.shape[1]
    if max_features is None or max_features >= n_feat:
        cands = range(n_feat)
    else:
        cands = rng.choice(n_feat, size=max_features, replace=False)
    split = _best_split(X[indices], y[indices], cands, min_leaf)
    if split is None:
        return node
    f, thr = split
    go_left = X[indices, f] <= thr
    node.feature = f
    node.threshold = float(thr)
    node.left = _grow(X, y, indices[go_left], min_leaf, max_features, rng,
                      std_floor)
    node.right = _grow(X, y, indices[~go_left], min_leaf, max_features, rng,
                       std_floor)
    return node


# --- flat-array compilation for fast batch routing

@dataclass
class _FlatTree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    coef: np.ndarray      # (n_nodes, n_features); zeros unless linear leaf
    intercept: np.ndarray
    linear: np.ndarray    # bool: leaf uses its linear model

    def leaf_ids(self, X):
        node = np.zeros(len(X), dtype=int)
        rows = np.arange(len(X))
        while True:
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                return node
            nxt = np.where(X[rows, np.maximum(f, 0)] <= self.threshold[node],
                           self.left[node], self.right[node])
            node = np.where(inner, nxt, node)

    def predict(self, X):
        X = np.asarray(X, dtype=float)
        ids = self.leaf_ids(X)
        out = self.value[ids].copy()
        lin = self.linear[ids]
        if lin.any():
            out[lin] = (np.einsum("ij,ij->i", X[lin], self.coef[ids[lin]])
                        + self.intercept[ids[lin]])
        return out


def _flatten(root, n_features):
    nodes = []

    def visit(nd):
        i = len(nodes)
        nodes.append(nd)
        if not nd.is_leaf:
            li = visit(nd.left)
            ri = visit(nd.right)
            nd._li, nd._ri = li, ri
        return i

    visit(root)
    n = len(nodes)
    flat = _FlatTree(
        feature=np.full(n, -1, dtype=int),
        threshold=np.zeros(n),
        left=np.zeros(n, dtype=int),
        right=np.zeros(n, dtype=int),
        value=np.zeros(n),
        coef=np.zeros((n, n_features)),
        intercept=np.zeros(n),
        linear=np.zeros(n, dtype=bool),
    )
    for i, nd in enumerate(nodes):
        flat.value[i] = nd.value
        if not nd.is_leaf:
            flat.feature[i] = nd.feature
            flat.threshold[i] = nd.threshold
            flat.left[i] = nd._li
            flat.right[i] = nd._ri
        elif nd.coef is not None:
            flat.coef[i] = nd.coef
            flat.intercept[i] = nd.intercept
            flat.linear[i] = True
    return flat


# ---------------------------------------------------------------------------
# M5 model tree

@dataclass(frozen=True)
class M5Params:
    min_leaf: int = 2
    prune: bool = True
    target: str = "robustness"  # or "label"


@dataclass
class ModelTree:
    """Binary tree with (feature, threshold) splits and linear leaf models."""

    root: _Node
    feature_names: list[str]
    flat: _FlatTree = field(repr=False)

    def predict(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != len(self.feature_names):
            raise ValueError("feature dimension mismatch")
        return self.flat.predict(X)

    def n_leaves(self):
        def count(nd):
            return 1 if nd.is_leaf else count(nd.left) + count(nd.right)
        return count(self.root)

    def paths(self):
        """All root-to-leaf paths as (list of (feature, op, threshold), leaf)."""
        out = []

        def walk(nd, preds):
            if nd.is_leaf:
                out.append((preds, nd))
                return
            walk(nd.left, preds + [(nd.feature, "<=", nd.threshold)])
            walk(nd.right, preds + [(nd.feature, ">", nd.threshold)])

        walk(self.root, [])
        return out


def _fit_linear(X, y):
    """Least-squares linear model with intercept; exact on consistent data."""
    A = np.column_stack([X, np.ones(len(X))])
    sol, *_ = np.linalg.lstsq(A, y, rcond=None)
    coef, intercept = sol[:-1], float(sol[-1])
    if not (np.all(np.isfinite(coef)) and np.isfinite(intercept)):
        return np.zeros(X.shape[1]), float(np.mean(y))
    return coef, intercept


def _m5_prune(node, X, y):
    """Bottom-up: replace a subtree by a linear leaf when its penalized
    error is no worse than the subtree's.  Returns the subtree's estimated
    error either way."""
    idx = node.indices
    coef, intercept = _fit_linear(X[idx], y[idx])
    resid = y[idx] - (X[idx] @ coef + intercept)
    n, v = len(idx), X.shape[1] + 1
    penalty = (n + v) / (n - v) if n > v else 10.0
    own_err = float(np.mean(np.abs(resid))) * penalty
    if node.is_leaf:
        node.coef, node.intercept = coef, intercept
        return own_err
    err_l = _m5_prune(node.left, X, y)
    err_r = _m5_prune(node.right, X, y)
    subtree_err = (err_l * node.left.n + err_r * node.right.n) / n
    if own_err <= subtree_err:
        node.left = node.right = None
        node.feature = -1
        node.coef, node.intercept = coef, intercept
        return own_err
    return subtree_err


def _target(d: Dataset, which: str) -> np.ndarray:
    if which == "robustness":
        return d.y_rb
    if which == "label":
        return np.where(d.y_label == "fail", -1.0, 1.0)
    raise ValueError(f"unknown target {which!r}")


def train_m5(d: Dataset, params: M5Params = M5Params()) -> ModelTree:
    """Grow a variance-reduction tree and fit least-squares leaf models."""
    if len(d) < 2:
        raise ValueError("need at least 2 rows")
    y = _target(d, params.target)
    X = d.X
    std_floor = 0.05 * float(np.std(y))
    root = _grow(X, y, np.arange(len(y)), params.min_leaf, None,
                 np.random.default_rng(0), std_floor)
    if params.prune:
        _m5_prune(root, X, y)
    else:
        def fit_leaves(nd):
            if nd.is_leaf:
                nd.coef, nd.intercept = _fit_linear(X[nd.indices], y[nd.indices])
            else:
                fit_leaves(nd.left)
                fit_leaves(nd.right)
        fit_leaves(root)
    return ModelTree(root=root, feature_names=list(d.feature_names),
                     flat=_flatten(root, X.shape[1]))


# ---------------------------------------------------------------------------
# Random forest

@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    min_leaf: int = 1
    seed: int = 17
    target: str = "robustness"


@dataclass
class Forest:
    """Ensemble of unpruned regression trees on bootstrap samples."""

    trees: list[_FlatTree]
    bootstrap_indices: list[np.ndarray]
    features_per_split: int
    feature_names: list[str]

    def predict(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != len(self.feature_names):
            raise ValueError("feature dimension mismatch")
        acc = np.zeros(len(X))
        for t in self.trees:
            acc += t.predict(X)
        return acc / len(self.trees)


def train_forest(d: Dataset, params: ForestParams = ForestParams()) -> Forest:
    """Bootstrap-aggregated trees with sqrt(n_features) tried per split."""
    if len(d) < 2:
        raise ValueError("need at least 2 rows")
    y = _target(d, params.target)
    X = d.X
    n, n_feat = X.shape
    m = max(1, int(round(np.sqrt(n_feat))))
    trees, boots = [], []
    ss = np.random.SeedSequence(params.seed)
    for child in ss.spawn(params.n_trees):
        rng = np.random.default_rng(child)
        boot = rng.integers(0, n, size=n)
        root = _grow(X[boot], y[boot], np.arange(n), params.min_leaf, m, rng,
                     std_floor=0.0)
        trees.append(_flatten(root, n_feat))
        boots.append(boot)
    return Forest(trees=trees, bootstrap_indices=boots, features_per_split=m,
                  feature_names=list(d.feature_names))


# ---------------------------------------------------------------------------
# Causal model facade

@dataclass
class CausalModel:
    """Trained surrogate mapping control-point vectors to robustness.

    Verdicts use the trace-level convention: estimate >= threshold (0) is a
    pass.
    """

    variant: str  # 'm5' or 'rf'
    model: ModelTree | Forest
    threshold: float = 0.0

    def predict_batch(self, X) -> np.ndarray:
        return self.model.predict(X)

    def predict(self, x) -> tuple[float, str]:
        est = float(self.model.predict(np.atleast_2d(x))[0])
        return est, ("pass" if est >= self.threshold else "fail")


def make_causal_model(d: Dataset, variant: str,
                      m5_params: M5Params = M5Params(),
                      forest_params: ForestParams = ForestParams()) -> CausalModel:
    if variant == "m5":
        return CausalModel(variant="m5", model=train_m5(d, m5_params))
    if variant == "rf":
        return CausalModel(variant="rf", model=train_forest(d, forest_params))
    raise ValueError(f"unknown model variant {variant!r} (use 'm5' or 'rf')")


def classifier_metrics(cm: CausalModel, holdout: Dataset):
    """(accuracy, recall, f1) with 'fail' as the positive class.

    Recall/F1 are None (not applicable) when the holdout has no failing
    rows, never silently zero.
    """
    if len(holdout) == 0:
        raise ValueError("empty holdout")
    est = cm.predict_batch(holdout.X)
    pred_fail = est < cm.threshold
    true_fail = holdout.y_label == "fail"
    accuracy = float(np.mean(pred_fail == true_fail))
    if not true_fail.any():
        return accuracy, None, None
    tp = int(np.sum(pred_fail & true_fail))
    fn = int(np.sum(~pred_fail & true_fail))
    fp = int(np.sum(pred_fail & ~true_fail))
    recall = tp / (tp + fn)
    precision = tp / (tp + fp) if (tp + fp) else None
    if precision is None or precision + recall == 0:
        return accuracy, recall, None
    f1 = 2 * precision * recall / (precision + recall)
    return accuracy, recall, f1


# ---------------------------------------------------------------------------
# Serialization

def _node_to_dict(nd: _Node):
    if nd.is_leaf:
        out = {"value": nd.value, "n": nd.n}
        if nd.coef is not None:
            out["coef"] = [float(c) for c in nd.coef]
            out["intercept"] = nd.intercept
        return out
    return {
        "feature": nd.feature,
        "threshold": nd.threshold,
        "value": nd.value,
        "n": nd.n,
        "left": _node_to_dict(nd.left),
        "right": _node_to_dict(nd.right),
    }


def _node_from_dict(obj) -> _Node:
    nd = _Node(value=float(obj["value"]), n=int(obj.get("n", 0)))
    if "feature" in obj:
        nd.feature = int(obj["feature"])
        nd.threshold = float(obj["threshold"])
        nd.left = _node_from_dict(obj["left"])
        nd.right = _node_from_dict(obj["right"])
    elif "coef" in obj:
        nd.coef = np.array(obj["coef"], dtype=float)
        nd.intercept = float(obj["intercept"])
    return nd


def _flat_to_dict(t: _FlatTree):
    # forest trees have constant leaves, so the node dict form suffices;
    # rebuild a node view from the arrays
    def build(i):
        if t.feature[i] < 0:
            return {"value": float(t.value[i])}
        return {"feature": int(t.feature[i]), "threshold": float(t.threshold[i]),
                "value": float(t.value[i]),
                "left": build(int(t.left[i])), "right": build(int(t.right[i]))}
    return build(0)


def model_to_json(cm: CausalModel) -> str:
    doc = {"format": MODEL_FORMAT, "version": MODEL_VERSION,
           "variant": cm.variant, "threshold": cm.threshold,
           "feature_names": cm.model.feature_names}
    if cm.variant == "m5":
        doc["tree"] = _node_to_dict(cm.model.root)
    else:
        doc["trees"] = [_flat_to_dict(t) for t in cm.model.trees]
        doc["features_per_split"] = cm.model.features_per_split
        doc["bootstrap_indices"] = [b.tolist() for b in cm.model.bootstrap_indices]
    return json.dumps(doc, sort_keys=True)


def model_from_json(text: str) -> CausalModel:
    doc = json.loads(text)
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError("not a model document")
    if doc.get("version") != MODEL_VERSION:
        raise ValueError(f"unsupported model version {doc.get('version')}")
    names = list(doc["feature_names"])
    n_feat = len(names)
    if doc["variant"] == "m5":
        root = _node_from_dict(doc["tree"])
        model = ModelTree(root=root, feature_names=names,
                          flat=_flatten(root, n_feat))
    else:
        roots = [_node_from_dict(t) for t in doc["trees"]]
        model = Forest(
            trees=[_flatten(r, n_feat) for r in roots],
            bootstrap_indices=[np.array(b) for b in doc["bootstrap_indices"]],
            features_per_split=int(doc["features_per_split"]),
            feature_names=names,
        )
    return CausalModel(variant=doc["variant"], model=model,
                       threshold=float(doc["threshold"]))
