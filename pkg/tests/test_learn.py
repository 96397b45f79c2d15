import numpy as np
import pytest

from decaf.learn import (CausalModel, Dataset, ForestParams, M5Params,
                         classifier_metrics, identify_failures,
                         make_causal_model, model_from_json, model_to_json,
                         train_forest, train_m5, train_test_split, transform,
                         rows_as_inputs)
from decaf.plants import monotone_toy_plant
from decaf.stl import parse
from decaf.testgen import SAParams, build_training_set


def make_dataset(X, y_rb):
    y_rb = np.asarray(y_rb, float)
    labels = np.where(y_rb < 0, "fail", "pass")
    names = [f"f{i}" for i in range(X.shape[1])]
    return Dataset(names, X, y_rb, labels)


def toy_dataset(runs=40, seed=17):
    plant = monotone_toy_plant()
    phi = parse("always[0,10] (y < 50)")
    ts = build_training_set(plant, phi, plant.input_spec, runs,
                            SAParams(max_iters=15), seed=seed,
                            retain="all-evaluated")
    return transform(ts), plant.input_spec


class TestTransform:
    def test_columns_follow_spec_order(self):
        d, spec = toy_dataset(runs=3)
        assert d.feature_names == spec.feature_names()
        assert d.X.shape == (3 * 16, 4)

    def test_round_trip_rows(self):
        d, spec = toy_dataset(runs=2)
        inputs = rows_as_inputs(d, spec)
        assert np.array_equal(inputs[5].as_vector(), d.X[5])

    def test_labels_match_sign(self):
        d, _ = toy_dataset(runs=5)
        assert np.array_equal(d.y_label == "fail", d.y_rb < 0)

    def test_identify_failures(self):
        d, _ = toy_dataset(runs=5)
        idx = identify_failures(d)
        assert idx == list(np.flatnonzero(d.y_label == "fail"))
        assert len(idx) > 0


class TestM5:
    def test_constant_target_single_leaf(self):
        rng = np.random.default_rng(0)
        X = rng.uniform(size=(30, 3))
        tree = train_m5(make_dataset(X, np.full(30, 4.2)))
        assert tree.n_leaves() == 1
        assert np.allclose(tree.predict(X), 4.2, atol=1e-9)

    def test_piecewise_linear_recovery(self):
        # two linear regimes (slopes 1 and 3) separated by a jump at x=0.5;
        # the variance-optimal first split is at the discontinuity
        rng = np.random.default_rng(17)
        x = rng.uniform(size=400)
        truth_fn = lambda v: np.where(v < 0.5, v, 2.0 + 3.0 * (v - 0.5))
        tree = train_m5(make_dataset(x[:, None], truth_fn(x)))
        assert tree.root.feature == 0
        assert tree.root.threshold == pytest.approx(0.5, abs=0.05)
        slopes = sorted(float(leaf.coef[0]) for _, leaf in tree.paths())
        assert slopes[0] == pytest.approx(1.0, rel=0.05)
        assert slopes[-1] == pytest.approx(3.0, rel=0.05)
        # noiseless data is fit exactly away from the break
        grid = np.linspace(0.0, 1.0, 101)
        keep = np.abs(grid - 0.5) > 0.05
        assert np.max(np.abs(tree.predict(grid[:, None])[keep]
                             - truth_fn(grid)[keep])) < 1e-6

    def test_beats_global_linear_fit(self):
        rng = np.random.default_rng(3)
        X = rng.uniform(-1, 1, size=(300, 2))
        y = np.sin(3 * X[:, 0]) + X[:, 1] ** 2
        tree = train_m5(make_dataset(X, y))
        tree_mse = np.mean((tree.predict(X) - y) ** 2)
        A = np.column_stack([X, np.ones(len(X))])
        sol, *_ = np.linalg.lstsq(A, y, rcond=None)
        lin_mse = np.mean((A @ sol - y) ** 2)
        assert tree_mse <= lin_mse

    def test_pruning_shrinks_tree(self):
        rng = np.random.default_rng(5)
        X = rng.uniform(size=(200, 3))
        y = X @ np.array([1.0, -2.0, 0.5]) + rng.normal(0, 0.05, 200)
        big = train_m5(make_dataset(X, y), M5Params(prune=False))
        small = train_m5(make_dataset(X, y), M5Params(prune=True))
        assert small.n_leaves() <= big.n_leaves()

    def test_deterministic(self):
        d, _ = toy_dataset(runs=10)
        a = train_m5(d)
        b = train_m5(d)
        probe = np.random.default_rng(0).uniform(0, 100, size=(20, 4))
        assert np.array_equal(a.predict(probe), b.predict(probe))

    def test_flat_routing_matches_recursive_descent(self):
        d, _ = toy_dataset(runs=10)
        tree = train_m5(d)
        probe = np.random.default_rng(1).uniform(0, 100, size=(50, 4))

        def descend(nd, x):
            while not nd.is_leaf:
                nd = nd.left if x[nd.feature] <= nd.threshold else nd.right
            if nd.coef is not None:
                return float(x @ nd.coef + nd.intercept)
            return nd.value

        got = tree.predict(probe)
        want = np.array([descend(tree.root, x) for x in probe])
        # reduction order differs between the batched and per-row dot
        # products, so compare to float tolerance
        assert np.allclose(got, want, rtol=0, atol=1e-9)

    def test_label_target(self):
        d, _ = toy_dataset(runs=10)
        tree = train_m5(d, M5Params(target="label"))
        preds = tree.predict(d.X)
        signs = np.where(preds >= 0, "pass", "fail")
        assert np.mean(signs == d.y_label) > 0.9

    def test_dimension_mismatch_rejected(self):
        d, _ = toy_dataset(runs=3)
        tree = train_m5(d)
        with pytest.raises(ValueError):
            tree.predict(np.zeros((2, 7)))


class TestForest:
    def test_fit_quality_on_smooth_target(self):
        rng = np.random.default_rng(7)
        X = rng.uniform(size=(300, 4))
        y = 2.0 * X[:, 0] - X[:, 2]
        f = train_forest(make_dataset(X, y), ForestParams(n_trees=50))
        r2 = 1 - np.mean((f.predict(X) - y) ** 2) / np.var(y)
        assert r2 > 0.8

    def test_shapes_and_bootstrap(self):
        d, _ = toy_dataset(runs=5)
        f = train_forest(d, ForestParams(n_trees=20))
        assert len(f.trees) == 20
        assert len(f.bootstrap_indices) == 20
        assert all(len(b) == len(d) for b in f.bootstrap_indices)
        assert f.features_per_split == 2  # sqrt(4)

    def test_deterministic_under_seed(self):
        d, _ = toy_dataset(runs=8)
        probe = np.random.default_rng(2).uniform(0, 100, size=(30, 4))
        a = train_forest(d, ForestParams(n_trees=10, seed=17))
        b = train_forest(d, ForestParams(n_trees=10, seed=17))
        c = train_forest(d, ForestParams(n_trees=10, seed=18))
        assert np.array_equal(a.predict(probe), b.predict(probe))
        assert not np.array_equal(a.predict(probe), c.predict(probe))

    def test_prediction_is_tree_mean(self):
        d, _ = toy_dataset(runs=5)
        f = train_forest(d, ForestParams(n_trees=7))
        probe = np.random.default_rng(3).uniform(0, 100, size=(10, 4))
        want = np.mean([t.predict(probe) for t in f.trees], axis=0)
        assert np.allclose(f.predict(probe), want, atol=1e-12)


class TestCausalModel:
    def test_verdict_threshold_is_pass_at_zero(self):
        X = np.random.default_rng(0).uniform(size=(30, 2))
        cm = make_causal_model(make_dataset(X, np.zeros(30)), "m5")
        est, v = cm.predict(X[0])
        assert est == pytest.approx(0.0, abs=1e-9)
        assert v == "pass"

    def test_unknown_variant(self):
        d, _ = toy_dataset(runs=3)
        with pytest.raises(ValueError):
            make_causal_model(d, "xgboost")

    def test_holdout_metrics_on_linear_plant(self):
        # toy robustness is exactly linear in the control points, so the
        # model tree should classify a stratified holdout almost perfectly
        d, _ = toy_dataset(runs=40)
        train, test = train_test_split(d, 0.25, seed=1)
        assert len(test) > 20
        cm = make_causal_model(train, "m5")
        accuracy, recall, f1 = classifier_metrics(cm, test)
        assert accuracy > 0.95
        assert recall > 0.9
        assert f1 > 0.9

    def test_metrics_without_failures_are_not_applicable(self):
        X = np.random.default_rng(1).uniform(size=(20, 2))
        d = make_dataset(X, np.ones(20))
        cm = make_causal_model(d, "m5")
        accuracy, recall, f1 = classifier_metrics(cm, d)
        assert recall is None and f1 is None
        assert 0.0 <= accuracy <= 1.0

    def test_split_is_stratified(self):
        d, _ = toy_dataset(runs=30)
        train, test = train_test_split(d, 0.2, seed=9)
        frac_all = np.mean(d.y_label == "fail")
        frac_test = np.mean(test.y_label == "fail")
        assert frac_test == pytest.approx(frac_all, abs=0.05)
        assert len(train) + len(test) == len(d)


class TestSerialization:
    def test_m5_round_trip(self):
        d, _ = toy_dataset(runs=10)
        cm = make_causal_model(d, "m5")
        text = model_to_json(cm)
        again = model_from_json(text)
        probe = np.random.default_rng(4).uniform(0, 100, size=(40, 4))
        assert np.array_equal(cm.predict_batch(probe), again.predict_batch(probe))
        assert model_to_json(again) == text

    def test_rf_round_trip(self):
        d, _ = toy_dataset(runs=6)
        cm = make_causal_model(d, "rf",
                               forest_params=ForestParams(n_trees=5))
        text = model_to_json(cm)
        again = model_from_json(text)
        probe = np.random.default_rng(5).uniform(0, 100, size=(40, 4))
        assert np.array_equal(cm.predict_batch(probe), again.predict_batch(probe))

    def test_version_checked(self):
        d, _ = toy_dataset(runs=3)
        text = model_to_json(make_causal_model(d, "m5"))
        import json
        doc = json.loads(text)
        doc["version"] = 99
        with pytest.raises(ValueError):
            model_from_json(json.dumps(doc))
        doc["format"] = "something-else"
        with pytest.raises(ValueError):
            model_from_json(json.dumps(doc))
