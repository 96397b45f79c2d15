import json
import os
import tempfile
from pathlib import Path

import numpy as np
import pytest

from decaf.cli import main
from decaf.config import ConfigError, RunConfig, load_config, resolve_plant
from decaf.learn import classifier_metrics, model_from_json, transform, \
    train_test_split
from decaf.pipeline import (NothingToExplain, run_eval, run_explain, run_gen,
                            run_report, run_train, threads_from_env)
from decaf.plants import get_plant
from decaf.signals import random_input
from decaf.stl import robustness, verdict
from decaf.plants import simulate
from decaf.testgen import LabeledInput, SAParams, TrainingSet

_CACHE = {}


def small_cfg(out: str, **kw) -> RunConfig:
    base = dict(plant="at", runs=6, sa=SAParams(max_iters=40),
                retain="all-evaluated", generator="kd", model="m5", out=out)
    base.update(kw)
    return RunConfig(**base)


def pipeline_artifacts():
    """One cached kd-m5 run on the AT surrogate, shared by the tests."""
    if "run" not in _CACHE:
        root = Path(tempfile.mkdtemp(prefix="decaf-test-"))
        cfg = small_cfg(str(root))
        cell = root / "kd-m5"
        ts = run_gen(cfg, cell)
        cm = run_train(cfg, ts, cell)
        result = run_explain(cfg, ts, cm, cell)
        _CACHE["run"] = (cfg, cell, ts, cm, result)
    return _CACHE["run"]


class TestConfig:
    def test_defaults(self):
        cfg = load_config(None)
        assert (cfg.plant, cfg.seed, cfg.model, cfg.generator) == \
            ("at", 17, "m5", "kd")
        assert cfg.cf.k_max == 7
        assert cfg.cf.population == 50
        assert cfg.all_seeds() == (17,)

    def test_yaml_and_overrides(self, tmp_path):
        p = tmp_path / "c.yaml"
        p.write_text("plant: acc\nseed: 3\nsa: {max_iters: 10}\n"
                     "cf: {k_max: 2}\nseeds: [3, 4]\n")
        cfg = load_config(str(p), model="rf")
        assert cfg.plant == "acc" and cfg.model == "rf"
        assert cfg.sa.max_iters == 10 and cfg.cf.k_max == 2
        assert cfg.all_seeds() == (3, 4)

    def test_unknown_keys_rejected(self, tmp_path):
        p = tmp_path / "c.yaml"
        p.write_text("plnt: at\n")
        with pytest.raises(ConfigError):
            load_config(str(p))
        p.write_text("sa: {mx_iters: 10}\n")
        with pytest.raises(ConfigError):
            load_config(str(p))

    def test_invalid_values_rejected(self):
        with pytest.raises(ConfigError):
            RunConfig(model="svm")
        with pytest.raises(ConfigError):
            RunConfig(plant="simulink")
        with pytest.raises(ConfigError):
            RunConfig(requirement="nope")

    def test_resolve_requirement(self):
        plant, req = resolve_plant(RunConfig(plant="at"))
        assert req.id == "at1"
        plant, req = resolve_plant(RunConfig(plant="at", requirement="at1"))
        assert req.id == "at1"


class TestGen:
    def test_csv_schema_and_manifest(self):
        cfg, cell, ts, _, _ = pipeline_artifacts()
        header = (cell / "training.csv").read_text().splitlines()[0].split(",")
        assert len(header) == 12  # 10 control points + robustness + verdict
        manifest = json.loads((cell / "manifest.json").read_text())
        assert manifest["rows"] == len(ts.rows)
        assert manifest["rows"] == cfg.runs * (cfg.sa.max_iters + 1)
        assert manifest["n_fail"] + manifest["n_pass"] == manifest["rows"]
        assert manifest["n_fail"] > 0

    def test_same_seed_identical_files(self, tmp_path):
        cfg = small_cfg(str(tmp_path), runs=3, sa=SAParams(max_iters=40))
        run_gen(cfg, tmp_path / "a")
        run_gen(cfg, tmp_path / "b")
        assert (tmp_path / "a/training.csv").read_bytes() == \
            (tmp_path / "b/training.csv").read_bytes()

    def test_unfalsifiable_requirement_fails(self, tmp_path):
        # the toy registry entry is reachable only through the API; an
        # unfalsifiable case is simulated by a training set with no fails
        cfg = small_cfg(str(tmp_path))
        plant, _ = get_plant("at")
        rows = []
        rng = np.random.default_rng(0)
        _, req = resolve_plant(cfg)
        for _ in range(5):
            inp = random_input(plant.input_spec, rng)
            rb = robustness(req.formula, simulate(plant, inp))
            if verdict(rb) == "pass":
                rows.append(LabeledInput(inp, rb, "pass"))
        ts = TrainingSet(spec=plant.input_spec, rows=rows)
        cm = pipeline_artifacts()[3]
        with pytest.raises(NothingToExplain):
            run_explain(cfg, ts, cm, tmp_path / "x")


class TestTrain:
    def test_metrics_match_recomputation(self):
        cfg, cell, ts, cm, _ = pipeline_artifacts()
        metrics = json.loads((cell / "metrics.json").read_text())
        reloaded = model_from_json((cell / "model.json").read_text())
        d = transform(ts)
        _, holdout = train_test_split(d, cfg.holdout_fraction, seed=cfg.seed)
        accuracy, recall, f1 = classifier_metrics(reloaded, holdout)
        assert metrics["accuracy"] == accuracy
        assert metrics["recall"] == recall
        assert metrics["f1"] == f1
        assert metrics["holdout_rows"] == len(holdout)

    def test_reload_predict_equals_in_memory(self):
        cfg, cell, ts, cm, _ = pipeline_artifacts()
        reloaded = model_from_json((cell / "model.json").read_text())
        X = transform(ts).X[:100]
        assert np.array_equal(cm.predict_batch(X), reloaded.predict_batch(X))


class TestExplain:
    def test_valid_counterfactuals_have_nonnegative_robustness(self):
        _, _, _, _, result = pipeline_artifacts()
        seen = 0
        for entry in result.report["inputs"]:
            for cf in entry["counterfactuals"]:
                assert cf["validated"]["verdict"] == "pass"
                assert cf["validated"]["robustness"] >= 0
                seen += 1
        assert seen > 0

    def test_changed_points_carry_intervals_and_values(self):
        _, _, _, _, result = pipeline_artifacts()
        entry = next(e for e in result.report["inputs"] if e["valid"])
        cf = entry["counterfactuals"][0]
        assert cf["changed_points"]
        for ch in cf["changed_points"]:
            assert set(ch) == {"signal", "index", "interval", "old", "new"}
            assert ch["interval"][0] < ch["interval"][1]

    def test_assertions_render_in_forall_form(self):
        _, _, _, _, result = pipeline_artifacts()
        found = 0
        for entry in result.report["inputs"]:
            a = entry.get("assertion")
            if a and a["dnf"] and a["dnf"][0]:
                assert "forall t in [" in a["temporal_form"]
                found += 1
        assert found > 0

    def test_report_md_mentions_every_failing_input(self):
        _, cell, _, _, result = pipeline_artifacts()
        md = (cell / "report.md").read_text()
        for entry in result.report["inputs"]:
            assert f"## Failing input {entry['input_index']} " in md

    def test_report_rerender_identical(self):
        _, cell, _, _, _ = pipeline_artifacts()
        before = (cell / "report.md").read_text()
        assert run_report(cell) == before

    def test_parallel_matches_serial(self, tmp_path):
        cfg, cell, ts, cm, result = pipeline_artifacts()
        parallel = run_explain(cfg, ts, cm, tmp_path / "p", threads=4)
        assert parallel.report == result.report


class TestEval:
    def test_tables_and_recount(self):
        cfg, cell, _, _, result = pipeline_artifacts()
        summary = run_eval(cfg.out)
        rows = summary["rows"]
        assert len(rows) == 6  # 3 generators x 2 models
        kd_m5 = next(r for r in rows
                     if (r["generator"], r["model"]) == ("kd", "m5"))
        cf_file = json.loads((cell / "counterfactuals.json").read_text())
        assert kd_m5["n_valid"] == sum(len(cfs) for cfs in cf_file)
        assert kd_m5["n_fail"] == len(result.records)

    def test_missing_cells_render_dashes(self):
        cfg, _, _, _, _ = pipeline_artifacts()
        run_eval(cfg.out)
        csv_text = (Path(cfg.out) / "table_configs.csv").read_text()
        rs_row = next(l for l in csv_text.splitlines()
                      if l.startswith("--,rs,m5"))
        assert ",--," in rs_row


class TestCliEntry:
    def test_config_error_exit_code(self, tmp_path):
        bad = tmp_path / "bad.yaml"
        bad.write_text("plant: at\nbogus_key: 1\n")
        assert main(["gen", "--config", str(bad)]) == 2

    def test_missing_training_set_exit_code(self, tmp_path):
        assert main(["train", "--out", str(tmp_path)]) == 2

    def test_plants_list(self, capsys):
        assert main(["plants", "list"]) == 0
        out = capsys.readouterr().out
        for name in ("at", "acc", "cc"):
            assert f"{name}:" in out

    def test_threads_env(self, monkeypatch):
        monkeypatch.delenv("DECAF_THREADS", raising=False)
        assert threads_from_env() == 1
        monkeypatch.setenv("DECAF_THREADS", "4")
        assert threads_from_env() == 4
        monkeypatch.setenv("DECAF_THREADS", "zebra")
        with pytest.raises(ValueError):
            threads_from_env()
