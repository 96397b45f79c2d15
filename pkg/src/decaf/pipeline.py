"""End-to-end orchestration: data generation, model training,
counterfactual explanation, and metric tables, with file artifacts.

Every stage is deterministic under the master seed; all randomness is
derived from (seed, stage, index) so results do not depend on scheduling.
Wall-clock timing goes to a separate timing file and never into the
deterministic artifacts.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .assertions import (assertion_to_json, contrast_rows, explain_nl, infer,
                         prune, translate)
from .cfgen import (CFParams, cf_set_to_json, generate, select, validate)
from .config import RunConfig, resolve_plant
from .evaluation import (ConfigResult, InputRecord, config_table, g_score,
                         mann_whitney_u, necessity, predicate_count, safety,
                         sufficiency, table_to_csv, table_to_json,
                         validity_vector, vargha_delaney_a12)
from .learn import (CausalModel, ForestParams, classifier_metrics,
                    identify_failures, make_causal_model, model_to_json,
                    transform, train_test_split)
from .signals import TestInput
from .stl import parse
from .testgen import TrainingSet, build_training_set

__all__ = ["run_gen", "run_train", "run_explain", "run_eval", "run_report",
           "ExplainResult", "threads_from_env", "NothingToExplain"]


class NothingToExplain(RuntimeError):
    """The pipeline has no failing inputs or no data to work on."""


def threads_from_env() -> int:
    """Worker cap from DECAF_THREADS (default 1)."""
    raw = os.environ.get("DECAF_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"DECAF_THREADS must be an integer, got {raw!r}")
    return max(1, n)


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


# ---------------------------------------------------------------------------
# gen

def run_gen(cfg: RunConfig, out_dir: str | Path) -> TrainingSet:
    """Generate a labeled training set and write training.csv + manifest."""
    plant, req = resolve_plant(cfg)
    phi = parse(req.formula) if isinstance(req.formula, str) else req.formula
    ts = build_training_set(plant, phi, plant.input_spec, cfg.runs, cfg.sa,
                            seed=cfg.seed, retain=cfg.retain)
    out = Path(out_dir)
    _write(out / "training.csv", ts.to_csv())
    manifest = {
        "plant": cfg.plant,
        "requirement": req.id,
        "seed": cfg.seed,
        "runs": cfg.runs,
        "retain": cfg.retain,
        "sa": asdict(cfg.sa),
        "rows": len(ts.rows),
        "n_fail": ts.n_fail,
        "n_pass": ts.n_pass,
    }
    _write(out / "manifest.json", json.dumps(manifest, sort_keys=True, indent=2))
    return ts


# ---------------------------------------------------------------------------
# train

def run_train(cfg: RunConfig, ts: TrainingSet,
              out_dir: str | Path) -> CausalModel:
    """Train on a stratified split, report holdout metrics, serialize."""
    d = transform(ts)
    train, holdout = train_test_split(d, cfg.holdout_fraction, seed=cfg.seed)
    if len(holdout) == 0:
        train = holdout = d
    cm = make_causal_model(
        train, cfg.model,
        forest_params=ForestParams(seed=cfg.seed))
    accuracy, recall, f1 = classifier_metrics(cm, holdout)
    out = Path(out_dir)
    _write(out / "model.json", model_to_json(cm))
    metrics = {"model": cfg.model, "holdout_rows": len(holdout),
               "accuracy": accuracy, "recall": recall, "f1": f1}
    _write(out / "metrics.json", json.dumps(metrics, sort_keys=True, indent=2))
    return cm


# ---------------------------------------------------------------------------
# explain

@dataclass
class ExplainResult:
    records: list[InputRecord]
    report: dict
    report_md: str


def _metric_or_none(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ValueError:
        return None


def _explain_one(idx_pos, idx_row, cfg, plant, phi, spec, d, cm):
    x_f = d.X[idx_row]
    rng = np.random.default_rng(
        np.random.SeedSequence((cfg.seed, cfg.cf.seed, idx_pos)))
    candidates = generate(cfg.generator, x_f, cm, d, spec, cfg.cf, rng)
    validated = validate(plant, phi, candidates)
    selected = select(validated, cfg.cf.k_max)
    entry = {
        "input_index": int(idx_row),
        "input": [float(v) for v in x_f],
        "robustness": float(d.y_rb[idx_row]),
        "generated": len(candidates),
        "valid": len(selected),
        "counterfactuals": json.loads(cf_set_to_json(selected, spec)),
    }
    record = InputRecord(index=int(idx_row), generated=len(candidates),
                         valid=len(selected))
    if not selected:
        entry["note"] = "no valid counterfactual found"
        return record, entry
    best = selected[0]
    contrast = contrast_rows(d, x_f, spec, cfg.contrast_size)
    a = prune(infer(selected, TestInput.from_vector(spec, x_f), contrast, spec))
    ta = translate(a, spec)
    m_rng = np.random.default_rng(
        np.random.SeedSequence((cfg.seed, cfg.cf.seed, idx_pos, 1)))
    record.necessity_flag = (_metric_or_none(necessity, plant, phi, best)
                             if best.changed_points else None)
    record.sufficiency_fraction = _metric_or_none(
        sufficiency, plant, phi, best, 50, m_rng)
    record.predicates = predicate_count(a)
    record.g = g_score(a, selected)
    record.safety_fraction = _metric_or_none(
        safety, plant, phi, a, best, 50,
        np.random.default_rng(np.random.SeedSequence(
            (cfg.seed, cfg.cf.seed, idx_pos, 2))))
    entry["explanations"] = explain_nl(best, spec)
    entry["assertion"] = json.loads(assertion_to_json(a, spec))
    entry["metrics"] = {
        "necessity": record.necessity_flag,
        "sufficiency": record.sufficiency_fraction,
        "predicates": record.predicates,
        "g_score": record.g,
        "safety": record.safety_fraction,
    }
    return record, entry


def run_explain(cfg: RunConfig, ts: TrainingSet, cm: CausalModel,
                out_dir: str | Path, threads: int = 1) -> ExplainResult:
    """Counterfactuals plus assertions for every failing training input."""
    plant, req = resolve_plant(cfg)
    phi = parse(req.formula) if isinstance(req.formula, str) else req.formula
    spec = plant.input_spec
    d = transform(ts)
    failing = identify_failures(d)
    if not failing:
        raise NothingToExplain(
            f"no failing inputs for {cfg.plant}/{req.id}; nothing to explain")
    t0 = time.monotonic()
    work = [(pos, row) for pos, row in enumerate(failing)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(
                lambda w: _explain_one(w[0], w[1], cfg, plant, phi, spec, d, cm),
                work))
    else:
        results = [_explain_one(pos, row, cfg, plant, phi, spec, d, cm)
                   for pos, row in work]
    elapsed = time.monotonic() - t0
    records = [r for r, _ in results]
    entries = [e for _, e in results]
    report = {
        "plant": cfg.plant,
        "requirement": req.id,
        "generator": cfg.generator,
        "model": cfg.model,
        "seed": cfg.seed,
        "n_failing": len(failing),
        "inputs": entries,
    }
    out = Path(out_dir)
    _write(out / "counterfactuals.json", json.dumps(
        [e["counterfactuals"] for e in entries], sort_keys=True))
    _write(out / "assertions.json", json.dumps(
        [e.get("assertion") for e in entries], sort_keys=True))
    report_md = render_report_md(report)
    _write(out / "report.json", json.dumps(report, sort_keys=True, indent=2))
    _write(out / "report.md", report_md)
    _write(out / "timing.json", json.dumps({"explain_seconds": elapsed}))
    return ExplainResult(records=records, report=report, report_md=report_md)


def render_report_md(report: dict) -> str:
    lines = [
        f"# Debugging report: {report['plant']} / {report['requirement']}",
        "",
        f"- generator: {report['generator']}",
        f"- causal model: {report['model']}",
        f"- seed: {report['seed']}",
        f"- failing inputs: {report['n_failing']}",
        "",
    ]
    for e in report["inputs"]:
        lines.append(f"## Failing input {e['input_index']} "
                     f"(robustness {e['robustness']:.4f})")
        lines.append("")
        lines.append(f"Control points: {e['input']}")
        lines.append("")
        if not e["valid"]:
            lines.append("No valid counterfactual found.")
            lines.append("")
            continue
        lines.append(f"Valid counterfactuals: {e['valid']} "
                     f"(of {e['generated']} generated)")
        lines.append("")
        for i, cf in enumerate(e["counterfactuals"]):
            rb = cf["validated"]["robustness"]
            lines.append(f"- counterfactual {i}: robustness {rb:.4f}, "
                         f"proximity {cf['proximity']:.4f}")
        lines.append("")
        if e.get("explanations"):
            lines.append("Changes (closest counterfactual):")
            lines.append("")
            for text in e["explanations"]:
                lines.append(f"- {text}")
            lines.append("")
        a = e.get("assertion")
        if a:
            lines.append(f"Success assertion: `{a['control_point_form']}`")
            lines.append("")
            lines.append(f"Temporal form: `{a['temporal_form']}`")
            lines.append("")
        m = e.get("metrics")
        if m:
            def cell(v):
                return "--" if v is None else v
            lines.append(f"Metrics: necessity={cell(m['necessity'])}, "
                         f"sufficiency={cell(m['sufficiency'])}, "
                         f"predicates={cell(m['predicates'])}, "
                         f"g_score={cell(m['g_score'])}, "
                         f"safety={cell(m['safety'])}")
            lines.append("")
    return "\n".join(lines) + "\n"


def run_report(out_dir: str | Path) -> str:
    """Re-render report.md from report.json."""
    out = Path(out_dir)
    report = json.loads((out / "report.json").read_text())
    md = render_report_md(report)
    _write(out / "report.md", md)
    return md


# ---------------------------------------------------------------------------
# eval

def _records_from_report(report: dict) -> list[InputRecord]:
    records = []
    for e in report["inputs"]:
        m = e.get("metrics", {})
        records.append(InputRecord(
            index=e["input_index"], generated=e["generated"],
            valid=e["valid"], necessity_flag=m.get("necessity"),
            sufficiency_fraction=m.get("sufficiency"),
            predicates=m.get("predicates"), g=m.get("g_score"),
            safety_fraction=m.get("safety")))
    return records


def run_eval(out_root: str | Path) -> dict:
    """Aggregate per-configuration artifacts under out_root into tables.

    Expects cell directories named <generator>-<model> containing a
    report.json; missing cells render as '--' rows.
    """
    out_root = Path(out_root)
    results = []
    cells = {}
    for gen in ("rs", "ga", "kd"):
        for model in ("m5", "rf"):
            cell = out_root / f"{gen}-{model}"
            report_file = cell / "report.json"
            if report_file.exists():
                report = json.loads(report_file.read_text())
                records = _records_from_report(report)
                results.append(ConfigResult(report["plant"], gen, model,
                                            records))
                cells[(gen, model)] = records
            else:
                results.append(ConfigResult("--", gen, model, []))
    rows = config_table(results)
    comparisons = []
    for model in ("m5", "rf"):
        for ga, gb in (("kd", "rs"), ("ga", "rs"), ("kd", "ga")):
            ra, rb = cells.get((ga, model)), cells.get((gb, model))
            if not ra or not rb:
                continue
            va, vb = validity_vector(ra), validity_vector(rb)
            if len(va) == 0 or len(vb) == 0:
                continue
            u, p = mann_whitney_u(va, vb)
            a12, cat = vargha_delaney_a12(va, vb)
            comparisons.append({"model": model, "a": ga, "b": gb,
                                "u": u, "p": p, "a12": a12, "category": cat})
    _write(out_root / "table_configs.csv", table_to_csv(rows))
    _write(out_root / "table_configs.json", table_to_json(rows))
    _write(out_root / "comparisons.json",
           json.dumps(comparisons, sort_keys=True, indent=2))
    return {"rows": rows, "comparisons": comparisons}
