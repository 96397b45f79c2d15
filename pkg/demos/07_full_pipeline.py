"""End-to-end run: gen -> train -> explain -> eval, as the CLI does it.

Every artifact lands under out/<generator>-<model>/; rerunning with the
same master seed reproduces every file byte for byte (timing.json is the
one deliberate exception).
"""

import json
import tempfile
from pathlib import Path

from decaf import RunConfig
from decaf.pipeline import run_eval, run_explain, run_gen, run_train
from decaf.testgen import SAParams

out = Path(tempfile.mkdtemp(prefix="decaf-demo-"))
cfg = RunConfig(plant="at", seed=17, runs=3, sa=SAParams(max_iters=60),
                retain="all-evaluated", generator="kd", model="m5",
                out=str(out))
cell = out / "kd-m5"

ts = run_gen(cfg, cell)
print(f"gen: {len(ts.rows)} rows ({ts.n_fail} failing)")

cm = run_train(cfg, ts, cell)
metrics = json.loads((cell / "metrics.json").read_text())
print(f"train: holdout accuracy {metrics['accuracy']:.3f}")

result = run_explain(cfg, ts, cm, cell)
repaired = sum(1 for r in result.records if r.valid > 0)
print(f"explain: {repaired}/{len(result.records)} failing inputs repaired")

summary = run_eval(out)
print(f"eval: {len(summary['rows'])} configuration rows")
print(f"\nartifacts under {out}:")
for p in sorted(out.rglob("*")):
    if p.is_file():
        print(f"  {p.relative_to(out)}")

print("\nreport.md excerpt:")
print("\n".join((cell / "report.md").read_text().splitlines()[:12]))
