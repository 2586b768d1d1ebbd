"""Drive the whole pipeline through the CLI and inspect the artifacts.

One JSON config + one master seed produce a self-describing run directory:
nine stage artifacts with fixed names, each JSON artifact stamped with the
config digest, and a manifest whose sha256 digests can be re-verified later.
Re-running the same config and seed reproduces every artifact byte for byte.
"""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

workdir = Path(tempfile.mkdtemp(prefix="propflow_demo_"))
out = workdir / "run"
config = {
    "seed": 2024,
    "out": str(out),
    "generator": {"n": 3000, "prevalence": 0.05},
    "resample": {"adasyn": {"beta": 0.4}, "nearmiss": {"variant": 1}, "alpha": 0.01},
    "search": {"budget": 8, "cv": 4, "n_trees": [30, 150], "max_depth": [2, 4],
               "learning_rate": [0.05, 0.3], "min_split_gain": [0.0, 1.0]},
    "evaluate": {"k": 8, "threshold": 0.5},
    "explain": {"max_depth": 3, "min_leaf": 20, "cv_folds": 5},
}
cfg_path = workdir / "config.json"
cfg_path.write_text(json.dumps(config, indent=2))

print(f"config: {cfg_path}")
print("$ propflow run-all --config config.json")
run = subprocess.run(
    [sys.executable, "-m", "propflow.cli", "run-all", "--config", str(cfg_path)],
    capture_output=True, text=True,
)
assert run.returncode == 0, run.stderr
print(run.stdout.rstrip())  # the evaluate stage prints the metrics table
print()

print("artifacts:")
for p in sorted(out.iterdir()):
    print(f"  {p.name:<28} {p.stat().st_size:>8} bytes")
print()

manifest = json.loads((out / "manifest.json").read_text())
print(f"tool {manifest['tool_version']}, config digest {manifest['config_digest'][:16]}..")
for stage, rec in manifest["stages"].items():
    print(f"  {stage:<9} {rec['wall_clock_s']:>7.2f}s  -> {', '.join(rec['outputs'])}")
print()

best = json.loads((out / "tune_result.json").read_text())["best"]["params"]
print(f"tuned parameters: {best}")
print()
print("rules:")
print((out / "rules.txt").read_text().rstrip())
