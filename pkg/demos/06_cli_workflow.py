"""
The command-line workflow end to end
====================================

Everything in the library is also reachable from the ldp-hh command:
generate a dataset, run one protocol, compare several over a grid, and
ask the analytic model for predictions or an optimized schedule. This
script drives the CLI through one full cycle in a scratch directory.
"""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

scratch = Path(tempfile.mkdtemp(prefix="ldphh-demo-"))
data = scratch / "data.npz"


def cli(*args):
    cmd = [sys.executable, "-m", "ldphh.cli", *args]
    print(f"$ ldp-hh {' '.join(args)}")
    res = subprocess.run(cmd, capture_output=True, text=True, check=True)
    return res.stdout


# 1. Synthesize a dataset: 20k users, 16-bit values, zipf-distributed.
#    A .truth.json sidecar with exact counts lands next to the array.
cli(
    "gen", "--dist", "zipf", "--s", "1.5", "--support", "64",
    "--n", "20000", "--m", "16", "--seed", "9", "--out", str(data),
)
truth = json.loads((scratch / "data.npz.truth.json").read_text())
top = truth["true_topk"][0]
print(f"most frequent value {top['value_hex']} held by {top['count']} users\n")

# 2. Run one protocol; rows stream to stdout as CSV.
out = cli(
    "run", "--protocol", "pem", "--eps", "1.0", "--k", "8", "--reps", "3",
    "--data", str(data), "--seed", "5", "--query-limit", "4096",
)
print(out)

# 3. Compare protocols over an eps grid; JSON carries rows + summary.
doc = json.loads(cli(
    "compare", "--protocols", "pem", "spm", "--eps", "1.0", "2.0",
    "--k", "8", "--reps", "3", "--data", str(data), "--seed", "5",
    "--query-limit", "4096", "--format", "json",
))
print("compare summary:")
for row in doc["summary"]:
    print(f"  {row['protocol']:>4} eps={row['eps']}: "
          f"F1 {row['f1_mean']:.3f} +- {row['f1_std']:.3f}")

# 4. Ask the model what utility to expect at a given schedule.
doc = json.loads(cli(
    "analyze", "--dist", "zipf", "--s", "1.5", "--support", "64",
    "--n", "20000", "--m", "16", "--k", "8", "--eps", "1.0", "--eta", "6",
    "--format", "json",
))
print(f"\nanalyze: eta=6 predicted F1 {doc['score_f1']:.4f}")

# 5. Let the optimizer pick the schedule under a query budget.
doc = json.loads(cli(
    "optimize", "--dist", "zipf", "--s", "1.5", "--support", "64",
    "--n", "20000", "--m", "16", "--k", "8", "--eps", "1.0",
    "--query-limit", "4096", "--format", "json",
))
cfg = doc["config"]
print(f"optimize: gamma={cfg['gamma']} eta={cfg['eta']} g={cfg['g']}"
      f" -> predicted F1 {doc['score_f1']:.4f}")

print(f"\nartifacts left in {scratch}")
