"""Sweep the sample budget for low-degree learning of a planted parity.

Writes a results CSV plus summary JSON under the chosen output directory and
prints the mean exact loss per budget, next to the a-priori error guarantee.
Run from the repository root:

    python3 scripts/sweep_sample_complexity.py --out /tmp/qfl_sweep
"""

from __future__ import annotations

import argparse
import json
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(REPO / "src"))

from qfl.harness import run_config  # noqa: E402

CONFIG_TEMPLATE = """\
source = {source}
algorithm = qld
k = 2
classical_only = true
n = {budgets}
delta = 0.05
seeds = {seeds}
n_test = 0
out = sweep
"""


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default=None, help="output directory (default: temp dir)")
    parser.add_argument("--seeds", type=int, default=10, help="number of seeds per budget")
    parser.add_argument(
        "--budgets",
        default="500,1000,2000,5000,10000,20000,50000",
        help="comma list of sample budgets",
    )
    args = parser.parse_args()

    out_dir = Path(args.out) if args.out else Path(tempfile.mkdtemp(prefix="qfl_sweep_"))
    out_dir.mkdir(parents=True, exist_ok=True)
    config_path = out_dir / "sweep.cfg"
    config_path.write_text(
        CONFIG_TEMPLATE.format(
            source=(REPO / "configs" / "parity_d4.src").resolve(),
            budgets=args.budgets,
            seeds=", ".join(str(s) for s in range(1, args.seeds + 1)),
        ),
        encoding="utf-8",
    )
    csv_path, json_path = run_config(config_path, out_dir=out_dir)
    summary = json.loads(json_path.read_text())
    print(f"results: {csv_path}")
    print(f"{'n':>8}  {'mean exact loss':>16}  {'mean 5*beta_meas':>16}  {'bound met':>9}")
    for point in summary["points"]:
        n = point["params"]["n"]
        loss = point["exact_loss"]["mean"]
        beta = point["beta_measured"]["mean"]
        frac = point["bound_fraction_met"]
        print(f"{n:>8}  {loss:>16.5f}  {5 * beta:>16.5f}  {frac:>9.2f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
