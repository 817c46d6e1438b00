"""Print ERT loss-ratio quantiles from a report directory.

With a long budget (e.g. ``pcaes run --budget-mult 10000``) every row of the
#FEs/D grid is populated; at 20·D only the first rows carry data.

    python3 scripts/loss_ratio_table.py results/multimodal
"""
import csv
import sys
from pathlib import Path


def main(path):
    rows = list(csv.DictReader(open(Path(path) / "loss_ratios.csv", newline="")))
    cols = ["best", "q10", "q25", "median", "q75", "q90"]
    print(f"{'variant':<12}{'dim':>4}{'FEs/D':>9}" + "".join(f"{c:>10}" for c in cols))
    for r in rows:
        vals = "".join(f"{float(r[c]):>10.3g}" for c in cols)
        print(f"{r['variant']:<12}{r['dim']:>4}{r['fes_per_dim']:>9}{vals}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "results")
