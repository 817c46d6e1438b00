"""Run the three variants on the ten multimodal functions at 10/20/30-D with a
20·D budget and print median final gaps per function.

    python3 scripts/reproduce_multimodal.py --out results/multimodal --workers 8
"""
import argparse
from collections import defaultdict

from pcaes import bench
from pcaes.bench import ExperimentConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default="results/multimodal")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--reps", type=int, default=30)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    cfg = ExperimentConfig(reps=args.reps, base_seed=args.seed, workers=args.workers)
    traces = bench.run_experiment(cfg)
    bench.write_report(traces, bench.compute_stats(traces), args.out, config=cfg)

    cells = defaultdict(list)
    for t in traces:
        cells[(t.function_id, t.dim, t.variant)].append(t.final_gap)
    variants = [v.name for v in cfg.variants]
    print(f"{'function':<22}{'dim':>4}" + "".join(f"{v:>14}" for v in variants))
    for fid in cfg.function_ids:
        for d in cfg.dims:
            meds = [bench.quantile(cells[(fid, d, v)], 0.5) for v in variants]
            print(f"{fid:<22}{d:>4}" + "".join(f"{m:>14.4g}" for m in meds))
    print(f"report written to {args.out}")


if __name__ == "__main__":
    main()
