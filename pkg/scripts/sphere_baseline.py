"""Plain CMA-ES on the sphere: success rate and evaluations to reach 1e-8."""
import argparse

import numpy as np

from pcaes.es import EsParams, run
from pcaes.numerics import RngStream
from pcaes.objectives import make_instance


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dim", type=int, default=10)
    ap.add_argument("--budget", type=int, default=10_000)
    ap.add_argument("--reps", type=int, default=30)
    args = ap.parse_args()

    hits = []
    for rep in range(args.reps):
        inst = make_instance("sphere", args.dim, rep)
        _, trace = run(inst, EsParams.default(args.dim, args.budget), RngStream(rep))
        if trace.final_gap <= 1e-8:
            hits.append(trace.evals_used)
    print(f"solved {len(hits)}/{args.reps}")
    if hits:
        print(f"evaluations to 1e-8: median {np.median(hits):.0f}, min {min(hits)}, max {max(hits)}")


if __name__ == "__main__":
    main()
