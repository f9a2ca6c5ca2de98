"""Check the second-order error bound and polynomial properties on random instances."""

import argparse

import numpy as np

from qspert import chebpoly as cp
from qspert import sim


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--instances", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)

    ratios = []
    for i in range(args.instances):
        inst = sim.random_instance(3 + i % 4, rng)
        out = sim.simulate(inst["h"], inst["v"], {
            "p": float(rng.uniform(0.2, 0.9)), "seed": i, "delta0": inst["delta0"],
            "epsilon_filter": 1e-3, "epsilon_ptb": 10 ** rng.uniform(-5, -2)})
        ratios.append(out["error"] / out["bound"])
    ratios = np.array(ratios)
    print(f"bound: {np.sum(ratios <= 1)}/{ratios.size} hold, max error/bound {ratios.max():.3f}")

    bad = 0
    for _ in range(args.instances):
        w = rng.uniform(0.05, 0.6)
        s = cp.build_ptb(10 ** rng.uniform(-5, -2), w, rng.uniform(0.02, 1.0) * w / 2)
        bad += not cp.check_properties(s)["ok"]
    print(f"ptb polynomials: {args.instances - bad}/{args.instances} satisfy all properties")


if __name__ == "__main__":
    main()
