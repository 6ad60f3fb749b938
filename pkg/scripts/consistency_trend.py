"""Mean AP of ML nomination as n grows with m = ceil(n^0.6) seeds (two blocks)."""
import argparse
import math

from vertexnom.config import ExperimentConfig
from vertexnom.evaluation import run_experiment

LAM = [[0.7, 0.3], [0.3, 0.6]]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, nargs="+", default=[100, 200, 400])
    ap.add_argument("--trials", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    for n in args.n:
        m = math.ceil(n ** 0.6)
        cfg = ExperimentConfig(block_sizes=[n // 2, n - n // 2], lam=LAM, m=m, trials=args.trials,
                               schemes=["ml"], master_seed=args.seed, name=f"trend-{n}")
        s = run_experiment(cfg).get("ml")
        print(f"n={n:5d} m={m:4d}  AP {s.mean_ap:.4f} +/- {s.se_ap:.4f}  ARI {s.mean_ari:.3f}")


if __name__ == "__main__":
    main()
