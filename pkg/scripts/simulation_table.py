"""Monte-Carlo AP/ARI table for the small and medium simulation settings.

    python3 scripts/simulation_table.py small
    python3 scripts/simulation_table.py medium --trials 200 --modes known estimated --out out/medium
"""
import argparse

from vertexnom.cli import write_report
from vertexnom.config import preset
from vertexnom.evaluation import run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("setting", choices=["small", "medium"])
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--modes", nargs="+", default=["known"], choices=["known", "estimated"])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=None)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    cfg = preset(args.setting, trials=args.trials, param_modes=args.modes, master_seed=args.seed)
    rep = run_experiment(cfg, workers=args.workers)
    m = cfg.sweep()[0]
    print(f"{args.setting}: {cfg.trials} trials, m={m}, chance AP {rep.chance[m]:.3f}, "
          f"{rep.wall_clock:.1f}s")
    print(f"{'scheme':8s} {'params':10s} {'AP':>7s} {'se':>6s} {'ARI':>7s} {'se':>6s}")
    for s in rep.summaries:
        print(f"{s.scheme:8s} {s.param_mode:10s} {s.mean_ap:7.3f} {s.se_ap:6.3f} "
              f"{s.mean_ari:7.3f} {s.se_ari:6.3f}")
    if args.out:
        write_report(rep, args.out)


if __name__ == "__main__":
    main()
