"""1D ripening with the adaptive controller over tolerances and error estimators.

    python3 scripts/adaptive_sweep.py [--tols 1e-3,1e-4,1e-5] [--estimators bdf2,sdc2,richardson]
"""
import argparse
import dataclasses

from molt.cli import build_config, run_evolve


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--tols", default="1e-3,1e-4,1e-5")
    ap.add_argument("--estimators", default="bdf2,sdc2,richardson")
    ap.add_argument("--M", type=int, default=6)
    args = ap.parse_args()
    base = build_config("ripening1d_adaptive", overrides={"M": args.M})
    print(f"{'estimator':>10} {'tol':>8} {'T_r':>10} {'accepts':>8} {'rejects':>8} {'sweeps':>8} {'wall':>7}")
    for est in args.estimators.split(","):
        for tol in (float(x) for x in args.tols.split(",")):
            cfg = dataclasses.replace(base, estimator=est, lte_tol=tol).validate()
            r = run_evolve(cfg)
            print(f"{est:>10} {tol:8.0e} {r.ripening_time or float('nan'):10.2f} {r.accepts:8d} "
                  f"{r.rejects:8d} {r.iterations:8d} {r.wall_time:6.0f}s", flush=True)


if __name__ == "__main__":
    main()
