"""Perturbation experiment: CCM from the pendulum-driven predator to its partners.

Simulates the perturbed Chaser and Spring conditions with the default
configuration, writes tidy curve data (one row per condition/pair/channel/L)
and prints the convergence verdicts.

    python3 scripts/run_fig2.py --out-dir results/perturbation
"""
import argparse
import time
from pathlib import Path

from ccmpursuit import config, io
from ccmpursuit.harness import perturbation_analysis, run_condition, with_condition


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", type=Path)
    ap.add_argument("--out-dir", type=Path, default=Path("results/perturbation"))
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--episodes", type=int)
    args = ap.parse_args()

    cfg = config.load(args.config)
    rows = []
    for name in ("chaser", "spring"):
        changes = {"name": name, "perturbed": True}
        if args.episodes:
            changes["n_episodes"] = args.episodes
        run_cfg = with_condition(cfg, **changes)
        t0 = time.perf_counter()
        trajectories = run_condition(run_cfg.condition, run_cfg, workers=args.workers)
        io.write_trajectories(args.out_dir / f"{name}_perturbed.csv", trajectories)
        result = perturbation_analysis(trajectories, cfg.ccm)
        rows += io.curve_rows(name, result)
        for p in result.forward + result.reverse:
            print(f"{name:7s} {p.name}: final rho {p.verdict.final_rho:+.3f}  "
                  f"convergent {p.verdict.convergent}")
        v = result.verdict
        print(f"{name:7s} aggregate: final rho {v.final_rho:+.3f} delta {v.delta_rho:+.3f} "
              f"tau {v.monotonicity:+.2f} convergent {v.convergent} "
              f"({time.perf_counter() - t0:.0f}s)")

    io.atomic_write_text(args.out_dir / "curves.csv", io.table_text(io.CURVE_HEADER, rows))
    io.atomic_write_text(args.out_dir / "report_curves.csv",
                         io.table_text(io.REPORT_HEADER, io.report_rows(rows)))
    print(f"wrote {args.out_dir / 'report_curves.csv'}")


if __name__ == "__main__":
    main()
