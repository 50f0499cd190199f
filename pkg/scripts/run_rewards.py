"""Per-condition predator reward summary (N, mean, SD, 95% CI).

Runs the unperturbed Chaser and Spring conditions and prints the reward table.

    python3 scripts/run_table1.py --out-dir results/rewards
"""
import argparse
from pathlib import Path

from ccmpursuit import config, io
from ccmpursuit.harness import reward_stats, run_condition, with_condition


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", type=Path)
    ap.add_argument("--out-dir", type=Path, default=Path("results/rewards"))
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--perturbed", action="store_true", help="keep the pendulum predator")
    args = ap.parse_args()

    cfg = config.load(args.config)
    rows = []
    for name in ("chaser", "spring"):
        run_cfg = with_condition(cfg, name=name, perturbed=args.perturbed)
        trajectories = run_condition(run_cfg.condition, run_cfg, workers=args.workers)
        rows += io.stats_rows(name, reward_stats(trajectories))
    text = io.table_text(io.STATS_HEADER, rows)
    io.atomic_write_text(args.out_dir / "stats.csv", text)
    table = io.stats_table_text(rows)
    io.atomic_write_text(args.out_dir / "reward_table.txt", table)
    print(table, end="")


if __name__ == "__main__":
    main()
