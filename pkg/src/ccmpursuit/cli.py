"""Command line: ``ccmpursuit {simulate,analyze,report,selftest}``.

Exit codes: 0 success, 1 usage or config error, 2 data error, 3 selftest failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import config as config_mod
from . import io, selftest
from .ccm import CCMError
from .config import ConfigError
from .harness import perturbation_analysis, reward_stats, run_condition

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_SELFTEST = 0, 1, 2, 3

log = logging.getLogger("ccmpursuit")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _bool(text):
    v = text.lower()
    if v in ("true", "yes", "1"):
        return True
    if v in ("false", "no", "0"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {text!r}")


def build_parser():
    p = _Parser(prog="ccmpursuit", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="run episodes and write a trajectory file")
    s.add_argument("--config", type=Path)
    s.add_argument("--condition", choices=["chaser", "spring"])
    s.add_argument("--perturbed", type=_bool)
    s.add_argument("--episodes", type=int)
    s.add_argument("--steps", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--workers", type=int, default=1, help="parallel episode workers")
    s.add_argument("--out", type=Path)

    a = sub.add_parser("analyze", help="CCM curves, reward stats and verdicts for a trajectory file")
    a.add_argument("--in", dest="inp", type=Path, required=True)
    a.add_argument("--config", type=Path)
    a.add_argument("--source-agent", type=int, default=0)
    a.add_argument("--label", help="condition label (defaults to the file's metadata)")
    a.add_argument("--no-reverse", action="store_true", help="skip the reverse direction")
    a.add_argument("--out-dir", type=Path)

    r = sub.add_parser("report", help="merge analyze outputs into plot data and a reward table")
    r.add_argument("--in", dest="inp", type=Path, nargs="+", required=True,
                   help="analyze output directories or curves.csv/stats.csv files")
    r.add_argument("--out-dir", type=Path, default=Path("."))

    sub.add_parser("selftest", help="run the built-in oracles")
    return p


def _load_config(path):
    if path is None:
        return config_mod.RunConfig().validate()
    try:
        return config_mod.load(path)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None


def cmd_simulate(args):
    cfg = _load_config(args.config)
    overrides = {k: v for k, v in (("name", args.condition), ("perturbed", args.perturbed),
                                   ("n_episodes", args.episodes), ("steps", args.steps),
                                   ("seed", args.seed)) if v is not None}
    cond = replace(cfg.condition, **overrides)
    if cond.name == "scripted":
        raise UsageError("simulate needs condition chaser or spring")
    try:
        cond.validate()
    except ConfigError as e:
        raise UsageError(str(e)) from None
    out = args.out or Path(cfg.output.trajectory)
    trajectories = run_condition(cond, cfg, workers=args.workers)
    io.write_trajectories(out, trajectories)
    for tr in trajectories:
        print(f"episode {tr.episode}: predator reward {tr.total_rewards[0]:g}, "
              f"contacts {tr.contact_count}")
    print(f"wrote {len(trajectories)} episodes x {cond.steps} steps to {out}")
    return EXIT_OK


def cmd_analyze(args):
    cfg = _load_config(args.config)
    trajectories = io.read_trajectories(args.inp)
    label = args.label or trajectories[0].label or "scripted"
    n_agents = trajectories[0].n_agents
    if not 0 <= args.source_agent < n_agents - 1:
        raise UsageError(f"--source-agent must name a predator (0..{n_agents - 2})")
    result = perturbation_analysis(trajectories, cfg.ccm, source=args.source_agent,
                                   reverse=not args.no_reverse)
    curves = io.table_text(io.CURVE_HEADER, io.curve_rows(label, result))
    stats_text = None
    if len(trajectories) >= 2:
        stats_text = io.table_text(io.STATS_HEADER, io.stats_rows(label, reward_stats(trajectories)))
    verdict_lines = []
    for p in result.forward + result.reverse:
        verdict_lines.append(_verdict_line(label, p.name, p.verdict))
    src = args.source_agent
    verdict_lines.append(_verdict_line(label, f"{src}->* aggregate", result.verdict))

    out_dir = args.out_dir or Path(cfg.output.out_dir)
    io.atomic_write_text(out_dir / "curves.csv", curves)
    if stats_text is not None:
        io.atomic_write_text(out_dir / "stats.csv", stats_text)
    io.atomic_write_text(out_dir / "verdicts.txt", "\n".join(verdict_lines) + "\n")
    print("\n".join(verdict_lines))
    return EXIT_OK


def _verdict_line(label, pair, v):
    return (f"{label} {pair}: convergent: {'true' if v.convergent else 'false'} "
            f"final_rho={v.final_rho:.4f} delta_rho={v.delta_rho:.4f} "
            f"monotonicity={v.monotonicity:.4f}" + (" flagged" if v.flagged else ""))


def cmd_report(args):
    curve_files, stats_files = [], []
    for path in args.inp:
        if path.is_dir():
            curve_files.append(path / "curves.csv")
            if (path / "stats.csv").exists():
                stats_files.append(path / "stats.csv")
        elif path.name.startswith("stats"):
            stats_files.append(path)
        else:
            curve_files.append(path)
    curve_rows, stat_rows = [], []
    for f in curve_files:
        curve_rows += io.read_table(f, io.CURVE_HEADER)
    for f in stats_files:
        stat_rows += io.read_table(f, io.STATS_HEADER)
    if not curve_rows and not stat_rows:
        raise io.DataError("no curve or stats rows found")
    plot = io.table_text(io.REPORT_HEADER, io.report_rows(curve_rows))
    table = io.stats_table_text(stat_rows)
    io.atomic_write_text(args.out_dir / "report_curves.csv", plot)
    io.atomic_write_text(args.out_dir / "reward_table.txt", table)
    print(table, end="")
    return EXIT_OK


def cmd_selftest(args):
    return EXIT_OK if selftest.run() else EXIT_SELFTEST


COMMANDS = {"simulate": cmd_simulate, "analyze": cmd_analyze, "report": cmd_report,
            "selftest": cmd_selftest}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (io.DataError, CCMError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
