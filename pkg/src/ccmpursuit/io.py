"""File formats: trajectory CSV, CCM curve tables, reward statistics.

Trajectory files are UTF-8 CSV with LF line endings.  Optional ``# key=value``
preamble lines carry run metadata; the header row is always

    episode,step,agent_id,role,x,y,vx,vy,reward

and floats are written with ``repr`` (shortest round-trip form), so values
survive an export/ingest cycle bit for bit.
"""
from __future__ import annotations

import csv
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .config import Condition
from .harness import ConditionStats, Trajectory

TRAJECTORY_HEADER = ["episode", "step", "agent_id", "role", "x", "y", "vx", "vy", "reward"]
CURVE_HEADER = ["condition", "pair", "direction", "channel", "episode", "library_size",
                "rho_mean", "rho_sd", "n_subsamples"]
REPORT_HEADER = ["condition", "pair", "channel", "library_size", "rho_mean", "rho_sd"]
STATS_HEADER = ["condition", "N", "Mean Reward", "SD", "95% CI", "Mean ln(Reward)"]
ROLES = ("predator", "prey")


class DataError(ValueError):
    """Malformed input data; messages carry the offending line number."""


def fmt(x):
    return repr(float(x))


def atomic_write_text(path, text):
    """Write via a temp file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def trajectories_to_text(trajectories):
    lines = []
    if trajectories:
        c = trajectories[0].condition
        lines.append(f"# label={trajectories[0].label or c.name}")
        lines.append(f"# perturbed={'true' if c.perturbed else 'false'}")
        lines.append(f"# seed={c.seed}")
        lines.append("# episode_seeds=" + " ".join(str(t.episode_seed) for t in trajectories))
    lines.append(",".join(TRAJECTORY_HEADER))
    for tr in trajectories:
        roles = tr.roles()
        ep = str(tr.episode)
        for t, step in enumerate(tr.step_numbers()):
            step = str(int(step))
            for a in range(tr.n_agents):
                x, y = tr.positions[t, a]
                vx, vy = tr.velocities[t, a]
                lines.append(",".join((ep, step, str(a), roles[a], fmt(x), fmt(y), fmt(vx),
                                       fmt(vy), fmt(tr.rewards[t, a]))))
    return "\n".join(lines) + "\n"


def write_trajectories(path, trajectories):
    atomic_write_text(path, trajectories_to_text(trajectories))


def _float(text, lineno, name):
    try:
        v = float(text)
    except ValueError:
        raise DataError(f"line {lineno}: {name} is not a number: {text!r}") from None
    if not math.isfinite(v):
        raise DataError(f"line {lineno}: non-finite {name}: {text!r}")
    return v


def _int(text, lineno, name):
    try:
        return int(text)
    except ValueError:
        raise DataError(f"line {lineno}: {name} is not an integer: {text!r}") from None


def read_trajectories(path):
    """Parse and validate a trajectory file; every trajectory is marked scripted."""
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise DataError(f"cannot read {path}: {e}") from None
    return parse_trajectories(raw)


def parse_trajectories(raw):
    meta = {}
    header_seen = False
    episodes = {}  # episode -> list of rows
    order = []
    for lineno, line in enumerate(raw.split("\n"), start=1):
        if not line:
            continue
        if line.startswith("#") and not header_seen:
            key, _, value = line[1:].strip().partition("=")
            meta[key.strip()] = value.strip()
            continue
        row = next(csv.reader([line]))
        if not header_seen:
            if row != TRAJECTORY_HEADER:
                raise DataError(f"line {lineno}: expected header {','.join(TRAJECTORY_HEADER)}")
            header_seen = True
            continue
        if len(row) != len(TRAJECTORY_HEADER):
            raise DataError(f"line {lineno}: expected {len(TRAJECTORY_HEADER)} fields, got {len(row)}")
        ep = _int(row[0], lineno, "episode")
        step = _int(row[1], lineno, "step")
        agent = _int(row[2], lineno, "agent_id")
        role = row[3]
        if role not in ROLES:
            raise DataError(f"line {lineno}: unknown role {role!r}")
        vals = [_float(v, lineno, n) for v, n in zip(row[4:], TRAJECTORY_HEADER[4:])]
        if ep not in episodes:
            episodes[ep] = []
            order.append(ep)
        episodes[ep].append((lineno, step, agent, role, vals))
    if not header_seen:
        raise DataError("missing header row")
    if not episodes:
        raise DataError("no trajectory rows")

    label = meta.get("label", "scripted")
    perturbed = meta.get("perturbed", "false") == "true"
    try:
        seed = int(meta.get("seed", "0"))
        ep_seeds = [int(s) for s in meta.get("episode_seeds", "").split()]
    except ValueError:
        raise DataError("malformed metadata preamble") from None

    out = []
    n_agents_all = None
    for k, ep in enumerate(order):
        rows = episodes[ep]
        agents = sorted({r[2] for r in rows})
        n_agents = len(agents)
        if agents != list(range(n_agents)):
            raise DataError(f"line {rows[0][0]}: episode {ep} agent ids must be 0..n-1, got {agents}")
        if n_agents_all is None:
            n_agents_all = n_agents
        elif n_agents != n_agents_all:
            raise DataError(f"line {rows[0][0]}: episode {ep} has {n_agents} agents, "
                            f"expected {n_agents_all}")
        if len(rows) % n_agents:
            raise DataError(f"line {rows[-1][0]}: episode {ep} has an incomplete final step")
        steps = len(rows) // n_agents
        pos = np.empty((steps, n_agents, 2))
        vel = np.empty((steps, n_agents, 2))
        rew = np.empty((steps, n_agents))
        prev_step = None
        step_ids = np.empty(steps, dtype=np.int64)
        for i, (lineno, step, agent, role, vals) in enumerate(rows):
            t, a = divmod(i, n_agents)
            if a != agent:
                raise DataError(f"line {lineno}: expected agent {a}, got {agent}")
            if a == 0:
                if prev_step is not None and step <= prev_step:
                    raise DataError(f"line {lineno}: steps must increase, got {step} after {prev_step}")
                prev_step = step
                step_ids[t] = step
            elif step != prev_step:
                raise DataError(f"line {lineno}: step {step} does not match step {prev_step} of agent 0")
            expected_role = "prey" if a == n_agents - 1 else "predator"
            if role != expected_role:
                raise DataError(f"line {lineno}: agent {a} must have role {expected_role!r}")
            pos[t, a] = vals[0], vals[1]
            vel[t, a] = vals[2], vals[3]
            rew[t, a] = vals[4]
        contacts = int(np.count_nonzero(rew[:, -1] < 0))
        cond = Condition("scripted", perturbed, len(order), steps, seed)
        ep_seed = ep_seeds[k] if k < len(ep_seeds) else 0
        out.append(Trajectory(cond, ep_seed, pos, vel, rew, contacts, label=label, episode=ep,
                              step_ids=step_ids))
    return out


def ingest_trajectories(path):
    return read_trajectories(path)


# --- CCM curves and statistics -------------------------------------------------------

def curve_rows(condition, result):
    """Long-format rows for every per-episode, per-pair and pooled curve."""
    rows = []

    def emit(pair, direction, episode, curve):
        for ch, c in list(curve.channels.items()) + [("mean", curve)]:
            for L, m, s in zip(c.library_sizes, c.rho_mean, c.rho_sd):
                rows.append([condition, pair, direction, ch, str(episode), str(int(L)), fmt(m),
                             fmt(s), str(c.n_subsamples)])

    for direction, pairs in (("forward", result.forward), ("reverse", result.reverse)):
        for p in pairs:
            for ep, c in enumerate(p.episodes):
                emit(p.name, direction, ep, c)
            emit(p.name, direction, "all", p.aggregate)
    src = result.forward[0].source if result.forward else 0
    emit(f"{src}->*", "forward", "all", result.aggregate)
    return rows


def table_text(header, rows):
    return "\n".join([",".join(header)] + [",".join(r) for r in rows]) + "\n"


def stats_rows(condition, st: ConditionStats):
    return [[condition, str(st.n), fmt(st.mean_reward), fmt(st.sd), fmt(st.ci95_halfwidth),
             fmt(st.mean_log_reward)]]


def read_table(path, header):
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").split("\n")
    except (OSError, UnicodeDecodeError) as e:
        raise DataError(f"cannot read {path}: {e}") from None
    rows = list(csv.reader([ln for ln in lines if ln]))
    if not rows or rows[0] != header:
        raise DataError(f"{path}: line 1: expected header {','.join(header)}")
    for i, r in enumerate(rows[1:], start=2):
        if len(r) != len(header):
            raise DataError(f"{path}: line {i}: expected {len(header)} fields, got {len(r)}")
    return rows[1:]


def report_rows(curve_table_rows):
    """Aggregate rows (episode == all) in the tidy plotting layout."""
    out = []
    for cond, pair, _direction, ch, ep, L, m, s, _n in curve_table_rows:
        if ep == "all":
            out.append([cond, pair, ch, L, m, s])
    return out


def stats_table_text(stats_table_rows):
    """Fixed-width text table with the reward-summary columns."""
    cols = ["Condition", "N", "Mean Reward", "SD", "95% CI"]
    body = []
    for cond, n, mean, sd, ci, _log in stats_table_rows:
        body.append([cond, n, f"{float(mean):.2f}", f"{float(sd):.2f}", f"{float(ci):.2f}"])
    widths = [max(len(r[i]) for r in [cols] + body) for i in range(len(cols))]
    lines = ["  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths)))
             for r in [cols] + body]
    return "\n".join(lines) + "\n"
