from dataclasses import replace

import numpy as np
import pytest
import hypothesis.strategies as st
from hypothesis import given, settings

from ccmpursuit import cli, config, io
from ccmpursuit.config import CcmConfig, ConfigError, Condition, RunConfig
from ccmpursuit.harness import run_condition
from ccmpursuit.strategies import SpringParams

SMALL = RunConfig(condition=Condition("spring", True, 2, 120, 3))


# --- config -----------------------------------------------------------------------

def test_default_file_matches_dataclass_defaults():
    assert config.load() == RunConfig()


def test_config_round_trip():
    cfg = replace(SMALL, spring=SpringParams(7.5, 0.3, 1.25),
                  ccm=CcmConfig(E=4, library_sizes=(60, 120, 240), library_mode="prefix"))
    assert config.loads(config.dumps(cfg)) == cfg
    assert config.dumps(config.loads(config.dumps(cfg))) == config.dumps(cfg)


@settings(max_examples=30)
@given(dt=st.floats(0.01, 0.2), damping=st.floats(0.0, 0.9), seed=st.integers(0, 2**40),
       E=st.integers(1, 6))
def test_config_round_trip_property(dt, damping, seed, E):
    cfg = replace(RunConfig(), world=replace(RunConfig().world, dt=dt, damping=damping),
                  condition=replace(Condition(), seed=seed), ccm=CcmConfig(E=E))
    assert config.loads(config.dumps(cfg)) == cfg


@pytest.mark.parametrize("text", [
    "[world]\ngravity = 3\n",
    "[weather]\ndt = 0.1\n",
    "[world]\ndt = fast\n",
    "[world]\ndt = 0\n",
    "[condition]\nname = maddpg\n",
    "[ccm]\nlibrary_sizes = 100, 50, 200\n",
    "not an ini file",
])
def test_bad_config_rejected(text):
    with pytest.raises(ConfigError):
        config.loads(text)


# --- trajectory files ---------------------------------------------------------------

@pytest.fixture(scope="module")
def small_run():
    return run_condition(SMALL.condition, SMALL)


def test_trajectory_round_trip_bytes(small_run, tmp_path):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    io.write_trajectories(a, small_run)
    back = io.read_trajectories(a)
    io.write_trajectories(b, back)
    assert a.read_bytes() == b.read_bytes()
    for x, y in zip(small_run, back):
        np.testing.assert_array_equal(x.positions, y.positions)
        np.testing.assert_array_equal(x.rewards, y.rewards)
        assert y.label == "spring" and y.condition.name == "scripted"
        assert y.episode_seed == x.episode_seed


def test_trajectory_header_and_rows(small_run):
    text = io.trajectories_to_text(small_run)
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    assert lines[0] == "episode,step,agent_id,role,x,y,vx,vy,reward"
    assert len(lines) == 1 + 2 * 120 * 4
    assert lines[4].split(",")[:4] == ["0", "1", "3", "prey"]


def valid_text(rows=2):
    body = ["episode,step,agent_id,role,x,y,vx,vy,reward"]
    for t in range(rows):
        for a, role in enumerate(["predator", "predator", "prey"]):
            body.append(f"0,{t},{a},{role},0.1,0.2,0.0,0.0,0.0")
    return body


@pytest.mark.parametrize("line, value, match", [
    (3, "0,0,1,predator,nan,0.2,0.0,0.0,0.0", "line 3: non-finite x"),
    (4, "0,0,2,prey,0.1,inf,0.0,0.0,0.0", "line 4: non-finite y"),
    (2, "0,0,0,predator,0.1,0.2,0.0,0.0", "line 2: expected 9 fields"),
    (3, "0,0,1,hunter,0.1,0.2,0.0,0.0,0.0", "line 3: unknown role"),
    (5, "0,0,0,predator,0.1,0.2,0.0,0.0,0.0", "line 5: steps must increase"),
    (4, "0,0,2,predator,0.1,0.2,0.0,0.0,0.0", "line 4: agent 2 must have role"),
])
def test_malformed_rows_name_the_line(line, value, match):
    body = valid_text()
    body[line - 1] = value
    with pytest.raises(io.DataError, match=match):
        io.parse_trajectories("\n".join(body) + "\n")


def test_missing_header_and_empty():
    with pytest.raises(io.DataError, match="header"):
        io.parse_trajectories("0,0,0,predator,0,0,0,0,0\n")
    with pytest.raises(io.DataError):
        io.parse_trajectories("episode,step,agent_id,role,x,y,vx,vy,reward\n")


def test_atomic_write_leaves_no_temp(tmp_path):
    io.atomic_write_text(tmp_path / "out.txt", "hello\n")
    assert [p.name for p in tmp_path.iterdir()] == ["out.txt"]


# --- CLI ----------------------------------------------------------------------------

def write_config(tmp_path, cfg):
    path = tmp_path / "run.ini"
    path.write_text(config.dumps(cfg))
    return path


def test_cli_pipeline(tmp_path, capsys):
    cfg = replace(SMALL, condition=Condition("chaser", True, 2, 400, 1),
                  ccm=CcmConfig(n_subsamples=4, n_library_sizes=5))
    ini = write_config(tmp_path, cfg)
    traj = tmp_path / "chaser.csv"
    assert cli.main(["simulate", "--config", str(ini), "--out", str(traj)]) == 0
    out = tmp_path / "an"
    assert cli.main(["analyze", "--in", str(traj), "--config", str(ini), "--out-dir", str(out)]) == 0
    verdicts = (out / "verdicts.txt").read_text().splitlines()
    assert verdicts[-1].startswith("chaser 0->* aggregate: convergent: ")
    assert len(verdicts) == 5
    curves = io.read_table(out / "curves.csv", io.CURVE_HEADER)
    assert {r[3] for r in curves} == {"x", "y", "mean"}
    rep = tmp_path / "rep"
    rep.mkdir()
    assert cli.main(["report", "--in", str(out), "--out-dir", str(rep)]) == 0
    plot = io.read_table(rep / "report_curves.csv", io.REPORT_HEADER)
    assert plot and all(len(r) == 6 for r in plot)
    table = (rep / "reward_table.txt").read_text().splitlines()
    assert table[0].split() == ["Condition", "N", "Mean", "Reward", "SD", "95%", "CI"]
    assert table[1].split()[:2] == ["chaser", "2"]


def test_cli_simulate_is_deterministic(tmp_path):
    args = ["simulate", "--condition", "spring", "--episodes", "2", "--steps", "60", "--seed", "9"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.main(args + ["--out", str(a)]) == 0
    assert cli.main(args + ["--out", str(b), "--workers", "2"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_cli_malformed_input_writes_nothing(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("\n".join(valid_text()[:3] + ["0,0,2,prey,nan,0,0,0,0"]) + "\n")
    out = tmp_path / "out"
    assert cli.main(["analyze", "--in", str(bad), "--out-dir", str(out)]) == 2
    assert not out.exists()
    assert cli.main(["analyze", "--in", str(tmp_path / "missing.csv"), "--out-dir", str(out)]) == 2
    assert not out.exists()


def test_cli_usage_errors(tmp_path):
    with pytest.raises(SystemExit) as e:
        cli.main(["simulate", "--condition", "maddpg"])
    assert e.value.code == 1
    with pytest.raises(SystemExit) as e:
        cli.main([])
    assert e.value.code == 1
    bad_ini = tmp_path / "bad.ini"
    bad_ini.write_text("[world]\nwarp = 9\n")
    assert cli.main(["simulate", "--config", str(bad_ini), "--out", str(tmp_path / "t.csv")]) == 1
    assert cli.main(["simulate", "--steps", "0", "--out", str(tmp_path / "t.csv")]) == 1
    assert not (tmp_path / "t.csv").exists()


def test_cli_selftest_passes(capsys):
    assert cli.main(["selftest"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") >= 4 and "FAIL" not in out
