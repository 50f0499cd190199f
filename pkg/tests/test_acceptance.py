"""The ten acceptance criteria, at their stated tolerances.

Each test records a PASS/FAIL line that is printed in the terminal summary.
"""
import math
import time

import numpy as np

from ccmpursuit import cli, io
from ccmpursuit.ccm import (EmbeddingSpec, ShadowManifold, ccm_curve, convergence_score,
                            default_library_sizes, find_neighbors)
from ccmpursuit.config import RunConfig
from ccmpursuit.harness import (MODIFIED, perturbation_analysis, reward_stats, run_condition,
                                run_episode, self_ccm, with_condition)
from ccmpursuit.seeding import episode_seed
from ccmpursuit.selftest import coupled_logistic
from ccmpursuit.strategies import PendulumParams, PendulumState, pendulum_energy, pendulum_step

CFG = RunConfig()
_RUNS = {}


def default_runs(name):
    """Default-config perturbed runs (10 episodes x 2000 steps), simulated once per session."""
    if name not in _RUNS:
        t0 = time.perf_counter()
        cond = with_condition(CFG, name=name, perturbed=True).condition
        _RUNS[name] = (run_condition(cond, CFG), time.perf_counter() - t0)
    return _RUNS[name]


def test_01_ccm_directional_oracle(criterion):
    t0 = time.perf_counter()
    spec = EmbeddingSpec(E=2, tau=1, theiler=0)
    results = []
    for seed in range(5):
        x, y = coupled_logistic(1000, seed, burn_in=100)
        sizes = default_library_sizes(1000 - spec.span)
        fwd = ccm_curve(y, x, spec, sizes, 20, seed)  # reader y: "x drives y"
        rev = ccm_curve(x, y, spec, sizes, 20, seed)
        ok = convergence_score(fwd).convergent and fwd.final_rho - rev.final_rho >= 0.1
        results.append((ok, fwd.final_rho, rev.final_rho))
    elapsed = time.perf_counter() - t0
    ok = all(r[0] for r in results) and elapsed < 30
    gaps = ", ".join(f"{f:.3f}/{r:.3f}" for _, f, r in results)
    criterion(1, "CCM directional oracle", ok,
              f"forward/reverse final rho per seed {gaps}; {elapsed:.1f}s")
    assert ok


def test_02_perturbation_ordering(criterion):
    t0 = time.perf_counter()
    verdicts = {}
    sim_time = 0.0
    for name in ("chaser", "spring"):
        trs, t_sim = default_runs(name)
        sim_time += t_sim
        verdicts[name] = perturbation_analysis(trs, CFG.ccm, reverse=False).verdict
    elapsed = time.perf_counter() - t0 + sim_time
    sp, ch = verdicts["spring"], verdicts["chaser"]
    ok = (sp.convergent and not ch.convergent and ch.final_rho < 0.1
          and sp.final_rho - ch.final_rho >= 0.15 and elapsed < 300)
    criterion(2, "perturbation CCM ordering", ok,
              f"spring convergent={sp.convergent} rho={sp.final_rho:.3f}; "
              f"chaser convergent={ch.convergent} rho={ch.final_rho:.3f}; {elapsed:.0f}s")
    assert ok


def test_03_self_cross_map(criterion):
    trs, _ = default_runs("spring")
    rhos = [self_ccm(trs[0], a, CFG.ccm).final_rho for a in range(CFG.world.n_predators)]
    ok = min(rhos) >= 0.99
    criterion(3, "self cross-map sanity", ok, "final rho " + ", ".join(f"{r:.4f}" for r in rhos))
    assert ok


def zero_crossing_times(values, dt):
    i = np.nonzero((values[:-1] < 0) & (values[1:] >= 0))[0]
    a, b = values[i], values[i + 1]
    return (i + (-a) / (b - a)) * dt


def test_04_pendulum_physics(criterion):
    p = PendulumParams()
    dt = 0.01
    s = PendulumState(math.pi / 2, math.pi / 2)
    e0 = pendulum_energy(s, p)
    worst = 0.0
    for _ in range(2000):
        s = pendulum_step(s, p, dt)
        worst = max(worst, abs(pendulum_energy(s, p) - e0))
    # E0 is zero to rounding here, so relative drift uses the potential-energy scale
    scale = max(abs(e0), (p.m1 + p.m2) * p.g * p.l1 + p.m2 * p.g * p.l2)
    drift = worst / scale

    errors = []
    for ratio, plus in ((math.sqrt(2), False), (-math.sqrt(2), True)):
        omega = math.sqrt((2 + math.sqrt(2) if plus else 2 - math.sqrt(2)) * p.g / p.l1)
        n = int(51 * 2 * math.pi / omega / dt)
        s = PendulumState(1e-3, ratio * 1e-3)
        th = np.empty(n)
        for i in range(n):
            s = pendulum_step(s, p, dt)
            th[i] = s.theta1
        zc = zero_crossing_times(th, dt)
        measured = 2 * math.pi / ((zc[50] - zc[0]) / 50)
        errors.append(abs(measured / omega - 1))
    ok_energy = drift < 1e-6
    ok_modes = max(errors) < 0.01
    criterion(4, "pendulum physics", ok_energy and ok_modes,
              f"relative energy drift {drift:.2e} (limit 1e-06, |dE| max {worst:.2e}); "
              f"normal-mode errors {errors[0]:.2e}, {errors[1]:.2e} (limit 1e-02)")
    assert ok_modes
    assert ok_energy


def exhaustive_scan(points, query, k, theiler):
    d = np.sqrt(((points - points[query]) ** 2).sum(axis=1))
    cand = [(float(d[p]), p) for p in range(len(points))
            if p != query and abs(p - query) > theiler]
    cand.sort()
    return [(p, dist) for dist, p in cand[:k]]


def test_05_knn_equivalence(criterion):
    rng = np.random.default_rng(2024)
    checked = mismatches = 0
    for _ in range(100):
        n = int(rng.integers(10, 51))
        E = int(rng.integers(1, 4))
        pts = rng.normal(size=(n, E)).round(1)  # coarse grid forces distance ties
        m = ShadowManifold(pts, np.arange(n))
        for theiler in (0, 2):
            for k in range(1, 6):
                for q in range(n):
                    checked += 1
                    if find_neighbors(m, q, k, theiler) != exhaustive_scan(pts, q, k, theiler):
                        mismatches += 1
    ok = mismatches == 0
    criterion(5, "kNN oracle equivalence", ok, f"{checked} queries, {mismatches} mismatches")
    assert ok


def test_06_statistics_oracle(criterion):
    st = reward_stats([np.array([v, v, v, -v]) for v in (1.0, 2.0, 3.0)])
    # closed-form 97.5% t quantile for 2 degrees of freedom: a*sqrt(2/(1-a^2)), a = 0.95
    t_exact = 0.95 * math.sqrt(2 / (1 - 0.95 ** 2))
    ok = (st.mean_reward == 2.0 and st.sd == 1.0
          and abs(st.ci95_halfwidth - t_exact / math.sqrt(3)) <= 1e-9
          and round(st.ci95_halfwidth, 4) == 2.4841)
    criterion(6, "statistics oracle", ok,
              f"mean {st.mean_reward}, sd {st.sd}, ci95 {st.ci95_halfwidth:.12f}")
    assert ok


def test_07_cli_determinism(tmp_path, criterion):
    files = []
    for run, workers in enumerate(("1", "1", "2")):
        out = tmp_path / f"run{run}.csv"
        assert cli.main(["simulate", "--condition", "spring", "--workers", workers,
                         "--out", str(out)]) == 0
        files.append(out.read_bytes())
    ok = files[0] == files[1] == files[2]
    criterion(7, "CLI determinism", ok,
              f"3 runs (workers 1, 1, 2), {len(files[0])} bytes each, identical={ok}")
    assert ok


def test_08_exogenous_driver(criterion):
    checked = 0
    ok = True
    for name in ("chaser", "spring"):
        cond = with_condition(CFG, name=name, perturbed=True, steps=2000).condition
        for i in range(3):
            es = episode_seed(cond.seed, i)
            base = run_episode(cond, es, CFG)
            for world_seed in (1, 2):
                other = run_episode(cond, es, CFG, world_seed=world_seed)
                ok &= np.array_equal(base.positions[:, MODIFIED], other.positions[:, MODIFIED])
                ok &= np.array_equal(base.velocities[:, MODIFIED], other.velocities[:, MODIFIED])
                ok &= not np.array_equal(base.positions[:, 1:], other.positions[:, 1:])
                checked += 1
    criterion(8, "exogenous driver", ok, f"{checked} seed variations, predator 0 bit-identical={ok}")
    assert ok


def test_09_shared_rewards(criterion):
    detail = []
    ok = True
    for name in ("chaser", "spring"):
        for perturbed in (True, False):
            if perturbed:
                trs, _ = default_runs(name)
            else:
                trs = run_condition(with_condition(CFG, name=name, perturbed=False).condition, CFG)
            n_equal = sum(1 for tr in trs if len(set(tr.total_rewards[:-1].tolist())) == 1)
            contacts = sum(tr.contact_count for tr in trs)
            ok &= n_equal == len(trs) == 10
            detail.append(f"{name}{'+pendulum' if perturbed else ''} {n_equal}/10 "
                          f"({contacts} contacts)")
    criterion(9, "shared-reward equality", ok, "; ".join(detail))
    assert ok


def test_10_round_trip(tmp_path, criterion):
    trs, _ = default_runs("chaser")
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    io.write_trajectories(a, trs)
    io.write_trajectories(b, io.read_trajectories(a))
    ok = a.read_bytes() == b.read_bytes()
    criterion(10, "round-trip", ok, f"{a.stat().st_size} bytes, identical={ok}")
    assert ok
