"""Built-in oracles run by ``ccmpursuit selftest``."""
from __future__ import annotations

import math
import time

import numpy as np

from .ccm import (EmbeddingSpec, ShadowManifold, ccm_curve, convergence_score,
                  default_library_sizes, find_neighbors)
from .harness import stats_from_totals
from .strategies import PendulumParams, PendulumState, pendulum_energy, pendulum_step


def coupled_logistic(n, seed, burn_in=100, rx=3.8, ry=3.5, bxy=0.02, byx=0.1):
    """x' = x(rx - rx x - bxy y), y' = y(ry - ry y - byx x); x drives y strongly."""
    rng = np.random.default_rng(seed)
    x, y = rng.uniform(0.2, 0.4, size=2)
    xs = np.empty(n)
    ys = np.empty(n)
    for t in range(n + burn_in):
        x, y = x * (rx - rx * x - bxy * y), y * (ry - ry * y - byx * x)
        if t >= burn_in:
            xs[t - burn_in] = x
            ys[t - burn_in] = y
    return xs, ys


def logistic_direction_check(seed, n=1000, n_subsamples=20):
    """(forward curve, reverse curve) for the coupled logistic pair."""
    x, y = coupled_logistic(n, seed)
    spec = EmbeddingSpec(E=2, tau=1, theiler=0)
    sizes = default_library_sizes(n - spec.span)
    forward = ccm_curve(y, x, spec, sizes, n_subsamples, seed)  # reader y recovers x
    reverse = ccm_curve(x, y, spec, sizes, n_subsamples, seed)
    return forward, reverse


def energy_scale(params):
    return (params.m1 + params.m2) * params.g * params.l1 + params.m2 * params.g * params.l2


def energy_drift(state, params, dt, steps):
    """Max |E(t) - E(0)| over the run, relative to max(|E(0)|, potential-energy scale)."""
    e0 = pendulum_energy(state, params)
    worst = 0.0
    for _ in range(steps):
        state = pendulum_step(state, params, dt)
        worst = max(worst, abs(pendulum_energy(state, params) - e0))
    return worst / max(abs(e0), energy_scale(params))


def brute_force_neighbors(points, origin, query, k, theiler):
    cand = []
    for p in range(len(points)):
        if p == query or abs(int(origin[p]) - int(origin[query])) <= theiler:
            continue
        s = 0.0
        for a, b in zip(points[p], points[query]):
            s += (a - b) * (a - b)
        cand.append((math.sqrt(s), p))
    cand.sort()
    return [(p, d) for d, p in cand[:k]]


def knn_check(seed, n_series=100):
    rng = np.random.default_rng(seed)
    for _ in range(n_series):
        n = int(rng.integers(12, 51))
        E = int(rng.integers(1, 4))
        pts = rng.normal(size=(n, E)).round(1)  # rounding forces ties
        m = ShadowManifold(pts, np.arange(n))
        for theiler in (0, 2):
            for k in range(1, 6):
                for q in range(n):
                    if find_neighbors(m, q, k, theiler) != brute_force_neighbors(pts, m.origin, q, k, theiler):
                        return False
    return True


def run(out=print):
    results = []

    def check(name, fn):
        t0 = time.perf_counter()
        try:
            ok, detail = fn()
        except Exception as e:  # a crashing oracle is a failing oracle
            ok, detail = False, f"{type(e).__name__}: {e}"
        out(f"{'PASS' if ok else 'FAIL'}  {name}  ({detail}; {time.perf_counter() - t0:.1f}s)")
        results.append(ok)

    def logistic():
        fwd, rev = logistic_direction_check(seed=1)
        v = convergence_score(fwd)
        gap = fwd.final_rho - rev.final_rho
        return v.convergent and gap >= 0.1, f"final rho {fwd.final_rho:.3f} vs reverse {rev.final_rho:.3f}"

    def pendulum():
        drift = energy_drift(PendulumState(math.pi / 2, math.pi / 2), PendulumParams(), 0.001, 2000)
        return drift < 1e-6, f"relative drift {drift:.2e} over 2000 steps at dt=0.001"

    def knn():
        return knn_check(seed=0, n_series=20), "20 random series, k=1..5, theiler 0 and 2"

    def reward_stats():
        st = stats_from_totals([1, 2, 3])
        ok = st.mean_reward == 2.0 and st.sd == 1.0 and abs(st.ci95_halfwidth - 4.302652729749464 / math.sqrt(3)) < 1e-9
        return ok, f"mean {st.mean_reward}, sd {st.sd}, ci95 {st.ci95_halfwidth:.4f}"

    check("coupled logistic direction", logistic)
    check("pendulum energy drift", pendulum)
    check("kNN brute-force equivalence", knn)
    check("reward statistics hand oracle", reward_stats)
    return all(results)
