"""Experiment protocol: run conditions, perturb predator 0 with the pendulum,
summarise rewards and measure CCM from the modified predator to its partners."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from . import seeding
from .ccm import agent_ccm, convergence_score, default_library_sizes, mean_curve
from .config import Condition, RunConfig
from .physics import compute_rewards, integrate_step, resolve_contacts, spawn_episode
from .strategies import (PendulumDriver, chaser_policy, prey_evade_policy,
                         random_pendulum_state, spring_policy)

log = logging.getLogger(__name__)

MODIFIED = 0  # index of the pendulum-driven predator


@dataclass
class Trajectory:
    condition: Condition
    episode_seed: int
    positions: np.ndarray  # (steps, n_agents, 2)
    velocities: np.ndarray  # (steps, n_agents, 2)
    rewards: np.ndarray  # (steps, n_agents)
    contact_count: int
    label: str = ""
    episode: int = 0
    step_ids: np.ndarray | None = None  # defaults to 1..steps

    def step_numbers(self):
        if self.step_ids is None:
            return np.arange(1, self.steps + 1)
        return self.step_ids

    @property
    def steps(self):
        return self.positions.shape[0]

    @property
    def n_agents(self):
        return self.positions.shape[1]

    @property
    def total_rewards(self):
        return self.rewards.sum(axis=0)

    def roles(self):
        return ["predator"] * (self.n_agents - 1) + ["prey"]


@dataclass
class ConditionStats:
    n: int
    mean_reward: float
    sd: float
    ci95_halfwidth: float
    mean_log_reward: float = math.nan


def run_episode(condition, episode_seed, config: RunConfig, world_seed=None, pendulum_seed=None,
                episode=0):
    """Simulate one evaluation episode.

    Sub-seeds for the spawn and the pendulum are derived from
    ``episode_seed`` unless given explicitly.
    """
    condition.validate()
    if condition.name == "scripted":
        raise ValueError("scripted trajectories are replayed from file, not simulated")
    world_cfg = config.world
    if world_seed is None:
        world_seed = seeding.derive_seed(episode_seed, seeding.WORLD)
    if pendulum_seed is None:
        pendulum_seed = seeding.derive_seed(episode_seed, seeding.PENDULUM)

    n_pred = world_cfg.n_predators
    prey = world_cfg.prey_index
    pred_body = world_cfg.predator_body
    driver = None
    fixed = {}
    if condition.perturbed:
        driver = PendulumDriver(random_pendulum_state(pendulum_seed), config.pendulum,
                                config.resolved_mapping, MODIFIED)
        fixed[MODIFIED] = driver.position
    world = spawn_episode(world_cfg, world_seed, fixed=fixed)

    steps = condition.steps
    n = world_cfg.n_agents
    positions = np.empty((steps, n, 2))
    velocities = np.empty((steps, n, 2))
    rewards = np.empty((steps, n))
    contacts = 0
    kinematic = (MODIFIED,) if driver else ()
    for t in range(steps):
        accels = np.zeros((n, 2))
        for i in range(n_pred):
            if driver is not None and i == MODIFIED:
                continue
            if condition.name == "chaser":
                accels[i] = chaser_policy(world.pos[i], world.pos[prey], pred_body)
            else:
                accels[i] = spring_policy(i, world, config.spring, pred_body, prey_idx=prey)
        accels[prey] = prey_evade_policy(world.pos[prey], world.pos[:n_pred],
                                         world_cfg.prey_body, world_cfg.arena_half_width)
        world = integrate_step(world, accels, world_cfg)
        if driver is not None:
            p, v = driver.advance(world_cfg.dt)
            world.pos[MODIFIED] = p
            world.vel[MODIFIED] = v
        world, events = resolve_contacts(world, world_cfg, kinematic=kinematic)
        r = compute_rewards(events, world_cfg)
        contacts += sum(1 for i, j in events if (i == prey) != (j == prey))
        positions[t] = world.pos
        velocities[t] = world.vel
        rewards[t] = r
    return Trajectory(condition, int(episode_seed), positions, velocities, rewards, contacts,
                      label=condition.name, episode=episode)


def _run_indexed(args):
    condition, index, config = args
    return run_episode(condition, seeding.episode_seed(condition.seed, index), config,
                       episode=index)


def run_condition(condition, config: RunConfig, workers=1):
    """All episodes of a condition; output is identical for any ``workers``."""
    jobs = [(condition, i, config) for i in range(condition.n_episodes)]
    if workers <= 1:
        return [_run_indexed(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_indexed, jobs))


def reward_stats(trajectories):
    """N, mean, SD and 95% CI of per-episode predator reward."""
    if len(trajectories) < 2:
        raise ValueError("reward statistics need at least 2 episodes")
    totals = []
    for tr in trajectories:
        t = tr.total_rewards if isinstance(tr, Trajectory) else np.atleast_1d(tr)
        totals.append(float(t[0]))
    return stats_from_totals(totals)


def stats_from_totals(totals):
    totals = np.asarray(totals, dtype=float)
    n = len(totals)
    if n < 2:
        raise ValueError("reward statistics need at least 2 episodes")
    mean = float(totals.mean())
    sd = float(totals.std(ddof=1))
    ci = float(stats.t.ppf(0.975, n - 1) * sd / math.sqrt(n))
    mean_log = float(np.mean(np.log(totals))) if np.all(totals > 0) else math.nan
    return ConditionStats(n, mean, sd, ci, mean_log)


@dataclass
class PairResult:
    source: int
    reader: int
    episodes: list  # CcmCurve per episode
    aggregate: object = None
    verdict: object = None

    @property
    def name(self):
        return f"{self.source}->{self.reader}"


@dataclass
class PerturbationResult:
    forward: list  # PairResult, source = modified predator
    reverse: list
    aggregate: object = None  # mean over pairs and episodes
    verdict: object = None
    library_sizes: np.ndarray = field(default_factory=lambda: np.array([], dtype=int))


def library_sizes_for(ccm_cfg, n_steps):
    if ccm_cfg.library_sizes:
        return np.asarray(ccm_cfg.library_sizes, dtype=int)
    n_points = n_steps - ccm_cfg.embedding.span
    return default_library_sizes(n_points, ccm_cfg.n_library_sizes, ccm_cfg.min_library_size)


def _pair_curves(trajectories, source, reader, ccm_cfg, sizes, seed):
    out = []
    for tr in trajectories:
        s = seeding.derive_seed(seed, tr.episode, source, reader)
        out.append(agent_ccm(tr.positions, reader, source, ccm_cfg.embedding, sizes,
                             ccm_cfg.n_subsamples, s, ccm_cfg.library_mode))
    return out


def perturbation_analysis(trajectories, ccm_cfg, source=MODIFIED, seed=None, reverse=True):
    """CCM from the modified predator to each unmodified predator.

    Per pair the episode curves are averaged pointwise (SD across episodes);
    the overall aggregate pools every (pair, episode) curve.
    """
    if seed is None:
        seed = ccm_cfg.seed
    n_agents = trajectories[0].n_agents
    readers = [i for i in range(n_agents - 1) if i != source]
    sizes = library_sizes_for(ccm_cfg, min(tr.steps for tr in trajectories))

    def pairs(direction):
        result = []
        for r in readers:
            src, rdr = (source, r) if direction == "forward" else (r, source)
            curves = _pair_curves(trajectories, src, rdr, ccm_cfg, sizes, seed)
            agg = mean_curve(curves, pointwise_sd=True)
            result.append(PairResult(src, rdr, curves, agg, convergence_score(agg, ccm_cfg.thresholds)))
        return result

    forward = pairs("forward")
    backward = pairs("reverse") if reverse else []
    pooled = mean_curve([c for p in forward for c in p.episodes], pointwise_sd=True)
    return PerturbationResult(forward, backward, pooled,
                              convergence_score(pooled, ccm_cfg.thresholds), sizes)


def self_ccm(trajectory, agent, ccm_cfg, seed=0):
    """Reader = source sanity lane."""
    sizes = library_sizes_for(ccm_cfg, trajectory.steps)
    return agent_ccm(trajectory.positions, agent, agent, ccm_cfg.embedding, sizes,
                     ccm_cfg.n_subsamples, seed, ccm_cfg.library_mode)


def with_condition(config, **changes):
    return replace(config, condition=replace(config.condition, **changes))
