"""Deterministic 2D particle world for the pursuit task.

Agents are stored as ``(n, 2)`` float arrays; predators occupy indices
``0..n_predators-1`` and the prey is the last index.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

SPAWN_RETRY_CAP = 10_000


class SimulationError(ValueError):
    """Raised for invalid simulation inputs (bad config, non-finite actions)."""


@dataclass(frozen=True)
class BodyParams:
    mass: float = 1.0
    radius: float = 0.075
    max_speed: float = 1.0
    max_accel: float = 3.0

    def validate(self):
        for name in ("mass", "radius", "max_speed", "max_accel"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise SimulationError(f"body {name} must be finite and > 0, got {v!r}")


def _default_prey_body():
    return BodyParams(mass=1.0, radius=0.05, max_speed=1.25, max_accel=4.0)


@dataclass(frozen=True)
class WorldConfig:
    dt: float = 0.1
    damping: float = 0.25
    arena_half_width: float = 1.0
    contact_stiffness: float = 100.0
    reward_magnitude: float = 10.0
    predator_body: BodyParams = field(default_factory=BodyParams)
    prey_body: BodyParams = field(default_factory=_default_prey_body)
    n_predators: int = 3

    def validate(self):
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise SimulationError(f"dt must be > 0, got {self.dt!r}")
        if not 0 <= self.damping < 1:
            raise SimulationError(f"damping must lie in [0, 1), got {self.damping!r}")
        if self.n_predators < 1:
            raise SimulationError("n_predators must be >= 1")
        self.predator_body.validate()
        self.prey_body.validate()
        if not self.contact_stiffness >= 0:
            raise SimulationError("contact_stiffness must be >= 0")
        max_r = max(self.predator_body.radius, self.prey_body.radius)
        if not self.arena_half_width > 2 * max_r:
            raise SimulationError(
                f"arena_half_width must exceed 2 x max radius ({2 * max_r}), "
                f"got {self.arena_half_width!r}")
        return self

    @property
    def n_agents(self):
        return self.n_predators + 1

    @property
    def prey_index(self):
        return self.n_predators

    def bodies(self):
        return [self.predator_body] * self.n_predators + [self.prey_body]

    def body_arrays(self):
        """Per-agent (mass, radius, max_speed, max_accel) arrays."""
        bodies = self.bodies()
        return tuple(np.array([getattr(b, k) for b in bodies], dtype=float)
                     for k in ("mass", "radius", "max_speed", "max_accel"))


@dataclass(frozen=True)
class WorldState:
    step_index: int
    pos: np.ndarray  # (n_agents, 2)
    vel: np.ndarray  # (n_agents, 2)

    @property
    def n_agents(self):
        return self.pos.shape[0]

    def copy(self):
        return WorldState(self.step_index, self.pos.copy(), self.vel.copy())

    def __eq__(self, other):
        if not isinstance(other, WorldState):
            return NotImplemented
        return (self.step_index == other.step_index
                and np.array_equal(self.pos, other.pos)
                and np.array_equal(self.vel, other.vel))


def clamp_norm(vecs, limits):
    """Rescale rows of ``vecs`` whose norm exceeds ``limits``; direction is kept.

    The result satisfies ``|v| <= limit`` exactly in floating point.
    """
    vecs = np.array(vecs, dtype=float, copy=True)
    limits = np.broadcast_to(np.asarray(limits, dtype=float), vecs.shape[:1])
    norms = np.hypot(vecs[:, 0], vecs[:, 1])
    for i in np.nonzero(norms > limits)[0]:
        v = (vecs[i] / norms[i]) * limits[i]
        # rounding can leave the rescaled vector a hair above the limit
        while np.hypot(v[0], v[1]) > limits[i]:
            v = v * (1.0 - 2.0 ** -52)
        vecs[i] = v
    return vecs


def spawn_episode(config, seed, fixed=None):
    """Random initial state for one episode.

    ``fixed`` maps agent index -> position for agents whose placement is
    dictated externally (the pendulum-driven predator); those agents start at
    rest and the others are resampled around them.
    """
    config.validate()
    fixed = fixed or {}
    rng = np.random.default_rng(int(seed) & 0xFFFFFFFFFFFFFFFF)
    _, radius, max_speed, _ = config.body_arrays()
    hw = config.arena_half_width
    n = config.n_agents
    pos = np.zeros((n, 2))
    vel = np.zeros((n, 2))
    for i in range(n):
        if i in fixed:
            pos[i] = fixed[i]
            continue
        lim = hw - radius[i]
        for _ in range(SPAWN_RETRY_CAP):
            p = rng.uniform(-lim, lim, size=2)
            placed = [j for j in range(n) if j < i or j in fixed]
            if all(np.hypot(*(p - pos[j])) >= radius[i] + radius[j] for j in placed):
                break
        else:
            raise SimulationError(
                f"could not place agent {i} without overlap after {SPAWN_RETRY_CAP} tries")
        pos[i] = p
        angle = rng.uniform(0.0, 2 * np.pi)
        speed = rng.uniform(0.0, 0.25 * max_speed[i])
        vel[i] = speed * np.cos(angle), speed * np.sin(angle)
    return WorldState(0, pos, vel)


def integrate_step(world, accels, config):
    """Semi-implicit Euler update with damping, speed clamp and sticky walls.

    Contacts are resolved separately by :func:`resolve_contacts`.
    """
    accels = np.asarray(accels, dtype=float)
    if accels.shape != world.pos.shape:
        raise SimulationError(
            f"expected accelerations of shape {world.pos.shape}, got {accels.shape}")
    if not np.all(np.isfinite(accels)):
        raise SimulationError("non-finite acceleration input")
    _, radius, max_speed, max_accel = config.body_arrays()
    accels = clamp_norm(accels, max_accel)
    vel = (1.0 - config.damping) * world.vel + accels * config.dt
    vel = clamp_norm(vel, max_speed)
    pos = world.pos + vel * config.dt
    # sticky walls: clamp position, kill the normal velocity component
    lim = (config.arena_half_width - radius)[:, None]
    hit = np.abs(pos) > lim
    pos = np.clip(pos, -lim, lim)
    vel[hit] = 0.0
    return WorldState(world.step_index + 1, pos, vel)


def resolve_contacts(world, config, kinematic=()):
    """Detect overlaps and apply equal-and-opposite bump impulses.

    Agents listed in ``kinematic`` are never pushed, but still push others.
    Returns the new state and the list of contact pairs ``(i, j)`` with i < j.
    """
    mass, radius, max_speed, _ = config.body_arrays()
    pos = world.pos
    vel = world.vel.copy()
    events = []
    n = world.n_agents
    for i in range(n):
        for j in range(i + 1, n):
            d = pos[j] - pos[i]
            dist = np.hypot(d[0], d[1])
            overlap = radius[i] + radius[j] - dist
            if not overlap > 0:
                continue
            events.append((i, j))
            normal = d / dist if dist > 0 else np.array([1.0, 0.0])
            j_mag = config.contact_stiffness * overlap * config.dt
            if i not in kinematic:
                vel[i] -= normal * (j_mag / mass[i])
            if j not in kinematic:
                vel[j] += normal * (j_mag / mass[j])
    if events:
        free = np.array([i not in kinematic for i in range(n)])
        vel[free] = clamp_norm(vel[free], max_speed[free])
    return replace(world, vel=vel), events


def compute_rewards(contact_events, config):
    """Shared predator reward per predator-prey contact; prey gets the negative."""
    prey = config.prey_index
    c = sum(1 for i, j in contact_events if (i == prey) != (j == prey))
    r = c * config.reward_magnitude
    rewards = np.full(config.n_agents, float(r))
    rewards[prey] = 0.0 - r
    return rewards
