"""Agent policies: Chaser, Spring, the heuristic evader, and the double pendulum
driver used to perturb one predator."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .physics import SimulationError, WorldState

EPS = 1e-6


def _unit(v):
    n = math.hypot(v[0], v[1])
    if n == 0.0:
        return np.zeros(2)
    return np.array([v[0] / n, v[1] / n])


def _clamp(v, limit):
    n = math.hypot(v[0], v[1])
    if n <= limit:
        return np.asarray(v, dtype=float)
    out = (np.asarray(v, dtype=float) / n) * limit
    while math.hypot(out[0], out[1]) > limit:
        out = out * (1.0 - 2.0 ** -52)
    return out


@dataclass(frozen=True)
class SpringParams:
    stiffness: float = 10.0
    rest_length: float = 0.4
    spring_damping: float = 2.0

    def validate(self):
        if not self.stiffness > 0:
            raise SimulationError("spring stiffness must be > 0")
        if not self.rest_length > 0:
            raise SimulationError("spring rest_length must be > 0")
        if not self.spring_damping >= 0:
            raise SimulationError("spring_damping must be >= 0")
        return self


@dataclass(frozen=True)
class PendulumParams:
    l1: float = 1.0
    l2: float = 1.0
    m1: float = 1.0
    m2: float = 1.0
    g: float = 9.81
    substeps: int = 10

    def validate(self):
        for name in ("l1", "l2", "m1", "m2", "g"):
            if not getattr(self, name) > 0:
                raise SimulationError(f"pendulum {name} must be > 0")
        if self.substeps < 1:
            raise SimulationError("pendulum substeps must be >= 1")
        return self


@dataclass(frozen=True)
class PendulumState:
    theta1: float
    theta2: float
    omega1: float = 0.0
    omega2: float = 0.0

    def as_tuple(self):
        return (self.theta1, self.theta2, self.omega1, self.omega2)


@dataclass(frozen=True)
class PendulumMapping:
    anchor: tuple = (0.0, 0.0)
    scale: float = 0.225

    @classmethod
    def default_for(cls, arena_half_width, params):
        return cls((0.0, 0.0), 0.45 * arena_half_width / (params.l1 + params.l2))

    def validate(self, arena_half_width, params):
        reach = self.scale * (params.l1 + params.l2)
        if not self.scale > 0:
            raise SimulationError("mapping scale must be > 0")
        for c in self.anchor:
            if abs(c) + reach > arena_half_width:
                raise SimulationError(
                    f"pendulum reach {reach} around anchor {self.anchor} leaves the arena")
        return self


def chaser_policy(self_pos, prey_pos, body):
    """Full acceleration straight at the prey; zero when coincident."""
    return body.max_accel * _unit(np.asarray(prey_pos, dtype=float) - np.asarray(self_pos, dtype=float))


def spring_policy(self_idx, world: WorldState, params: SpringParams, body, prey_idx=None,
                  partners=None):
    """Chaser pursuit plus Hooke/damper springs to every partner predator.

    The damper term uses the closing rate ``(v_self - v_j) . d_hat`` so that the
    force opposes changes of separation.
    """
    if prey_idx is None:
        prey_idx = world.n_agents - 1
    if partners is None:
        partners = [j for j in range(world.n_agents) if j not in (self_idx, prey_idx)]
    p_self = world.pos[self_idx]
    v_self = world.vel[self_idx]
    force = np.zeros(2)
    for j in partners:
        d = world.pos[j] - p_self
        dist = math.hypot(d[0], d[1])
        if dist == 0.0:
            continue
        u = d / dist
        closing = float(np.dot(v_self - world.vel[j], u))
        force += params.stiffness * (dist - params.rest_length) * u
        force -= params.spring_damping * closing * u
    pursuit = body.max_accel * _unit(world.pos[prey_idx] - p_self)
    return _clamp(pursuit + force / body.mass, body.max_accel)


def prey_evade_policy(self_pos, predator_pos, body, arena_half_width):
    """Inverse-square repulsion from predators and walls, at full acceleration."""
    self_pos = np.asarray(self_pos, dtype=float)
    total = np.zeros(2)
    for p in np.asarray(predator_pos, dtype=float):
        d = self_pos - p
        total += _unit(d) / max(float(d @ d), EPS)
    hw = arena_half_width
    for axis in (0, 1):
        e = np.zeros(2)
        e[axis] = 1.0
        total += e / max((self_pos[axis] + hw) ** 2, EPS)  # low wall pushes +
        total -= e / max((hw - self_pos[axis]) ** 2, EPS)  # high wall pushes -
    return body.max_accel * _unit(total)


def pendulum_derivs(state, params):
    """Frictionless planar double pendulum, angles measured from the downward vertical."""
    t1, t2, w1, w2 = state.as_tuple() if isinstance(state, PendulumState) else state
    l1, l2, m1, m2, g = params.l1, params.l2, params.m1, params.m2, params.g
    delta = t1 - t2
    s, c = math.sin(delta), math.cos(delta)
    den = 2 * m1 + m2 - m2 * math.cos(2 * delta)
    a1 = (-g * (2 * m1 + m2) * math.sin(t1)
          - m2 * g * math.sin(t1 - 2 * t2)
          - 2 * s * m2 * (w2 * w2 * l2 + w1 * w1 * l1 * c)) / (l1 * den)
    a2 = (2 * s * (w1 * w1 * l1 * (m1 + m2)
                   + g * (m1 + m2) * math.cos(t1)
                   + w2 * w2 * l2 * m2 * c)) / (l2 * den)
    return (w1, w2, a1, a2)


def pendulum_step(state, params, dt):
    """One classical RK4 step."""
    if not dt > 0:
        raise SimulationError("pendulum dt must be > 0")
    y = state.as_tuple()
    k1 = pendulum_derivs(y, params)
    k2 = pendulum_derivs(tuple(a + 0.5 * dt * b for a, b in zip(y, k1)), params)
    k3 = pendulum_derivs(tuple(a + 0.5 * dt * b for a, b in zip(y, k2)), params)
    k4 = pendulum_derivs(tuple(a + dt * b for a, b in zip(y, k3)), params)
    return PendulumState(*(a + dt / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4)
                           for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4)))


def pendulum_energy(state, params):
    t1, t2, w1, w2 = state.as_tuple()
    l1, l2, m1, m2, g = params.l1, params.l2, params.m1, params.m2, params.g
    kinetic = (0.5 * m1 * l1 ** 2 * w1 ** 2
               + 0.5 * m2 * (l1 ** 2 * w1 ** 2 + l2 ** 2 * w2 ** 2
                             + 2 * l1 * l2 * w1 * w2 * math.cos(t1 - t2)))
    potential = -(m1 + m2) * g * l1 * math.cos(t1) - m2 * g * l2 * math.cos(t2)
    return kinetic + potential


def pendulum_target(state, params, mapping):
    """Arena position of the second bob."""
    x = params.l1 * math.sin(state.theta1) + params.l2 * math.sin(state.theta2)
    y = -params.l1 * math.cos(state.theta1) - params.l2 * math.cos(state.theta2)
    return np.array([mapping.anchor[0] + mapping.scale * x,
                     mapping.anchor[1] + mapping.scale * y])


def random_pendulum_state(seed):
    rng = np.random.default_rng(int(seed) & 0xFFFFFFFFFFFFFFFF)
    t1, t2 = rng.uniform(0.5 * math.pi, 1.5 * math.pi, size=2)
    return PendulumState(float(t1), float(t2), 0.0, 0.0)


class PendulumDriver:
    """Owns the pendulum state for one episode and drives predator ``index``.

    Each simulation step advances the pendulum ``params.substeps`` RK4 steps
    of ``dt / substeps`` and teleports the driven agent onto the second bob.
    """

    def __init__(self, state, params, mapping, index=0):
        self.state = state
        self.params = params
        self.mapping = mapping
        self.index = index

    @property
    def position(self):
        return pendulum_target(self.state, self.params, self.mapping)

    def advance(self, dt):
        old = self.position
        h = dt / self.params.substeps
        for _ in range(self.params.substeps):
            self.state = pendulum_step(self.state, self.params, h)
        new = self.position
        return new, (new - old) / dt


def pendulum_drive(world, pend_state, params, mapping, dt, index=0):
    """Functional form of :meth:`PendulumDriver.advance`.

    Returns ``(pos, vel)`` for the driven predator and the new pendulum state.
    """
    driver = PendulumDriver(pend_state, params, mapping, index)
    pos, vel = driver.advance(dt)
    return (pos, vel), driver.state
