"""Stochastic integrators and a trajectory runner streaming into estimators.

Two schemes are provided:

* a geometric Langevin algorithm (GLA) for kinetic models: symplectic
  half-kick / drift / half-kick followed by an *exact* Ornstein-Uhlenbeck
  update of the thermostatted momenta, so the fluctuation-dissipation part
  carries no time-step error;
* Euler-Maruyama for overdamped (positions-only) models on a torus.

The functions in this module are the plain-Python reference integrators; the
chunked numba kernels used by the experiment drivers reproduce them
bit-for-bit given the same Gaussian draws (see ``tests/test_kernels.py``).

Gaussian draws are consumed in a fixed documented order: one draw per
fluctuation-dissipation-coupled momentum component, index-ascending (for the
chain: left boundary momentum, then right), and for overdamped models one
draw per coordinate in storage order.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "IntegrationDivergedError",
    "LangevinParams",
    "SystemState",
    "TrajectoryReport",
    "gla_step",
    "chain_gla_step",
    "em_step",
    "run_trajectory",
    "wrap_periodic",
]


class IntegrationDivergedError(RuntimeError):
    """Non-finite force or state during time stepping."""

    def __init__(self, step_index: int, detail: str = ""):
        self.step_index = step_index
        super().__init__(f"integration diverged at step {step_index}{': ' + detail if detail else ''}")


@dataclass(frozen=True)
class LangevinParams:
    """Mass, friction, temperature(s), and time step of a Langevin model.

    ``beta`` is the inverse temperature of a single thermostat; for the
    boundary-driven chain use ``t_left`` / ``t_right`` instead (either
    ordering is allowed).  ``gamma = 0`` is accepted so the bare Hamiltonian
    sub-steps can be exercised on their own; experiment configurations
    require strictly positive friction.
    """

    mass: float
    gamma: float
    dt: float
    beta: Optional[float] = None
    t_left: Optional[float] = None
    t_right: Optional[float] = None

    def __post_init__(self):
        if not (self.mass > 0 and self.dt > 0):
            raise ValueError("mass and dt must be strictly positive")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if self.beta is None and (self.t_left is None or self.t_right is None):
            raise ValueError("provide beta, or both t_left and t_right")
        if self.beta is not None and not self.beta > 0:
            raise ValueError("beta must be strictly positive")
        for t in (self.t_left, self.t_right):
            if t is not None and not t > 0:
                raise ValueError("boundary temperatures must be strictly positive")

    @property
    def alpha(self) -> float:
        """Exact OU decay factor per step, exp(-gamma dt / m)."""
        return math.exp(-self.gamma * self.dt / self.mass)


@dataclass(frozen=True)
class SystemState:
    """Phase-space point: positions, optional momenta, and a model tag.

    Periodic coordinates live in ``[0, box)`` when ``box`` is set.
    """

    positions: np.ndarray
    momenta: Optional[np.ndarray] = None
    model: str = ""
    box: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "positions", np.atleast_1d(np.asarray(self.positions, dtype=float)))
        if self.momenta is not None:
            object.__setattr__(self, "momenta", np.atleast_1d(np.asarray(self.momenta, dtype=float)))


@dataclass
class TrajectoryReport:
    final_state: SystemState
    n_steps: int
    wall_time: float


def wrap_periodic(q: np.ndarray, box: float) -> np.ndarray:
    """Reduce coordinates to the fundamental domain [0, box)."""
    return q - box * np.floor(q / box)


def _check_finite(arrays, step: int, what: str) -> None:
    for arr in arrays:
        if not np.all(np.isfinite(arr)):
            raise IntegrationDivergedError(step, f"non-finite {what}")


def gla_step(
    state: SystemState,
    force: Callable[[np.ndarray], np.ndarray],
    params: LangevinParams,
    eta: float,
    rng: np.random.Generator,
    step_index: int = 0,
) -> SystemState:
    """One geometric-Langevin step for a kinetic model with full thermostat.

    Sub-steps: half-kick with ``force + eta``, free drift, half-kick at the
    new positions, then the exact OU update
    ``p <- alpha p + sqrt(m / beta (1 - alpha^2)) G`` with one standard
    Gaussian per momentum component (index-ascending).
    """
    if params.beta is None:
        raise ValueError("gla_step needs params.beta")
    q, p = state.positions, state.momenta
    dt, m = params.dt, params.mass
    f = np.atleast_1d(np.asarray(force(q), dtype=float))
    _check_finite((q, p, f), step_index, "state or force")
    p_half = p + (f + eta) * (dt / 2.0)
    q_new = q + p_half * (dt / m)
    if state.box is not None:
        q_new = wrap_periodic(q_new, state.box)
    f_new = np.atleast_1d(np.asarray(force(q_new), dtype=float))
    _check_finite((f_new,), step_index, "force")
    p_tilde = p_half + (f_new + eta) * (dt / 2.0)
    alpha = params.alpha
    amp = math.sqrt(m / params.beta * (1.0 - alpha * alpha))
    p_new = alpha * p_tilde + amp * rng.standard_normal(p.size)
    _check_finite((q_new, p_new), step_index, "state")
    return replace(state, positions=q_new, momenta=p_new)


def chain_force(r: np.ndarray, vprime: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Momentum drift of the chain: F_n = v'(r_n) - v'(r_{n-1}), with the
    free-end convention v'(r_0) = v'(r_N) = 0."""
    vp = np.asarray(vprime(r), dtype=float)
    f = np.empty(r.size + 1)
    f[0] = vp[0]
    f[1:-1] = vp[1:] - vp[:-1]
    f[-1] = -vp[-1]
    return f


def chain_gla_step(
    state: SystemState,
    vprime: Callable[[np.ndarray], np.ndarray],
    params: LangevinParams,
    rng: np.random.Generator,
    step_index: int = 0,
) -> SystemState:
    """One GLA step of the boundary-thermostatted chain in (r, p) variables.

    Verlet on all distances/momenta; the exact OU update touches only the
    first momentum (temperature ``t_left``) and the last (``t_right``), with
    two Gaussian draws per step in that order.
    """
    if params.t_left is None or params.t_right is None:
        raise ValueError("chain_gla_step needs params.t_left and params.t_right")
    r, p = state.positions, state.momenta
    dt, m = params.dt, params.mass
    _check_finite((r, p), step_index, "state")
    f = chain_force(r, vprime)
    _check_finite((f,), step_index, "force")
    p_half = p + f * (dt / 2.0)
    r_new = r + (p_half[1:] - p_half[:-1]) * (dt / m)
    f_new = chain_force(r_new, vprime)
    _check_finite((f_new,), step_index, "force")
    p_new = p_half + f_new * (dt / 2.0)
    alpha = params.alpha
    g = rng.standard_normal(2)
    p_new = p_new.copy()
    p_new[0] = alpha * p_new[0] + math.sqrt(m * params.t_left * (1.0 - alpha * alpha)) * g[0]
    p_new[-1] = alpha * p_new[-1] + math.sqrt(m * params.t_right * (1.0 - alpha * alpha)) * g[1]
    _check_finite((r_new, p_new), step_index, "state")
    return replace(state, positions=r_new, momenta=p_new)


def em_step(
    state: SystemState,
    force: Callable[[np.ndarray], np.ndarray],
    beta: float,
    dt: float,
    rng: np.random.Generator,
    step_index: int = 0,
) -> SystemState:
    """One Euler-Maruyama step of an overdamped model, wrapped into the box.

    ``q <- wrap(q + F(q) dt + sqrt(2 dt / beta) G)`` with one Gaussian per
    coordinate in storage order.
    """
    q = state.positions
    f = np.asarray(force(q), dtype=float)
    _check_finite((q, f), step_index, "state or force")
    q_new = q + f * dt + math.sqrt(2.0 * dt / beta) * rng.standard_normal(q.shape)
    if state.box is not None:
        q_new = wrap_periodic(q_new, state.box)
    _check_finite((q_new,), step_index, "state")
    return replace(state, positions=q_new)


def run_trajectory(
    state: SystemState,
    integrator: Callable[[SystemState, np.random.Generator, int], SystemState],
    observables: Sequence[Callable[[SystemState], float]],
    sinks: Sequence,
    n_steps: int,
    burn_in: int,
    rng: np.random.Generator,
) -> TrajectoryReport:
    """Advance ``n_steps`` steps, streaming observables into one sink each.

    Observables are evaluated after every post-burn-in step.  Integrator
    errors propagate with their step index.
    """
    if len(observables) != len(sinks):
        raise ValueError("need exactly one sink per observable")
    if burn_in >= n_steps and n_steps > 0:
        raise ValueError("burn_in must be smaller than n_steps")
    start = time.perf_counter()
    for step in range(n_steps):
        state = integrator(state, rng, step)
        if step >= burn_in:
            for obs, sink in zip(observables, sinks):
                sink.push(obs(state))
    return TrajectoryReport(final_state=state, n_steps=n_steps, wall_time=time.perf_counter() - start)
