"""Experiment drivers: chunked kernels streaming into variance estimators.

Each driver advances one replica of a model with pre-drawn Philox Gaussians
in fixed-size chunks, pushes the post-burn-in observable values into
:class:`~pertcv.estimators.VarianceAccumulator` sinks, and returns one
report per observable.  Replica fan-out assigns one stream id per replica
and merges the reports; a thread pool is used because the kernels release
the GIL.

Draw order (fixed, documented): any initial-condition draws first, then per
step the fluctuation-dissipation Gaussians in momentum-index-ascending
order (for overdamped models: one per coordinate in storage order).
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, Optional

import numpy as np
from scipy.signal import lfilter

from . import _kernels
from .chain import ChainParams
from .dimer import DimerParams, RadialProfile, initial_configuration
from .estimators import VarianceAccumulator, VarianceReport, merge_reports
from .galerkin import GalerkinSolution, cv_blocks
from .rng import RngStream
from .stochastics import IntegrationDivergedError

__all__ = [
    "CHUNK_STEPS",
    "simulate_mobility",
    "simulate_chain",
    "simulate_dimer",
    "mean_length_experiment",
    "run_replicas",
    "exact_ou_trajectory",
    "ou_selftest",
    "OuSelftestResult",
]

CHUNK_STEPS = 1 << 15


def _make_sinks(names, dt, n_deco, record_acf, acf_stride):
    if isinstance(n_deco, int):
        n_deco = {name: n_deco for name in names}
    return {
        name: VarianceAccumulator(dt, n_deco[name], record_acf=record_acf, acf_stride=acf_stride)
        for name in names
    }


def _feed(sinks, names, chunk_out, start_step, burn_in):
    """Push the post-burn-in rows of one chunk into the sinks."""
    lo = max(0, burn_in - start_step)
    if lo < chunk_out.shape[0]:
        for col, name in enumerate(names):
            sinks[name].extend(chunk_out[lo:, col])


def simulate_mobility(
    solution: Optional[GalerkinSolution],
    gamma: float,
    dt: float,
    eta: float,
    n_steps: int,
    burn_in: int,
    stream: RngStream,
    t_deco: float = 6.0,
    record_acf: bool = False,
    acf_stride: int = 1,
    potential: str = "cosine",
) -> Dict[str, VarianceReport]:
    """One trajectory of the driven particle in the periodic well.

    Streams the velocity ``p/m`` and, when a Galerkin ``solution`` is given,
    the modified observable ``R + L_eta Phi0``.  Mass and inverse
    temperature come from the solution's basis (or 1 when running bare).
    """
    pot_id = {"zero": 0, "cosine": 1}[potential]
    if solution is not None:
        basis = solution.basis
        m, beta = basis.mass, basis.beta
        d1, d2, d3 = cv_blocks(solution, gamma, eta)
        jmax, norms = basis.jmax, basis.norms
    else:
        m = beta = 1.0
        jmax, norms = 0, np.ones(1)
        d1 = d2 = d3 = np.zeros((1, 2))
    names = ["velocity"] + (["modified"] if solution is not None else [])
    n_deco = int(round(t_deco / dt))
    sinks = _make_sinks(names, dt, n_deco, record_acf, acf_stride)
    gen = stream.generator()
    state = np.zeros(2)
    out_r = np.empty(CHUNK_STEPS)
    out_phi = np.empty(CHUNK_STEPS)
    done = 0
    while done < n_steps:
        todo = min(CHUNK_STEPS, n_steps - done)
        draws = gen.standard_normal(todo)
        bad = _kernels.run_cosine_langevin(
            state, draws, dt, m, gamma, beta, eta,
            pot_id, solution is not None, jmax, norms, d1, d2, d3,
            out_r[:todo], out_phi[:todo],
        )
        if bad >= 0:
            raise IntegrationDivergedError(done + bad)
        cols = [out_r[:todo]] + ([out_phi[:todo]] if solution is not None else [])
        _feed(sinks, names, np.column_stack(cols), done, burn_in)
        done += todo
    return {name: sinks[name].finalize() for name in names}


CHAIN_OBSERVABLES = ("standard", "j_left", "j_right", "j_first", "j_mid", "modified")


def simulate_chain(
    params: ChainParams,
    n_steps: int,
    burn_in: int,
    stream: RngStream,
    t_deco_flux: Optional[float] = None,
    t_deco_modified: float = 32.0,
    record_acf: bool = False,
    acf_stride: int = 1,
) -> Dict[str, VarianceReport]:
    """One trajectory of the thermostatted chain, streaming all six fluxes.

    The flux observables default to the decorrelation window ``3 N`` and the
    modified observable to 32.  Initial state: ``r = rhat``, momenta drawn
    from the mean-temperature Gaussian (N draws, index-ascending).
    """
    if t_deco_flux is None:
        t_deco_flux = 3.0 * params.n
    dt = params.dt
    n_deco = {name: int(round(t_deco_flux / dt)) for name in CHAIN_OBSERVABLES}
    n_deco["modified"] = int(round(t_deco_modified / dt))
    sinks = _make_sinks(CHAIN_OBSERVABLES, dt, n_deco, record_acf, acf_stride)
    gen = stream.generator()
    r = np.full(params.n - 1, params.rhat)
    p = math.sqrt(params.mass * 0.5 * (params.t_left + params.t_right)) * gen.standard_normal(params.n)
    out = np.empty((CHUNK_STEPS, 6))
    done = 0
    while done < n_steps:
        todo = min(CHUNK_STEPS, n_steps - done)
        draws = gen.standard_normal((todo, 2))
        bad = _kernels.run_chain(
            r, p, draws, dt, params.mass, params.gamma, params.t_left, params.t_right,
            params.a, params.b, params.c, params.rhat, params.big_omega,
            params.nu, params.omega_hat, params.n // 2 - 1,
            out[:todo],
        )
        if bad >= 0:
            raise IntegrationDivergedError(done + bad)
        _feed(sinks, CHAIN_OBSERVABLES, out[:todo], done, burn_in)
        done += todo
    return {name: sinks[name].finalize() for name in CHAIN_OBSERVABLES}


def simulate_dimer(
    params: DimerParams,
    nu: float,
    profile: RadialProfile,
    n_steps: int,
    burn_in: int,
    stream: RngStream,
    t_deco: float = 50.0,
    record_acf: bool = False,
    acf_stride: int = 1,
) -> Dict[str, VarianceReport]:
    """One trajectory of the sheared dimer, streaming plain and modified length."""
    dt = params.dt
    names = ["length", "modified"]
    sinks = _make_sinks(names, dt, int(round(t_deco / dt)), record_acf, acf_stride)
    gen = stream.generator()
    q = initial_configuration(params)
    bond = q[1] - q[0]  # unwrapped bond vector, tracked across wrapping
    forces = np.zeros_like(q)
    _kernels.dimer_forces(
        q, forces, bond, params.box, params.h, params.r0, params.delta_r,
        params.solvent_id, params.eps, params.sigma, params.rcut,
    )
    out = np.empty((CHUNK_STEPS, 2))
    done = 0
    clamped = 0
    while done < n_steps:
        todo = min(CHUNK_STEPS, n_steps - done)
        draws = gen.standard_normal((todo, 2 * params.n))
        bad, warn = _kernels.run_dimer(
            q, bond, draws, dt, params.beta, params.box, nu,
            params.h, params.r0, params.delta_r,
            params.solvent_id, params.eps, params.sigma, params.rcut,
            profile.phi, profile.spacing,
            forces, out[:todo],
        )
        clamped += warn
        if bad >= 0:
            raise IntegrationDivergedError(done + bad)
        _feed(sinks, names, out[:todo], done, burn_in)
        done += todo
    reports = {name: sinks[name].finalize() for name in names}
    reports["clamped_evaluations"] = clamped
    return reports


def run_replicas(
    worker: Callable[[RngStream], Dict[str, VarianceReport]],
    seed: int,
    n_replicas: int,
    max_workers: Optional[int] = None,
    first_stream: int = 0,
) -> Dict[str, VarianceReport]:
    """Run ``worker`` on ``n_replicas`` independent streams and merge.

    Replica k uses stream id ``first_stream + k``; merge order is by replica
    index, so results do not depend on scheduling.
    """
    if n_replicas < 1:
        raise ValueError("need at least one replica")
    streams = [RngStream(seed, first_stream + k) for k in range(n_replicas)]
    if n_replicas == 1:
        results = [worker(streams[0])]
    else:
        workers = max_workers or min(n_replicas, os.cpu_count() or 1)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(worker, streams))
    merged = {}
    for name in results[0]:
        if isinstance(results[0][name], VarianceReport):
            merged[name] = merge_reports([res[name] for res in results])
        else:
            merged[name] = sum(res[name] for res in results)
    return merged


def mean_length_experiment(
    params: DimerParams,
    nu_values,
    n_steps: int,
    seed: int,
    n_replicas: int = 1,
    t_deco: float = 50.0,
    r_max: float = 10.0,
    dr_grid: float = 1e-3,
):
    """Mean dimer length with and without the control variate, per shear value.

    Builds the radial profile once, then runs ``n_replicas`` trajectories per
    shear amplitude (10% burn-in) and returns ``(profile, {nu: reports})``
    with merged plain/modified reports ready for the CSV table.
    """
    from .dimer import solve_radial_poisson

    profile = solve_radial_poisson(params, r_max=r_max, dr=dr_grid)
    results = {}
    for j, nu in enumerate(nu_values):
        results[nu] = run_replicas(
            lambda stream, s=nu: simulate_dimer(
                params, s, profile, n_steps, n_steps // 10, stream, t_deco=t_deco),
            seed, n_replicas, first_stream=j * n_replicas)
    return profile, results


def exact_ou_trajectory(n: int, dt: float, stream: RngStream,
                        tau: float = 1.0, sigma2_stat: float = 1.0) -> np.ndarray:
    """Exact discretization of dx = -x/tau dt + sqrt(2 sigma2/tau) dW,
    started from the stationary Gaussian (one extra initial draw)."""
    alpha = math.exp(-dt / tau)
    amp = math.sqrt(sigma2_stat * (1.0 - alpha * alpha))
    gen = stream.generator()
    x0 = math.sqrt(sigma2_stat) * gen.standard_normal()
    noise = amp * gen.standard_normal(n)
    return lfilter([1.0], [1.0, -alpha], noise, zi=np.array([alpha * x0]))[0]


@dataclass
class OuSelftestResult:
    passes: int
    repetitions: int
    estimates: np.ndarray
    error_bars: np.ndarray
    target: float
    wall_time: float

    @property
    def ok(self) -> bool:
        return self.passes >= math.ceil(0.95 * self.repetitions)


def ou_selftest(
    seed: int,
    dt: float = 0.01,
    t_deco: float = 10.0,
    time_factor: float = 1e4,
    repetitions: int = 100,
) -> OuSelftestResult:
    """Calibration check of the variance estimator on the exact OU process.

    Each repetition simulates ``T = time_factor * t_deco`` of the process
    ``dx = -x dt + sqrt(2) dW`` (asymptotic variance exactly 2) on its own
    stream and asks whether the estimate covers 2 within twice its reported
    error bar.  The reported bar ``2 sigma2 sqrt(t_deco/T)`` is one standard
    deviation of the estimator (verified empirically in the tests), so the
    doubled bar is a ~95% interval and at least 95 of 100 repetitions are
    expected to pass.
    """
    n = int(round(time_factor * t_deco / dt))
    n_deco = int(round(t_deco / dt))
    target = 2.0
    estimates = np.empty(repetitions)
    bars = np.empty(repetitions)
    passes = 0
    start = time.perf_counter()
    for rep in range(repetitions):
        x = exact_ou_trajectory(n, dt, RngStream(seed, rep), tau=1.0, sigma2_stat=1.0)
        acc = VarianceAccumulator(dt, n_deco)
        acc.extend(x)
        rep_report = acc.finalize()
        estimates[rep] = rep_report.asym_variance
        bars[rep] = rep_report.variance_error_bar
        if abs(estimates[rep] - target) <= 2.0 * bars[rep]:
            passes += 1
    return OuSelftestResult(
        passes=passes,
        repetitions=repetitions,
        estimates=estimates,
        error_bars=bars,
        target=target,
        wall_time=time.perf_counter() - start,
    )
