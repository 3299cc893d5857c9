"""Numba hot loops for the three trajectory drivers.

Each kernel advances the state in place over a chunk of pre-drawn Gaussian
increments and records the per-step observables, returning the index of the
first non-finite step (or -1).  The math mirrors the reference integrators
in :mod:`pertcv.stochastics` exactly, with the same draw order, so the two
paths agree to machine precision given identical draws.

All kernels release the GIL, which lets replicas run on a thread pool.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

__all__ = [
    "hermite_values",
    "run_cosine_langevin",
    "run_chain",
    "dimer_forces",
    "run_dimer",
]


@njit(cache=True, nogil=True)
def hermite_values(u, out):
    """Orthonormal probabilists' Hermite values h_0..h_K at u (K = out.size-1)."""
    out[0] = 1.0
    if out.size > 1:
        out[1] = u
    for l in range(1, out.size - 1):
        out[l + 1] = (u * out[l] - math.sqrt(l) * out[l - 1]) / math.sqrt(l + 1.0)


@njit(cache=True, nogil=True)
def _cv_eval(q, p, vq, vp, eta, s_mom, beta, jmax, norms, d1, d2, d3, trig, dtrig, herm):
    """Modified observable p/m + L_eta Phi at (q, p); helper of the kernel below.

    ``d2`` must already contain the friction block minus eta times the
    momentum-lowering block.  trig/dtrig/herm are scratch arrays.
    """
    kq = 2 * jmax + 1
    ew = math.exp(0.5 * beta * vq)
    cq = math.cos(q)
    sq = math.sin(q)
    trig[0] = 1.0
    dtrig[0] = 0.0
    cj, sj = cq, sq
    for j in range(1, jmax + 1):
        trig[2 * j - 1] = cj
        trig[2 * j] = sj
        dtrig[2 * j - 1] = -j * sj
        dtrig[2 * j] = j * cj
        cj, sj = cj * cq - sj * sq, sj * cq + cj * sq
    hermite_values(p / s_mom, herm)
    acc = 0.0
    half_bvp = 0.5 * beta * vp
    for k in range(kq):
        qk = ew * trig[k] * norms[k]
        qpk = ew * (half_bvp * trig[k] + dtrig[k]) * norms[k]
        y1 = 0.0
        y2 = 0.0
        y3 = 0.0
        for j in range(herm.size):
            y1 += d1[k, j] * herm[j]
            y2 += d2[k, j] * herm[j]
            y3 += d3[k, j] * herm[j]
        acc += qpk * y1 + qk * (y2 + vp * y3)
    return acc


@njit(cache=True, nogil=True)
def run_cosine_langevin(
    state, gauss, dt, m, gamma, beta, eta,
    pot_id, use_cv, jmax, norms, d1, d2, d3,
    out_r, out_phi,
):
    """GLA chunk for one particle on the 2 pi torus.

    ``state = [q, p]`` is updated in place.  ``pot_id`` selects the potential
    (0: free, 1: v = 1 - cos q).  When ``use_cv`` the modified observable is
    written to ``out_phi`` using the coefficient blocks d1/d2/d3.
    """
    q = state[0]
    p = state[1]
    alpha = math.exp(-gamma * dt / m)
    amp = math.sqrt(m / beta * (1.0 - alpha * alpha))
    two_pi = 2.0 * math.pi
    kq = 2 * jmax + 1
    trig = np.empty(kq)
    dtrig = np.empty(kq)
    herm = np.empty(d1.shape[1])
    s_mom = math.sqrt(m / beta)
    bad = -1
    for k in range(gauss.size):
        vp = math.sin(q) if pot_id == 1 else 0.0
        p_half = p + (-vp + eta) * (0.5 * dt)
        q = q + p_half * (dt / m)
        q = q - two_pi * math.floor(q / two_pi)
        vp = math.sin(q) if pot_id == 1 else 0.0
        p_tilde = p_half + (-vp + eta) * (0.5 * dt)
        p = alpha * p_tilde + amp * gauss[k]
        out_r[k] = p / m
        if use_cv:
            vq = (1.0 - math.cos(q)) if pot_id == 1 else 0.0
            out_phi[k] = p / m + _cv_eval(
                q, p, vq, vp, eta, s_mom, beta, jmax, norms, d1, d2, d3, trig, dtrig, herm
            )
        if not (math.isfinite(q) and math.isfinite(p)):
            bad = k
            break
    state[0] = q
    state[1] = p
    return bad


@njit(cache=True, nogil=True)
def _fpu_vprime(r, a, b, c, vp):
    for i in range(r.size):
        ri = r[i]
        vp[i] = ri * (a + ri * (b + ri * c))


@njit(cache=True, nogil=True)
def run_chain(
    r, p, gauss, dt, m, gamma, t_left, t_right,
    a, b, c, rhat, big_omega, nu, omega_hat, mid,
    out,
):
    """GLA chunk of the FPU chain; r (N-1) and p (N) updated in place.

    Per step the six streamed observables are written to ``out``:
    standard flux, j_0, j_N, j_1, j_mid (bulk index ``mid``), modified flux.
    """
    n = p.size
    alpha = math.exp(-gamma * dt / m)
    amp_l = math.sqrt(m * t_left * (1.0 - alpha * alpha))
    amp_r = math.sqrt(m * t_right * (1.0 - alpha * alpha))
    vp = np.empty(n - 1)
    pref = 1.0 / (2.0 * (1.0 + nu * nu))
    drive = nu * omega_hat * (t_left - t_right)
    bad = -1
    for k in range(gauss.shape[0]):
        _fpu_vprime(r, a, b, c, vp)
        # half kick: F_n = v'(r_n) - v'(r_{n-1}), free ends
        p[0] += vp[0] * (0.5 * dt)
        for i in range(1, n - 1):
            p[i] += (vp[i] - vp[i - 1]) * (0.5 * dt)
        p[n - 1] += -vp[n - 2] * (0.5 * dt)
        for i in range(n - 1):
            r[i] += (p[i + 1] - p[i]) * (dt / m)
        _fpu_vprime(r, a, b, c, vp)
        p[0] += vp[0] * (0.5 * dt)
        for i in range(1, n - 1):
            p[i] += (vp[i] - vp[i - 1]) * (0.5 * dt)
        p[n - 1] += -vp[n - 2] * (0.5 * dt)
        p[0] = alpha * p[0] + amp_l * gauss[k, 0]
        p[n - 1] = alpha * p[n - 1] + amp_r * gauss[k, 1]

        flux_sum = 0.0
        for i in range(n - 1):
            flux_sum += -(p[i] + p[i + 1]) * vp[i]
        flux_sum /= 2.0 * m
        out[k, 0] = flux_sum / (n - 1)
        out[k, 1] = gamma / m * (t_left - p[0] * p[0] / m)
        out[k, 2] = gamma / m * (p[n - 1] * p[n - 1] / m - t_right)
        out[k, 3] = -(p[0] + p[1]) * vp[0] / (2.0 * m)
        out[k, 4] = -(p[mid] + p[mid + 1]) * vp[mid] / (2.0 * m)
        corr = 0.0
        for i in range(n - 1):
            # paper-index n = i + 1; vtilde(0) = -p_1/m, vtilde(N) = p_N/m
            up = p[n - 1] / m if i == n - 2 else -nu * omega_hat * (r[i + 1] - rhat)
            down = -p[0] / m if i == 0 else -nu * omega_hat * (r[i - 1] - rhat)
            corr += (up - down) * (vp[i] - big_omega * (r[i] - rhat))
        out[k, 5] = pref * (drive - corr)
        ok = True
        for i in range(n - 1):
            if not math.isfinite(r[i]):
                ok = False
        for i in range(n):
            if not math.isfinite(p[i]):
                ok = False
        if not ok:
            bad = k
            break
    return bad


@njit(cache=True, nogil=True)
def _min_image(d, box):
    return d - box * math.floor(d / box + 0.5)


@njit(cache=True, nogil=True)
def _solvent_force_over_r(r2, sol_id, eps, sigma, rcut):
    """Radial solvent force factor -v'(r)/r given r^2 (0 beyond the cutoff)."""
    if r2 >= rcut * rcut:
        return 0.0
    r = math.sqrt(r2)
    if sol_id == 1:  # soft repulsion eps (1 - r/rcut)^2
        return 2.0 * eps / rcut * (1.0 - r / rcut) / r
    # Coulomb-like: kappa (1 - sqrt(r/rcut))^2 / r with kappa = eps sigma / (1 - sqrt(sigma/rcut))^2
    kappa = eps * sigma / (1.0 - math.sqrt(sigma / rcut)) ** 2
    srr = math.sqrt(r / rcut)
    return kappa * (1.0 - srr) * (1.0 / (r * math.sqrt(r * rcut)) + (1.0 - srr) / (r * r)) / r


@njit(cache=True, nogil=True)
def dimer_forces(q, forces, bond, box, h, r0, delta_r, sol_id, eps, sigma, rcut):
    """Potential forces (shear excluded) on all particles, written in place.

    Particles 0 and 1 form the dimer, bonded through the double-well
    potential of the *unwrapped* bond vector ``bond = q_1 - q_0`` (tracked
    continuously across the periodic wrapping, since the stretched state
    reaches half the box and the minimum image would kink there).  All
    other pairs interact via the solvent potential with the minimum-image
    convention, which is unambiguous below the cutoff.
    """
    n = q.shape[0]
    for i in range(n):
        forces[i, 0] = 0.0
        forces[i, 1] = 0.0
    r = math.sqrt(bond[0] * bond[0] + bond[1] * bond[1])
    # v'(r) of h [1 - ((r-r0)/dr)^2]^2
    t = (r - r0) / delta_r
    vp = -4.0 * h * t * (1.0 - t * t) / delta_r
    forces[0, 0] += vp * bond[0] / r
    forces[0, 1] += vp * bond[1] / r
    forces[1, 0] -= vp * bond[0] / r
    forces[1, 1] -= vp * bond[1] / r
    if sol_id > 0:
        for i in range(n):
            jstart = i + 1 if i >= 2 else 2
            for j in range(jstart, n):
                ddx = _min_image(q[i, 0] - q[j, 0], box)
                ddy = _min_image(q[i, 1] - q[j, 1], box)
                r2 = ddx * ddx + ddy * ddy
                fac = _solvent_force_over_r(r2, sol_id, eps, sigma, rcut)
                if fac != 0.0:
                    forces[i, 0] += fac * ddx
                    forces[i, 1] += fac * ddy
                    forces[j, 0] -= fac * ddx
                    forces[j, 1] -= fac * ddy


@njit(cache=True, nogil=True)
def _dimer_modified(q, forces, bond, box, beta, nu, phi, grid_dr):
    """Modified length R + L Phi0 from positions, bond, and potential forces."""
    rx = bond[0]
    ry = bond[1]
    r = math.sqrt(rx * rx + ry * ry)
    n_nodes = phi.size
    idx = int(r / grid_dr)
    if idx >= n_nodes - 1:
        return r, 1  # beyond the solved profile: psi' = psi'' = 0
    w = r / grid_dr - idx
    psi1 = phi[idx] * (1.0 - w) + phi[idx + 1] * w
    psi2 = (phi[idx + 1] - phi[idx]) / grid_dr
    # grad_i V = -force_i; shear is handled by its own term
    gx = -(forces[0, 0] - forces[1, 0])
    gy = -(forces[0, 1] - forces[1, 1])
    fshear = nu * (math.sin(2.0 * math.pi * q[0, 0] / box) - math.sin(2.0 * math.pi * q[1, 0] / box))
    radial = 0.5 * (gx * rx + (gy - fshear) * ry) / r + 1.0 / (beta * r)
    return r + psi2 / beta + radial * psi1, 0


@njit(cache=True, nogil=True)
def run_dimer(
    q, bond, gauss, dt, beta, box, nu,
    h, r0, delta_r, sol_id, eps, sigma, rcut,
    phi, grid_dr,
    forces, out,
):
    """Euler-Maruyama chunk of the sheared dimer.

    ``q``, ``bond`` (unwrapped q_1 - q_0, updated from the per-step
    displacement increments) and ``forces`` are state, updated in place;
    ``forces`` must hold the potential forces of the incoming state.
    Records per step: bond length, modified length.  Returns (first bad
    step, clamp count beyond the profile grid).
    """
    n = q.shape[0]
    noise = math.sqrt(2.0 * dt / beta)
    two_pi = 2.0 * math.pi
    warn = 0
    bad = -1
    for k in range(gauss.shape[0]):
        for i in range(n):
            fy = nu * math.sin(two_pi * q[i, 0] / box)
            dx = forces[i, 0] * dt + noise * gauss[k, 2 * i]
            dy = (forces[i, 1] + fy) * dt + noise * gauss[k, 2 * i + 1]
            if i == 0:
                bond[0] -= dx
                bond[1] -= dy
            elif i == 1:
                bond[0] += dx
                bond[1] += dy
            qx = q[i, 0] + dx
            qy = q[i, 1] + dy
            q[i, 0] = qx - box * math.floor(qx / box)
            q[i, 1] = qy - box * math.floor(qy / box)
        dimer_forces(q, forces, bond, box, h, r0, delta_r, sol_id, eps, sigma, rcut)
        val, clipped = _dimer_modified(q, forces, bond, box, beta, nu, phi, grid_dr)
        warn += clipped
        out[k, 0] = math.sqrt(bond[0] * bond[0] + bond[1] * bond[1])
        out[k, 1] = val
        ok = math.isfinite(bond[0]) and math.isfinite(bond[1])
        for i in range(n):
            if not (math.isfinite(q[i, 0]) and math.isfinite(q[i, 1])):
                ok = False
        if not ok:
            bad = k
            break
    return bad, warn
