"""Spectral Galerkin solver for the kinetic reference Poisson problem.

For one particle on the 2 pi torus with generator

    L0 = (p/m) d_q - v'(q) d_p - (gamma/m) p d_p + gamma beta^-1 d_p^2,

the equation ``-L0 Phi0 = R`` with ``R = p/m`` is solved in a tensor basis of
weighted Fourier modes in position and orthonormal probabilists' Hermite
polynomials in the scaled momentum ``u = p / sqrt(m / beta)``.  The position
factors

    Q_k(q) = exp(beta v(q) / 2) t_k(q) n_k,   t_k in {1, cos jq, sin jq}

carry the inverse square-root Gibbs weight so that they are orthonormal
under the position marginal; the weight cancels identically inside every
matrix element, which keeps all q-integrands smooth and the periodic
trapezoid rule spectrally accurate.

Hermite structure of the generator (s = sqrt(m/beta), h_l orthonormal):

* friction block: diagonal, eigenvalue -(gamma l / m);
* transport (p/m) d_q: raises l with factor (s/m) sqrt(l+1) and lowers it
  with (s/m) sqrt(l), against the derivative matrix P[k',k] = <Q_k', dQ_k/dq>;
* the force term -v' d_p: lowers l with sqrt(l)/s against V[k',k] = <Q_k', v' Q_k>.

The constant mode (k=0, l=0) is excluded; remaining Hermite-degree-0
elements are re-centered by their Gibbs means so the whole space has zero
mean.  Centering changes neither the assembled matrix nor the right-hand
side (the generator annihilates constants and R has zero mean), but it does
enter the projection of derived right-hand sides in :func:`cv_prefactor`.

Outputs: the Green-Kubo mobility ``D = beta a.g``, the small-forcing
variance prefactor ``alpha`` (predicted modified variance ``2 alpha eta^2``),
and a pointwise-evaluable modified observable ``R + L_eta Phi0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .numerics import solve_dense

__all__ = [
    "TensorBasis",
    "GalerkinSolution",
    "cosine_potential",
    "zero_potential",
    "assemble",
    "solve",
    "mobility",
    "cv_prefactor",
    "eval_phi0",
    "eval_modified",
    "cv_blocks",
    "save_coefficients",
]


def cosine_potential():
    """The periodic well v(q) = 1 - cos q and its derivative."""
    return (lambda q: 1.0 - np.cos(q), lambda q: np.sin(q))


def zero_potential():
    """Free particle, v = 0."""
    return (lambda q: np.zeros_like(q), lambda q: np.zeros_like(q))


class TensorBasis:
    """Weighted Fourier (position) x Hermite (momentum) tensor basis.

    ``k_q`` must be odd: modes {1, cos jq, sin jq} for j = 1..(k_q-1)/2.
    ``k_p`` counts Hermite degrees 0..k_p-1.  The flat ordering of the
    solution vector is (k, l) -> k * k_p + l with the (0, 0) slot removed.
    """

    def __init__(self, k_q: int, k_p: int, beta: float, mass: float,
                 potential=None, n_quad: int = 1024):
        if k_q < 1 or k_q % 2 == 0:
            raise ValueError("k_q must be odd and positive")
        if k_p < 2:
            raise ValueError("k_p must be at least 2 (R projects onto Hermite degree 1)")
        if not (beta > 0 and mass > 0):
            raise ValueError("beta and mass must be positive")
        self.k_q = k_q
        self.k_p = k_p
        self.beta = float(beta)
        self.mass = float(mass)
        self.jmax = (k_q - 1) // 2
        self.v, self.vprime = potential if potential is not None else cosine_potential()
        self.s_mom = math.sqrt(self.mass / self.beta)

        q = np.linspace(0.0, 2.0 * np.pi, n_quad, endpoint=False)
        h = 2.0 * np.pi / n_quad
        self._qgrid = q
        vq = np.asarray(self.v(q), dtype=float)
        vpq = np.asarray(self.vprime(q), dtype=float)
        gibbs = np.exp(-self.beta * vq)
        self.z_v = float(h * gibbs.sum())

        t, dt = self._trig_table(q)
        sq_norms = np.full(k_q, np.pi)
        sq_norms[0] = 2.0 * np.pi
        self.norms = np.sqrt(self.z_v / sq_norms)

        w = h / self.z_v  # Gibbs-average quadrature weight (x gibbs where needed)
        tn = t * self.norms[:, None]
        dtn = (0.5 * self.beta * vpq[None, :] * t + dt) * self.norms[:, None]
        # the e^{beta v} from the two basis factors cancels the Gibbs weight
        self.pos_gram = w * tn @ tn.T
        self.deriv_mat = w * tn @ dtn.T          # P[k',k] = <Q_k', dQ_k/dq>
        self.force_mat = w * (tn * vpq) @ tn.T   # V[k',k] = <Q_k', v' Q_k>
        self.means = w * tn @ gibbs ** 0.5       # mu_k = E_pi0[Q_k]

    def _trig_table(self, q: np.ndarray):
        t = np.empty((self.k_q, q.size))
        dt = np.empty((self.k_q, q.size))
        t[0] = 1.0
        dt[0] = 0.0
        for j in range(1, self.jmax + 1):
            t[2 * j - 1] = np.cos(j * q)
            t[2 * j] = np.sin(j * q)
            dt[2 * j - 1] = -j * np.sin(j * q)
            dt[2 * j] = j * np.cos(j * q)
        return t, dt

    @property
    def n_modes(self) -> int:
        return self.k_q * self.k_p - 1

    def mode_indices(self):
        """(k, l) pairs of the flat solution ordering, (0, 0) excluded."""
        return [(k, l) for k in range(self.k_q) for l in range(self.k_p) if (k, l) != (0, 0)]

    def position_factors(self, q: np.ndarray):
        """Q_k(q) and dQ_k/dq at arbitrary points, shape (k_q, len(q))."""
        q = np.atleast_1d(np.asarray(q, dtype=float))
        t, dt = self._trig_table(q)
        vq = np.asarray(self.v(q), dtype=float)
        vpq = np.asarray(self.vprime(q), dtype=float)
        ew = np.exp(0.5 * self.beta * vq)
        qk = ew[None, :] * t * self.norms[:, None]
        qpk = ew[None, :] * (0.5 * self.beta * vpq[None, :] * t + dt) * self.norms[:, None]
        return qk, qpk

    def hermite_table(self, u: np.ndarray, degree: int) -> np.ndarray:
        """Orthonormal Hermite values h_0..h_degree, shape (degree+1, len(u))."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        out = np.empty((degree + 1, u.size))
        out[0] = 1.0
        if degree >= 1:
            out[1] = u
        for l in range(1, degree):
            out[l + 1] = (u * out[l] - math.sqrt(l) * out[l - 1]) / math.sqrt(l + 1.0)
        return out


@dataclass
class GalerkinSolution:
    """Solved coefficients of Phi0 in the tensor basis plus RHS projections."""

    basis: TensorBasis
    coeffs: np.ndarray
    rhs: np.ndarray
    matrix: np.ndarray = field(repr=False)

    def coeff_array(self) -> np.ndarray:
        """Coefficients as a (k_q, k_p) array with the excluded slot at zero."""
        a = np.zeros((self.basis.k_q, self.basis.k_p))
        for idx, (k, l) in enumerate(self.basis.mode_indices()):
            a[k, l] = self.coeffs[idx]
        return a


def assemble(basis: TensorBasis, gamma: float):
    """Rigidity matrix B[i,j] = <e_i, -L0 e_j> and projections g_i = <e_i, p/m>."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    m = basis.mass
    s = basis.s_mom
    modes = basis.mode_indices()
    n = len(modes)
    b = np.zeros((n, n))
    g = np.zeros(n)
    p_mat, v_mat = basis.deriv_mat, basis.force_mat
    for i, (k_i, l_i) in enumerate(modes):
        for j, (k_j, l_j) in enumerate(modes):
            val = 0.0
            if l_i == l_j + 1:
                val = math.sqrt(l_j + 1.0) * (s / m) * p_mat[k_i, k_j]
            elif l_i == l_j - 1:
                val = math.sqrt(l_j) * ((s / m) * p_mat[k_i, k_j] - v_mat[k_i, k_j] / s)
            if l_i == l_j and k_i == k_j:
                val -= gamma * l_j / m
            b[i, j] = -val
        if l_i == 1:
            g[i] = (s / m) * basis.means[k_i]
    return b, g


def solve(basis: TensorBasis, gamma: float) -> GalerkinSolution:
    """Assemble and solve the square Galerkin system for Phi0."""
    b, g = assemble(basis, gamma)
    a = solve_dense(b, g)
    return GalerkinSolution(basis=basis, coeffs=a, rhs=g, matrix=b)


def mobility(sol: GalerkinSolution) -> float:
    """Green-Kubo mobility D = beta <R, Phi0> = beta a.g."""
    return float(sol.basis.beta * sol.coeffs @ sol.rhs)


def cv_prefactor(sol: GalerkinSolution) -> float:
    """Small-forcing variance prefactor alpha = <Pi0 A R, -L0^-1 Pi0 A R>.

    ``A R = d_p Phi0`` (up to sign, which cancels in the quadratic form) is
    expanded analytically by Hermite lowering, re-centered, projected, and
    fed through a second Galerkin solve.  The predicted asymptotic variance
    of the modified observable at forcing eta is ``2 alpha eta^2``.
    """
    basis = sol.basis
    s = basis.s_mom
    a = sol.coeff_array()
    lowered = np.zeros_like(a)  # coefficients of d_p Phi0 on the full tensor set
    for l in range(basis.k_p - 1):
        lowered[:, l] = math.sqrt(l + 1.0) / s * a[:, l + 1]
    mean_ar = float(basis.means @ lowered[:, 0])
    rhs = np.empty(basis.n_modes)
    for idx, (k, l) in enumerate(basis.mode_indices()):
        rhs[idx] = lowered[k, l] - (basis.means[k] * mean_ar if l == 0 else 0.0)
    c = solve_dense(sol.matrix, rhs)
    return float(c @ rhs)


def eval_phi0(sol: GalerkinSolution, q, p) -> np.ndarray:
    """Pointwise Phi0 (no re-centering constant; it never enters L Phi0)."""
    basis = sol.basis
    qk, _ = basis.position_factors(q)
    herm = basis.hermite_table(np.atleast_1d(p) / basis.s_mom, basis.k_p - 1)
    a = sol.coeff_array()
    return np.einsum("kl,kx,lx->x", a, qk, herm)


def cv_blocks(sol: GalerkinSolution, gamma: float, eta: float):
    """Coefficient blocks (d1, d2, d3) of L_eta Phi0 for fast pointwise use.

        L_eta Phi0 (q, p) = Q'(q) . (d1 h) + Q(q) . (d2 h) + v'(q) Q(q) . (d3 h)

    with h the Hermite values of degrees 0..k_p.  d2 already folds in
    ``eta`` times the momentum-lowering block.
    """
    basis = sol.basis
    s, m = basis.s_mom, basis.mass
    a = sol.coeff_array()
    kq, kp = basis.k_q, basis.k_p
    d1 = np.zeros((kq, kp + 1))
    dfr = np.zeros((kq, kp + 1))
    d3 = np.zeros((kq, kp + 1))
    for j in range(kp + 1):
        if 1 <= j <= kp:
            d1[:, j] += math.sqrt(j) * (s / m) * a[:, j - 1]
        if j + 1 <= kp - 1:
            d1[:, j] += math.sqrt(j + 1.0) * (s / m) * a[:, j + 1]
            d3[:, j] = -math.sqrt(j + 1.0) / s * a[:, j + 1]
        if j <= kp - 1:
            dfr[:, j] = -gamma * j / m * a[:, j]
    return d1, dfr - eta * d3, d3


def eval_modified(sol: GalerkinSolution, q, p, gamma: float, eta: float) -> np.ndarray:
    """Modified observable R + L_eta Phi0 = p/m + sum_m a_m (L0 + eta d_p) e_m."""
    basis = sol.basis
    q = np.atleast_1d(np.asarray(q, dtype=float))
    p = np.atleast_1d(np.asarray(p, dtype=float))
    d1, d2, d3 = cv_blocks(sol, gamma, eta)
    qk, qpk = basis.position_factors(q)
    herm = basis.hermite_table(p / basis.s_mom, basis.k_p)
    vp = np.asarray(basis.vprime(q), dtype=float)
    out = (
        np.einsum("kx,kl,lx->x", qpk, d1, herm)
        + np.einsum("kx,kl,lx->x", qk, d2, herm)
        + vp * np.einsum("kx,kl,lx->x", qk, d3, herm)
    )
    return p / basis.mass + out


def save_coefficients(sol: GalerkinSolution, path) -> None:
    """CSV dump of the solved coefficients, columns k,l,a."""
    with open(path, "w", newline="\n") as fh:
        fh.write("k,l,a\n")
        for idx, (k, l) in enumerate(sol.basis.mode_indices()):
            fh.write(f"{k},{l},{sol.coeffs[idx]:.17g}\n")
