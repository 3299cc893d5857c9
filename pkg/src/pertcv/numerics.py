"""Deterministic numerical kernels shared by the physics modules.

Composite 1D quadratures, cumulative integrals, dense linear solves with a
backward-error check, and the explicit matrix algebra of the thermostatted
harmonic chain (the Lyapunov identity that the closed-form chain control
variate rests on).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Grid1D",
    "SingularMatrixError",
    "ConditioningWarning",
    "quad_trapezoid",
    "quad_simpson",
    "cumulative_trapezoid",
    "solve_dense",
    "chain_drift_matrix",
    "chain_lyapunov_solution",
    "lyapunov_residual",
]


class SingularMatrixError(np.linalg.LinAlgError):
    """Raised when a dense solve meets an exactly singular matrix."""


class ConditioningWarning(UserWarning):
    """Emitted when a dense solve fails its backward-error bound."""


@dataclass(frozen=True)
class Grid1D:
    """Strictly increasing 1D grid of at least two nodes."""

    nodes: np.ndarray
    uniform: bool = field(init=False)

    def __post_init__(self):
        nodes = np.ascontiguousarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2:
            raise ValueError("grid needs at least two nodes in a 1D array")
        if not np.all(np.isfinite(nodes)):
            raise ValueError("grid nodes must be finite")
        if not np.all(np.diff(nodes) > 0):
            raise ValueError("grid nodes must be strictly increasing")
        object.__setattr__(self, "nodes", nodes)
        h = np.diff(nodes)
        # spacing of a uniform grid jitters by a few ulps of the node magnitude
        tol = 32.0 * np.finfo(float).eps * max(1.0, float(np.abs(nodes).max()))
        object.__setattr__(self, "uniform", bool(np.all(np.abs(h - h[0]) <= tol)))

    @staticmethod
    def uniform_grid(a: float, b: float, n_nodes: int) -> "Grid1D":
        return Grid1D(np.linspace(a, b, n_nodes))

    @property
    def spacing(self) -> float:
        if not self.uniform:
            raise ValueError("spacing is only defined for uniform grids")
        return float(self.nodes[1] - self.nodes[0])

    def __len__(self) -> int:
        return self.nodes.size


def _sample(f, grid: Grid1D) -> np.ndarray:
    values = np.asarray(f(grid.nodes), dtype=float) if callable(f) else np.asarray(f, dtype=float)
    if values.shape != grid.nodes.shape:
        raise ValueError("sampled values must match the grid shape")
    if not np.all(np.isfinite(values)):
        raise ValueError("integrand produced non-finite samples")
    return values


def quad_trapezoid(f, grid: Grid1D) -> float:
    """Composite trapezoid rule of ``f`` (callable or samples) on ``grid``."""
    values = _sample(f, grid)
    return float(np.trapezoid(values, grid.nodes))


def quad_simpson(f, grid: Grid1D) -> float:
    """Composite Simpson rule; requires a uniform grid with an odd node count."""
    values = _sample(f, grid)
    if not grid.uniform:
        raise ValueError("Simpson rule requires a uniform grid")
    n = len(grid)
    if n % 2 == 0:
        raise ValueError("Simpson rule requires an odd number of nodes")
    h = grid.spacing
    return float(h / 3.0 * (values[0] + values[-1] + 4.0 * values[1:-1:2].sum() + 2.0 * values[2:-2:2].sum()))


def cumulative_trapezoid(values, grid: Grid1D) -> np.ndarray:
    """Running trapezoid integral along the grid; output[0] is 0."""
    v = _sample(values, grid)
    out = np.empty_like(v)
    out[0] = 0.0
    np.cumsum(0.5 * np.diff(grid.nodes) * (v[1:] + v[:-1]), out=out[1:])
    return out


def solve_dense(a: np.ndarray, b: np.ndarray, residual_rtol: float = 1e-10) -> np.ndarray:
    """Solve ``a @ x = b`` by LU with partial pivoting (LAPACK).

    The backward error ``||a x - b||_inf`` is checked against
    ``residual_rtol * (||a||_inf ||x||_inf + ||b||_inf)``; a
    :class:`ConditioningWarning` is emitted if it fails.  An exactly singular
    matrix raises :class:`SingularMatrixError`.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("matrix and right-hand side must be finite")
    try:
        x = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(str(exc)) from exc
    residual = np.linalg.norm(a @ x - b, ord=np.inf)
    scale = np.linalg.norm(a, ord=np.inf) * np.linalg.norm(x, ord=np.inf) + np.linalg.norm(b, ord=np.inf)
    if residual > residual_rtol * scale:
        warnings.warn(
            f"dense solve residual {residual:.3e} exceeds {residual_rtol:.1e} * {scale:.3e}",
            ConditioningWarning,
            stacklevel=2,
        )
    return x


def _shift_matrix(dim: int) -> np.ndarray:
    """Upper shift matrix J (ones on the first superdiagonal)."""
    return np.eye(dim, k=1)


def chain_drift_matrix(n_particles: int, nu: float) -> np.ndarray:
    """Drift matrix ``A = nu (J - J^T) - S`` of the harmonic chain.

    The state ordering is ``(p_1, m w (r_1 - rhat), p_2, ..., p_N)`` in
    dimension ``2N - 1``; ``S`` flags the two thermostatted momenta.
    """
    if n_particles < 2:
        raise ValueError("the chain needs at least two particles")
    dim = 2 * n_particles - 1
    j = _shift_matrix(dim)
    s = np.zeros((dim, dim))
    s[0, 0] = s[-1, -1] = 1.0
    return nu * (j - j.T) - s


def chain_lyapunov_solution(n_particles: int, nu: float) -> np.ndarray:
    """Closed-form symmetric ``K = -(nu (J + J^T) + R) / (2 (1 + nu^2))``."""
    dim = 2 * n_particles - 1
    j = _shift_matrix(dim)
    r = np.zeros((dim, dim))
    r[0, 0], r[-1, -1] = 1.0, -1.0
    return -(nu * (j + j.T) + r) / (2.0 * (1.0 + nu**2))


def lyapunov_residual(n_particles: int, nu: float) -> float:
    """Max-norm residual of ``A^T K + K A = R`` for the harmonic chain."""
    if nu <= 0:
        raise ValueError("nu must be positive")
    dim = 2 * n_particles - 1
    a = chain_drift_matrix(n_particles, nu)
    k = chain_lyapunov_solution(n_particles, nu)
    r = np.zeros((dim, dim))
    r[0, 0], r[-1, -1] = 1.0, -1.0
    return float(np.abs(a.T @ k + k @ a - r).max())
