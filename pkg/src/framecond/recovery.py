"""Sparse recovery decoders and preconditioner noise bounds.

Orthogonal matching pursuit greedily selects the column most correlated with
the residual and refits by least squares on the growing support; basis
pursuit minimizes the l1 norm subject to exact data fit, solved as a linear
program by the shared interior-point solver.  Premultiplying the system by a
nonsingular matrix leaves the basis-pursuit solution unchanged but can move
the coherence-based recovery guarantee.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from . import conic
from .frames import Frame
from .numerics import as_matrix, svd

__all__ = [
    "Infeasible",
    "RecoveryResult",
    "omp",
    "basis_pursuit",
    "noise_amplification_bounds",
]

SUPPORT_TOL = 1e-8


class Infeasible(ValueError):
    """Measurement vector lies outside the column span."""


@dataclass
class RecoveryResult:
    estimate: np.ndarray
    support: tuple
    residual_norm: float
    iterations: int
    method: str


def _as_array(a) -> np.ndarray:
    if isinstance(a, Frame):
        return a.matrix
    return as_matrix(a, "a")


def _result(a, y, x, iterations, method) -> RecoveryResult:
    support = tuple(int(i) for i in np.flatnonzero(np.abs(x) > SUPPORT_TOL))
    residual = float(np.linalg.norm(a @ x - y))
    return RecoveryResult(x, support, residual, iterations, method)


def omp(a, y, k_max: int, res_tol: float = 1e-10) -> RecoveryResult:
    """Orthogonal matching pursuit with at most ``k_max`` atoms.

    Column selection uses normalized columns so non-unit norms do not bias
    the correlations; the least-squares refit runs against the original
    columns, so the estimate lives in the caller's coordinates.  Stops when
    the residual drops below ``res_tol`` or the support reaches ``k_max``.
    """
    a = _as_array(a)
    y = np.asarray(y, dtype=float)
    m, big_m = a.shape
    norms = np.linalg.norm(a, axis=0)
    a_sel = a / norms
    residual = y.copy()
    support: list[int] = []
    x = np.zeros(big_m)
    iterations = 0
    for iterations in range(1, min(k_max, m) + 1):
        corr = np.abs(a_sel.T @ residual)
        corr[support] = -1.0   # atoms are never reselected
        best = int(np.argmax(corr))
        if corr[best] <= 1e-14 * (1.0 + np.linalg.norm(residual)):
            iterations -= 1
            break
        support.append(best)
        sub = a[:, support]
        qmat, rmat = np.linalg.qr(sub)
        coef = solve_triangular(rmat, qmat.T @ y, lower=False)
        residual = y - sub @ coef
        if np.linalg.norm(residual) <= res_tol:
            break
    x[support] = coef if support else 0.0
    return _result(a, y, x, iterations, "OMP")


def basis_pursuit(a, y, settings: conic.SolverSettings | None = None) -> RecoveryResult:
    """Minimum-l1 solution of a x = y via the split formulation
    x = u - v, u, v >= 0, minimize sum(u + v).

    Raises Infeasible when y is (numerically) outside the range of ``a``.
    """
    a = _as_array(a)
    y = np.asarray(y, dtype=float)
    m, big_m = a.shape
    if settings is None:
        settings = conic.SolverSettings(gap_tol=1e-9, feas_tol=1e-9, max_iter=300)
    x0 = np.linalg.lstsq(a, y, rcond=None)[0]
    res_norm = float(np.linalg.norm(a @ x0 - y))
    if res_norm > settings.feas_tol * (1.0 + np.linalg.norm(y)) + 1e-9:
        raise Infeasible(f"y lies outside the column span (residual {res_norm:.3e})")

    # row equilibration and a global signal scale leave the minimizer
    # unchanged but keep the LP well conditioned for preconditioned systems
    row_scale = 1.0 / np.maximum(np.linalg.norm(a, axis=1), 1e-300)
    sig_scale = max(np.abs(y).max(), 1e-300)
    a_eq = a * row_scale[:, None]
    y_eq = (y * row_scale) / sig_scale

    # rows: a (u - v) = y, then sum(u + v) - q = 0 so the objective q is l1
    k = m + 1
    extras = np.zeros((k, 2 * big_m))
    extras[:m, :big_m] = a_eq
    extras[:m, big_m:] = -a_eq
    extras[m, :] = 1.0
    q_col = np.zeros(k)
    q_col[m] = -1.0
    rhs = np.concatenate([y_eq, [0.0]])
    prob = conic.ConicProblem(psd_dim=0, rhs=rhs, row_q=q_col, extras=extras)
    sol = conic.solve(prob, settings)
    if sol.status == conic.SolverStatus.NUMERICAL_FAILURE:
        raise RuntimeError("basis pursuit LP failed numerically")
    x = sig_scale * (sol.extras[:big_m] - sol.extras[big_m:])
    return _result(a, y, x, sol.iterations, "BP")


def noise_amplification_bounds(g) -> tuple[float, float, float]:
    """(sigma_min, sigma_max, kappa) of a preconditioner.

    Premultiplying residuals by G scales their norms between sigma_min and
    sigma_max, so kappa bounds the worst-case noise amplification.
    """
    g = as_matrix(g, "g")
    _, s, _ = svd(g)
    return float(s[-1]), float(s[0]), float(s[0] / s[-1])
