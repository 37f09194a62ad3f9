"""Coherence-minimizing preconditioners and improvement certificates.

Given a unit-norm frame Phi, the central program minimizes the largest
off-diagonal entry q of the Gram matrix Phi^T X Phi over positive
semidefinite X with unit diagonal Gram (``build_c1``), optionally under
two-sided eigenvalue bounds on X (``build_c2``).  The preconditioner G with
G^T G = X is read off by Cholesky (``extract_preconditioner``).

``certificate_feasibility`` decides, through a small linear program, whether
the identity is already optimal: the multiplier system over the active pairs
is solvable exactly when no strict coherence decrease exists, so an
infeasible system certifies that a better preconditioner is out there.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import conic
from .frames import Frame, InvalidShape, ZeroCoherence, coherence, welch_bound
from .numerics import NotPositiveDefinite, RankDeficient, cholesky, svd

__all__ = [
    "InvalidBounds",
    "NearSingularXWarning",
    "PreconditionResult",
    "CertificateSystem",
    "build_c1",
    "build_c2",
    "solve_coherence",
    "diagonal_lp",
    "squared_span_dimension",
    "extract_preconditioner",
    "nearest_tight_frame",
    "compose_tight_preconditioner",
    "active_sets",
    "certificate_feasibility",
]

ACTIVE_SET_TOL = 1e-6
CERTIFICATE_TOL = 1e-7


class InvalidBounds(ValueError):
    """Eigenvalue bounds are inconsistent with a unit-norm frame."""


class NearSingularXWarning(RuntimeWarning):
    """Optimal X sits on the PSD boundary; the factor was jittered."""


@dataclass
class PreconditionResult:
    X: np.ndarray
    G: np.ndarray
    q: float                      # solver objective: achieved coherence
    verified_coherence: float     # mu(G Phi) recomputed from the factor
    coherence_before: float
    duals: dict                   # z_ii (unit-norm rows), z_ij, z_ji (pair rows)
    active_pos: list              # D+ pairs at the optimum
    active_neg: list              # D- pairs
    condition_number: float       # kappa(G)
    jitter: float                 # amount added to X before factorization
    solution: conic.ConicSolution


@dataclass
class CertificateSystem:
    """Multiplier feasibility system over the active pairs at (I, mu).

    Variables: one free scalar per column (unit-norm rows), one nonnegative
    scalar per active pair; constraints: the weighted rank-one/rank-two sum
    must vanish entrywise while the active-pair weights sum to one.  The
    verdict key is the minimized maximum entry violation.
    """

    active_pos: list
    active_neg: list
    feasible: bool
    max_violation: float
    witness: dict | None          # r_ii, r_ij, r_ji on success


def _require_unit_norm(frame: Frame) -> Frame:
    if not frame.unit_norm:
        warnings.warn("frame columns are not unit norm; normalizing before building", RuntimeWarning, stacklevel=3)
        return frame.normalized()
    return frame


def _pair_list(n: int) -> np.ndarray:
    iu = np.triu_indices(n, k=1)
    return np.column_stack(iu)


def build_c1(frame: Frame) -> conic.ConicProblem:
    """Coherence program for ``frame``: M unit-diagonal rows plus M(M-1)
    slack rows bounding the off-diagonal Gram entries by +/- q."""
    frame = _require_unit_norm(frame)
    phi = frame.matrix
    m, big_m = phi.shape
    if big_m < 2:
        raise InvalidShape("need at least two columns")
    pairs = _pair_list(big_m)
    n_pairs = len(pairs)
    k = big_m + 2 * n_pairs

    u = np.zeros((k, m))
    v = np.zeros((k, m))
    alpha = np.zeros(k)
    q_col = np.zeros(k)
    rhs = np.zeros(k)

    u[:big_m] = phi.T
    v[:big_m] = phi.T
    alpha[:big_m] = 1.0
    rhs[:big_m] = 1.0
    for offset, sign in ((big_m, 1.0), (big_m + n_pairs, -1.0)):
        sl = slice(offset, offset + n_pairs)
        u[sl] = phi[:, pairs[:, 0]].T
        v[sl] = phi[:, pairs[:, 1]].T
        alpha[sl] = sign
        q_col[sl] = -1.0

    gram_off = np.einsum("mk,mk->k", phi[:, pairs[:, 0]], phi[:, pairs[:, 1]])
    primal = {
        "psd": [np.eye(m)],
        "lin": np.concatenate(
            [[1.0], np.maximum(1.0 - gram_off, 1e-3), np.maximum(1.0 + gram_off, 1e-3)]
        ),
    }
    # exactly dual-feasible interior point: unit multipliers on the diagonal
    # rows, 1/M^2 on every pair row, giving dual slack Phi Phi^T on the
    # matrix block
    dual = {
        "y": np.concatenate([-np.ones(big_m), -np.full(2 * n_pairs, 1.0 / big_m**2)]),
        "psd": [phi @ phi.T],
        "lin": np.concatenate([[1.0 / big_m], np.full(2 * n_pairs, 1.0 / big_m**2)]),
    }
    return conic.ConicProblem(
        psd_dim=m,
        rhs=rhs,
        row_u=u,
        row_v=v,
        row_alpha=alpha,
        row_q=q_col,
        slack_rows=np.arange(big_m, k),
        diag_rows=np.arange(big_m),
        pair_pos_rows=np.arange(big_m, big_m + n_pairs),
        pair_neg_rows=np.arange(big_m + n_pairs, k),
        pair_index=pairs,
        primal_start=primal,
        dual_start=dual,
    )


def build_c2(frame: Frame, t1: float, t2: float) -> conic.ConicProblem:
    """Coherence program with the eigenvalue box t2 I <= X <= t1 I.

    A unit-norm frame forces every feasible X to satisfy min eig <= 1 <=
    max eig, so t2 > 1 or t1 < 1 is infeasible and t2 = 1 or t1 = 1 pins
    X = I (the program degenerates to a linear one in the slacks).
    """
    if not (np.isfinite(t1) and np.isfinite(t2) and t1 >= t2 > 0):
        raise InvalidBounds(f"need finite t1 >= t2 > 0, got t1={t1}, t2={t2}")
    frame = _require_unit_norm(frame)
    if t2 > 1.0 or t1 < 1.0:
        raise InvalidBounds(
            f"unit-norm rows force min eig(X) <= 1 <= max eig(X); bounds ({t1}, {t2}) are infeasible"
        )
    prob = build_c1(frame)
    if t2 == 1.0 or t1 == 1.0:
        bounds = (1.0, 1.0)
    else:
        bounds = (float(t1), float(t2))
    prob.eig_bounds = bounds
    return prob


def _finish(frame: Frame, sol: conic.ConicSolution, tau: float) -> PreconditionResult:
    phi = frame.matrix
    big_m = phi.shape[1]
    n_pairs = big_m * (big_m - 1) // 2
    g, jitter = extract_preconditioner(sol.X)
    if jitter > 0.0:
        warnings.warn(
            f"optimal X is nearly singular; Cholesky jittered by {jitter:.2e}",
            NearSingularXWarning,
            stacklevel=3,
        )
    mapped = g @ phi
    verified = coherence(Frame(mapped))
    pos, neg = active_sets(frame, sol.X, sol.q, tau)
    duals = {
        "z_ii": -sol.y[:big_m],
        "z_ij": -sol.y[big_m : big_m + n_pairs],
        "z_ji": -sol.y[big_m + n_pairs :],
    }
    sing = np.linalg.svd(g, compute_uv=False)
    return PreconditionResult(
        X=sol.X,
        G=g,
        q=sol.q,
        verified_coherence=verified,
        coherence_before=coherence(frame),
        duals=duals,
        active_pos=pos,
        active_neg=neg,
        condition_number=float(sing[0] / sing[-1]),
        jitter=jitter,
        solution=sol,
    )


def solve_coherence(
    frame: Frame,
    settings: conic.SolverSettings = conic.SolverSettings(),
    bounds: tuple[float, float] | None = None,
    active_tol: float = ACTIVE_SET_TOL,
) -> PreconditionResult:
    """End-to-end coherence minimization: build, solve, factor, verify."""
    frame = _require_unit_norm(frame)
    prob = build_c2(frame, *bounds) if bounds is not None else build_c1(frame)
    sol = conic.solve(prob, settings)
    return _finish(frame, sol, active_tol)


def diagonal_lp(
    frame: Frame,
    settings: conic.SolverSettings = conic.SolverSettings(),
    active_tol: float = ACTIVE_SET_TOL,
) -> PreconditionResult:
    """Coherence minimization over diagonal X only (a linear program).

    The interior-point iterates keep every diagonal entry strictly positive,
    so the optimal scaling is always invertible up to boundary jitter.
    """
    frame = _require_unit_norm(frame)
    prob = build_c1(frame)
    prob.diagonal = True
    prob.primal_start = None   # the matrix start does not apply in diagonal mode
    prob.dual_start = None
    sol = conic.solve(prob, settings)
    return _finish(frame, sol, active_tol)


def squared_span_dimension(frame: Frame) -> int:
    """Dimension of span{(phi_1i^2, ..., phi_mi^2)}_i.

    Equal to m exactly when no diagonal preconditioner other than the
    identity keeps the frame unit norm, i.e. when ``diagonal_lp`` cannot
    improve coherence.
    """
    sq = frame.matrix**2
    s = np.linalg.svd(sq, compute_uv=False)
    return int(np.sum(s > 1e-10 * s[0]))


def extract_preconditioner(x: np.ndarray) -> tuple[np.ndarray, float]:
    """Upper-triangular G with G^T G = X, jittering X on the PSD boundary.

    Returns (G, jitter) where jitter is the multiple of the identity that
    had to be added (0.0 for a cleanly positive definite X).
    """
    x = np.asarray(x, dtype=float)
    m = len(x)
    sym = 0.5 * (x + x.T)
    eigs = np.linalg.eigvalsh(sym)
    if eigs[0] < -1e-9 * max(1.0, eigs[-1]):
        raise NotPositiveDefinite(f"min eigenvalue {eigs[0]:.3e} is significantly negative")
    step = 1e-9 * max(np.trace(sym) / m, 1e-12)
    jitter = step if eigs[0] < 1e-9 else 0.0
    for _ in range(16):
        try:
            lower = cholesky(sym + jitter * np.eye(m))
            return lower.T, jitter
        except NotPositiveDefinite:
            jitter = step if jitter == 0.0 else jitter * 10.0
    raise NotPositiveDefinite("jitter escalation failed to reach a positive definite matrix")


def nearest_tight_frame(frame: Frame, alpha: float) -> Frame:
    """Closest alpha-tight frame in Frobenius norm: sqrt(alpha) U V^T from
    the thin SVD of the frame matrix."""
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    u, s, v = svd(frame.matrix)
    if s[-1] <= 1e-12 * s[0]:
        raise RankDeficient("frame matrix is numerically rank deficient")
    return Frame(np.sqrt(alpha) * (u @ v.T))


def compose_tight_preconditioner(g: np.ndarray, frame: Frame) -> tuple[np.ndarray, Frame]:
    """Compose ``g`` with the projection of g Phi onto the nearest
    (M/m)-tight frame, returning (G1, G1 Phi).

    G1 = sqrt(M/m) U Sigma^{-1} U^T g  with  U Sigma V^T = svd(g Phi).
    """
    phi = frame.matrix
    m, big_m = phi.shape
    mapped = np.asarray(g, dtype=float) @ phi
    u, s, v = svd(mapped)
    if s[-1] <= 1e-12 * s[0]:
        raise RankDeficient("preconditioned frame is numerically rank deficient")
    scale = np.sqrt(big_m / m)
    g1 = scale * (u / s) @ u.T @ g
    tight = Frame(scale * (u @ v.T))
    return g1, tight


def active_sets(frame: Frame, x: np.ndarray, q: float, tau: float = ACTIVE_SET_TOL):
    """Pairs (i, j), i < j, whose Gram entry phi_i^T X phi_j sits within tau
    of +q (first list) or -q (second list)."""
    if q <= 0:
        raise ValueError(f"active sets need q > 0, got {q}")
    phi = frame.matrix
    gram = phi.T @ x @ phi
    pairs = _pair_list(phi.shape[1])
    vals = gram[pairs[:, 0], pairs[:, 1]]
    pos = [(int(i), int(j)) for i, j in pairs[vals >= q - tau]]
    neg = [(int(i), int(j)) for i, j in pairs[vals <= -q + tau]]
    return pos, neg


def certificate_feasibility(
    frame: Frame,
    active_pos: list | None = None,
    active_neg: list | None = None,
    tol: float = CERTIFICATE_TOL,
    settings: conic.SolverSettings | None = None,
) -> CertificateSystem:
    """Decide whether the multiplier system over the active pairs at
    (I, mu(Phi)) is solvable.

    Feasible means the identity already attains the optimal coherence (no
    strict decrease exists); infeasible certifies that a strictly better
    preconditioner exists.  The decision minimizes the worst entry violation
    of the matrix equation subject to the pair weights summing to one, with
    free column weights split into positive and negative parts.
    """
    frame = _require_unit_norm(frame)
    mu = coherence(frame)
    if mu <= 1e-12:
        raise ZeroCoherence("orthonormal-type frame: no improvement question arises")
    if active_pos is None or active_neg is None:
        active_pos, active_neg = active_sets(frame, np.eye(frame.m), mu)
    phi = frame.matrix
    m, big_m = phi.shape
    n_pos, n_neg = len(active_pos), len(active_neg)
    tri_r, tri_c = np.triu_indices(m)
    n_entries = len(tri_r)

    def entry_cols(mats):
        return np.array([mat[tri_r, tri_c] for mat in mats]).T if mats else np.zeros((n_entries, 0))

    diag_mats = [np.outer(phi[:, i], phi[:, i]) for i in range(big_m)]
    pos_mats = [0.5 * (np.outer(phi[:, i], phi[:, j]) + np.outer(phi[:, j], phi[:, i])) for i, j in active_pos]
    neg_mats = [0.5 * (np.outer(phi[:, i], phi[:, j]) + np.outer(phi[:, j], phi[:, i])) for i, j in active_neg]

    # columns: a_i, b_i (split free weights), r_ij >= 0, r_ji >= 0
    cols = np.hstack(
        [entry_cols(diag_mats), -entry_cols(diag_mats), entry_cols(pos_mats), -entry_cols(neg_mats)]
    )
    n_vars = cols.shape[1]

    # rows: entry <= t and entry >= -t with exclusive slacks, then the
    # normalization row over the pair weights
    k = 2 * n_entries + 1
    extras = np.zeros((k, n_vars))
    extras[:n_entries] = cols
    extras[n_entries : 2 * n_entries] = -cols
    extras[2 * n_entries, 2 * big_m :] = 1.0
    q_col = np.zeros(k)
    q_col[: 2 * n_entries] = -1.0
    rhs = np.zeros(k)
    rhs[2 * n_entries] = 1.0

    prob = conic.ConicProblem(
        psd_dim=0,
        rhs=rhs,
        row_q=q_col,
        slack_rows=np.arange(2 * n_entries),
        extras=extras,
    )
    if settings is None:
        settings = conic.SolverSettings(gap_tol=1e-9, feas_tol=1e-9, max_iter=300)
    sol = conic.solve(prob, settings)
    if sol.status != conic.SolverStatus.OPTIMAL:
        sol = conic.solve(prob, conic.SolverSettings(gap_tol=1e-8, feas_tol=1e-8, max_iter=400))
        if sol.status != conic.SolverStatus.OPTIMAL:
            raise RuntimeError(f"certificate LP did not converge (status {sol.status})")
    violation = float(sol.q)
    feasible = violation <= tol
    witness = None
    if feasible:
        vals = sol.extras
        witness = {
            "r_ii": vals[:big_m] - vals[big_m : 2 * big_m],
            "r_ij": vals[2 * big_m : 2 * big_m + n_pos],
            "r_ji": vals[2 * big_m + n_pos :],
        }
    return CertificateSystem(
        active_pos=list(active_pos),
        active_neg=list(active_neg),
        feasible=feasible,
        max_violation=violation,
        witness=witness,
    )
