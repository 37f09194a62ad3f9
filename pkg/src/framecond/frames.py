"""Frame data type, generators, and scalar frame metrics.

A frame is an m x M real matrix (m <= M) whose columns span R^m.  Everything
here is a pure function of its inputs; ``Frame`` values are treated as
immutable after construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .numerics import as_matrix, sym_eig, svd

__all__ = [
    "InvalidShape",
    "SingleColumn",
    "ZeroCoherence",
    "SingularG",
    "Frame",
    "FrameReport",
    "random_gaussian_frame",
    "coherence",
    "coherence_pair",
    "welch_bound",
    "frame_report",
    "recovery_bound",
    "rip_constant_estimate",
    "verify_unit_norm_mapping",
    "mercedes_benz_frame",
    "dirac_hadamard_frame",
]

UNIT_NORM_TOL = 1e-8


class InvalidShape(ValueError):
    """Frame dimensions violate 1 <= m <= M (or an op-specific shape rule)."""


class SingleColumn(ValueError):
    """Coherence needs at least two columns."""


class ZeroCoherence(ValueError):
    """An operation is undefined (or infinite) at coherence zero."""


class SingularG(ValueError):
    """Preconditioner is numerically singular."""


@dataclass(frozen=True)
class Frame:
    """m x M matrix whose columns are the frame elements.

    Invariants checked at construction: finite entries, m <= M, no zero
    column (norm > 1e-12), and full row rank m.
    """

    matrix: np.ndarray
    unit_norm: bool = field(init=False)

    def __post_init__(self):
        mat = as_matrix(self.matrix, "frame matrix")
        m, big_m = mat.shape
        if m > big_m:
            raise InvalidShape(f"frame needs m <= M, got {m} x {big_m}")
        norms = np.linalg.norm(mat, axis=0)
        if norms.min() <= 1e-12:
            raise InvalidShape("frame has a (near-)zero column")
        if np.linalg.matrix_rank(mat) < m:
            raise InvalidShape("frame matrix is row-rank deficient; columns do not span R^m")
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "unit_norm", bool(np.abs(norms - 1.0).max() <= UNIT_NORM_TOL))

    @property
    def m(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_vectors(self) -> int:
        return self.matrix.shape[1]

    def column_norms(self) -> np.ndarray:
        return np.linalg.norm(self.matrix, axis=0)

    def normalized(self) -> "Frame":
        """Copy with columns scaled to unit norm."""
        return Frame(self.matrix / self.column_norms())

    def gram(self) -> np.ndarray:
        return self.matrix.T @ self.matrix


@dataclass(frozen=True)
class FrameReport:
    """Scalar summary of a frame: coherence, bounds, potential, tightness."""

    coherence: float
    coherence_pair: tuple[int, int]
    welch_bound: float
    frame_potential: float
    tight_defect: float
    equiangular: bool
    frame_bounds: tuple[float, float]
    unit_norm: bool


def random_gaussian_frame(m: int, n_vectors: int, seed: int) -> Frame:
    """Column-normalized i.i.d. standard-normal frame, deterministic per seed."""
    if m < 1 or m > n_vectors:
        raise InvalidShape(f"need 1 <= m <= M, got m={m}, M={n_vectors}")
    rng = np.random.default_rng(seed)
    mat = rng.standard_normal((m, n_vectors))
    mat /= np.linalg.norm(mat, axis=0)
    return Frame(mat)


def _offdiag_abs_gram(frame: Frame) -> np.ndarray:
    """|inner products| of normalized columns, strict upper triangle as a matrix."""
    mat = frame.matrix / frame.column_norms()
    g = np.abs(mat.T @ mat)
    return np.triu(g, k=1)


def coherence_pair(frame: Frame) -> tuple[float, tuple[int, int]]:
    """Coherence together with the lexicographically smallest argmax pair (i, j)."""
    if frame.n_vectors < 2:
        raise SingleColumn("coherence needs at least two columns")
    tri = _offdiag_abs_gram(frame)
    mu = float(tri.max())
    # argmax scans row-major, which is already lexicographic in (i, j)
    i, j = np.unravel_index(int(np.argmax(tri)), tri.shape)
    return min(mu, 1.0), (int(i), int(j))


def coherence(frame: Frame) -> float:
    """Largest |<phi_i, phi_j>| / (||phi_i|| ||phi_j||) over distinct columns."""
    return coherence_pair(frame)[0]


def welch_bound(m: int, n_vectors: int) -> float:
    """sqrt((M - m) / (m (M - 1))): the coherence floor for unit-norm frames."""
    if m < 1 or n_vectors < m or n_vectors < 2:
        raise InvalidShape(f"need M >= m >= 1 and M >= 2, got m={m}, M={n_vectors}")
    if n_vectors == m:
        return 0.0
    return math.sqrt((n_vectors - m) / (m * (n_vectors - 1)))


def frame_report(frame: Frame) -> FrameReport:
    """All scalar metrics in one pass.

    ``tight_defect`` is ||Phi Phi^T - A I||_F with A = M/m for unit-norm
    input and A = trace(Phi Phi^T)/m otherwise (the Frobenius-optimal
    constant).  ``equiangular`` holds when the off-diagonal |Gram| entries
    are constant within 1e-8.
    """
    mat = frame.matrix
    m, big_m = mat.shape
    mu, pair = coherence_pair(frame)
    gram = mat.T @ mat
    fp = float(np.linalg.norm(gram) ** 2)
    frame_op = mat @ mat.T
    tight_a = big_m / m if frame.unit_norm else float(np.trace(frame_op)) / m
    tight_defect = float(np.linalg.norm(frame_op - tight_a * np.eye(m)))
    offdiag = np.abs(gram[np.triu_indices(big_m, k=1)])
    equiangular = bool(offdiag.max() - offdiag.min() <= 1e-8)
    eigs = np.linalg.eigvalsh(frame_op)
    return FrameReport(
        coherence=mu,
        coherence_pair=pair,
        welch_bound=welch_bound(m, big_m),
        frame_potential=fp,
        tight_defect=tight_defect,
        equiangular=equiangular,
        frame_bounds=(float(eigs[0]), float(eigs[-1])),
        unit_norm=frame.unit_norm,
    )


def recovery_bound(mu: float) -> float:
    """Strict sparsity bound (1/2)(1 + 1/mu) below which recovery is unique."""
    if mu <= 0:
        raise ZeroCoherence("bound is infinite at zero coherence")
    if mu > 1:
        raise ValueError(f"coherence cannot exceed 1, got {mu}")
    return 0.5 * (1.0 + 1.0 / mu)


def rip_constant_estimate(mu: float, k: int) -> tuple[float, bool]:
    """Restricted-isometry constant estimate (k-1) mu of order k.

    Also reports whether the estimate sits below sqrt(2) - 1, the threshold
    under which l1 recovery of k/2-sparse signals is guaranteed.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not 0.0 <= mu <= 1.0:
        raise ValueError(f"mu must lie in [0, 1], got {mu}")
    delta = (k - 1) * mu
    return delta, bool(delta < math.sqrt(2.0) - 1.0)


def verify_unit_norm_mapping(g, frame: Frame, tol: float = UNIT_NORM_TOL) -> tuple[bool, float]:
    """Check that x -> G x maps every frame column to a unit-norm vector.

    Runs the direct norm test and the equivalent spectral test (the
    eigenvalue-minus-one vector of G^T G must be orthogonal to the span of
    the squared eigenbasis coordinates of the columns) and insists the two
    agree.  Returns (verdict, max deviation of ||G phi_i|| from 1).
    """
    g = as_matrix(g, "g")
    m = frame.m
    if g.shape != (m, m):
        raise InvalidShape(f"G must be {m} x {m}, got {g.shape}")
    _, s, _ = svd(g)
    if s[-1] <= 1e-10 * s[0]:
        raise SingularG("G is numerically singular")
    mapped = g @ frame.matrix
    norms = np.linalg.norm(mapped, axis=0)
    residual = float(np.abs(norms - 1.0).max())
    direct = residual <= tol

    evals, evecs = sym_eig(g.T @ g)
    coords_sq = (evecs.T @ frame.matrix) ** 2   # (j, i) = <phi_i, e_j>^2
    spectral_residual = float(np.abs(coords_sq.T @ (evals - 1.0)).max())
    spectral = spectral_residual <= 2.0 * tol
    # Both criteria compute ||G phi_i||^2 - 1, so they may disagree only by
    # rounding; treat disagreement beyond that as an internal error.
    if direct != spectral and abs(spectral_residual - residual) > 10.0 * tol:
        raise AssertionError(
            f"norm test ({residual:.3e}) and spectral test ({spectral_residual:.3e}) disagree"
        )
    return direct, residual


def mercedes_benz_frame() -> Frame:
    """Three unit vectors in R^2 at mutual 120-degree angles (an ETF)."""
    angles = np.array([np.pi / 2, np.pi / 2 + 2 * np.pi / 3, np.pi / 2 + 4 * np.pi / 3])
    return Frame(np.vstack([np.cos(angles), np.sin(angles)]))


def dirac_hadamard_frame(m: int) -> Frame:
    """Identity next to a scaled Hadamard basis: 2m unit vectors with coherence 1/sqrt(m).

    Requires m to be a power of two (Sylvester construction).
    """
    if m < 1 or (m & (m - 1)) != 0:
        raise InvalidShape(f"m must be a power of two, got {m}")
    h = np.ones((1, 1))
    while h.shape[0] < m:
        h = np.block([[h, h], [h, -h]])
    return Frame(np.hstack([np.eye(m), h / math.sqrt(m)]))
