"""Dense linear-algebra kernels: Cholesky log-determinants and PSD matrix powers.

Everything here works on small square matrices (batch-by-batch grams or the
dual gram of a low-rank factor), never on the full item-by-item matrix.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .exceptions import InvalidInputError, NotPositiveDefiniteError
from .validation import as_float_matrix, check_symmetric

#: Relative floor under which eigenvalues are treated as numerically zero.
EIGEN_FLOOR = 1e-12

#: Eigenvalues may undershoot zero by this much before we call a matrix not PSD.
PSD_SLACK = 1e-9


def chol_logdet(m):
    """log det of a symmetric positive-definite matrix via Cholesky.

    The determinant is the squared product of the Cholesky diagonal, so the
    log-determinant is twice the sum of its logs - no overflow for any size
    we care about.
    """
    m = check_symmetric(m, "matrix")
    if m.shape[0] == 0:
        return 0.0
    try:
        chol = scipy.linalg.cholesky(m, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"matrix is not positive definite: {exc}") from None
    return float(2.0 * np.sum(np.log(np.diag(chol))))


def chol_solve(m, rhs):
    """Solve ``m x = rhs`` for SPD ``m`` through one factorization and two triangular solves."""
    m = check_symmetric(m, "matrix")
    rhs = np.asarray(rhs, dtype=np.float64)
    if rhs.shape[0] != m.shape[0]:
        raise InvalidInputError(
            f"rhs has leading dimension {rhs.shape[0]}, expected {m.shape[0]}"
        )
    if m.shape[0] == 0:
        return rhs.copy()
    try:
        factor = scipy.linalg.cho_factor(m, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"matrix is not positive definite: {exc}") from None
    return scipy.linalg.cho_solve(factor, rhs, check_finite=False)


def truncated_psd_eig(m, rank=None, floor=EIGEN_FLOOR):
    """Eigenpairs of a symmetric PSD matrix, largest first, truncated.

    Keeps at most ``rank`` eigenpairs and drops anything below
    ``floor * max_eigenvalue``. Raises when the spectrum dips meaningfully
    below zero.
    """
    m = check_symmetric(m, "matrix")
    n = m.shape[0]
    if n == 0:
        return np.empty(0), np.empty((0, 0))
    vals, vecs = np.linalg.eigh(m)
    vals = vals[::-1]
    vecs = vecs[:, ::-1]
    top = float(vals[0])
    if top < 0 and abs(top) <= PSD_SLACK:
        top = 0.0
    tol = PSD_SLACK * max(1.0, top)
    if float(vals[-1]) < -tol:
        raise NotPositiveDefiniteError(
            f"matrix has eigenvalue {vals[-1]:.3e}, below the PSD tolerance"
        )
    keep = vals > floor * max(top, 0.0)
    if rank is not None:
        keep &= np.arange(n) < rank
    return vals[keep], vecs[:, keep]


def default_power_rank(n):
    """Truncation rank used for matrix powers when the caller does not pick one."""
    return n - 1 if n <= 1000 else 100


def matrix_power(m, p, rank=None):
    """``m ** p`` for symmetric PSD ``m`` through a truncated eigendecomposition.

    ``p = 0`` yields the orthogonal projector onto the retained eigenspace.
    """
    m = check_symmetric(m, "matrix")
    p = float(p)
    if not np.isfinite(p) or p < 0:
        raise InvalidInputError(f"power must be a finite non-negative real, got {p}")
    n = m.shape[0]
    if n == 0:
        return m.copy()
    if rank is None:
        rank = default_power_rank(n)
    if rank < 1:
        raise InvalidInputError(f"rank must be >= 1, got {rank}")
    vals, vecs = truncated_psd_eig(m, rank=rank)
    if vals.size == 0:
        return np.zeros_like(m)
    powered = np.ones_like(vals) if p == 0.0 else vals**p
    return (vecs * powered) @ vecs.T


def logdet_gram(rows):
    """log det of ``rows @ rows.T`` with ``-inf`` signalling a singular gram.

    The empty set has determinant one by convention, hence log-determinant
    zero. More rows than columns can never span, so the answer is ``-inf``
    without forming the gram.
    """
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2:
        raise InvalidInputError(f"rows must be 2-dimensional, got shape {rows.shape}")
    b = rows.shape[0]
    if b == 0:
        return 0.0
    if b > rows.shape[1]:
        return float("-inf")
    gram = rows @ rows.T
    gram = 0.5 * (gram + gram.T)
    # Cholesky alone is unreliable here: on an exactly singular gram the
    # factorization can survive with a round-off pivot instead of failing,
    # so singularity is judged on the spectrum.
    eigs = np.linalg.eigvalsh(gram)
    top = float(eigs[-1])
    if top <= 0.0 or float(eigs[0]) <= EIGEN_FLOOR * top:
        return float("-inf")
    return float(np.sum(np.log(eigs)))
