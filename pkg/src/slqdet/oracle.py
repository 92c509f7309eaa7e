"""Dense exact computations used as ground truth at desk scale.

Everything here goes through a full symmetric eigendecomposition, so it is
gated behind a dense size limit (default 4000, overridable through the
LOGDET_DENSE_LIMIT environment variable).
"""

import os
from dataclasses import dataclass

import numpy as np

from .errors import BadBasisError, DomainError, NotPositiveDefiniteError, TooLargeError
from .operators import SpdOperator

DENSE_LIMIT_DEFAULT = 4000
DENSE_LIMIT_ENV = "LOGDET_DENSE_LIMIT"


def dense_limit() -> int:
    raw = os.environ.get(DENSE_LIMIT_ENV)
    if raw is None:
        return DENSE_LIMIT_DEFAULT
    try:
        return int(raw)
    except ValueError:
        return DENSE_LIMIT_DEFAULT


def _materialize_checked(op: SpdOperator) -> np.ndarray:
    if op.n > dense_limit():
        raise TooLargeError(f"n = {op.n} exceeds the dense limit {dense_limit()}")
    return op.materialize()


@dataclass(frozen=True)
class DenseSpectrum:
    """Full eigendecomposition with eigenvalues in non-increasing order."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def dense_spectrum(op: SpdOperator) -> DenseSpectrum:
    matrix = _materialize_checked(op)
    vals, vecs = np.linalg.eigh(matrix)
    return DenseSpectrum(vals[::-1].copy(), vecs[:, ::-1].copy())


def dense_logdet(op: SpdOperator) -> float:
    """Exact log-determinant: sum of log eigenvalues."""
    matrix = _materialize_checked(op)
    vals = np.linalg.eigvalsh(matrix)
    if vals[0] <= 0.0:
        raise NotPositiveDefiniteError(f"smallest eigenvalue {vals[0]} is not positive")
    return float(np.sum(np.log(vals)))


def dense_matrix_function(op: SpdOperator, f) -> np.ndarray:
    """f(A) = U f(Lambda) U^T, symmetrized against round-off."""
    matrix = _materialize_checked(op)
    vals, vecs = np.linalg.eigh(matrix)
    with np.errstate(all="ignore"):
        fvals = np.asarray(f(vals), dtype=np.float64)
    if not np.all(np.isfinite(fvals)):
        raise DomainError("f is not finite at some eigenvalue")
    result = (vecs * fvals) @ vecs.T
    return (result + result.T) / 2.0


def exact_residual_trace(op: SpdOperator, Q: np.ndarray, f=np.log):
    """Trace and Frobenius norm of (I - QQ^T) f(A) (I - QQ^T), exactly.

    Q must have orthonormal columns (deviation beyond 1e-8 is rejected); an
    empty Q measures f(A) itself.
    """
    Q = np.asarray(Q, dtype=np.float64)
    if Q.ndim != 2 or Q.shape[0] != op.n:
        raise BadBasisError(f"basis must be ({op.n}, k)")
    k = Q.shape[1]
    if k:
        gram = Q.T @ Q
        if np.max(np.abs(gram - np.eye(k))) > 1e-8:
            raise BadBasisError("basis columns are not orthonormal")
    fa = dense_matrix_function(op, f)
    if k:
        proj = fa - Q @ (Q.T @ fa)
        delta = proj - (proj @ Q) @ Q.T
    else:
        delta = fa
    return float(np.trace(delta)), float(np.linalg.norm(delta, "fro"))
