"""Gaussian sketching of log(A) and extraction of the deflation basis.

Two constructions are provided: rank-k truncation of the sketched image via an
SVD (the dominant-subspace reading of "principal orthonormal basis"), and an
oversampled variant that keeps every numerically independent direction of the
image found by column-pivoted QR.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import rng
from .errors import BadConfigError, RankDeficientError
from .lanczos import matfun_apply_rows
from .operators import SpdOperator

_RANK_TOL = 1e-12

SCALE_UNIT = "unit-variance"
SCALE_INV_SQRT_Q = "inverse-sqrt-q"


@dataclass(frozen=True)
class SketchMatrix:
    """An n x q matrix of i.i.d. normal entries, regenerable from its key."""

    entries: np.ndarray
    scale: str
    seed: int
    stream: int

    @property
    def q(self) -> int:
        return self.entries.shape[1]

    @property
    def oversized(self) -> bool:
        # more columns than rows adds nothing for a rank-<=n sketch
        return self.entries.shape[1] > self.entries.shape[0]


@dataclass(frozen=True)
class SketchBasis:
    """Column-orthonormal deflation basis."""

    columns: np.ndarray
    construction: str

    @property
    def k(self) -> int:
        return self.columns.shape[1]


def gaussian_sketch(n: int, q: int, scale: str = SCALE_INV_SQRT_Q,
                    seed: int = 0, stream: int = 0) -> SketchMatrix:
    """Draw the sketch column by column from keyed substreams.

    Identical (n, q, scale, seed, stream) always reproduces the same matrix
    bitwise, independent of thread count or column evaluation order.
    """
    if q < 1:
        raise BadConfigError("q must be >= 1")
    if scale not in (SCALE_UNIT, SCALE_INV_SQRT_Q):
        raise BadConfigError(f"unknown scale {scale!r}")
    entries = np.empty((n, q))
    for c in range(q):
        entries[:, c] = rng.gaussian_column(seed, stream, c, n)
    if scale == SCALE_INV_SQRT_Q:
        entries /= np.sqrt(q)
    return SketchMatrix(entries, scale, seed, stream)


def sketch_image(op: SpdOperator, S: SketchMatrix, sketch_steps: int, *,
                 lambda_max_hint: float | None = None):
    """log(A) S column by column via Krylov products; returns (Y, products)."""
    Y_rows, mvms = matfun_apply_rows(op, S.entries.T, np.log, sketch_steps,
                                     lambda_max_hint=lambda_max_hint)
    return Y_rows.T, mvms


def principal_basis_of_image(Y: np.ndarray, k: int):
    """Top-k left singular vectors of Y and the achieved numerical rank."""
    if Y.shape[1] == 0:
        return np.zeros((Y.shape[0], 0)), 0
    U, sv, _ = np.linalg.svd(Y, full_matrices=False)
    if sv.size == 0 or sv[0] <= 0.0:
        return np.zeros((Y.shape[0], 0)), 0
    rank = int(np.sum(sv > _RANK_TOL * sv[0]))
    return U[:, :min(k, rank)].copy(), rank


def build_basis_pcps(op: SpdOperator, S: SketchMatrix, k: int, sketch_steps: int, *,
                     lambda_max_hint: float | None = None) -> SketchBasis:
    """Rank-k principal basis of the sketched image log(A) S.

    Raises rank-deficient (carrying the achieved rank) when the image has
    numerical rank below k, so callers can shrink k instead of padding the
    basis with arbitrary directions.
    """
    if k < 1:
        raise BadConfigError("k must be >= 1")
    if k > S.q:
        raise BadConfigError("k must not exceed the sketch width q")
    if sketch_steps < 1:
        raise BadConfigError("sketch_steps must be >= 1")
    Y, _ = sketch_image(op, S, sketch_steps, lambda_max_hint=lambda_max_hint)
    Q, rank = principal_basis_of_image(Y, k)
    if rank < k:
        raise RankDeficientError(f"sketched image has rank {rank} < k = {k}",
                                 achieved_rank=rank)
    return SketchBasis(Q, "pcps-topk")


def build_basis_oversampled(op: SpdOperator, k: int, p: int, sketch_steps: int,
                            seed: int = 0, stream: int = 0, *,
                            lambda_max_hint: float | None = None) -> SketchBasis:
    """Orthonormal basis of range(log(A) S) for a standard Gaussian n x (k+p) S.

    Column-pivoted QR retains every numerically independent column (at most
    k + p of them); a zero image is reported as rank-deficient.
    """
    if k < 1 or p < 1:
        raise BadConfigError("k and p must be >= 1")
    S = gaussian_sketch(op.n, k + p, SCALE_UNIT, seed, stream)
    Y, _ = sketch_image(op, S, sketch_steps, lambda_max_hint=lambda_max_hint)
    Q, R, _ = scipy.linalg.qr(Y, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] <= 0.0:
        raise RankDeficientError("sketched image is zero", achieved_rank=0)
    rank = int(np.sum(diag > _RANK_TOL * diag[0]))
    return SketchBasis(np.ascontiguousarray(Q[:, :rank]), "oversampled-qr")
