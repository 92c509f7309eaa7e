"""Matrix-free SPD operators, test-matrix generation, and spectral preprocessing.

Operators expose matrix-vector products through :meth:`SpdOperator.apply` (one
vector) and :meth:`SpdOperator.apply_rows` (a block of vectors stored as rows,
counted as one product per row).  Operator data is immutable after
construction; only the product counter mutates, under a lock, so concurrent
applies are safe.
"""

import math
import threading
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import rng
from .errors import BadConfigError, DimensionError

# below this dimension a low-rank-plus-identity operator materializes a dense
# copy once and applies that (a plain GEMM beats two skinny ones)
_DENSE_CACHE_LIMIT = 1536

_PROVENANCES = ("user-supplied", "estimated", "exact")


@dataclass(frozen=True)
class SpectralBounds:
    """An interval [lambda_min, lambda_max] containing the spectrum.

    The estimator and the bound calculators additionally require
    lambda_min >= 1; operators violating that must be routed through
    :func:`shift_to_unit_min` first.
    """

    lambda_min: float
    lambda_max: float
    provenance: str = "user-supplied"

    def __post_init__(self):
        if not (0.0 < self.lambda_min <= self.lambda_max):
            raise BadConfigError("need 0 < lambda_min <= lambda_max")
        if self.provenance not in _PROVENANCES:
            raise BadConfigError(f"unknown provenance {self.provenance!r}")

    @property
    def kappa(self) -> float:
        return self.lambda_max / self.lambda_min


class SpdOperator:
    """Base class: a symmetric positive (semi)definite operator of size n."""

    variant = "abstract"

    def __init__(self, n: int):
        self.n = int(n)
        self._mvm_counter = 0
        self._lock = threading.Lock()

    @property
    def mvm_counter(self) -> int:
        return self._mvm_counter

    def _count(self, k: int):
        with self._lock:
            self._mvm_counter += k

    def apply(self, v: np.ndarray) -> np.ndarray:
        """Return A @ v and count one product."""
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.n,):
            raise DimensionError(f"expected vector of length {self.n}, got shape {v.shape}")
        out = self._apply_impl(v)
        self._count(1)
        return out

    def apply_rows(self, W: np.ndarray) -> np.ndarray:
        """Apply A to every row of W (shape (B, n)); counts B products."""
        W = np.asarray(W, dtype=np.float64)
        if W.ndim != 2 or W.shape[1] != self.n:
            raise DimensionError(f"expected (B, {self.n}) rows, got shape {W.shape}")
        out = self._apply_rows_impl(W)
        self._count(W.shape[0])
        return out

    def _apply_impl(self, v):
        raise NotImplementedError

    def _apply_rows_impl(self, W):
        # generic fallback; subclasses override with a blocked product
        return np.stack([self._apply_impl(W[i]) for i in range(W.shape[0])])

    def spectral_hints(self):
        """Exact spectral bounds when cheaply available, else None."""
        return None

    def materialize(self) -> np.ndarray:
        """Dense n x n array equal to the operator (no counting)."""
        raise NotImplementedError

    def fresh_clone(self) -> "SpdOperator":
        """Same operator data with an independent product counter."""
        import copy

        dup = copy.copy(self)
        dup._mvm_counter = 0
        dup._lock = threading.Lock()
        return dup


class DenseOperator(SpdOperator):
    variant = "dense"

    def __init__(self, matrix: np.ndarray):
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise DimensionError("dense operator needs a square matrix")
        if not np.array_equal(matrix, matrix.T):
            raise BadConfigError("stored entries must satisfy a(i,j) == a(j,i) exactly")
        super().__init__(matrix.shape[0])
        self.matrix = matrix

    def _apply_impl(self, v):
        return self.matrix @ v

    def _apply_rows_impl(self, W):
        return W @ self.matrix

    def materialize(self):
        return self.matrix.copy()


class SparseOperator(SpdOperator):
    variant = "sparse"

    def __init__(self, matrix: sp.spmatrix):
        matrix = sp.csr_matrix(matrix)
        if matrix.shape[0] != matrix.shape[1]:
            raise DimensionError("sparse operator needs a square matrix")
        if (matrix != matrix.T).nnz != 0:
            raise BadConfigError("stored entries must satisfy a(i,j) == a(j,i) exactly")
        super().__init__(matrix.shape[0])
        self.matrix = matrix

    def _apply_impl(self, v):
        return self.matrix @ v

    def _apply_rows_impl(self, W):
        return np.ascontiguousarray((self.matrix @ W.T).T)

    def materialize(self):
        return self.matrix.toarray()


class LowRankPlusIdentityOperator(SpdOperator):
    """A = I + X diag(weights) X^T with positive weights (so lambda_min >= 1)."""

    variant = "low-rank-plus-identity"

    def __init__(self, factors: np.ndarray, weights: np.ndarray, meta: dict | None = None):
        factors = np.asarray(factors, dtype=np.float64)
        weights = np.asarray(weights, dtype=np.float64)
        if factors.ndim != 2:
            raise DimensionError("factors must be an (n, r) array")
        if weights.shape != (factors.shape[1],):
            raise DimensionError("weights length must match factor columns")
        if factors.shape[1] and not np.all(weights > 0):
            raise BadConfigError("weights must be positive")
        super().__init__(factors.shape[0])
        self.factors = factors
        self.weights = weights
        self.rank = factors.shape[1]
        self.meta = dict(meta or {})
        self._dense = None
        if 0 < self.rank and self.n <= _DENSE_CACHE_LIMIT:
            self._dense = np.eye(self.n) + (factors * weights) @ factors.T

    def _apply_impl(self, v):
        if self._dense is not None:
            return self._dense @ v
        if self.rank == 0:
            return v.copy()
        return v + self.factors @ (self.weights * (self.factors.T @ v))

    def _apply_rows_impl(self, W):
        if self._dense is not None:
            return W @ self._dense
        if self.rank == 0:
            return W.copy()
        return W + ((W @ self.factors) * self.weights) @ self.factors.T

    def spectral_hints(self):
        if self.rank == 0:
            return SpectralBounds(1.0, 1.0, "exact")
        scaled = self.factors * np.sqrt(self.weights)
        gram = scaled.T @ scaled
        top = float(np.linalg.eigvalsh(gram)[-1])
        # 1 is the exact minimum whenever rank < n, and a valid lower bound always
        return SpectralBounds(1.0, 1.0 + max(top, 0.0), "exact")

    def materialize(self):
        if self._dense is not None:
            return self._dense.copy()
        return np.eye(self.n) + (self.factors * self.weights) @ self.factors.T


class ScaledOperator(SpdOperator):
    """A multiple c * A of an existing operator (c > 0)."""

    variant = "scaled"

    def __init__(self, base: SpdOperator, factor: float):
        if factor <= 0:
            raise BadConfigError("scale factor must be positive")
        super().__init__(base.n)
        self.base = base
        self.factor = float(factor)

    def _apply_impl(self, v):
        return self.base._apply_impl(v) * self.factor

    def _apply_rows_impl(self, W):
        return self.base._apply_rows_impl(W) * self.factor

    def spectral_hints(self):
        hints = self.base.spectral_hints()
        if hints is None:
            return None
        return SpectralBounds(hints.lambda_min * self.factor, hints.lambda_max * self.factor,
                              hints.provenance)

    def materialize(self):
        return self.base.materialize() * self.factor


class GramOperator(SpdOperator):
    """B^T B applied matrix-free; the two products with B count as one apply."""

    variant = "gram"

    def __init__(self, b_matrix: np.ndarray):
        b_matrix = np.asarray(b_matrix, dtype=np.float64)
        if b_matrix.ndim != 2 or b_matrix.shape[0] != b_matrix.shape[1]:
            raise DimensionError("gram operator needs a square matrix")
        super().__init__(b_matrix.shape[0])
        self.b_matrix = b_matrix

    def _apply_impl(self, v):
        return self.b_matrix.T @ (self.b_matrix @ v)

    def _apply_rows_impl(self, W):
        return (W @ self.b_matrix.T) @ self.b_matrix

    def materialize(self):
        return self.b_matrix.T @ self.b_matrix


def generate_test_matrix(n: int, heavy_count: int = 40, tail_count: int = 260,
                         heavy_scale: float = 10.0, tail_scale: float = 1.0,
                         density: float = 0.025, seed: int = 50) -> LowRankPlusIdentityOperator:
    """Sparse-random low-rank-plus-identity test operator.

    A = I + sum_{j<=heavy_count} (heavy_scale/j^2) x_j x_j^T
          + sum_{heavy_count<j<=heavy_count+tail_count} (tail_scale/j^2) x_j x_j^T

    where each x_j holds round(density * n) standard-normal values at positions
    drawn without replacement, from a substream keyed on (seed, j).  Columns are
    therefore reproducible bitwise and independently of generation order.
    """
    heavy_count = int(heavy_count)
    tail_count = int(tail_count)
    if n < 1 or heavy_count < 0 or tail_count < 0:
        raise BadConfigError("n must be >= 1 and term counts non-negative")
    if heavy_count + tail_count >= n:
        raise BadConfigError("heavy_count + tail_count must be < n")
    if not (0.0 < density < 1.0):
        raise BadConfigError("density must lie in (0, 1)")
    nnz = int(round(density * n))
    if nnz < 1:
        raise BadConfigError("density * n must be at least 1")
    r = heavy_count + tail_count
    if r and (heavy_count > 0 and heavy_scale <= 0 or tail_count > 0 and tail_scale <= 0):
        raise BadConfigError("scales must be positive")
    factors = np.zeros((n, r))
    weights = np.empty(r)
    for j in range(1, r + 1):
        gen = rng.substream(seed, rng.PURPOSE_TEST_MATRIX, 0, j)
        positions = gen.choice(n, size=nnz, replace=False)
        factors[positions, j - 1] = gen.standard_normal(nnz)
        weights[j - 1] = (heavy_scale if j <= heavy_count else tail_scale) / j**2
    meta = {"n": n, "heavy_count": heavy_count, "tail_count": tail_count,
            "heavy_scale": heavy_scale, "tail_scale": tail_scale,
            "density": density, "seed": seed}
    return LowRankPlusIdentityOperator(factors, weights, meta=meta)


def estimate_spectral_bounds(op: SpdOperator, probe_steps: int = 50, seed: int = 0) -> SpectralBounds:
    """Estimate a containing spectral interval with one Lanczos probe.

    Ritz values lie strictly inside the spectrum, so the extremes are padded by
    the 0.99 / 1.01 safety margins before being returned.
    """
    from .lanczos import lanczos  # local import: lanczos consumes operators

    if probe_steps < 2:
        raise BadConfigError("probe_steps must be >= 2")
    v = rng.probe_unit_vector(seed, op.n)
    jac = lanczos(op, v, min(probe_steps, op.n))
    from .quadrature import quadrature_rule

    nodes = quadrature_rule(jac).nodes
    return SpectralBounds(0.99 * float(nodes[0]), 1.01 * float(nodes[-1]), "estimated")


def shift_to_unit_min(op: SpdOperator, lambda_min: float):
    """Rescale so the spectrum starts at 1.

    Returns (A / lambda_min, offset) with offset = n * log(lambda_min); the
    caller adds the offset to any trace-of-log estimate of the scaled operator.
    """
    if lambda_min <= 0:
        raise BadConfigError("lambda_min must be positive")
    return ScaledOperator(op, 1.0 / lambda_min), op.n * math.log(lambda_min)


def gram_operator(b_matrix: np.ndarray) -> GramOperator:
    """Operator B^T B for computing log|det B| = 0.5 * logdet(B^T B)."""
    return GramOperator(b_matrix)
