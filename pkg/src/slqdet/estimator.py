"""The two-part log-determinant estimator.

tr(log A) splits into a deterministic part -- quadrature on the columns of the
deflation basis Q -- and a Hutchinson estimate of the trace of the deflated
remainder (I - QQ^T) log(A) (I - QQ^T).  Queries use Rademacher vectors from
per-query substreams so any execution order (or thread count) reproduces the
same report bitwise; partial sums are reduced in query order.

Reports carry two product counts: the actual operator-counter delta, and the
nominal accounting that charges the sketch one product per column (attainable
only with direct access to log(A), but the convention used when comparing
methods on paper).
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import rng
from ._kernels import batch_quad_log
from .bounds import (
    DegenerateSpectrumError,
    no_pcps_oversampling,
    no_pcps_minimal_rank,
    pcps_parameter_set,
    query_count_bound,
    spectral_constants,
)
from .errors import BadConfigError, DomainError, EigFailError
from .lanczos import block_rows_for, lanczos_block
from .operators import SpdOperator, SpectralBounds
from .sketch import (
    SCALE_INV_SQRT_Q,
    SCALE_UNIT,
    SketchBasis,
    gaussian_sketch,
    principal_basis_of_image,
    sketch_image,
)

VARIANTS = ("pcps", "no-pcps", "plain-slq")

# squared residual norms at or below 1e-12 * n are treated as exact zeros
_RESIDUAL_TOL = 1e-12


@dataclass(frozen=True)
class EstimatorParams:
    """Design parameters (epsilon, delta, k, q, N, m, m', seed) of one run."""

    epsilon: float
    delta: float
    k: int
    q: int
    N: int
    m: int
    m_prime: int
    seed: int
    variant: str = "pcps"
    sketch_steps: int | None = None  # defaults to m_prime
    q_bound_uncapped: int | None = None

    def __post_init__(self):
        if not (0.0 < self.epsilon < 1.0 and 0.0 < self.delta < 1.0):
            raise BadConfigError("epsilon and delta must lie in (0, 1)")
        if self.variant not in VARIANTS:
            raise BadConfigError(f"unknown variant {self.variant!r}")
        if self.N < 1 or self.m < 1:
            raise BadConfigError("N and m must be >= 1")
        if self.variant != "plain-slq":
            if self.k < 1 or self.m_prime < 1:
                raise BadConfigError("k and m_prime must be >= 1")
            if self.q < self.k:
                raise BadConfigError("q must be >= k")

    @property
    def effective_sketch_steps(self) -> int:
        return self.sketch_steps if self.sketch_steps is not None else self.m_prime


@dataclass(frozen=True)
class EstimateReport:
    """Result record of one estimate."""

    gamma: float
    first_part: float
    second_part: float
    offset: float
    mvm_actual: int
    mvm_nominal: int
    per_query: list
    achieved_rank: int
    warnings: tuple
    params: EstimatorParams


def _basis_columns(Q) -> np.ndarray:
    if Q is None:
        return np.zeros((0, 0))
    if isinstance(Q, SketchBasis):
        return Q.columns
    return np.asarray(Q, dtype=np.float64)


def _eval_block_quadratures(block: "np.ndarray", op, steps, hint):
    """Lanczos + Gauss-log quadrature for unit rows; returns (values, mvms)."""
    res = lanczos_block(op, block, steps, lambda_max_hint=hint)
    vals = np.empty(block.shape[0])
    batch_quad_log(res.alphas, res.betas, res.nsteps, vals)
    if np.any(np.isneginf(vals)):
        raise DomainError("log is undefined at a quadrature node "
                          "(was lambda_min >= 1 ensured upstream?)")
    if np.any(np.isnan(vals)):
        raise EigFailError("tridiagonal eigensolve failed")
    return vals, res.mvms


def first_part(op: SpdOperator, Q, m_prime: int, *,
               lambda_max_hint: float | None = None) -> float:
    """Quadrature estimate of tr(Q^T log(A) Q), column by column.

    Consumes at most k * (m_prime + 1) products (less on breakdown); an empty
    basis contributes 0.
    """
    if m_prime < 1:
        raise BadConfigError("m_prime must be >= 1")
    cols = _basis_columns(Q)
    if cols.shape[1] == 0:
        return 0.0
    total = 0.0
    steps = m_prime + 1
    chunk = block_rows_for(steps, op.n, cols.shape[1])
    for lo in range(0, cols.shape[1], chunk):
        hi = min(lo + chunk, cols.shape[1])
        vals, _ = _eval_block_quadratures(
            np.ascontiguousarray(cols[:, lo:hi].T), op, steps, lambda_max_hint)
        total += float(np.sum(vals))
    return total


def second_part(op: SpdOperator, Q, N: int, m: int, seed: int, *,
                lambda_max_hint: float | None = None):
    """Hutchinson-over-quadrature estimate of tr((I-QQ^T) log(A) (I-QQ^T)).

    Query i draws its Rademacher vector from substream (seed, i); queries whose
    deflated residual has squared norm <= 1e-12 n contribute exactly zero.
    Returns (value, per-query records (residual_norm_sq, quadrature value)).
    """
    if N < 1 or m < 1:
        raise BadConfigError("N and m must be >= 1")
    cols = _basis_columns(Q)
    deflate = cols.shape[1] > 0
    n = op.n
    steps = m + 1
    total = 0.0
    per_query = []
    chunk = block_rows_for(steps, n, N)
    for lo in range(0, N, chunk):
        hi = min(lo + chunk, N)
        Z = np.empty((hi - lo, n))
        for i in range(lo, hi):
            Z[i - lo] = rng.rademacher(seed, i, n)
        if deflate:
            W = Z - (Z @ cols) @ cols.T
        else:
            W = Z
        r2 = np.einsum("bn,bn->b", W, W)
        live = r2 > _RESIDUAL_TOL * n
        vals = np.zeros(hi - lo)
        if np.any(live):
            block = W[live] / np.sqrt(r2[live])[:, None]
            vals[live], _ = _eval_block_quadratures(block, op, steps, lambda_max_hint)
        total += float(np.dot(r2, vals))
        per_query.extend((float(r2[i]), float(vals[i])) for i in range(hi - lo))
    return total / N, per_query


def plain_hutchinson_slq(op: SpdOperator, N: int, m: int, seed: int, *,
                         lambda_max_hint: float | None = None) -> float:
    """Undeflated baseline: the second part with an empty basis."""
    value, _ = second_part(op, None, N, m, seed, lambda_max_hint=lambda_max_hint)
    return value


def estimate_logdet(op: SpdOperator, bounds: SpectralBounds,
                    params: EstimatorParams, offset: float = 0.0) -> EstimateReport:
    """Full two-part estimate of log det(A) = tr(log A) (+ offset).

    Requires bounds.lambda_min >= 1; callers with smaller spectra must route
    the operator through shift_to_unit_min and pass the resulting offset.
    A rank-deficient sketch shrinks the deflation basis and is surfaced as a
    report warning, not a failure.
    """
    if bounds.lambda_min < 1.0 - 1e-12:
        raise BadConfigError("bounds.lambda_min < 1: apply shift_to_unit_min first")
    warnings = []
    hint = bounds.lambda_max
    start = op.mvm_counter

    if params.variant == "pcps":
        S = gaussian_sketch(op.n, params.q, SCALE_INV_SQRT_Q, params.seed, stream=0)
        if S.oversized:
            warnings.append(f"sketch width q = {params.q} exceeds n = {op.n}")
        Y, _ = sketch_image(op, S, params.effective_sketch_steps, lambda_max_hint=hint)
        Qcols, rank = principal_basis_of_image(Y, params.k)
        achieved = Qcols.shape[1]
        if achieved < params.k:
            warnings.append(f"rank-deficient sketch image: achieved rank {achieved} "
                            f"< k = {params.k}; deflation basis shrunk")
        nominal = params.q + params.k * params.m_prime + params.N * params.m
    elif params.variant == "no-pcps":
        S = gaussian_sketch(op.n, params.q, SCALE_UNIT, params.seed, stream=0)
        if S.oversized:
            warnings.append(f"sketch width k+p = {params.q} exceeds n = {op.n}")
        Y, _ = sketch_image(op, S, params.effective_sketch_steps, lambda_max_hint=hint)
        # keep every numerically independent direction, up to k + p of them
        Qcols, rank = principal_basis_of_image(Y, params.q)
        achieved = Qcols.shape[1]
        if achieved == 0:
            warnings.append("rank-deficient sketch image: achieved rank 0")
        nominal = params.q * (1 + params.m_prime) + params.N * params.m
    else:
        Qcols = np.zeros((op.n, 0))
        achieved = 0
        nominal = params.N * params.m
    if params.q_bound_uncapped is not None and params.q_bound_uncapped > params.q:
        warnings.append(f"sketch width capped at {params.q} "
                        f"(bound asked for {params.q_bound_uncapped})")

    first = first_part(op, Qcols, params.m_prime, lambda_max_hint=hint) \
        if Qcols.shape[1] else 0.0
    second, per_query = second_part(op, Qcols, params.N, params.m, params.seed,
                                    lambda_max_hint=hint)
    gamma = first + second + offset
    return EstimateReport(
        gamma=gamma, first_part=first, second_part=second, offset=offset,
        mvm_actual=op.mvm_counter - start, mvm_nominal=nominal,
        per_query=per_query, achieved_rank=achieved, warnings=tuple(warnings),
        params=params)


def _constants_or_none(bounds: SpectralBounds, n: int):
    try:
        return spectral_constants(bounds.lambda_min, bounds.lambda_max, n)
    except DegenerateSpectrumError:
        return None


def theorem_params(epsilon: float, delta: float, n: int, bounds: SpectralBounds,
                   seed: int, variant: str = "pcps") -> EstimatorParams:
    """Parameters straight from the closed-form bounds.

    Sketch widths are capped at n (a wider sketch adds nothing for a rank-<=n
    image); the uncapped bound is kept on the params for reporting.  A
    single-point spectrum degenerates to the exact one-step quadrature path
    (m = m' = 1).
    """
    consts = _constants_or_none(bounds, n)
    if variant == "pcps":
        if consts is None:
            k = max(1, math.ceil(16.0 * (1.0 + epsilon) / (1.0 - epsilon)))
            q_bound = max(k, math.ceil(288.0 * k / (epsilon**2 * delta)))
            N = max(1, math.ceil(query_count_bound(epsilon, delta)))
            m = m_prime = 1
        else:
            ps = pcps_parameter_set(epsilon, delta, n, consts)
            k, q_bound, N, m, m_prime = ps.k, ps.q, ps.N, ps.m, ps.m_prime
        q = min(q_bound, n)
        if q < k:
            k = q
        return EstimatorParams(epsilon, delta, k, q, N, m, m_prime, seed,
                               variant="pcps",
                               q_bound_uncapped=q_bound if q_bound > q else None)
    if variant == "no-pcps":
        k = no_pcps_minimal_rank(delta)
        width_bound = k + no_pcps_oversampling(k, delta)
        N = max(1, math.ceil(query_count_bound(epsilon, delta)))
        width = min(width_bound, n)
        k_eff = min(k, max(1, width - 1))
        if consts is None:
            m = m_prime = 1
        else:
            log_rho = math.log(consts.rho)
            m_prime = max(1, math.ceil(
                0.5 * math.log(2.0 * width_bound * consts.C_rho / epsilon) / log_rho))
            m = max(1, math.ceil(
                0.5 * math.log(4.0 * n * consts.C_rho / epsilon) / log_rho))
        return EstimatorParams(epsilon, delta, k_eff, width, N, m, m_prime, seed,
                               variant="no-pcps",
                               q_bound_uncapped=width_bound if width_bound > width else None)
    raise BadConfigError(f"no theorem preset for variant {variant!r}")


def practical_params(epsilon: float, delta: float, n: int, bounds: SpectralBounds,
                     seed: int) -> EstimatorParams:
    """Theorem k, N, m, m' with the empirically sufficient sketch width q = 3k."""
    base = theorem_params(epsilon, delta, n, bounds, seed, variant="pcps")
    return replace(base, q=min(3 * base.k, n), q_bound_uncapped=None)
