"""Lanczos tridiagonalization with full reorthogonalization.

A single batched engine drives everything: blocks of start vectors advance in
lockstep, one operator block-product per step, with each vector's own Krylov
basis kept for the full reorthogonalization pass.  The public single-vector
:func:`lanczos` and :func:`matfun_apply` wrap the same engine, so there is one
numerical code path.

Breakdown (beta below 1e-12 times a running spectral-scale estimate) is benign
early termination: the truncated recurrence is exact on the invariant subspace
it reached.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from ._kernels import lanczos_step
from .errors import BadConfigError, BadVectorError, DomainError, EigFailError
from .operators import SpdOperator

# memory budget for one lockstep block's basis tensor
_BLOCK_BYTES = 8e8


@dataclass
class JacobiMatrix:
    """Symmetric tridiagonal output of a Lanczos run.

    alpha holds actual_steps diagonal entries, beta the actual_steps - 1
    positive off-diagonal entries; actual_steps < requested signals breakdown.
    """

    alpha: np.ndarray
    beta: np.ndarray
    actual_steps: int
    basis: np.ndarray | None = field(default=None, repr=False)


@dataclass
class BlockLanczos:
    """Lockstep Lanczos results for a block of start vectors."""

    alphas: np.ndarray        # (B, steps)
    betas: np.ndarray         # (B, max(steps - 1, 1))
    nsteps: np.ndarray        # (B,) actual step counts
    mvms: int
    basis: np.ndarray | None  # (steps, B, n) when retained

    def jacobi(self, b: int) -> JacobiMatrix:
        m = int(self.nsteps[b])
        return JacobiMatrix(self.alphas[b, :m].copy(), self.betas[b, :m - 1].copy(), m)


def block_rows_for(steps: int, n: int, total: int) -> int:
    """Rows per lockstep block under the basis-memory budget."""
    return max(1, min(total, int(_BLOCK_BYTES // (steps * n * 8))))


def lanczos_block(op: SpdOperator, start_rows: np.ndarray, steps: int, *,
                  lambda_max_hint: float | None = None,
                  retain_basis: bool = False) -> BlockLanczos:
    """Run `steps` Lanczos steps for every (unit) row of start_rows.

    Consumes exactly one operator product per active vector per step; vectors
    that break down stop consuming products.  Callers are responsible for
    normalizing the start rows.
    """
    start_rows = np.ascontiguousarray(start_rows, dtype=np.float64)
    B, n = start_rows.shape
    if steps < 1:
        raise BadConfigError("steps must be >= 1")
    V = np.empty((steps, B, n))
    V[0] = start_rows
    alphas = np.zeros((B, steps))
    betas = np.zeros((B, max(steps - 1, 1)))
    bprev = np.zeros(B)
    nsteps = np.zeros(B, dtype=np.int64)
    active = np.ones(B, dtype=np.bool_)
    scale = np.full(B, float(lambda_max_hint) if lambda_max_hint else 0.0)
    mvms = 0
    for j in range(steps):
        if active.all():
            W = op.apply_rows(V[j])
            mvms += B
        else:
            idx = np.flatnonzero(active)
            if idx.size == 0:
                break
            W = np.zeros((B, n))
            W[idx] = op.apply_rows(V[j][idx])
            mvms += int(idx.size)
        lanczos_step(V, W, j, bprev, scale, active, alphas, betas, nsteps,
                     j == steps - 1)
    return BlockLanczos(alphas, betas, nsteps, mvms, V if retain_basis else None)


def lanczos(op: SpdOperator, v: np.ndarray, steps: int, *,
            lambda_max_hint: float | None = None,
            retain_basis: bool = False) -> JacobiMatrix:
    """Lanczos recurrence from a unit start vector.

    The start vector must be normalized to 1e-10; the full reorthogonalization
    keeps the retained basis orthonormal to near machine precision.  When
    ``retain_basis`` is set, the result carries the (n, actual_steps) basis.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (op.n,):
        raise BadVectorError(f"start vector must have length {op.n}")
    if abs(np.linalg.norm(v) - 1.0) > 1e-10:
        raise BadVectorError("start vector must have unit norm")
    if not isinstance(steps, (int, np.integer)) or steps < 1:
        raise BadConfigError("steps must be a positive integer")
    res = lanczos_block(op, v[None, :], int(steps),
                        lambda_max_hint=lambda_max_hint, retain_basis=True)
    jac = res.jacobi(0)
    if retain_basis:
        jac.basis = res.basis[:jac.actual_steps, 0, :].T.copy()
    return jac


def _tridiag_function_coeffs(alpha: np.ndarray, beta: np.ndarray, f) -> np.ndarray:
    """Coefficients of f(T) e1 in the Lanczos basis."""
    if alpha.shape[0] == 1:
        theta = alpha.copy()
        first = np.ones((1, 1))
    else:
        try:
            theta, vecs = scipy.linalg.eigh_tridiagonal(alpha, beta)
        except np.linalg.LinAlgError as exc:  # pragma: no cover
            raise EigFailError(str(exc)) from exc
        first = vecs
    with np.errstate(all="ignore"):
        ftheta = np.asarray(f(theta), dtype=np.float64)
    if not np.all(np.isfinite(ftheta)):
        raise DomainError("f is not finite at a Ritz value")
    if alpha.shape[0] == 1:
        return ftheta
    return first @ (ftheta * first[0])


def matfun_apply(op: SpdOperator, v: np.ndarray, f, steps: int, *,
                 lambda_max_hint: float | None = None) -> np.ndarray:
    """Krylov approximation of f(A) v.

    Runs `steps` Lanczos steps from v/||v|| with the basis retained and returns
    ||v|| * V f(T) e1; exact once the Krylov space becomes invariant.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (op.n,):
        raise BadVectorError(f"vector must have length {op.n}")
    nv = float(np.linalg.norm(v))
    if nv == 0.0:
        raise BadVectorError("vector must be nonzero")
    if steps < 1:
        raise BadConfigError("steps must be >= 1")
    out, _ = matfun_apply_rows(op, v[None, :], f, steps, lambda_max_hint=lambda_max_hint)
    return out[0]


def matfun_apply_rows(op: SpdOperator, rows: np.ndarray, f, steps: int, *,
                      lambda_max_hint: float | None = None):
    """f(A) applied to every (nonzero) row; returns (results, products used)."""
    rows = np.asarray(rows, dtype=np.float64)
    B, n = rows.shape
    norms = np.linalg.norm(rows, axis=1)
    if np.any(norms == 0.0):
        raise BadVectorError("rows must be nonzero")
    out = np.empty_like(rows)
    mvms = 0
    chunk = block_rows_for(steps, n, B)
    for lo in range(0, B, chunk):
        hi = min(lo + chunk, B)
        block = rows[lo:hi] / norms[lo:hi, None]
        res = lanczos_block(op, block, steps, lambda_max_hint=lambda_max_hint,
                            retain_basis=True)
        mvms += res.mvms
        for b in range(hi - lo):
            m = int(res.nsteps[b])
            coef = _tridiag_function_coeffs(res.alphas[b, :m], res.betas[b, :m - 1], f)
            out[lo + b] = norms[lo + b] * (coef @ res.basis[:m, b, :])
    return out, mvms
