"""Gauss quadrature rules extracted from Jacobi matrices.

The nodes are the eigenvalues of the tridiagonal matrix and the weights the
squared first components of its unit eigenvectors, computed by the first-row
QL kernel.  For a unit-norm Lanczos start vector the weights sum to one.
"""

from dataclasses import dataclass

import numpy as np

from ._kernels import tridiag_nodes_weights
from .errors import DomainError, EigFailError
from .lanczos import JacobiMatrix


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray    # ascending
    weights: np.ndarray  # non-negative, summing to 1


def quadrature_rule(T: JacobiMatrix) -> QuadratureRule:
    """Nodes and weights of the Gauss rule attached to a Jacobi matrix."""
    m = T.actual_steps
    nodes = np.empty(m)
    weights = np.empty(m)
    status = tridiag_nodes_weights(np.asarray(T.alpha, dtype=np.float64),
                                   np.asarray(T.beta, dtype=np.float64),
                                   nodes, weights)
    if status != 0:
        raise EigFailError("tridiagonal QL iteration did not converge")
    return QuadratureRule(nodes, weights)


def quadrature_eval(rule: QuadratureRule, f) -> float:
    """Evaluate sum_k tau_k f(theta_k)."""
    with np.errstate(all="ignore"):
        fvals = np.asarray(f(rule.nodes), dtype=np.float64)
    if not np.all(np.isfinite(fvals)):
        raise DomainError("f is not finite at a quadrature node")
    return float(np.dot(rule.weights, fvals))
