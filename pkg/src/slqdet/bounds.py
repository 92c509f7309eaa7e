"""Closed-form calculators for every design-parameter bound.

All bounds are returned as ceilinged integers (clamped to >= 1) with the
pre-ceiling real values retained for plotting smooth curves.  Natural
logarithms throughout.

The convergence radius uses the internally consistent form

    rho = (lambda_max + sqrt(2 lambda_max lambda_min - lambda_min^2))
          / (lambda_max - lambda_min) > 1,

i.e. the Bernstein-ellipse radius with semi-major axis
lambda_max / (lambda_max - lambda_min).
"""

import math
from dataclasses import dataclass, field

from .errors import BadConfigError, BadSpectrumError, DegenerateSpectrumError

_SATURATION = 2**63 - 1


def _ceil_at_least_one(x: float) -> int:
    return max(1, int(math.ceil(x)))


def _check_eps_delta(epsilon: float, delta: float):
    if not (0.0 < epsilon < 1.0):
        raise BadConfigError("epsilon must lie in (0, 1)")
    if not (0.0 < delta < 1.0):
        raise BadConfigError("delta must lie in (0, 1)")


@dataclass(frozen=True)
class SpectralConstants:
    """Constants of the quadrature convergence analysis for log on
    [lambda_min, lambda_max]."""

    rho: float
    M_rho: float
    C: float
    C_rho: float
    kappa: float
    lambda_min: float
    lambda_max: float
    n: int


@dataclass(frozen=True)
class ParameterSet:
    """Ceilinged design parameters for one estimator variant.

    For the oversampled (no-PCPS) variant, q holds k + p.  ``reals`` carries
    the pre-ceiling values; ``impractical`` flags sketch widths beyond 10^4.
    """

    variant: str
    epsilon: float
    delta: float
    n: int
    k: int
    q: int
    N: int
    m: int
    m_prime: int
    p: int | None = None
    impractical: bool = False
    reals: dict = field(default_factory=dict)

    @property
    def first_part_mvm(self) -> int:
        """Nominal product count of the projected part (sketch included)."""
        if self.variant == "pcps":
            return self.q + self.k * self.m_prime
        return self.q * (1 + self.m_prime)


def spectral_constants(lambda_min: float, lambda_max: float, n: int) -> SpectralConstants:
    """rho, M_rho, C and C_rho for a spectrum inside [lambda_min, lambda_max]."""
    if lambda_min < 1.0:
        raise BadConfigError("lambda_min must be >= 1 (rescale the operator first)")
    if lambda_max == lambda_min:
        raise DegenerateSpectrumError(
            "single-point spectrum: rho is undefined, use the exact one-step path")
    if lambda_max < lambda_min:
        raise BadConfigError("lambda_max must exceed lambda_min")
    rho = (lambda_max + math.sqrt(2.0 * lambda_max * lambda_min - lambda_min**2)) \
        / (lambda_max - lambda_min)
    M_rho = abs(math.log(lambda_min / 2.0)) + math.pi
    C = (n - 1) * math.log(lambda_min) + math.log(lambda_max)
    if C <= 0.0:
        raise BadSpectrumError("C = (n-1)log(lambda_min) + log(lambda_max) must be positive")
    C_rho = 4.0 * M_rho / (C * (rho**2 - rho))
    return SpectralConstants(rho, M_rho, C, C_rho, lambda_max / lambda_min,
                             lambda_min, lambda_max, n)


def query_count_bound(epsilon: float, delta: float) -> float:
    """Pre-ceiling Hutchinson query bound (1 + sqrt(1 + 4 eps sqrt(delta)))^2
    / (2 eps^2 delta)."""
    _check_eps_delta(epsilon, delta)
    return (1.0 + math.sqrt(1.0 + 4.0 * epsilon * math.sqrt(delta)))**2 \
        / (2.0 * epsilon**2 * delta)


def pcps_parameter_set(epsilon: float, delta: float, n: int,
                       consts: SpectralConstants) -> ParameterSet:
    """Design parameters of the sketched (PCPS) variant.

    k is ceilinged first and its integer value feeds the q and m' formulas.
    """
    _check_eps_delta(epsilon, delta)
    k_real = 16.0 * (1.0 + epsilon) / (1.0 - epsilon)
    k = _ceil_at_least_one(k_real)
    q_real = 288.0 * k / (epsilon**2 * delta)
    N_real = query_count_bound(epsilon, delta)
    log_rho = math.log(consts.rho)
    m_prime_real = 0.5 * math.log(2.0 * k * consts.C_rho / epsilon) / log_rho
    m_real = 0.5 * math.log(4.0 * n * consts.C_rho / epsilon) / log_rho
    return ParameterSet(
        variant="pcps", epsilon=epsilon, delta=delta, n=n,
        k=k, q=_ceil_at_least_one(q_real), N=_ceil_at_least_one(N_real),
        m=_ceil_at_least_one(m_real), m_prime=_ceil_at_least_one(m_prime_real),
        reals={"k": k_real, "q": q_real, "N": N_real, "m": m_real,
               "m_prime": m_prime_real})


def no_pcps_minimal_rank(delta: float) -> int:
    """Smallest admissible target rank: the least integer strictly above
    64 / delta^2 (which also makes the oversampling denominator positive)."""
    if not (0.0 < delta < 1.0):
        raise BadConfigError("delta must lie in (0, 1)")
    return int(math.floor(64.0 / delta**2)) + 1


def no_pcps_oversampling(k: int, delta: float) -> int:
    """Oversampling bound p >= 1 + 64 k / (k delta^2 - 64) for a valid k."""
    if not (0.0 < delta < 1.0):
        raise BadConfigError("delta must lie in (0, 1)")
    denom = k * delta**2 - 64.0
    if denom <= 0.0:
        raise BadConfigError("k must strictly exceed 64 / delta^2")
    return _ceil_at_least_one(1.0 + 64.0 * k / denom)


def no_pcps_parameter_set(epsilon: float, delta: float, n: int,
                          consts: SpectralConstants) -> ParameterSet:
    """Design parameters of the oversampled (no-PCPS) variant.

    k defaults to the minimal admissible rank; the basis width k + p is
    independent of epsilon and is flagged impractical above 10^4 (which is the
    whole point of the comparison).
    """
    _check_eps_delta(epsilon, delta)
    k = no_pcps_minimal_rank(delta)
    p = no_pcps_oversampling(k, delta)
    width = k + p
    N_real = query_count_bound(epsilon, delta)
    log_rho = math.log(consts.rho)
    m_prime_real = 0.5 * math.log(2.0 * width * consts.C_rho / epsilon) / log_rho
    m_real = 0.5 * math.log(4.0 * n * consts.C_rho / epsilon) / log_rho
    return ParameterSet(
        variant="no-pcps", epsilon=epsilon, delta=delta, n=n,
        k=k, q=width, N=_ceil_at_least_one(N_real),
        m=_ceil_at_least_one(m_real), m_prime=_ceil_at_least_one(m_prime_real),
        p=p, impractical=width > 10_000,
        reals={"k": float(k), "q": float(width), "N": N_real, "m": m_real,
               "m_prime": m_prime_real})


def loose_q_bound(epsilon: float, delta: float, k: int):
    """Looser sketch-width bound 1152 e 9^k / (eps^2 delta).

    Returns (value, saturated); the value saturates at 2^63 - 1 once 9^k
    overflows any practical range.
    """
    _check_eps_delta(epsilon, delta)
    if k < 1:
        raise BadConfigError("k must be >= 1")
    log_value = math.log(1152.0) + 1.0 + k * math.log(9.0) \
        - 2.0 * math.log(epsilon) - math.log(delta)
    if log_value >= math.log(_SATURATION):
        return _SATURATION, True
    return _ceil_at_least_one(1152.0 * math.e * 9.0**k / (epsilon**2 * delta)), False


def hutchinson_tail(epsilon: float, stable_rank: float) -> float:
    """Single-query deviation probability bound, clamped to 1:
    min(1, (sqrt(2) + 2 / sqrt(sr))^2 / eps^2)."""
    if epsilon <= 0.0:
        raise BadConfigError("epsilon must be positive")
    if stable_rank < 1.0:
        raise BadConfigError("stable rank is at least 1")
    return min(1.0, (math.sqrt(2.0) + 2.0 / math.sqrt(stable_rank))**2 / epsilon**2)


def baseline_bounds(variant: str, epsilon: float, delta: float, n: int,
                    kappa: float, tr_fA: float):
    """Query and Lanczos-step bounds of the two reference analyses.

    variant 'ubaru' or 'cortinovis'; both need the condition number and
    tr(log A) as inputs.  Returns (N, m) ceilinged.
    """
    _check_eps_delta(epsilon, delta)
    if kappa <= 1.0:
        raise DegenerateSpectrumError("baseline bounds need kappa > 1")
    if tr_fA <= 0.0:
        raise BadConfigError("tr_fA must be positive")
    denom = (epsilon * tr_fA)**2
    if variant == "ubaru":
        N_real = 24.0 * n**2 * math.log(1.0 + kappa)**2 * math.log(2.0 / delta) / denom
        m_real = math.sqrt(3.0 * kappa) / 4.0 * math.log(
            5.0 * kappa * n * math.log(2.0 * kappa + 2.0)
            / (epsilon * tr_fA * math.sqrt(2.0 * kappa + 1.0)))
    elif variant == "cortinovis":
        N_real = 8.0 * (n * math.log(kappa)**2
                        + 2.0 * epsilon * tr_fA * math.log(kappa)) \
            * math.log(2.0 / delta) / denom
        m_real = math.sqrt(kappa + 1.0) / 4.0 * math.log(
            4.0 * n * (math.sqrt(kappa + 1.0) + 1.0) * math.log(2.0 * kappa)
            / (epsilon * tr_fA))
    else:
        raise BadConfigError(f"unknown baseline variant {variant!r}")
    return _ceil_at_least_one(N_real), _ceil_at_least_one(m_real)
