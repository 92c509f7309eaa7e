"""Sweep runner: parameter-bound curves and empirical (eps, delta) validation.

Bound sweeps are pure functions of their inputs and rerun to identical CSV
bytes.  Validation sweeps run seeded trials (optionally across threads, with
results reduced in trial order) against the dense oracle.
"""

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields, replace

import numpy as np

from .bounds import (
    SpectralConstants,
    baseline_bounds,
    no_pcps_parameter_set,
    pcps_parameter_set,
)
from .errors import BadConfigError, MissingSpectralDataError
from .estimator import EstimatorParams, estimate_logdet
from .operators import SpdOperator, SpectralBounds
from .oracle import dense_logdet

BOUND_METHODS = ("pcps", "no-pcps", "ubaru", "cortinovis")


def default_epsilon_grid(points: int = 40, lo: float = 0.01, hi: float = 0.2):
    """Uniform relative-accuracy grid used by all comparison figures."""
    return tuple(float(x) for x in np.linspace(lo, hi, points))


@dataclass(frozen=True)
class SweepConfig:
    epsilon_grid: tuple = ()
    delta: float = 0.1
    methods: tuple = ("pcps",)
    trials: int = 0
    seed: int = 50
    kappa: float | None = None
    tr_fa: float | None = None
    matrix: str | None = None  # free-form provenance note for the output

    def __post_init__(self):
        grid = tuple(self.epsilon_grid) or default_epsilon_grid()
        object.__setattr__(self, "epsilon_grid", grid)
        if any(not (0.0 < e < 1.0) for e in grid):
            raise BadConfigError("epsilon grid must lie in (0, 1)")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise BadConfigError("epsilon grid must be strictly increasing")
        if not self.methods:
            raise BadConfigError("at least one method is required")
        for mth in self.methods:
            if mth not in BOUND_METHODS:
                raise BadConfigError(f"unknown method {mth!r}")


@dataclass(frozen=True)
class SweepRow:
    method: str
    epsilon: float
    delta: float
    k: int | None = None
    q_or_kp: int | None = None
    N: int | None = None
    m: int | None = None
    m_prime: int | None = None
    mvm_nominal: int | None = None
    mvm_actual: int | None = None
    gamma_mean: float | None = None
    gamma_p10: float | None = None
    gamma_p90: float | None = None
    success_rate: float | None = None
    oracle_value: float | None = None


_COLUMNS = [f.name for f in fields(SweepRow)]


def run_bound_sweep(config: SweepConfig, consts: SpectralConstants, n: int):
    """Evaluate the requested bound sets on the whole grid; no products consumed.

    For pcps / no-pcps rows, mvm_nominal is the first-part product count
    (sketch plus projected quadrature); for the baselines it is N * m.
    """
    needs_stats = any(mth in ("ubaru", "cortinovis") for mth in config.methods)
    if needs_stats and (config.kappa is None or config.tr_fa is None):
        raise MissingSpectralDataError(
            "baseline methods need kappa and tr_fa in the sweep config")
    rows = []
    for method in sorted(config.methods):
        for eps in config.epsilon_grid:
            if method == "pcps":
                ps = pcps_parameter_set(eps, config.delta, n, consts)
                rows.append(SweepRow(method, eps, config.delta, ps.k, ps.q, ps.N,
                                     ps.m, ps.m_prime, ps.first_part_mvm))
            elif method == "no-pcps":
                ps = no_pcps_parameter_set(eps, config.delta, n, consts)
                rows.append(SweepRow(method, eps, config.delta, ps.k, ps.q, ps.N,
                                     ps.m, ps.m_prime, ps.first_part_mvm))
            else:
                N, m = baseline_bounds(method, eps, config.delta, n,
                                       config.kappa, config.tr_fa)
                rows.append(SweepRow(method, eps, config.delta, None, None, N,
                                     m, None, N * m))
    return rows


def percentile_nearest_rank(values, p: float) -> float:
    """Nearest-rank percentile (no interpolation)."""
    ordered = sorted(values)
    rank = max(1, int(np.ceil(p / 100.0 * len(ordered))))
    return float(ordered[rank - 1])


def _run_trials(op: SpdOperator, bounds: SpectralBounds, params: EstimatorParams,
                seed: int, trials: int, threads: int):
    def one(t: int):
        trial_op = op.fresh_clone()
        report = estimate_logdet(trial_op, bounds,
                                 replace(params, seed=seed + t))
        return report.gamma, report.mvm_actual

    order = range(1, trials + 1)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, order))
    else:
        results = [one(t) for t in order]
    gammas = [g for g, _ in results]
    mvms = [mv for _, mv in results]
    return gammas, mvms


def run_validation_grid(config: SweepConfig, op: SpdOperator,
                        bounds: SpectralBounds, params: EstimatorParams,
                        threads: int = 1):
    """One batch of seeded trials, scored at every epsilon on the grid.

    Trials use seeds seed+1 .. seed+trials with identical parameters; each grid
    point only moves the success threshold.  The success criterion is relative
    error <= epsilon, degrading to absolute error when the oracle value is 0.
    """
    if config.trials < 1:
        raise BadConfigError("trials must be >= 1")
    oracle_value = dense_logdet(op)
    gammas, mvms = _run_trials(op, bounds, params, config.seed, config.trials, threads)
    scale = abs(oracle_value) if oracle_value != 0.0 else 1.0
    errors = [abs(g - oracle_value) / scale for g in gammas]
    mean = sum(gammas) / len(gammas)
    p10 = percentile_nearest_rank(gammas, 10.0)
    p90 = percentile_nearest_rank(gammas, 90.0)
    mvm_mean = int(round(sum(mvms) / len(mvms)))
    nominal = None
    rows = []
    for eps in config.epsilon_grid:
        success = sum(1 for e in errors if e <= eps) / len(errors)
        if nominal is None:
            if params.variant == "pcps":
                nominal = params.q + params.k * params.m_prime + params.N * params.m
            elif params.variant == "no-pcps":
                nominal = params.q * (1 + params.m_prime) + params.N * params.m
            else:
                nominal = params.N * params.m
        rows.append(SweepRow(params.variant, eps, config.delta, params.k, params.q,
                             params.N, params.m, params.m_prime, nominal, mvm_mean,
                             mean, p10, p90, success, oracle_value))
    return rows


def run_validation(config: SweepConfig, op: SpdOperator, params: EstimatorParams,
                   bounds: SpectralBounds | None = None, threads: int = 1) -> SweepRow:
    """Seeded validation of the (eps, delta) guarantee at params.epsilon."""
    if bounds is None:
        bounds = op.spectral_hints()
    if bounds is None:
        raise MissingSpectralDataError("pass spectral bounds for this operator")
    single = replace(config, epsilon_grid=(params.epsilon,))
    return run_validation_grid(single, op, bounds, params, threads)[0]


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def rows_to_csv(rows) -> str:
    lines = [",".join(_COLUMNS)]
    for row in rows:
        lines.append(",".join(_cell(getattr(row, c)) for c in _COLUMNS))
    return "\n".join(lines) + "\n"


def rows_to_json(rows) -> str:
    payload = [{c: getattr(row, c) for c in _COLUMNS} for row in rows]
    return json.dumps(payload, indent=2) + "\n"
