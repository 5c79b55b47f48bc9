"""Monte Carlo engine for the two-period random coefficient design.

Each replication owns an independent Philox stream keyed by
``(seed, replication_index)``, so a study gives the same summary no matter
how replications are scheduled across workers.

Per unit, one row of 12 uniforms is consumed, in this column order::

    0 eps, 1 sign, 2 X_1, 3 A, then (U11, U12, U21, U22) for t = 1 and t = 2

Uniforms are ``((raw >> 11) + 0.5) * 2**-53`` so they lie strictly inside
(0, 1); normals are their inverse-CDF transforms.

By default the idiosyncratic draws U are unit-level: the t = 1 columns are
reused in period 2. Setting ``period_noise`` uses fresh draws per period,
which adds ``D^{-1}``-amplified noise to every individual estimate.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError, NumericalError, StudyFailedError
from .estimators import EstimatorConfig, estimate_all, prepare
from .inference import (
    confidence_intervals,
    covariance_and_se,
    influence_contributions,
    mover_influence,
    normal_quantile,
)
from .panel import PanelDataset

DRAWS_PER_UNIT = 12
ESTIMATORS = ("mover", "unified")
CONFIG_KEYS = (
    "rho", "pi0", "alpha", "sigma_a", "sigma_u", "time_shift",
    "n", "poly_order", "reps", "seed", "ci_levels",
)


@dataclass(frozen=True)
class SimulationConfig:
    rho: float = 0.5
    pi0: float = 0.0
    alpha: float = 1.0
    sigma_a: float = 0.1
    sigma_u: float = 0.1
    time_shift: float = 0.5
    n: int = 1000
    poly_order: int = 2
    reps: int = 500
    seed: int = 20240101
    ci_levels: tuple[float, ...] = (0.90, 0.95)
    period_noise: bool = False
    name: str = ""

    def __post_init__(self):
        for key in ("rho", "pi0", "alpha", "sigma_a", "sigma_u", "time_shift"):
            value = getattr(self, key)
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ConfigError(f"{key} must be a finite number, got {value!r}")
        for key in ("n", "poly_order", "reps", "seed"):
            value = getattr(self, key)
            if isinstance(value, bool) or int(value) != value:
                raise ConfigError(f"{key} must be an integer, got {value!r}")
            object.__setattr__(self, key, int(value))
        if not 0.0 <= self.pi0 < 1.0:
            raise ConfigError(f"pi0 must lie in [0, 1), got {self.pi0}")
        if self.alpha <= 0:
            raise ConfigError(f"alpha must be > 0, got {self.alpha}")
        if self.sigma_a <= 0:
            raise ConfigError(f"sigma_a must be > 0, got {self.sigma_a}")
        if self.sigma_u < 0:
            raise ConfigError(f"sigma_u must be >= 0, got {self.sigma_u}")
        if self.n < 4:
            raise ConfigError(f"n must be >= 4, got {self.n}")
        if self.poly_order < 1:
            raise ConfigError(f"poly_order must be >= 1, got {self.poly_order}")
        if self.reps < 1:
            raise ConfigError(f"reps must be >= 1, got {self.reps}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        levels = tuple(float(a) for a in self.ci_levels)
        if not levels or any(not 0.0 < a < 1.0 for a in levels):
            raise ConfigError(f"ci_levels must be probabilities in (0, 1), got {self.ci_levels!r}")
        object.__setattr__(self, "ci_levels", levels)
        if not isinstance(self.period_noise, bool):
            raise ConfigError(f"period_noise must be a boolean, got {self.period_noise!r}")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["ci_levels"] = list(self.ci_levels)
        return out


def replication_stream(seed: int, index: int) -> np.random.Philox:
    return np.random.Philox(key=np.array([seed, index], dtype=np.uint64))


def uniforms(bitgen: np.random.Philox, size) -> np.ndarray:
    raw = bitgen.random_raw(int(np.prod(size)))
    return (((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53).reshape(size)


def draw_epsilon(u, pi0: float, alpha: float):
    """Inverse CDF of ``P(eps <= t) = pi0 + (1 - pi0) t^alpha`` on [0, 1]."""
    u = np.asarray(u, dtype=float)
    scaled = np.clip((u - pi0) / (1.0 - pi0), 0.0, None)
    out = np.where(u < pi0, 0.0, scaled ** (1.0 / alpha))
    return float(out) if out.ndim == 0 else out


def generate_panel(config: SimulationConfig, replication_index: int, *, fixed_a: float | None = None) -> PanelDataset:
    """Draw one T = p = 2 panel.

    ``fixed_a`` replaces the correlated effect by a constant; with
    ``sigma_u = 0`` the coefficients are then homogeneous and noise free.
    """
    u = uniforms(replication_stream(config.seed, replication_index), (config.n, DRAWS_PER_UNIT))
    eps = draw_epsilon(u[:, 0], config.pi0, config.alpha)
    sign = np.where(u[:, 1] < 0.5, 1.0, -1.0)
    z = normal_quantile(u[:, 2:])
    x1 = z[:, 0]
    x2 = x1 + sign * eps
    if fixed_a is None:
        a = config.rho * config.sigma_a * (1.0 + eps) + config.sigma_a * z[:, 1]
    else:
        a = np.full(config.n, float(fixed_a))
    noise = config.sigma_u * z[:, 2:].reshape(config.n, 2, 4)  # (unit, period, U11 U12 U21 U22)
    if not config.period_noise:
        noise = np.repeat(noise[:, :1, :], 2, axis=1)
    shift = np.array([0.0, config.time_shift])
    b0 = a[:, None] + noise[:, :, 0] + noise[:, :, 2] + shift
    b1 = a[:, None] + noise[:, :, 1] + noise[:, :, 3] + shift
    xs = np.column_stack([x1, x2])
    y = b0 + xs * b1
    x = np.stack([np.ones_like(xs), xs], axis=-1)
    return PanelDataset(y, x)


def generate_tall_panel(config: SimulationConfig, replication_index: int, t_periods: int = 3) -> PanelDataset:
    """Smoke-test design with T > p = 2, used only for property tests.

    ``X_t = (1, x_t)`` with ``x_t = x_1 + sign_t * eps`` for t >= 2, so
    ``det(X'X)`` is proportional to ``eps^2``; time shifts are
    ``time_shift * (t - 1)``.
    """
    if t_periods < 3:
        raise ConfigError("tall design needs T >= 3")
    k = 3 + 4 * t_periods + (t_periods - 1)
    u = uniforms(replication_stream(config.seed, replication_index), (config.n, k))
    eps = draw_epsilon(u[:, 0], config.pi0, config.alpha)
    x1 = normal_quantile(u[:, 1])
    a = config.rho * config.sigma_a * (1.0 + eps) + config.sigma_a * normal_quantile(u[:, 2])
    noise = config.sigma_u * normal_quantile(u[:, 3 : 3 + 4 * t_periods]).reshape(config.n, t_periods, 4)
    signs = np.where(u[:, 3 + 4 * t_periods :] < 0.5, 1.0, -1.0)
    xs = np.column_stack([x1] + [x1 + signs[:, j] * eps for j in range(t_periods - 1)])
    shift = config.time_shift * np.arange(t_periods)
    b0 = a[:, None] + noise[:, :, 0] + noise[:, :, 2] + shift
    b1 = a[:, None] + noise[:, :, 1] + noise[:, :, 3] + shift
    y = b0 + xs * b1
    x = np.stack([np.ones_like(xs), xs], axis=-1)
    return PanelDataset(y, x)


@dataclass(frozen=True)
class TrueParameters:
    beta_true: np.ndarray
    delta_true: np.ndarray  # row t-1 holds the period-t shift


def true_parameters(config: SimulationConfig) -> TrueParameters:
    a = config.alpha
    scale = (config.pi0 + (1.0 - config.pi0) * (2.0 * a + 1.0) / (a + 1.0)) * config.rho * config.sigma_a
    delta = np.array([[0.0, 0.0], [config.time_shift, config.time_shift]])
    return TrueParameters(beta_true=np.full(2, scale), delta_true=delta)


@dataclass(frozen=True, eq=False)
class ReplicationRecord:
    index: int
    failed: bool
    error: Optional[str] = None
    bandwidth: float = float("nan")
    counts: dict = field(default_factory=dict)
    estimates: dict = field(default_factory=dict)  # estimator -> (2,)
    std_errors: dict = field(default_factory=dict)  # estimator -> (2,)
    hits: dict = field(default_factory=dict)  # estimator -> {level: (2,) bool}

    def same_as(self, other: "ReplicationRecord") -> bool:
        if (self.index, self.failed, self.error, self.counts) != (other.index, other.failed, other.error, other.counts):
            return False
        if not (self.bandwidth == other.bandwidth or (math.isnan(self.bandwidth) and math.isnan(other.bandwidth))):
            return False
        for name in self.estimates:
            if not np.array_equal(self.estimates[name], other.estimates[name]):
                return False
            if not np.array_equal(self.std_errors[name], other.std_errors[name]):
                return False
            for level, hit in self.hits[name].items():
                if not np.array_equal(hit, other.hits[name][level]):
                    return False
        return True


def estimate_replication(dataset: PanelDataset, config: SimulationConfig, beta_true) -> ReplicationRecord:
    """Bandwidth, both estimators, their standard errors and CI hits for beta."""
    est_config = EstimatorConfig(poly_order=config.poly_order, target_period=1, ci_levels=config.ci_levels)
    design, stacks = prepare(dataset, est_config)
    est = estimate_all(dataset, est_config, prepared=(design, stacks))
    if est.beta_mover is None:
        raise NumericalError("no movers: trimmed mover mean undefined")
    infl = influence_contributions(dataset, design, stacks, est)
    zeta_m = mover_influence(dataset, design, stacks, est, infl)
    estimates = {"mover": est.beta_mover, "unified": est.beta_unified}
    ses = {
        "mover": covariance_and_se(zeta_m).std_errors,
        "unified": covariance_and_se(infl.zeta).std_errors,
    }
    hits = {}
    for name in ESTIMATORS:
        hits[name] = {}
        for level in config.ci_levels:
            ci = confidence_intervals(estimates[name], ses[name], level)
            hits[name][level] = (ci[:, 0] <= beta_true) & (beta_true <= ci[:, 1])
    return ReplicationRecord(
        index=-1,
        failed=False,
        bandwidth=est.bandwidth_used,
        counts=est.counts,
        estimates=estimates,
        std_errors=ses,
        hits=hits,
    )


def run_replication(config: SimulationConfig, replication_index: int) -> ReplicationRecord:
    beta_true = true_parameters(config).beta_true
    try:
        dataset = generate_panel(config, replication_index)
        rec = estimate_replication(dataset, config, beta_true)
    except NumericalError as err:
        return ReplicationRecord(index=replication_index, failed=True, error=str(err))
    return ReplicationRecord(
        index=replication_index,
        failed=False,
        bandwidth=rec.bandwidth,
        counts=rec.counts,
        estimates=rec.estimates,
        std_errors=rec.std_errors,
        hits=rec.hits,
    )


@dataclass(frozen=True)
class CellStats:
    true_value: float
    mean: float
    bias: float
    sd: float
    rmse: float
    coverage: dict  # level -> fraction


@dataclass(frozen=True)
class SimulationSummary:
    config: SimulationConfig
    reps_completed: int
    reps_failed: int
    cells: dict  # estimator -> [CellStats per coordinate]
    failures: tuple = ()

    def cell(self, estimator: str, coordinate: int) -> CellStats:
        return self.cells[estimator][coordinate]

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "reps_completed": self.reps_completed,
            "reps_failed": self.reps_failed,
            "failures": [list(f) for f in self.failures],
            "estimators": {
                name: [
                    {
                        "coordinate": k,
                        "true": c.true_value,
                        "mean": c.mean,
                        "bias": c.bias,
                        "sd": c.sd,
                        "rmse": c.rmse,
                        "coverage": {f"{lvl:g}": v for lvl, v in c.coverage.items()},
                    }
                    for k, c in enumerate(cells)
                ]
                for name, cells in self.cells.items()
            },
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SimulationSummary":
        cfg = dict(doc["config"])
        cfg["ci_levels"] = tuple(cfg["ci_levels"])
        config = SimulationConfig(**cfg)
        cells = {
            name: [
                CellStats(
                    true_value=c["true"],
                    mean=c["mean"],
                    bias=c["bias"],
                    sd=c["sd"],
                    rmse=c["rmse"],
                    coverage={float(k): v for k, v in c["coverage"].items()},
                )
                for c in rows
            ]
            for name, rows in doc["estimators"].items()
        }
        return cls(config, doc["reps_completed"], doc["reps_failed"], cells, tuple(tuple(f) for f in doc.get("failures", ())))


def summarize(config: SimulationConfig, records) -> SimulationSummary:
    """Aggregate records in replication-index order (population moments)."""
    records = sorted(records, key=lambda r: r.index)
    ok = [r for r in records if not r.failed]
    failures = tuple((r.index, r.error) for r in records if r.failed)
    if not ok:
        raise StudyFailedError(
            f"all {len(records)} replications failed", diagnostics=[f"rep {i}: {e}" for i, e in failures]
        )
    beta_true = true_parameters(config).beta_true
    cells = {}
    for name in ESTIMATORS:
        est = np.array([r.estimates[name] for r in ok])
        rows = []
        for k in range(est.shape[1]):
            col = est[:, k]
            mean = float(np.mean(col))
            err = col - beta_true[k]
            coverage = {
                level: float(np.mean([r.hits[name][level][k] for r in ok])) for level in config.ci_levels
            }
            rows.append(
                CellStats(
                    true_value=float(beta_true[k]),
                    mean=mean,
                    bias=mean - float(beta_true[k]),
                    sd=float(np.sqrt(np.mean((col - mean) ** 2))),
                    rmse=float(np.sqrt(np.mean(err**2))),
                    coverage=coverage,
                )
            )
        cells[name] = rows
    return SimulationSummary(config, len(ok), len(failures), cells, failures)


def run_study(config: SimulationConfig, *, threads: int = 1) -> SimulationSummary:
    indices = range(config.reps)
    if threads <= 1:
        records = [run_replication(config, i) for i in indices]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(lambda i: run_replication(config, i), indices))
    return summarize(config, records)
