"""Estimators for the square case T == p.

Units are split by the within-variation scalar ``D = det(X)`` and a
bandwidth ``h``: stayers (``D == 0``), slow movers (``0 < |D| <= h``) and
movers (``|D| > h``). Movers enter through the trimmed mean of their
individual estimates ``D^{-1} adj(X)(Y - W delta)``; stayers and slow movers
enter through order-L local polynomial fits in ``D`` at zero.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .algebra import DesignBatch, batch_artifacts, solve_checked
from .errors import (
    CollinearTimeShiftError,
    DegenerateSampleError,
    InvalidPeriodError,
    NoMoversError,
    PanelError,
    TooFewSlowMoversError,
    UnsupportedShapeError,
    ValidationError,
)
from .panel import Mode, PanelDataset

PLUGIN = "plugin"
Bandwidth = Union[float, str]


@dataclass(frozen=True)
class EstimatorConfig:
    poly_order: int = 2
    bandwidth: Bandwidth = PLUGIN
    target_period: int = 1
    ci_levels: tuple[float, ...] = (0.90, 0.95)

    def __post_init__(self):
        if isinstance(self.poly_order, bool) or not isinstance(self.poly_order, (int, np.integer)) or self.poly_order < 1:
            raise ValidationError(f"poly_order must be an integer >= 1, got {self.poly_order!r}")
        if self.bandwidth != PLUGIN:
            try:
                h = float(self.bandwidth)
            except (TypeError, ValueError):
                raise ValidationError(f"bandwidth must be 'plugin' or a positive number, got {self.bandwidth!r}") from None
            if not (math.isfinite(h) and h > 0):
                raise ValidationError(f"explicit bandwidth must be > 0, got {self.bandwidth!r}")
            object.__setattr__(self, "bandwidth", h)
        levels = tuple(float(a) for a in self.ci_levels)
        for a in levels:
            if not 0.0 < a < 1.0:
                raise ValidationError(f"confidence levels must lie in (0, 1), got {a}")
        object.__setattr__(self, "ci_levels", levels)
        if isinstance(self.target_period, bool) or int(self.target_period) != self.target_period:
            raise ValidationError(f"target_period must be an integer, got {self.target_period!r}")

    @property
    def plugin(self) -> bool:
        return self.bandwidth == PLUGIN


def bandwidth_from_spread(sd: float, iqr: float, n: int, poly_order: int) -> float:
    """``0.5 * min(sd, iqr / 1.34) * n^(-1/(2L+1))``."""
    return 0.5 * min(sd, iqr / 1.34) * n ** (-1.0 / (2 * poly_order + 1))


def bandwidth_plugin(d_sample, n: int | None = None, poly_order: int = 2) -> float:
    """Plug-in bandwidth from the sample spread of D."""
    d = np.asarray(d_sample, dtype=float).ravel()
    n = d.size if n is None else int(n)
    if n < 4 or d.size < 4:
        raise ValidationError(f"plug-in bandwidth needs N >= 4, got N={n}")
    sd = float(np.std(d, ddof=1))
    q25, q75 = np.percentile(d, [25.0, 75.0])
    h = bandwidth_from_spread(sd, float(q75 - q25), n, poly_order)
    if not (h > 0 and math.isfinite(h)):
        raise DegenerateSampleError(
            f"D sample has no spread (sd={sd:.3g}, IQR={q75 - q25:.3g}); plug-in bandwidth undefined"
        )
    return h


def poly_powers(d, degree: int) -> np.ndarray:
    """Columns ``1, d, ..., d^degree`` by repeated multiplication."""
    d = np.asarray(d, dtype=float)
    out = np.empty(d.shape + (degree + 1,))
    out[..., 0] = 1.0
    for k in range(1, degree + 1):
        out[..., k] = out[..., k - 1] * d
    return out


@dataclass(frozen=True, eq=False)
class PolyStacks:
    d: np.ndarray
    bandwidth: float
    poly_order: int
    slow: np.ndarray  # |D| <= h, stayers included
    mover: np.ndarray  # |D| > h
    d0l: np.ndarray  # (N, L+1)
    d1l: np.ndarray  # (N, L)
    h_hat: np.ndarray  # (L,)
    counts: dict

    @property
    def mover_share(self) -> float:
        return float(np.mean(self.mover))


def stack_poly(d_sample, h: float, poly_order: int) -> PolyStacks:
    d = np.asarray(d_sample, dtype=float).ravel()
    if not h > 0:
        raise ValidationError(f"bandwidth must be > 0, got {h}")
    if poly_order < 1:
        raise ValidationError(f"poly_order must be >= 1, got {poly_order}")
    slow = np.abs(d) <= h
    powers = poly_powers(d, poly_order) * slow[:, None]
    d0l = powers
    d1l = powers[:, 1:]
    h_hat = powers[:, :poly_order].mean(axis=0)
    stayers = int(np.count_nonzero(d == 0.0))
    counts = {
        "stayers": stayers,
        "slow_movers": int(np.count_nonzero(slow)) - stayers,
        "movers": int(np.count_nonzero(~slow)),
    }
    return PolyStacks(d, float(h), int(poly_order), slow, ~slow, d0l, d1l, h_hat, counts)


def selector_matrix(target_period: int, t_periods: int, p: int) -> np.ndarray:
    """The p x p(T-1) matrix picking the period-t time shift out of delta."""
    if not 1 <= target_period <= t_periods:
        raise InvalidPeriodError(f"target period {target_period} outside 1..{t_periods}")
    r = np.zeros((p, p * (t_periods - 1)))
    if target_period >= 2:
        k = target_period - 2
        r[:, k * p : (k + 1) * p] = np.eye(p)
    return r


def local_intercept_weights(stacks: PolyStacks) -> np.ndarray:
    """Per-unit weights ``D_{0:L}' E_N[D_{0:L} D_{0:L}']^{-1} e_1``.

    ``E_N[weights * Z]`` is the order-L local polynomial intercept of Z at
    D = 0 with the uniform window.
    """
    g0 = stacks.d0l.T @ stacks.d0l / stacks.d.size
    e1 = np.zeros(stacks.poly_order + 1)
    e1[0] = 1.0
    coef = solve_checked(
        g0, e1, name="E_N[D_{0:L} D_{0:L}']", error=TooFewSlowMoversError, counts=stacks.counts
    )
    return stacks.d0l @ coef


def _slope_gram_solve(stacks: PolyStacks, rhs) -> np.ndarray:
    g1 = stacks.d1l.T @ stacks.d1l / stacks.d.size
    return solve_checked(
        g1, rhs, name="E_N[D_{1:L} D_{1:L}']", error=TooFewSlowMoversError, counts=stacks.counts
    )


def slope_weights(stacks: PolyStacks) -> np.ndarray:
    """Per-unit weights ``D_{1:L}' E_N[D_{1:L} D_{1:L}']^{-1} h_hat``."""
    return stacks.d1l @ _slope_gram_solve(stacks, stacks.h_hat)


def transformed(dataset: PanelDataset, design: DesignBatch):
    """``(A W, A Y)`` per unit, where A is adj(X) or adj(X'X) X'."""
    aw = design.a_matrix @ design.w
    ay = np.einsum("npt,nt->np", design.a_matrix, dataset.y)
    return aw, ay


def residual_moments(dataset: PanelDataset, design: DesignBatch, delta) -> np.ndarray:
    """``A (Y - W delta)`` per unit, shape (N, p)."""
    resid = dataset.y - design.w @ np.asarray(delta, dtype=float)
    return np.einsum("npt,nt->np", design.a_matrix, resid)


def mover_terms(stacks: PolyStacks, r) -> np.ndarray:
    """``1{|D| > h} D^{-1} r`` per unit (zero for non-movers)."""
    r = np.asarray(r, dtype=float)
    inv = np.zeros_like(stacks.d)
    np.divide(1.0, stacks.d, out=inv, where=stacks.mover)
    return r * inv[:, None]


def estimate_delta(dataset: PanelDataset, design: DesignBatch, stacks: PolyStacks) -> np.ndarray:
    weights = local_intercept_weights(stacks)
    aw, ay = transformed(dataset, design)
    n = dataset.n
    lhs = np.einsum("n,nki,nkj->ij", weights, aw, aw) / n
    rhs = np.einsum("n,nki,nk->i", weights, aw, ay) / n
    return solve_checked(lhs, rhs, name="weighted Gram of (X*W)'X*W", error=CollinearTimeShiftError)


def estimate_gamma(dataset: PanelDataset, design: DesignBatch, stacks: PolyStacks, delta) -> np.ndarray:
    """p x L matrix whose column l estimates the l-th derivative of m at 0 over l!."""
    r = residual_moments(dataset, design, delta)
    cross = r.T @ stacks.d1l / dataset.n  # (p, L)
    return _slope_gram_solve(stacks, cross.T).T


def estimate_beta_mover(dataset: PanelDataset, design: DesignBatch, stacks: PolyStacks, delta) -> np.ndarray:
    if not np.any(stacks.mover):
        raise NoMoversError(f"no unit has |D| > h = {stacks.bandwidth:.6g}")
    r = residual_moments(dataset, design, delta)
    terms = mover_terms(stacks, r)
    return terms.sum(axis=0) / np.count_nonzero(stacks.mover)


def estimate_beta_unified(
    dataset: PanelDataset, design: DesignBatch, stacks: PolyStacks, delta, gamma
) -> np.ndarray:
    r = residual_moments(dataset, design, delta)
    return mover_terms(stacks, r).mean(axis=0) + np.asarray(gamma) @ stacks.h_hat


def beta_unified_rewritten(
    dataset: PanelDataset, design: DesignBatch, stacks: PolyStacks, delta, gamma
) -> np.ndarray:
    """Same estimate written as mover share times the trimmed mean plus a
    sum of derivative terms weighted by ``E_N[D^{l-1} 1{|D| <= h}]``."""
    gamma = np.asarray(gamma)
    share = stacks.mover_share
    out = np.zeros(gamma.shape[0])
    if share > 0:
        out += share * estimate_beta_mover(dataset, design, stacks, delta)
    slow_d = stacks.d[stacks.slow]
    n = dataset.n
    power = np.ones_like(slow_d)
    for l in range(1, stacks.poly_order + 1):
        out += gamma[:, l - 1] * (power.sum() / n)
        power = power * slow_d
    return out


@dataclass(frozen=True, eq=False)
class CoreEstimates:
    delta_hat: np.ndarray
    gamma_hat: np.ndarray
    beta_mover: Optional[np.ndarray]
    beta_unified: np.ndarray
    theta_hat: np.ndarray
    bandwidth_used: float
    target_period: int
    poly_order: int
    counts: dict
    warnings: tuple[str, ...] = field(default=())

    @property
    def theta_mover(self) -> Optional[np.ndarray]:
        if self.beta_mover is None:
            return None
        return self.beta_mover + (self.theta_hat - self.beta_unified)


def _staged(stage: str, fn, *args):
    try:
        return fn(*args)
    except PanelError as err:
        if err.stage is None:
            err.stage = stage
        raise


def resolve_bandwidth(d, config: EstimatorConfig) -> float:
    if config.plugin:
        return bandwidth_plugin(d, d.size, config.poly_order)
    return float(config.bandwidth)


def prepare(dataset: PanelDataset, config: EstimatorConfig):
    """Validate and build ``(design, stacks)`` for a dataset."""
    if not isinstance(dataset, PanelDataset):
        raise ValidationError("expected a PanelDataset")
    selector_matrix(config.target_period, dataset.t_periods, dataset.p_regressors)
    design = _staged("design", batch_artifacts, dataset)
    h = _staged("bandwidth", resolve_bandwidth, design.d, config)
    stacks = stack_poly(design.d, h, config.poly_order)
    return design, stacks


def estimate_all(dataset: PanelDataset, config: EstimatorConfig, *, prepared=None) -> CoreEstimates:
    """Bandwidth, stacks, delta, gamma, both beta estimates and theta."""
    if not isinstance(dataset, PanelDataset):
        raise ValidationError("expected a PanelDataset")
    if dataset.mode is not Mode.SQUARE:
        raise UnsupportedShapeError("estimate_all handles T == p; use the tall-panel estimator for T > p")
    design, stacks = prepared if prepared is not None else prepare(dataset, config)
    notes = []
    delta = _staged("delta", estimate_delta, dataset, design, stacks)
    gamma = _staged("gamma", estimate_gamma, dataset, design, stacks, delta)
    if np.any(stacks.mover):
        beta_m = estimate_beta_mover(dataset, design, stacks, delta)
    else:
        beta_m = None
        msg = f"no movers at h={stacks.bandwidth:.6g}; unified estimate uses a zero mover term"
        notes.append(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    beta_l = estimate_beta_unified(dataset, design, stacks, delta, gamma)
    r = selector_matrix(config.target_period, dataset.t_periods, dataset.p_regressors)
    return CoreEstimates(
        delta_hat=delta,
        gamma_hat=gamma,
        beta_mover=beta_m,
        beta_unified=beta_l,
        theta_hat=beta_l + r @ delta,
        bandwidth_used=stacks.bandwidth,
        target_period=int(config.target_period),
        poly_order=config.poly_order,
        counts=dict(stacks.counts),
        warnings=tuple(notes),
    )
