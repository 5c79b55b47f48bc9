"""Influence functions, covariance and normal confidence intervals."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .algebra import DesignBatch, solve_checked
from .errors import CollinearTimeShiftError, NumericalError, ValidationError
from .estimators import (
    CoreEstimates,
    PolyStacks,
    local_intercept_weights,
    mover_terms,
    residual_moments,
    selector_matrix,
    slope_weights,
    transformed,
)
from .panel import PanelDataset


def normal_quantile(prob):
    """Standard normal inverse CDF (Cephes ``ndtri``, ~1e-15 relative accuracy)."""
    return ndtri(prob)


@dataclass(frozen=True, eq=False)
class InfluenceSet:
    zeta: np.ndarray  # (N, p)
    v_hat: np.ndarray
    q_hat: np.ndarray
    blocks: tuple[np.ndarray, np.ndarray, np.ndarray] = field(repr=False, default=None)
    delta_scores: np.ndarray = field(repr=False, default=None)


@dataclass(frozen=True, eq=False)
class InferenceReport:
    covariance: np.ndarray
    std_errors: np.ndarray
    intervals: dict = field(default_factory=dict)  # level -> (p, 2) array of (lower, upper)


def assemble_influence(
    mover_part, slope_part, delta_scores, v_hat, q_hat
) -> InfluenceSet:
    """Sum the three additive blocks.

    ``delta_scores`` holds the per-unit moment contributions whose sample
    mean is solved for delta; they are propagated through ``q_hat v_hat^{-1}``.
    """
    propagate = solve_checked(
        v_hat, np.asarray(delta_scores).T, name="V_hat", error=CollinearTimeShiftError
    ).T
    block3 = propagate @ q_hat.T
    zeta = mover_part + slope_part + block3
    return InfluenceSet(
        zeta=zeta,
        v_hat=v_hat,
        q_hat=q_hat,
        blocks=(mover_part, slope_part, block3),
        delta_scores=np.asarray(delta_scores),
    )


def influence_contributions(
    dataset: PanelDataset,
    design: DesignBatch,
    stacks: PolyStacks,
    estimates: CoreEstimates,
) -> InfluenceSet:
    """Estimated influence function of the unified estimate of theta (T == p)."""
    n = dataset.n
    p = dataset.p_regressors
    aw, _ = transformed(dataset, design)
    r = residual_moments(dataset, design, estimates.delta_hat)
    m = mover_terms(stacks, r)
    block1 = m - m.mean(axis=0)
    sw = slope_weights(stacks)
    block2 = (r - stacks.d1l @ estimates.gamma_hat.T) * sw[:, None]
    w0 = local_intercept_weights(stacks)
    v_hat = np.einsum("n,nki,nkj->ij", w0, aw, aw) / n
    scores = np.einsum("n,nki,nk->ni", w0, aw, r)
    inv_d = np.zeros(n)
    np.divide(1.0, stacks.d, out=inv_d, where=stacks.mover)
    rsel = selector_matrix(estimates.target_period, dataset.t_periods, p)
    q_hat = rsel - np.einsum("n,nij->ij", inv_d + sw, aw) / n
    return assemble_influence(block1, block2, scores, v_hat, q_hat)


def mover_influence(
    dataset: PanelDataset,
    design: DesignBatch,
    stacks: PolyStacks,
    estimates: CoreEstimates,
    influence: InfluenceSet,
    *,
    normalize: bool = False,
) -> np.ndarray:
    """Influence function for the trimmed mover mean.

    This is the unified influence function with the slow-mover block removed
    and the slow-mover term dropped from ``q_hat``; V_hat and the delta
    scores are taken from ``influence``. With ``normalize=True`` the first
    block becomes the ratio linearization
    ``1{|D| > h}(D^{-1} r - beta_M) / P_N(|D| > h)`` and the propagation
    matrix is divided by the mover share as well.
    """
    n = dataset.n
    r = residual_moments(dataset, design, estimates.delta_hat)
    m = mover_terms(stacks, r)
    aw, _ = transformed(dataset, design)
    inv_d = np.zeros(n)
    np.divide(1.0, stacks.d, out=inv_d, where=stacks.mover)
    rsel = selector_matrix(estimates.target_period, dataset.t_periods, dataset.p_regressors)
    slope = np.einsum("n,nij->ij", inv_d, aw) / n
    if normalize:
        share = stacks.mover_share
        block1 = (m - stacks.mover[:, None] * estimates.beta_mover) / share
        q_m = rsel - slope / share
    else:
        block1 = m - m.mean(axis=0)
        q_m = rsel - slope
    return assemble_influence(
        block1, np.zeros_like(block1), influence.delta_scores, influence.v_hat, q_m
    ).zeta


def covariance_and_se(zeta, n: int | None = None) -> InferenceReport:
    """Sampling covariance ``E_N[zeta zeta'] / N`` and standard errors.

    The second moment is uncentered, as in the asymptotic normalization.
    """
    zeta = np.asarray(zeta, dtype=float)
    if zeta.ndim == 1:
        zeta = zeta[:, None]
    n = zeta.shape[0] if n is None else int(n)
    if n < 2:
        raise ValidationError(f"need n >= 2, got {n}")
    if not np.all(np.isfinite(zeta)):
        raise NumericalError("influence contributions contain non-finite values")
    cov = zeta.T @ zeta / zeta.shape[0] / n
    cov = 0.5 * (cov + cov.T)
    return InferenceReport(covariance=cov, std_errors=np.sqrt(np.diag(cov)))


def confidence_intervals(theta, std_errors, level: float) -> np.ndarray:
    """Per-coordinate ``theta +/- z * se`` with z the ``(1 + level)/2`` normal quantile.

    Returns a (p, 2) array of (lower, upper).
    """
    if isinstance(std_errors, InferenceReport):
        std_errors = std_errors.std_errors
    level = float(level)
    if not 0.0 < level < 1.0:
        raise ValidationError(f"confidence level must lie in (0, 1), got {level}")
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    se = np.atleast_1d(np.asarray(std_errors, dtype=float))
    half = normal_quantile(0.5 + 0.5 * level) * se
    return np.column_stack([theta - half, theta + half])


def inference_report(theta, zeta, levels) -> InferenceReport:
    base = covariance_and_se(zeta)
    intervals = {float(a): confidence_intervals(theta, base.std_errors, a) for a in levels}
    return InferenceReport(base.covariance, base.std_errors, intervals)
