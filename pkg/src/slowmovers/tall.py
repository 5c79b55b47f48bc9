"""Estimators for tall panels (T > p).

Here ``D = det(X'X) >= 0`` and all trimming is one-sided. Time shifts are
estimated by pooling the within-projected equations of the movers, and the
individual estimates use ``adj(X'X) X'`` in place of ``adj(X)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .algebra import DesignBatch, solve_checked
from .errors import (
    InsufficientMoverVariationError,
    NoMoversError,
    SingularDesignError,
    UnsupportedShapeError,
)
from .estimators import (
    EstimatorConfig,
    PolyStacks,
    _staged,
    estimate_beta_mover,
    estimate_gamma,
    mover_terms,
    prepare,
    residual_moments,
    selector_matrix,
    slope_weights,
    transformed,
)
from .inference import InfluenceSet, assemble_influence
from .panel import Mode, PanelDataset


@dataclass(frozen=True, eq=False)
class ExtEstimates:
    delta_hat: np.ndarray
    gamma_hat: np.ndarray
    beta_unified: np.ndarray
    theta_hat: np.ndarray
    bandwidth_used: float
    v_hat: np.ndarray
    q_hat: np.ndarray
    zeta: np.ndarray
    target_period: int
    poly_order: int
    counts: dict
    beta_mover: Optional[np.ndarray] = None
    warnings: tuple[str, ...] = field(default=())


def _mover_projectors(design: DesignBatch, mover: np.ndarray) -> np.ndarray:
    bad = np.flatnonzero(mover & ~design.m_x_ok)
    if bad.size:
        i = int(bad[0])
        raise SingularDesignError(f"X'X is rank deficient for mover {i}", index=i, matrix="X'X")
    return np.where(mover[:, None, None], np.nan_to_num(design.m_x), 0.0)


def pooled_scores(dataset: PanelDataset, design: DesignBatch, h: float, delta=None):
    """``(V_hat, per-unit scores)`` of the pooled within equations.

    Scores are ``1{D > h} W' M_X (Y - W delta)``; with ``delta=None`` they are
    ``1{D > h} W' M_X Y``.
    """
    mover = design.d > h
    if not np.any(mover):
        raise InsufficientMoverVariationError(f"no unit has D > h = {h:.6g}")
    m_x = _mover_projectors(design, mover)
    w = design.w
    v_hat = np.einsum("nti,nts,nsj->ij", w, m_x, w) / dataset.n
    y = dataset.y if delta is None else dataset.y - w @ np.asarray(delta, dtype=float)
    scores = np.einsum("nti,nts,ns->ni", w, m_x, y)
    return v_hat, scores


def estimate_delta_pooled(dataset: PanelDataset, design: DesignBatch, h: float) -> np.ndarray:
    v_hat, scores = pooled_scores(dataset, design, h)
    return solve_checked(
        v_hat,
        scores.mean(axis=0),
        name="E_N[1{D>h} W'M_X W]",
        error=InsufficientMoverVariationError,
    )


def estimate_beta_unified_ext(
    dataset: PanelDataset, design: DesignBatch, stacks: PolyStacks, delta, gamma=None
) -> np.ndarray:
    if gamma is None:
        gamma = estimate_gamma(dataset, design, stacks, delta)
    r = residual_moments(dataset, design, delta)
    return mover_terms(stacks, r).mean(axis=0) + np.asarray(gamma) @ stacks.h_hat


def influence_ext(
    dataset: PanelDataset,
    design: DesignBatch,
    stacks: PolyStacks,
    delta,
    gamma,
    target_period: int = 1,
) -> InfluenceSet:
    n = dataset.n
    r = residual_moments(dataset, design, delta)
    m = mover_terms(stacks, r)
    block1 = m - m.mean(axis=0)
    sw = slope_weights(stacks)
    block2 = (r - stacks.d1l @ np.asarray(gamma).T) * sw[:, None]
    v_hat, scores = pooled_scores(dataset, design, stacks.bandwidth, delta)
    aw, _ = transformed(dataset, design)
    inv_d = np.zeros(n)
    np.divide(1.0, stacks.d, out=inv_d, where=stacks.mover)
    rsel = selector_matrix(target_period, dataset.t_periods, dataset.p_regressors)
    q_hat = rsel - np.einsum("n,nij->ij", inv_d + sw, aw) / n
    return assemble_influence(block1, block2, scores, v_hat, q_hat)


def estimate_tall(dataset: PanelDataset, config: EstimatorConfig, *, prepared=None) -> ExtEstimates:
    if dataset.mode is not Mode.TALL:
        raise UnsupportedShapeError("estimate_tall needs T > p")
    design, stacks = prepared if prepared is not None else prepare(dataset, config)
    h = stacks.bandwidth
    delta = _staged("delta", estimate_delta_pooled, dataset, design, h)
    gamma = _staged("gamma", estimate_gamma, dataset, design, stacks, delta)
    beta_l = estimate_beta_unified_ext(dataset, design, stacks, delta, gamma)
    infl = _staged("influence", influence_ext, dataset, design, stacks, delta, gamma, config.target_period)
    notes = []
    try:
        beta_m = estimate_beta_mover(dataset, design, stacks, delta)
    except NoMoversError as err:  # pragma: no cover - pooled delta already needs movers
        beta_m = None
        notes.append(str(err))
        warnings.warn(str(err), RuntimeWarning, stacklevel=2)
    rsel = selector_matrix(config.target_period, dataset.t_periods, dataset.p_regressors)
    return ExtEstimates(
        delta_hat=delta,
        gamma_hat=gamma,
        beta_unified=beta_l,
        theta_hat=beta_l + rsel @ delta,
        bandwidth_used=h,
        v_hat=infl.v_hat,
        q_hat=infl.q_hat,
        zeta=infl.zeta,
        target_period=int(config.target_period),
        poly_order=config.poly_order,
        counts=dict(stacks.counts),
        beta_mover=beta_m,
        warnings=tuple(notes),
    )
