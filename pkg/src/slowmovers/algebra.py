"""Small dense matrix kernels shared by the estimators.

Every kernel accepts a single matrix or a stack of matrices along leading
axes, so the estimators can evaluate all N units at once.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionError, SingularDesignError, UnsupportedShapeError
from .panel import Mode, PanelDataset, PanelObservation

COND_LIMIT = 1e12
# Gram determinants below this multiple of the Hadamard bound are rounding residue
GRAM_DET_RTOL = 1e-13


def _as_square(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim < 2 or m.shape[-1] != m.shape[-2]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    return m


def determinant(m) -> np.ndarray | float:
    """Determinant of a square matrix (or of each matrix in a stack).

    1x1 and 2x2 use the closed form; larger sizes use LU with partial
    pivoting. No row scaling is applied.
    """
    m = _as_square(m)
    p = m.shape[-1]
    if p == 1:
        out = m[..., 0, 0].copy()
    elif p == 2:
        out = m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.linalg.det(m)
    return float(out) if out.ndim == 0 else out


def adjugate(m) -> np.ndarray:
    """Transposed cofactor matrix.

    Built from minors, so it is well defined for singular input and
    ``adjugate(m) @ m == det(m) * I`` always holds.
    """
    m = _as_square(m)
    p = m.shape[-1]
    if p == 1:
        return np.ones_like(m)
    if p == 2:
        out = np.empty_like(m)
        out[..., 0, 0] = m[..., 1, 1]
        out[..., 0, 1] = -m[..., 0, 1]
        out[..., 1, 0] = -m[..., 1, 0]
        out[..., 1, 1] = m[..., 0, 0]
        return out
    out = np.empty_like(m)
    idx = np.arange(p)
    for i in range(p):
        rows = idx[idx != i]
        for j in range(p):
            cols = idx[idx != j]
            minor = m[..., rows[:, None], cols[None, :]]
            sign = -1.0 if (i + j) % 2 else 1.0
            out[..., j, i] = sign * np.asarray(determinant(minor))
    return out


def build_time_shift_design(x) -> np.ndarray:
    """Place ``X_t'`` in column block ``t-1`` of row ``t`` (row 1 is zero).

    Accepts ``(T, p)`` or a stack ``(..., T, p)``; returns ``(..., T, p*(T-1))``.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim < 2:
        raise DimensionError(f"expected a T x p matrix, got shape {x.shape}")
    t_periods, p = x.shape[-2:]
    if t_periods < 2:
        raise UnsupportedShapeError(f"time-shift design needs T >= 2, got T={t_periods}")
    w = np.zeros(x.shape[:-2] + (t_periods, p * (t_periods - 1)))
    for t in range(1, t_periods):
        w[..., t, (t - 1) * p : t * p] = x[..., t, :]
    return w


def gram_determinant(gram) -> np.ndarray | float:
    """``det(X'X)`` with negative values and rounding residue set to zero.

    A Gram matrix of rank-deficient ``X`` (a stayer) has determinant exactly
    zero; in floating point it comes out as a tiny number of either sign.
    """
    gram = _as_square(gram)
    d = np.asarray(determinant(gram))
    bound = np.prod(np.diagonal(gram, axis1=-2, axis2=-1), axis=-1)
    d = np.where(d <= GRAM_DET_RTOL * bound, 0.0, d)
    return float(d) if d.ndim == 0 else d


def condition_number(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    with np.errstate(all="ignore"):
        c = np.linalg.cond(m)
    return np.where(np.isfinite(c), c, np.inf)


def residual_projector(x, *, index: int | None = None) -> np.ndarray:
    """``I - X (X'X)^{-1} X'`` for a tall ``T x p`` matrix."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise DimensionError(f"expected a T x p matrix, got shape {x.shape}")
    t_periods, p = x.shape
    if t_periods <= p:
        raise UnsupportedShapeError(f"residual projector needs T > p, got T={t_periods}, p={p}")
    gram = x.T @ x
    if condition_number(gram) > COND_LIMIT:
        where = "" if index is None else f" (observation {index})"
        raise SingularDesignError(f"X'X is rank deficient{where}", index=index, matrix="X'X")
    return np.eye(t_periods) - x @ np.linalg.solve(gram, x.T)


def solve_checked(a, b, *, name: str, error=SingularDesignError, **error_kw) -> np.ndarray:
    """Solve ``a z = b`` after symmetric diagonal equilibration.

    The condition number is judged on the equilibrated matrix so that
    polynomial Gram matrices in powers of a small bandwidth are not rejected
    for their scale alone.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise error(f"{name} has non-finite entries", matrix=name, **error_kw)
    scale = np.sqrt(np.abs(np.diag(a)))
    if np.any(scale == 0.0):
        raise error(f"{name} is singular (zero diagonal entry)", matrix=name, **error_kw)
    a_eq = a / np.outer(scale, scale)
    cond = condition_number(a_eq)
    if cond > COND_LIMIT:
        raise error(f"{name} is singular (condition number {cond:.3g})", matrix=name, **error_kw)
    rhs = b / (scale[:, None] if b.ndim == 2 else scale)
    z = np.linalg.solve(a_eq, rhs)
    return z / (scale[:, None] if b.ndim == 2 else scale)


@dataclass(frozen=True, eq=False)
class DesignArtifacts:
    """Derived algebra for one observation.

    ``a_matrix`` is ``adj(X)`` (p x p) when T == p and ``adj(X'X) X'``
    (p x T) when T > p. ``m_x`` exists only for T > p with nonsingular X'X.
    """

    d: float
    a_matrix: np.ndarray
    w: np.ndarray
    m_x: Optional[np.ndarray] = None


def design_artifacts(obs: PanelObservation, mode: Mode | str) -> DesignArtifacts:
    mode = Mode(mode)
    x = obs.x
    if Mode.for_shape(*x.shape) is not mode:
        raise UnsupportedShapeError(f"mode {mode.value} inconsistent with T={x.shape[0]}, p={x.shape[1]}")
    w = build_time_shift_design(x)
    if mode is Mode.SQUARE:
        return DesignArtifacts(d=determinant(x), a_matrix=adjugate(x), w=w)
    gram = x.T @ x
    try:
        m_x = residual_projector(x)
    except SingularDesignError:
        m_x = None
    return DesignArtifacts(d=gram_determinant(gram), a_matrix=adjugate(gram) @ x.T, w=w, m_x=m_x)


@dataclass(frozen=True, eq=False)
class DesignBatch:
    """Stacked :class:`DesignArtifacts` for a whole dataset.

    ``m_x`` rows for units with singular X'X are NaN and flagged in
    ``m_x_ok``.
    """

    mode: Mode
    d: np.ndarray  # (N,)
    a_matrix: np.ndarray  # (N, p, p) or (N, p, T)
    w: np.ndarray  # (N, T, p(T-1))
    m_x: Optional[np.ndarray] = None  # (N, T, T)
    m_x_ok: Optional[np.ndarray] = None  # (N,) bool

    def __getitem__(self, i: int) -> DesignArtifacts:
        m_x = None
        if self.m_x is not None and self.m_x_ok[i]:
            m_x = self.m_x[i]
        return DesignArtifacts(d=float(self.d[i]), a_matrix=self.a_matrix[i], w=self.w[i], m_x=m_x)


def batch_artifacts(dataset: PanelDataset) -> DesignBatch:
    x = dataset.x
    w = build_time_shift_design(x)
    if dataset.mode is Mode.SQUARE:
        return DesignBatch(Mode.SQUARE, np.asarray(determinant(x)), adjugate(x), w)
    gram = np.einsum("ntp,ntq->npq", x, x)
    d = np.asarray(gram_determinant(gram))
    a_matrix = adjugate(gram) @ np.swapaxes(x, 1, 2)
    ok = condition_number(gram) <= COND_LIMIT
    t_periods = dataset.t_periods
    m_x = np.full((dataset.n, t_periods, t_periods), np.nan)
    if np.any(ok):
        xo = x[ok]
        m_x[ok] = np.eye(t_periods) - xo @ np.linalg.solve(gram[ok], np.swapaxes(xo, 1, 2))
    return DesignBatch(Mode.TALL, d, a_matrix, w, m_x, ok)
