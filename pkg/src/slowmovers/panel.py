"""Panel containers.

A dataset stores its cross-section as two read-only arrays, ``y`` of shape
``(N, T)`` and ``x`` of shape ``(N, T, p)``; row ``t`` of ``x[i]`` is the
regressor vector of unit ``i`` in period ``t``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, UnsupportedShapeError, ValidationError


class Mode(str, enum.Enum):
    SQUARE = "square"  # T == p
    TALL = "tall"  # T > p

    @classmethod
    def for_shape(cls, t_periods: int, p_regressors: int) -> "Mode":
        if t_periods == p_regressors:
            return cls.SQUARE
        if t_periods > p_regressors:
            return cls.TALL
        raise UnsupportedShapeError(
            f"T={t_periods} < p={p_regressors}: fewer periods than regressors is not supported"
        )


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PanelObservation:
    y: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        y = _frozen(self.y)
        x = _frozen(self.x)
        if x.ndim == 1:
            x = _frozen(x.reshape(-1, 1))
        if y.ndim != 1 or x.ndim != 2 or x.shape[0] != y.shape[0]:
            raise DimensionError(f"y must be a T-vector and x a T x p matrix, got {y.shape} and {x.shape}")
        if x.shape[1] < 1 or x.shape[0] < x.shape[1]:
            raise UnsupportedShapeError(f"need T >= p >= 1, got T={x.shape[0]}, p={x.shape[1]}")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(x))):
            raise ValidationError("observation contains non-finite entries")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)

    @property
    def t_periods(self) -> int:
        return self.x.shape[0]

    @property
    def p_regressors(self) -> int:
        return self.x.shape[1]


class PanelDataset:
    """Balanced short panel of N units observed over T periods."""

    def __init__(self, y, x):
        y = _frozen(y)
        x = _frozen(x)
        if y.ndim != 2 or x.ndim != 3:
            raise DimensionError(f"expected y (N, T) and x (N, T, p), got {y.shape} and {x.shape}")
        if x.shape[:2] != y.shape:
            raise DimensionError(f"y {y.shape} and x {x.shape} disagree on (N, T)")
        n, t, p = x.shape
        if n < 2:
            raise ValidationError(f"need at least 2 observations, got {n}")
        if p < 1:
            raise DimensionError("need at least one regressor")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(x))):
            raise ValidationError("dataset contains non-finite entries")
        self.mode = Mode.for_shape(t, p)
        self.y = y
        self.x = x

    @classmethod
    def from_observations(cls, observations) -> "PanelDataset":
        observations = list(observations)
        if not observations:
            raise ValidationError("empty dataset")
        shapes = {obs.x.shape for obs in observations}
        if len(shapes) != 1:
            raise DimensionError(f"observations have differing (T, p): {sorted(shapes)}")
        return cls(np.stack([o.y for o in observations]), np.stack([o.x for o in observations]))

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def t_periods(self) -> int:
        return self.y.shape[1]

    @property
    def p_regressors(self) -> int:
        return self.x.shape[2]

    @property
    def observations(self) -> list[PanelObservation]:
        return [PanelObservation(self.y[i], self.x[i]) for i in range(self.n)]

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other) -> bool:
        if not isinstance(other, PanelDataset):
            return NotImplemented
        return np.array_equal(self.y, other.y) and np.array_equal(self.x, other.x)

    def __repr__(self) -> str:
        return f"PanelDataset(n={self.n}, T={self.t_periods}, p={self.p_regressors}, mode={self.mode.value})"

    def with_outcomes(self, y) -> "PanelDataset":
        return PanelDataset(y, self.x)

    def take(self, index) -> "PanelDataset":
        return PanelDataset(self.y[index], self.x[index])
