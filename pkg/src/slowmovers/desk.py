"""Small fixed datasets for hand checks, and noise-free panel builders."""

from __future__ import annotations

import numpy as np

from .algebra import build_time_shift_design
from .panel import PanelDataset

# T = p = 2, X_t = (1, x_t). Two stayers, seven slow movers at h = 0.5, seven movers.
_DS1_X = [
    (0.3, 0.3), (-1.2, -1.2), (0.8, 0.85), (0.1, -0.02), (-0.5, -0.3), (1.4, 1.1),
    (-0.9, -0.55), (0.25, 0.7), (0.6, 0.12), (-0.35, 0.45), (1.1, 0.0), (-1.6, -0.3),
    (0.45, -0.45), (-0.05, 1.65), (0.95, 1.55), (-0.7, -1.35),
]
_DS1_Y = [
    (0.42, 0.95), (-0.31, 0.18), (0.77, 1.46), (0.12, 0.58), (-0.08, 0.41), (1.03, 1.32),
    (-0.27, 0.36), (0.33, 1.12), (0.51, 0.74), (-0.06, 0.88), (0.84, 0.49), (-0.62, 0.27),
    (0.29, 0.21), (0.05, 1.94), (0.71, 1.87), (-0.19, -0.23),
]
DS1_BANDWIDTH = 0.5

# T = 3, p = 2, X_t = (1, x_t). Three slow movers at h = 0.2, five movers.
_DS2_X = [
    (0.0, 0.1, 0.2), (0.5, 0.55, 0.45), (1.0, 1.2, 0.9), (-0.4, 0.6, 1.1),
    (0.2, -0.9, 0.4), (1.5, 0.3, -0.2), (-1.0, -0.2, -1.6), (0.7, 1.9, 0.1),
]
_DS2_Y = [
    (0.21, 0.74, 0.83), (0.44, 0.97, 1.02), (0.63, 1.35, 1.18), (-0.12, 1.08, 1.61),
    (0.37, 0.15, 1.04), (0.92, 0.66, 0.41), (-0.35, 0.38, -0.26), (0.48, 1.73, 0.69),
]
DS2_BANDWIDTH = 0.2


def _with_intercept(xs) -> np.ndarray:
    xs = np.asarray(xs, dtype=float)
    return np.stack([np.ones_like(xs), xs], axis=-1)


def desk_dataset_1() -> PanelDataset:
    return PanelDataset(np.array(_DS1_Y), _with_intercept(_DS1_X))


def desk_dataset_2() -> PanelDataset:
    return PanelDataset(np.array(_DS2_Y), _with_intercept(_DS2_X))


def homogeneous_panel(x, b, delta) -> PanelDataset:
    """Noise-free outcomes ``Y_t = X_t'(b + delta_t)`` with ``delta_1 = 0``.

    ``delta`` is the stacked vector of shifts for periods 2..T.
    """
    x = np.asarray(x, dtype=float)
    b = np.asarray(b, dtype=float)
    y = x @ b + build_time_shift_design(x) @ np.asarray(delta, dtype=float)
    return PanelDataset(y, x)
