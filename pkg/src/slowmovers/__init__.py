"""Robust estimation and inference for average partial effects in correlated
random coefficient panels with stayers and slow movers."""

__version__ = "0.1.0"

from .errors import NumericalError, PanelError, ValidationError  # noqa: E402
from .estimators import CoreEstimates, EstimatorConfig, estimate_all  # noqa: E402
from .panel import Mode, PanelDataset, PanelObservation  # noqa: E402

__all__ = [
    "__version__",
    "CoreEstimates",
    "EstimatorConfig",
    "Mode",
    "NumericalError",
    "PanelDataset",
    "PanelError",
    "PanelObservation",
    "ValidationError",
    "estimate_all",
]
