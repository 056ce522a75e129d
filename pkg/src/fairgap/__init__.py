"""Fairness-gap auditing toolkit."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    BayesOfInstance,
    Constant,
    GapReport,
    LabeledDataset,
    LinearCircle,
    Logistic,
    TabularInstance,
    Table,
    dataset_from_arrays,
    validate_dataset,
)
from .gaps import BinningConfig, estimate_gaps, exact_gaps_tabular  # noqa: E402
from .losses import LOGISTIC, SQUARE, BregmanLoss, excess_risk  # noqa: E402
from .bounds import attach_verdicts, build_catalog, instance_catalog  # noqa: E402
from .kernels import BACKEND  # noqa: E402

__all__ = [
    "BACKEND",
    "BayesOfInstance",
    "BinningConfig",
    "BregmanLoss",
    "Constant",
    "GapReport",
    "LOGISTIC",
    "LabeledDataset",
    "LinearCircle",
    "Logistic",
    "SQUARE",
    "TabularInstance",
    "Table",
    "attach_verdicts",
    "build_catalog",
    "dataset_from_arrays",
    "estimate_gaps",
    "exact_gaps_tabular",
    "excess_risk",
    "instance_catalog",
    "validate_dataset",
]
