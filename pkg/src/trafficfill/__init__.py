"""Sparse traffic-speed tensor completion.

Observed (sensor, day, time) speed readings go in as a sparse third-order
tensor; nonnegative CP latent factors trained by multiplicative updates
under a hybrid smooth-L1 + L2 loss come out, ready to impute the missing
cells. Plain L2 and Cauchy losses are included as baselines.
"""

from ._backend import active_backend, available_backends
from .losses import (
    HYBRID,
    L2,
    LOSS_TAGS,
    LossKind,
    cauchy,
    cauchy_element,
    element_loss,
    hybrid_element,
    l2_element,
    objective,
    regularizer,
    sl1_element,
)
from .metrics import MetricReport, evaluate
from .model import FactorModel, init_factors, residual
from .solver import (
    IterationRecord,
    TrainConfig,
    TrainReport,
    gradient,
    train,
    update_mode,
    update_mode_baseline,
)
from .tensor import (
    MODES,
    CooFormatError,
    DatasetSplit,
    Entry,
    EntryIndex,
    SparseTensor3,
    load_coo,
    mode_axis,
    parse_ratios,
    save_coo,
    split,
)

__version__ = "0.1.0"

__all__ = [
    "CooFormatError",
    "DatasetSplit",
    "Entry",
    "EntryIndex",
    "FactorModel",
    "HYBRID",
    "IterationRecord",
    "L2",
    "LOSS_TAGS",
    "LossKind",
    "MODES",
    "MetricReport",
    "SparseTensor3",
    "TrainConfig",
    "TrainReport",
    "active_backend",
    "available_backends",
    "cauchy",
    "cauchy_element",
    "element_loss",
    "evaluate",
    "gradient",
    "hybrid_element",
    "init_factors",
    "l2_element",
    "load_coo",
    "mode_axis",
    "objective",
    "parse_ratios",
    "regularizer",
    "residual",
    "save_coo",
    "sl1_element",
    "split",
    "train",
    "update_mode",
    "update_mode_baseline",
    "__version__",
]
