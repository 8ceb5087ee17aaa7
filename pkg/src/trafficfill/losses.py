"""Loss kinds and the regularized training objective.

The headline loss blends a smooth-L1 term with a squared term, per entry:
2*delta^2 while |delta| <= 1, and |delta| + delta^2 outside. Both branches
meet at 2 when |delta| = 1, so the objective is continuous. Plain L2 and a
Cauchy loss are kept as baselines. Every kind adds the same ridge penalty,
lam * sum_r (s_ir^2 + d_jr^2 + t_kr^2), accumulated per observed entry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .model import FactorModel
from .tensor import SparseTensor3

LOSS_TAGS = ("hybrid", "l2", "cauchy")

_CODES = {
    "hybrid": _backend.KIND_HYBRID,
    "l2": _backend.KIND_L2,
    "cauchy": _backend.KIND_CAUCHY,
}


@dataclass(frozen=True)
class LossKind:
    """Which per-entry loss to train and evaluate with.

    cauchy_gamma is the Cauchy scale; it is ignored by the other kinds.
    """

    tag: str = "hybrid"
    cauchy_gamma: float = 1.0

    def __post_init__(self):
        if self.tag not in LOSS_TAGS:
            raise ValueError(f"loss tag must be one of {LOSS_TAGS}, got {self.tag!r}")
        if not self.cauchy_gamma > 0.0:
            raise ValueError(f"cauchy_gamma must be positive, got {self.cauchy_gamma}")

    @property
    def code(self) -> int:
        return _CODES[self.tag]


HYBRID = LossKind("hybrid")
L2 = LossKind("l2")


def cauchy(gamma: float = 1.0) -> LossKind:
    return LossKind("cauchy", gamma)


def _elementwise(delta, fn):
    arr = np.asarray(delta, dtype=np.float64)
    out = fn(arr)
    return out[()] if out.ndim == 0 else out


def sl1_element(delta):
    """Smooth L1: delta^2 inside the unit band, |delta| outside."""
    return _elementwise(
        delta, lambda d: np.where(np.abs(d) <= 1.0, d * d, np.abs(d))
    )


def hybrid_element(delta):
    """Smooth-L1 plus squared error: 2*delta^2 inside, |delta| + delta^2 outside."""
    return _elementwise(
        delta,
        lambda d: np.where(np.abs(d) <= 1.0, 2.0 * d * d, np.abs(d) + d * d),
    )


def l2_element(delta):
    """Plain squared error."""
    return _elementwise(delta, lambda d: d * d)


def cauchy_element(delta, gamma: float = 1.0):
    """log(1 + (delta/gamma)^2)."""
    if not gamma > 0.0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    return _elementwise(delta, lambda d: np.log1p((d / gamma) ** 2))


def element_loss(delta, kind: LossKind = HYBRID):
    """Per-entry loss for any kind."""
    if kind.tag == "hybrid":
        return hybrid_element(delta)
    if kind.tag == "l2":
        return l2_element(delta)
    return cauchy_element(delta, kind.cauchy_gamma)


def regularizer(model: FactorModel, entry) -> float:
    """Unscaled ridge term for one entry: sum_r of the three squared factors."""
    i, j, k = int(entry[0]), int(entry[1]), int(entry[2])
    fs, fd, ft = model.factors
    return float(
        np.sum(fs[i] * fs[i]) + np.sum(fd[j] * fd[j]) + np.sum(ft[k] * ft[k])
    )


def objective(
    model: FactorModel,
    data: SparseTensor3,
    lam: float,
    kind: LossKind = HYBRID,
) -> float:
    """Total loss plus lam-scaled ridge penalty over the given entries.

    An empty entry set scores 0 for every kind.
    """
    if lam < 0.0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    if data.dims != model.dims:
        raise ValueError(
            f"tensor dims {data.dims} do not match model dims {model.dims}"
        )
    return float(
        _backend.objective_sum(
            *model.factors,
            data.ii,
            data.jj,
            data.kk,
            data.values,
            float(lam),
            kind.code,
            float(kind.cauchy_gamma),
        )
    )
