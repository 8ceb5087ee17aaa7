"""Holdout accuracy metrics for imputation quality."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import FactorModel
from .tensor import SparseTensor3


@dataclass(frozen=True)
class MetricReport:
    """RMSE and MAE over a holdout set of observed entries."""

    rmse: float
    mae: float
    count: int

    def rows(self) -> list[tuple[str, str]]:
        return [
            ("rmse", repr(self.rmse)),
            ("mae", repr(self.mae)),
            ("count", str(self.count)),
        ]

    def to_csv(self) -> str:
        lines = ["metric,value"]
        lines += [f"{name},{value}" for name, value in self.rows()]
        return "\n".join(lines) + "\n"


def evaluate(model: FactorModel, holdout: SparseTensor3) -> MetricReport:
    """Root-mean-square and mean-absolute error of predictions on `holdout`.

    Raises:
        ValueError: empty holdout, or dims mismatch with the model.
    """
    if holdout.n_entries == 0:
        raise ValueError("cannot evaluate on an empty holdout set")
    if holdout.dims != model.dims:
        raise ValueError(
            f"holdout dims {holdout.dims} do not match model dims {model.dims}"
        )
    err = holdout.values - model.predict_entries(holdout.ii, holdout.jj, holdout.kk)
    rmse = math.sqrt(float(np.mean(err * err)))
    mae = float(np.mean(np.abs(err)))
    return MetricReport(rmse=rmse, mae=mae, count=holdout.n_entries)
