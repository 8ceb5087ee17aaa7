"""Multiplicative-update training for the nonnegative CP model.

One iteration sweeps the modes in a fixed order (sensor, then day, then
time). Each sweep re-reads the residuals with the factors as they stand at
the start of that pass, accumulates per-row numerator and denominator sums
over the row's observed entries, then rescales the whole factor matrix at
once. Because numerators and denominators are built from nonnegative data,
factors stay nonnegative forever; a small additive guard keeps the division
finite when a denominator underflows to zero.

For the hybrid loss the accumulation is branch-dependent per entry:

    delta < -1:   num += 2*y*p          den += p + 2*yhat*p + 2*lam*u
    |delta| <= 1: num += 4*y*p          den += 4*yhat*p     + 2*lam*u
    delta > 1:    num += p + 2*y*p      den += 2*yhat*p     + 2*lam*u

with p the product of the two fixed-mode factors and u the current factor
element. The L2 baseline uses num += y*p, den += yhat*p + lam*u; the Cauchy
baseline additionally weights the y and yhat terms by 1/(gamma^2 + delta^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import _backend
from .losses import HYBRID, LossKind, objective
from .metrics import evaluate
from .model import FactorModel, init_factors
from .tensor import DatasetSplit, SparseTensor3, mode_axis


@dataclass(frozen=True)
class TrainConfig:
    """Solver settings; defaults hold for every experiment unless overridden."""

    rank: int = 20
    lam: float = 0.0
    loss: LossKind = HYBRID
    max_iters: int = 1000
    tol: float = 1e-5
    seed: int = 0
    init_scale: float = 0.1
    denom_guard: float = 1e-12

    def validate(self) -> None:
        if self.rank < 1:
            raise ValueError(f"rank must be at least 1, got {self.rank}")
        if self.lam < 0.0:
            raise ValueError(f"lambda must be nonnegative, got {self.lam}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be at least 1, got {self.max_iters}")
        if not self.tol > 0.0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if not self.init_scale > 0.0:
            raise ValueError(f"init_scale must be positive, got {self.init_scale}")
        if not self.denom_guard > 0.0:
            raise ValueError(
                f"denom_guard must be positive, got {self.denom_guard}"
            )
        if not isinstance(self.loss, LossKind):
            raise ValueError("loss must be a LossKind")


class IterationRecord(NamedTuple):
    """One row of training history."""

    iteration: int
    train_objective: float
    val_rmse: float
    val_mae: float


@dataclass
class TrainReport:
    """What happened during one training run."""

    history: list[IterationRecord] = field(default_factory=list)
    converged: bool = False
    iterations_run: int = 0
    initial_objective: float = math.nan
    final_model_ref: str = ""

    def history_csv(self) -> str:
        lines = ["iter,train_objective,val_rmse,val_mae"]
        for rec in self.history:
            lines.append(
                f"{rec.iteration},{rec.train_objective!r},"
                f"{rec.val_rmse!r},{rec.val_mae!r}"
            )
        return "\n".join(lines) + "\n"

    def write_history_csv(self, path) -> None:
        Path(path).write_text(self.history_csv(), encoding="utf-8")


def _check_compat(model: FactorModel, data: SparseTensor3, lam: float) -> None:
    if data.dims != model.dims:
        raise ValueError(
            f"tensor dims {data.dims} do not match model dims {model.dims}"
        )
    if lam < 0.0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")


def gradient(
    model: FactorModel,
    data: SparseTensor3,
    lam: float,
    mode: int | str,
    row: int,
    col: int,
) -> float:
    """Partial derivative of the hybrid objective w.r.t. one factor element.

    Summed over the observed entries in the row's slice; an empty slice
    contributes zero. The objective has kinks where |delta| = 1; this is
    the one-sided-consistent value that puts the boundary in the quadratic
    branch, matching the elementwise loss definition.
    """
    _check_compat(model, data, lam)
    axis = mode_axis(mode)
    upd = model.factors[axis]
    if not 0 <= col < model.rank:
        raise IndexError(f"column {col} out of range [0, {model.rank})")
    pos = data.mode_positions(axis, row)
    u = float(upd[row, col])
    if pos.size == 0:
        return 0.0
    ii = data.ii[pos]
    jj = data.jj[pos]
    kk = data.kk[pos]
    y = data.values[pos]
    yhat = _backend.predict_entries(*model.factors, ii, jj, kk)
    delta = y - yhat
    others = [m for m in range(3) if m != axis]
    idx = (ii, jj, kk)
    p = (
        model.factors[others[0]][idx[others[0]], col]
        * model.factors[others[1]][idx[others[1]], col]
    )
    lo = delta < -1.0
    hi = delta > 1.0
    terms = np.where(
        lo,
        p - 2.0 * delta * p,
        np.where(hi, -p - 2.0 * delta * p, -4.0 * delta * p),
    )
    return float(np.sum(terms + 2.0 * lam * u))


def _run_pass(
    model: FactorModel,
    data: SparseTensor3,
    lam: float,
    mode: int | str,
    kind: LossKind,
    guard: float,
) -> FactorModel:
    _check_compat(model, data, lam)
    if not guard > 0.0:
        raise ValueError(f"denominator guard must be positive, got {guard}")
    _backend.update_pass(
        *model.factors,
        data.ii,
        data.jj,
        data.kk,
        data.values,
        mode_axis(mode),
        float(lam),
        float(guard),
        kind.code,
        float(kind.cauchy_gamma),
    )
    return model


def update_mode(
    model: FactorModel,
    data: SparseTensor3,
    lam: float,
    mode: int | str,
    *,
    guard: float = 1e-12,
) -> FactorModel:
    """One hybrid-loss multiplicative pass over `mode`; updates in place."""
    return _run_pass(model, data, lam, mode, HYBRID, guard)


def update_mode_baseline(
    model: FactorModel,
    data: SparseTensor3,
    lam: float,
    mode: int | str,
    kind: LossKind,
    *,
    guard: float = 1e-12,
) -> FactorModel:
    """One baseline (L2 or Cauchy) multiplicative pass; updates in place."""
    if kind.tag == "hybrid":
        raise ValueError("use update_mode for the hybrid loss")
    return _run_pass(model, data, lam, mode, kind, guard)


def train(
    data: SparseTensor3,
    dsplit: DatasetSplit,
    cfg: TrainConfig,
) -> tuple[FactorModel, TrainReport]:
    """Fit factors on the training split, tracking validation metrics.

    Stops once the training objective moves by less than cfg.tol between
    consecutive iterations, or after cfg.max_iters iterations. Identical
    inputs give bit-identical factors and history.
    """
    cfg.validate()
    for part in (dsplit.train, dsplit.validation, dsplit.test):
        if part.dims != data.dims:
            raise ValueError(
                f"split dims {part.dims} do not match tensor dims {data.dims}"
            )
    if dsplit.train.n_entries == 0:
        raise ValueError("training split has no entries")

    train_set = dsplit.train
    val_set = dsplit.validation
    model = init_factors(data.dims, cfg.rank, cfg.seed, cfg.init_scale)
    report = TrainReport()
    report.initial_objective = objective(model, train_set, cfg.lam, cfg.loss)

    prev = None
    for it in range(1, cfg.max_iters + 1):
        for mode in (0, 1, 2):
            _run_pass(model, train_set, cfg.lam, mode, cfg.loss, cfg.denom_guard)
        obj = objective(model, train_set, cfg.lam, cfg.loss)
        if val_set.n_entries:
            val = evaluate(model, val_set)
            val_rmse, val_mae = val.rmse, val.mae
        else:
            val_rmse = val_mae = math.nan
        report.history.append(IterationRecord(it, obj, val_rmse, val_mae))
        if prev is not None and abs(obj - prev) < cfg.tol:
            report.converged = True
            break
        prev = obj

    report.iterations_run = len(report.history)
    report.final_model_ref = model.digest()
    return model, report
