"""Nonnegative CP latent-factor model over a (sensor, day, time) tensor.

A rank-R model keeps one factor matrix per mode; the prediction for cell
(i, j, k) is the sum over columns r of sensor[i, r] * day[j, r] * time[k, r].
Columns are summed in ascending order so repeated evaluation is bit-stable.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _backend
from .tensor import MODES, EntryIndex


def _as_factor(arr, name: str) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=np.float64)
    if out.ndim != 2:
        raise ValueError(f"{name} factor matrix must be 2-D, got {out.ndim}-D")
    if out.size and out.min() < 0.0:
        raise ValueError(f"{name} factor matrix must be nonnegative")
    return out


@dataclass(eq=False)
class FactorModel:
    """Per-mode factor matrices, mutated in place only by the solver."""

    factors: tuple[np.ndarray, np.ndarray, np.ndarray]

    def __post_init__(self):
        if len(self.factors) != 3:
            raise ValueError("a third-order model needs exactly 3 factor matrices")
        mats = tuple(_as_factor(f, MODES[m]) for m, f in enumerate(self.factors))
        ranks = {f.shape[1] for f in mats}
        if len(ranks) != 1:
            raise ValueError(f"factor matrices disagree on rank: {ranks}")
        if mats[0].shape[1] < 1:
            raise ValueError("rank must be at least 1")
        self.factors = mats

    # ------------------------------------------------------------------

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(f.shape[0] for f in self.factors)

    @property
    def rank(self) -> int:
        return int(self.factors[0].shape[1])

    @property
    def sensor_factors(self) -> np.ndarray:
        return self.factors[0]

    @property
    def day_factors(self) -> np.ndarray:
        return self.factors[1]

    @property
    def time_factors(self) -> np.ndarray:
        return self.factors[2]

    def copy(self) -> "FactorModel":
        return FactorModel(tuple(f.copy() for f in self.factors))

    # ------------------------------------------------------------------
    # prediction

    def _check_indices(self, ii, jj, kk) -> None:
        for axis, arr in enumerate((ii, jj, kk)):
            if arr.size and (arr.min() < 0 or arr.max() >= self.dims[axis]):
                raise IndexError(
                    f"{MODES[axis]} index out of range [0, {self.dims[axis]})"
                )

    def predict_entries(self, ii, jj, kk) -> np.ndarray:
        """Predictions for parallel index arrays, as float64."""
        ii = np.asarray(ii, dtype=np.int64)
        jj = np.asarray(jj, dtype=np.int64)
        kk = np.asarray(kk, dtype=np.int64)
        self._check_indices(ii, jj, kk)
        return _backend.predict_entries(*self.factors, ii, jj, kk)

    def predict(self, index) -> float:
        """Prediction for a single (i, j, k) position."""
        i, j, k = index
        out = self.predict_entries(
            np.array([i], dtype=np.int64),
            np.array([j], dtype=np.int64),
            np.array([k], dtype=np.int64),
        )
        return float(out[0])

    def impute(self, targets: Sequence) -> list[tuple[EntryIndex, float]]:
        """Predict the listed positions, preserving order and repeats."""
        idx = [EntryIndex(int(t[0]), int(t[1]), int(t[2])) for t in targets]
        if not idx:
            return []
        ii = np.array([p.i for p in idx], dtype=np.int64)
        jj = np.array([p.j for p in idx], dtype=np.int64)
        kk = np.array([p.k for p in idx], dtype=np.int64)
        self._check_indices(ii, jj, kk)
        preds = _backend.predict_entries(*self.factors, ii, jj, kk)
        return [(p, float(v)) for p, v in zip(idx, preds)]

    # ------------------------------------------------------------------
    # persistence

    def digest(self) -> str:
        """Hex digest of dims plus the exact factor bytes."""
        h = hashlib.sha256()
        h.update(("%d,%d,%d,%d" % (*self.dims, self.rank)).encode())
        for f in self.factors:
            h.update(f.tobytes())
        return h.hexdigest()

    def to_checkpoint_text(self) -> str:
        dims = self.dims
        lines = ["#factors,%d,%d,%d,%d" % (*dims, self.rank)]
        for marker, mat in zip(("#S", "#D", "#T"), self.factors):
            lines.append(marker)
            for row in mat:
                lines.append(",".join(repr(float(v)) for v in row))
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        """Write the factors as text; values round-trip exactly."""
        Path(path).write_text(self.to_checkpoint_text(), encoding="utf-8")

    @classmethod
    def from_checkpoint_text(cls, text: str) -> "FactorModel":
        lines = [ln.strip() for ln in text.splitlines()]
        if not lines or not lines[0].startswith("#factors,"):
            raise ValueError("checkpoint must start with a #factors,I,J,K,R header")
        head = lines[0].split(",")
        if len(head) != 5:
            raise ValueError(f"malformed checkpoint header: {lines[0]!r}")
        try:
            di, dj, dk, rank = (int(x) for x in head[1:])
        except ValueError:
            raise ValueError(f"malformed checkpoint header: {lines[0]!r}") from None
        sections: dict[str, list[list[float]]] = {}
        current = None
        for ln in lines[1:]:
            if not ln:
                continue
            if ln in ("#S", "#D", "#T"):
                if ln in sections:
                    raise ValueError(f"duplicate checkpoint section {ln}")
                current = sections.setdefault(ln, [])
                continue
            if ln.startswith("#"):
                continue
            if current is None:
                raise ValueError("factor rows before any #S/#D/#T marker")
            current.append([float(v) for v in ln.split(",")])
        mats = []
        for marker, n_rows in (("#S", di), ("#D", dj), ("#T", dk)):
            rows = sections.get(marker)
            if rows is None:
                raise ValueError(f"checkpoint missing section {marker}")
            if len(rows) != n_rows or any(len(r) != rank for r in rows):
                raise ValueError(
                    f"section {marker} must be {n_rows} rows of {rank} values"
                )
            mats.append(np.array(rows, dtype=np.float64).reshape(n_rows, rank))
        return cls(tuple(mats))

    @classmethod
    def load(cls, path) -> "FactorModel":
        return cls.from_checkpoint_text(Path(path).read_text(encoding="utf-8"))


def residual(y, yhat):
    """Observed minus predicted."""
    return y - yhat


def init_factors(dims, rank: int, seed: int, scale: float = 0.1) -> FactorModel:
    """Strictly positive uniform (0, scale] factors, deterministic per seed."""
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3 or any(d <= 0 for d in dims):
        raise ValueError(f"dims must be three positive integers, got {dims}")
    if rank < 1:
        raise ValueError(f"rank must be at least 1, got {rank}")
    if not scale > 0.0:
        raise ValueError(f"init scale must be positive, got {scale}")
    rng = np.random.default_rng(seed)
    # 1 - U maps [0, 1) draws onto (0, 1], keeping every element positive
    mats = tuple(scale * (1.0 - rng.random((d, rank))) for d in dims)
    return FactorModel(mats)
