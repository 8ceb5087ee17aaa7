"""Sparse third-order tensor storage, COO text I/O, and dataset splitting.

A traffic-speed tensor is indexed (sensor, day, time-slot). Only observed
cells are stored, as parallel coordinate/value arrays; everything downstream
(training, evaluation, imputation) works off this entry list. Instances are
immutable so they can be shared freely between readers.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

#: Mode names, in axis order.
MODES = ("sensor", "day", "time")


class CooFormatError(ValueError):
    """A COO text stream violates the format contract."""


class EntryIndex(NamedTuple):
    """Position of one cell."""

    i: int
    j: int
    k: int


class Entry(NamedTuple):
    """One observed cell: position plus value."""

    i: int
    j: int
    k: int
    value: float

    @property
    def index(self) -> EntryIndex:
        return EntryIndex(self.i, self.j, self.k)


def mode_axis(mode: int | str) -> int:
    """Map a mode name or axis number to the axis number 0, 1 or 2."""
    if isinstance(mode, str):
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}, expected one of {MODES}")
        return MODES.index(mode)
    axis = int(mode)
    if axis not in (0, 1, 2):
        raise ValueError(f"mode axis must be 0, 1 or 2, got {axis}")
    return axis


def _as_index_array(values, n: int | None = None) -> np.ndarray:
    arr = np.asarray(values, dtype=np.int64)
    if arr.ndim != 1:
        raise ValueError("index arrays must be one-dimensional")
    if n is not None and arr.shape[0] != n:
        raise ValueError("coordinate arrays must all have the same length")
    return arr


class SparseTensor3:
    """Immutable sensor x day x time tensor holding observed entries only.

    Attributes:
        dims: (sensor count, day count, slot count), all positive.
        ii, jj, kk: int64 coordinate arrays, one element per entry.
        values: float64 observed values, nonnegative and finite.
    """

    __slots__ = ("dims", "ii", "jj", "kk", "values", "_mode_slices")

    def __init__(self, dims, ii, jj, kk, values):
        dims = tuple(int(d) for d in dims)
        if len(dims) != 3 or any(d <= 0 for d in dims):
            raise ValueError(f"dims must be three positive integers, got {dims}")
        ii = _as_index_array(ii)
        n = ii.shape[0]
        jj = _as_index_array(jj, n)
        kk = _as_index_array(kk, n)
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 1 or values.shape[0] != n:
            raise ValueError("values must be one-dimensional, one per entry")
        for axis, arr in enumerate((ii, jj, kk)):
            if n and (arr.min() < 0 or arr.max() >= dims[axis]):
                raise ValueError(
                    f"{MODES[axis]} indices must lie in [0, {dims[axis]})"
                )
        if n:
            if not np.all(np.isfinite(values)):
                raise ValueError("entry values must be finite")
            if values.min() < 0.0:
                raise ValueError("entry values must be nonnegative")
            flat = (ii * dims[1] + jj) * dims[2] + kk
            if np.unique(flat).size != n:
                raise ValueError("duplicate (i, j, k) entries are not allowed")
        self.dims = dims
        self.ii = ii
        self.jj = jj
        self.kk = kk
        self.values = values
        for arr in (self.ii, self.jj, self.kk, self.values):
            arr.setflags(write=False)
        self._mode_slices: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    # ------------------------------------------------------------------
    # construction helpers

    @classmethod
    def from_entries(cls, dims, entries: Iterable[tuple]) -> "SparseTensor3":
        """Build a tensor from an iterable of (i, j, k, value) records."""
        rows = list(entries)
        ii = [r[0] for r in rows]
        jj = [r[1] for r in rows]
        kk = [r[2] for r in rows]
        vv = [r[3] for r in rows]
        return cls(dims, ii, jj, kk, vv)

    # ------------------------------------------------------------------
    # basic queries

    @property
    def n_entries(self) -> int:
        return int(self.values.shape[0])

    def entries(self) -> list[Entry]:
        """All entries, in stored order."""
        return [
            Entry(int(i), int(j), int(k), float(v))
            for i, j, k, v in zip(self.ii, self.jj, self.kk, self.values)
        ]

    def _slice_table(self, axis: int) -> tuple[np.ndarray, np.ndarray]:
        # lazily built CSR-style table: stable sort keeps stored order
        # within each slice
        cached = self._mode_slices.get(axis)
        if cached is None:
            rows = (self.ii, self.jj, self.kk)[axis]
            order = np.argsort(rows, kind="stable")
            counts = np.bincount(rows, minlength=self.dims[axis])
            indptr = np.concatenate(([0], np.cumsum(counts)))
            cached = (order, indptr)
            self._mode_slices[axis] = cached
        return cached

    def mode_positions(self, mode: int | str, index: int) -> np.ndarray:
        """Stored-order entry positions whose `mode` coordinate equals `index`."""
        axis = mode_axis(mode)
        if not 0 <= index < self.dims[axis]:
            raise IndexError(
                f"{MODES[axis]} index {index} out of range [0, {self.dims[axis]})"
            )
        order, indptr = self._slice_table(axis)
        return order[indptr[index]:indptr[index + 1]]

    def mode_slice(self, mode: int | str, index: int) -> list[Entry]:
        """All entries in one slice of the tensor, in stored order."""
        pos = self.mode_positions(mode, index)
        return [
            Entry(int(self.ii[p]), int(self.jj[p]), int(self.kk[p]),
                  float(self.values[p]))
            for p in pos
        ]

    def take(self, positions) -> "SparseTensor3":
        """Sub-tensor (same dims) holding the entries at `positions`."""
        pos = np.asarray(positions, dtype=np.int64)
        return SparseTensor3(
            self.dims, self.ii[pos], self.jj[pos], self.kk[pos], self.values[pos]
        )

    # ------------------------------------------------------------------
    # COO text serialization

    def to_coo_text(self, include_dims: bool = True) -> str:
        out = []
        if include_dims:
            out.append("#dims,%d,%d,%d" % self.dims)
        for i, j, k, v in zip(self.ii, self.jj, self.kk, self.values):
            out.append(f"{i},{j},{k},{float(v)!r}")
        return "\n".join(out) + "\n"

    def __repr__(self) -> str:
        return (
            f"SparseTensor3(dims={self.dims}, n_entries={self.n_entries})"
        )


def _parse_coo_lines(lines: Iterable[str]):
    """Yield (lineno, i, j, k, value); handle the dims header and comments."""
    declared = None
    entries = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if lineno == 1 and line.startswith("#dims,"):
            fields = line.split(",")
            if len(fields) != 4:
                raise CooFormatError(
                    f"line 1: dims header needs #dims,I,J,K, got {line!r}"
                )
            try:
                declared = tuple(int(f) for f in fields[1:])
            except ValueError:
                raise CooFormatError(
                    f"line 1: dims header fields must be integers: {line!r}"
                ) from None
            continue
        if not line or line.startswith("#"):
            continue
        fields = line.split(",")
        if len(fields) != 4:
            raise CooFormatError(
                f"line {lineno}: expected i,j,k,value, got {line!r}"
            )
        try:
            i, j, k = (int(f) for f in fields[:3])
        except ValueError:
            raise CooFormatError(
                f"line {lineno}: indices must be integers: {line!r}"
            ) from None
        try:
            v = float(fields[3])
        except ValueError:
            raise CooFormatError(
                f"line {lineno}: value must be a decimal number: {line!r}"
            ) from None
        if not math.isfinite(v):
            raise CooFormatError(f"line {lineno}: value must be finite: {line!r}")
        if v < 0.0:
            raise CooFormatError(f"line {lineno}: negative value: {line!r}")
        if i < 0 or j < 0 or k < 0:
            raise CooFormatError(f"line {lineno}: negative index: {line!r}")
        entries.append((lineno, i, j, k, v))
    return declared, entries


def load_coo(source, dims="infer") -> SparseTensor3:
    """Load a tensor from COO text.

    Args:
        source: path, text string containing newlines, or open text stream.
        dims: explicit (I, J, K), or "infer" to size each mode from the
            largest index seen. A #dims header in the file also supplies
            them; an explicit argument must agree with the header.

    Raises:
        CooFormatError: malformed line, negative value, duplicate entry or
            out-of-range index, with the offending line number.
    """
    if isinstance(source, Path):
        text = source.read_text(encoding="utf-8")
    elif isinstance(source, str):
        text = (
            source
            if "\n" in source or "," in source
            else Path(source).read_text(encoding="utf-8")
        )
    elif isinstance(source, bytes):
        text = source.decode("utf-8")
    else:
        text = source.read()
        if isinstance(text, bytes):
            text = text.decode("utf-8")

    declared, rows = _parse_coo_lines(io.StringIO(text))

    if dims == "infer":
        use_dims = declared
        if use_dims is None:
            if not rows:
                raise CooFormatError(
                    "cannot infer dims from an input with no entries; "
                    "pass dims explicitly"
                )
            use_dims = (
                1 + max(r[1] for r in rows),
                1 + max(r[2] for r in rows),
                1 + max(r[3] for r in rows),
            )
    else:
        use_dims = tuple(int(d) for d in dims)
        if declared is not None and tuple(declared) != use_dims:
            raise CooFormatError(
                f"dims argument {use_dims} conflicts with file header {declared}"
            )

    seen: dict[tuple[int, int, int], int] = {}
    for lineno, i, j, k, v in rows:
        if i >= use_dims[0] or j >= use_dims[1] or k >= use_dims[2]:
            raise CooFormatError(
                f"line {lineno}: index ({i},{j},{k}) outside dims {use_dims}"
            )
        prev = seen.get((i, j, k))
        if prev is not None:
            raise CooFormatError(
                f"line {lineno}: duplicate entry ({i},{j},{k}), "
                f"first seen at line {prev}"
            )
        seen[(i, j, k)] = lineno

    return SparseTensor3(
        use_dims,
        [r[1] for r in rows],
        [r[2] for r in rows],
        [r[3] for r in rows],
        [r[4] for r in rows],
    )


def save_coo(t: SparseTensor3, path, include_dims: bool = True) -> None:
    """Write a tensor as COO text with a #dims header."""
    Path(path).write_text(t.to_coo_text(include_dims=include_dims), encoding="utf-8")


@dataclass(frozen=True)
class DatasetSplit:
    """Disjoint train/validation/test entry sets over one tensor's dims."""

    train: SparseTensor3
    validation: SparseTensor3
    test: SparseTensor3

    def sizes(self) -> tuple[int, int, int]:
        return (
            self.train.n_entries,
            self.validation.n_entries,
            self.test.n_entries,
        )


def parse_ratios(text: str) -> tuple[float, float, float]:
    """Parse "a:b:c" percentages; they must be positive and sum to 100."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"ratios must look like a:b:c, got {text!r}")
    try:
        ratios = tuple(float(p) for p in parts)
    except ValueError:
        raise ValueError(f"ratios must be numbers: {text!r}") from None
    _check_ratios(ratios)
    return ratios


def _check_ratios(ratios: Sequence[float]) -> None:
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ValueError(f"all three split ratios must be positive, got {ratios}")
    if abs(sum(ratios) - 100.0) > 1e-9:
        raise ValueError(f"split ratios must sum to 100, got {ratios}")


def split(t: SparseTensor3, ratios, seed: int) -> DatasetSplit:
    """Shuffle entries with a seeded PRNG, then cut contiguously.

    Train and validation take floor(ratio% of total) entries each, test
    takes the remainder, so the three sets partition the input exactly.
    The same seed always produces the same partition.
    """
    ratios = tuple(float(r) for r in ratios)
    _check_ratios(ratios)
    n = t.n_entries
    perm = np.random.default_rng(seed).permutation(n)
    n_train = math.floor(n * ratios[0] / 100.0)
    n_val = math.floor(n * ratios[1] / 100.0)
    return DatasetSplit(
        train=t.take(perm[:n_train]),
        validation=t.take(perm[n_train:n_train + n_val]),
        test=t.take(perm[n_train + n_val:]),
    )
