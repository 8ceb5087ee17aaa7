"""Command-line harness: split, train, sweep, impute, evaluate, compare.

Every run writes a manifest.txt next to its outputs. Manifest lines are
plain `key = value` pairs, so a manifest doubles as a --config file and a
finished run can be reproduced bit-for-bit by pointing the same command at
it. Flags always override config-file values.
"""

from __future__ import annotations

import argparse
import hashlib
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np

from . import __version__
from ._backend import active_backend
from .losses import LOSS_TAGS, LossKind
from .metrics import MetricReport, evaluate
from .model import FactorModel
from .solver import TrainConfig, train
from .tensor import (
    CooFormatError,
    DatasetSplit,
    EntryIndex,
    SparseTensor3,
    load_coo,
    parse_ratios,
    save_coo,
    split,
)

#: Regularization strengths tried by `sweep`: 2^0 down to 2^-20.
DEFAULT_SWEEP_GRID = tuple(2.0 ** -e for e in range(21))

#: Row labels used in comparison tables, by loss tag.
MODEL_LABELS = {"hybrid": "M1", "l2": "M2", "cauchy": "M4"}


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved settings for one CLI run."""

    data: Optional[str] = None
    dims: object = "infer"  # "infer" or (I, J, K)
    ratios: tuple = (10.0, 20.0, 70.0)
    rank: int = 20
    loss: str = "hybrid"
    lam: object = None  # float, or "sweep" for the sweep command
    gamma: float = 1.0
    seed: int = 0
    seeds: int = 1
    max_iters: int = 1000
    tol: float = 1e-5
    init_scale: float = 0.1
    guard: float = 1e-12
    out: Optional[str] = None
    checkpoint: Optional[str] = None
    targets: Optional[str] = None
    grid: tuple = DEFAULT_SWEEP_GRID


# ----------------------------------------------------------------------
# raw value coercion, shared by flags and config files


def _co_dims(s: str):
    if s == "infer":
        return "infer"
    parts = s.split(",")
    if len(parts) != 3:
        raise ValueError(f"dims must look like I,J,K or 'infer', got {s!r}")
    try:
        dims = tuple(int(p) for p in parts)
    except ValueError:
        raise ValueError(f"dims must be integers: {s!r}") from None
    if any(d <= 0 for d in dims):
        raise ValueError(f"dims must be positive: {s!r}")
    return dims


def _co_loss(s: str) -> str:
    if s not in LOSS_TAGS:
        raise ValueError(f"loss must be one of {LOSS_TAGS}, got {s!r}")
    return s


def _co_lambda(s: str):
    if s == "sweep":
        return "sweep"
    try:
        value = float(s)
    except ValueError:
        raise ValueError(f"lambda must be a number or 'sweep', got {s!r}") from None
    if value < 0.0:
        raise ValueError(f"lambda must be nonnegative, got {value}")
    return value


def _co_grid(s: str) -> tuple:
    try:
        grid = tuple(float(p) for p in s.split(","))
    except ValueError:
        raise ValueError(f"grid must be comma-separated numbers, got {s!r}") from None
    if not grid or any(g <= 0 for g in grid):
        raise ValueError("grid values must be positive")
    return grid


def _co_positive_int(name):
    def co(s: str) -> int:
        try:
            v = int(s)
        except ValueError:
            raise ValueError(f"{name} must be an integer, got {s!r}") from None
        if v < 1:
            raise ValueError(f"{name} must be at least 1, got {v}")
        return v

    return co


_COERCERS = {
    "data": str,
    "dims": _co_dims,
    "ratios": parse_ratios,
    "rank": _co_positive_int("rank"),
    "loss": _co_loss,
    "lambda": _co_lambda,
    "gamma": float,
    "seed": int,
    "seeds": _co_positive_int("seeds"),
    "max_iters": _co_positive_int("max_iters"),
    "tol": float,
    "init_scale": float,
    "guard": float,
    "out": str,
    "checkpoint": str,
    "targets": str,
    "grid": _co_grid,
}

_KEY_ATTR = {key: ("lam" if key == "lambda" else key) for key in _COERCERS}


def read_config_file(path) -> dict[str, str]:
    """Parse flat `key = value` lines; # comments and blank lines skipped."""
    out: dict[str, str] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, eq, value = line.partition("=")
        if not eq:
            raise ValueError(f"{path}:{lineno}: expected key = value, got {line!r}")
        out[key.strip().lower().replace("-", "_")] = value.strip()
    return out


def assemble_config(args: argparse.Namespace) -> ExperimentConfig:
    """Resolve defaults, then config-file values, then explicit flags."""
    file_vals = {}
    config_path = vars(args).get("config")
    if config_path:
        file_vals = read_config_file(config_path)
    values = {}
    for key, coerce in _COERCERS.items():
        raw = vars(args).get(key)
        if raw is None:
            raw = file_vals.get(key)
        if raw is None:
            continue
        values[_KEY_ATTR[key]] = coerce(raw)
    return ExperimentConfig(**values)


# ----------------------------------------------------------------------
# small shared helpers


def _require(cfg: ExperimentConfig, **fields) -> None:
    missing = [flag for flag, value in fields.items() if value is None]
    if missing:
        raise ValueError("missing required option(s): " + ", ".join(missing))


def _fixed_lambda(cfg: ExperimentConfig) -> float:
    if cfg.lam is None:
        raise ValueError("missing required option(s): --lambda")
    if cfg.lam == "sweep":
        raise ValueError("--lambda sweep is only valid for the sweep command")
    return float(cfg.lam)


def _loss_kind(cfg: ExperimentConfig, tag: Optional[str] = None) -> LossKind:
    return LossKind(tag or cfg.loss, cfg.gamma)


def _train_config(cfg: ExperimentConfig, lam: float, kind: LossKind,
                  seed: Optional[int] = None) -> TrainConfig:
    return TrainConfig(
        rank=cfg.rank,
        lam=lam,
        loss=kind,
        max_iters=cfg.max_iters,
        tol=cfg.tol,
        seed=cfg.seed if seed is None else seed,
        init_scale=cfg.init_scale,
        denom_guard=cfg.guard,
    )


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _out_dir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(repr(float(v)) for v in value)
    return str(value)


def write_manifest(out_dir: Path, command: str, pairs, meta=()) -> Path:
    """Record the effective settings; `pairs` lines are config-compatible."""
    lines = [
        "# trafficfill run manifest; key = value lines can be replayed via --config",
        f"# command = {command}",
        f"# package_version = {__version__}",
        f"# kernel_backend = {active_backend()}",
    ]
    lines += [f"# {k} = {v}" for k, v in meta]
    lines += [f"{k} = {_fmt(v)}" for k, v in pairs]
    path = out_dir / "manifest.txt"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _training_pairs(cfg: ExperimentConfig, lam) -> list:
    return [
        ("data", cfg.data),
        ("rank", cfg.rank),
        ("loss", cfg.loss),
        ("gamma", float(cfg.gamma)),
        ("lambda", lam if isinstance(lam, str) else float(lam)),
        ("seed", cfg.seed),
        ("max_iters", cfg.max_iters),
        ("tol", float(cfg.tol)),
        ("init_scale", float(cfg.init_scale)),
        ("guard", float(cfg.guard)),
    ]


def _split_paths(base: str) -> dict[str, Path]:
    return {part: Path(str(base) + "." + part) for part in ("train", "val", "test")}


def _load_split(cfg: ExperimentConfig) -> tuple[SparseTensor3, DatasetSplit]:
    paths = _split_paths(cfg.data)
    missing = [str(p) for p in paths.values() if not p.exists()]
    if missing:
        raise ValueError(
            "split files not found: " + ", ".join(missing)
            + " (run the split command first)"
        )
    parts = {name: load_coo(p, dims=cfg.dims) for name, p in paths.items()}
    dims = {t.dims for t in parts.values()}
    if len(dims) != 1:
        raise ValueError(f"split files disagree on dims: {sorted(dims)}")
    dsplit = DatasetSplit(parts["train"], parts["val"], parts["test"])
    source = SparseTensor3(
        parts["train"].dims,
        np.concatenate([t.ii for t in parts.values()]),
        np.concatenate([t.jj for t in parts.values()]),
        np.concatenate([t.kk for t in parts.values()]),
        np.concatenate([t.values for t in parts.values()]),
    )
    return source, dsplit


def _split_digest_meta(cfg: ExperimentConfig) -> list:
    paths = _split_paths(cfg.data)
    return [
        (f"input_sha256_{name}", _sha256(p)) for name, p in paths.items()
    ]


def _write_metrics(out: Path, report: MetricReport) -> None:
    (out / "metrics.csv").write_text(report.to_csv(), encoding="utf-8")


# ----------------------------------------------------------------------
# commands


def cmd_split(cfg: ExperimentConfig) -> int:
    """Partition a COO file into .train/.val/.test siblings under --out."""
    _require(cfg, **{"--data": cfg.data, "--out": cfg.out})
    t = load_coo(Path(cfg.data), dims=cfg.dims)
    ds = split(t, cfg.ratios, cfg.seed)
    out = _out_dir(cfg)
    base = out / Path(cfg.data).name
    parts = (("train", ds.train), ("val", ds.validation), ("test", ds.test))
    for name, part in parts:
        save_coo(part, Path(str(base) + "." + name))
    write_manifest(
        out,
        "split",
        [
            ("data", cfg.data),
            ("dims", "infer" if cfg.dims == "infer" else ",".join(map(str, cfg.dims))),
            ("ratios", ":".join(repr(float(r)) for r in cfg.ratios)),
            ("seed", cfg.seed),
        ],
        meta=[("input_sha256", _sha256(cfg.data))],
    )
    for name, part in parts:
        print(f"{name} {part.n_entries} -> {base}.{name}")
    print("sizes %d/%d/%d" % ds.sizes())
    return 0


def cmd_train(cfg: ExperimentConfig) -> int:
    """Train with a fixed lambda; write checkpoint, history and test metrics."""
    _require(cfg, **{"--data": cfg.data, "--out": cfg.out})
    lam = _fixed_lambda(cfg)
    source, dsplit = _load_split(cfg)
    model, report = train(source, dsplit, _train_config(cfg, lam, _loss_kind(cfg)))
    out = _out_dir(cfg)
    model.save(out / "factors.txt")
    report.write_history_csv(out / "history.csv")
    test_report = None
    if dsplit.test.n_entries:
        test_report = evaluate(model, dsplit.test)
        _write_metrics(out, test_report)
    write_manifest(
        out,
        "train",
        _training_pairs(cfg, lam),
        meta=_split_digest_meta(cfg) + [("model_sha256", model.digest())],
    )
    last = report.history[-1]
    print(
        f"iterations {report.iterations_run} converged {report.converged} "
        f"objective {last.train_objective!r}"
    )
    if test_report is not None:
        print(f"test rmse {test_report.rmse!r} mae {test_report.mae!r}")
    return 0


class SweepRecord(NamedTuple):
    """Outcome of one lambda during a sweep."""

    lam: float
    val_rmse: float
    val_mae: float
    iterations: int


@dataclass(frozen=True)
class SweepResult:
    """All sweep rows plus the winning lambda."""

    records: list
    best_lambda: float

    def to_csv(self) -> str:
        lines = ["lambda,val_rmse,val_mae,iterations,best"]
        for rec in self.records:
            best = int(rec.lam == self.best_lambda)
            lines.append(
                f"{rec.lam!r},{rec.val_rmse!r},{rec.val_mae!r},"
                f"{rec.iterations},{best}"
            )
        return "\n".join(lines) + "\n"


def select_best(records) -> float:
    """Lowest validation RMSE wins; exact ties go to the smaller lambda."""
    if not records:
        raise ValueError("cannot select a lambda from an empty sweep")

    def key(rec: SweepRecord):
        rmse = rec.val_rmse
        return (math.inf if math.isnan(rmse) else rmse, rec.lam)

    return min(records, key=key).lam


def cmd_sweep(cfg: ExperimentConfig) -> int:
    """Train once per grid lambda and report the best validation RMSE."""
    _require(cfg, **{"--data": cfg.data, "--out": cfg.out})
    if cfg.lam not in (None, "sweep"):
        raise ValueError("sweep expects --lambda sweep (or omitted)")
    source, dsplit = _load_split(cfg)
    if dsplit.validation.n_entries == 0:
        raise ValueError("sweep needs a nonempty validation split")
    kind = _loss_kind(cfg)
    records = []
    for lam in cfg.grid:
        model, report = train(source, dsplit, _train_config(cfg, lam, kind))
        last = report.history[-1]
        records.append(
            SweepRecord(lam, last.val_rmse, last.val_mae, report.iterations_run)
        )
        print(
            f"lambda {lam!r} val_rmse {last.val_rmse!r} "
            f"iterations {report.iterations_run}"
        )
    result = SweepResult(records=records, best_lambda=select_best(records))
    out = _out_dir(cfg)
    (out / "sweep.csv").write_text(result.to_csv(), encoding="utf-8")
    write_manifest(
        out,
        "sweep",
        _training_pairs(cfg, "sweep") + [("grid", cfg.grid)],
        meta=_split_digest_meta(cfg) + [("best_lambda", repr(result.best_lambda))],
    )
    print(f"best_lambda {result.best_lambda!r}")
    return 0


def _read_targets(path) -> list[EntryIndex]:
    """Parse one i,j,k per line; comments and blank lines are skipped."""
    targets = []
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split(",")
        if len(fields) != 3:
            raise CooFormatError(
                f"line {lineno}: expected i,j,k, got {line!r}"
            )
        try:
            i, j, k = (int(f) for f in fields)
        except ValueError:
            raise CooFormatError(
                f"line {lineno}: indices must be integers: {line!r}"
            ) from None
        if i < 0 or j < 0 or k < 0:
            raise CooFormatError(f"line {lineno}: negative index: {line!r}")
        targets.append(EntryIndex(i, j, k))
    return targets


def cmd_impute(cfg: ExperimentConfig) -> int:
    """Predict the target cells with a saved checkpoint; write COO output."""
    _require(cfg, **{"--checkpoint": cfg.checkpoint, "--targets": cfg.targets,
                     "--out": cfg.out})
    model = FactorModel.load(cfg.checkpoint)
    targets = _read_targets(cfg.targets)
    pairs = model.impute(targets)
    out = _out_dir(cfg)
    lines = ["#dims,%d,%d,%d" % model.dims]
    lines += [f"{p.i},{p.j},{p.k},{v!r}" for p, v in pairs]
    (out / "imputed.coo").write_text("\n".join(lines) + "\n", encoding="utf-8")
    write_manifest(
        out,
        "impute",
        [("checkpoint", cfg.checkpoint), ("targets", cfg.targets)],
        meta=[
            ("checkpoint_sha256", _sha256(cfg.checkpoint)),
            ("targets_sha256", _sha256(cfg.targets)),
        ],
    )
    print(f"imputed {len(pairs)} -> {out / 'imputed.coo'}")
    return 0


def cmd_evaluate(cfg: ExperimentConfig) -> int:
    """Score a checkpoint against a COO file of held-out observations."""
    _require(cfg, **{"--checkpoint": cfg.checkpoint, "--data": cfg.data})
    model = FactorModel.load(cfg.checkpoint)
    dims = cfg.dims if cfg.dims != "infer" else model.dims
    holdout = load_coo(Path(cfg.data), dims=dims)
    report = evaluate(model, holdout)
    if cfg.out is not None:
        out = _out_dir(cfg)
        _write_metrics(out, report)
        write_manifest(
            out,
            "evaluate",
            [("checkpoint", cfg.checkpoint), ("data", cfg.data)],
            meta=[
                ("checkpoint_sha256", _sha256(cfg.checkpoint)),
                ("input_sha256", _sha256(cfg.data)),
            ],
        )
    print(f"rmse {report.rmse!r} mae {report.mae!r} count {report.count}")
    return 0


def cmd_compare(cfg: ExperimentConfig) -> int:
    """Train every loss kind on one split and tabulate test metrics."""
    _require(cfg, **{"--data": cfg.data, "--out": cfg.out})
    lam = _fixed_lambda(cfg)
    source, dsplit = _load_split(cfg)
    if dsplit.test.n_entries == 0:
        raise ValueError("compare needs a nonempty test split")
    rows = []
    for tag in LOSS_TAGS:
        kind = _loss_kind(cfg, tag)
        for seed in range(cfg.seed, cfg.seed + cfg.seeds):
            model, _ = train(source, dsplit, _train_config(cfg, lam, kind, seed))
            report = evaluate(model, dsplit.test)
            rows.append((MODEL_LABELS[tag], tag, seed, report.rmse, report.mae))
    lines = ["model,loss,seed,test_rmse,test_mae"]
    lines += [
        f"{label},{tag},{seed},{rmse!r},{mae!r}"
        for label, tag, seed, rmse, mae in rows
    ]
    out = _out_dir(cfg)
    (out / "comparison.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    write_manifest(
        out,
        "compare",
        _training_pairs(cfg, lam) + [("seeds", cfg.seeds)],
        meta=_split_digest_meta(cfg),
    )
    for label, tag, seed, rmse, mae in rows:
        print(f"{label} {tag} seed {seed} rmse {rmse!r} mae {mae!r}")
    return 0


# ----------------------------------------------------------------------
# argument parsing


_FLAG_HELP = {
    "data": "COO data file (for train/sweep/compare: the split base path)",
    "dims": "tensor dims I,J,K, or 'infer' (default)",
    "ratios": "train:val:test percentages, e.g. 10:20:70",
    "rank": "number of latent factor columns",
    "loss": "training loss",
    "lambda": "regularization strength, or 'sweep'",
    "gamma": "cauchy loss scale",
    "seed": "PRNG seed for shuffling and initialization",
    "seeds": "number of seeds to repeat compare over",
    "max_iters": "iteration cap",
    "tol": "stop when the objective moves less than this between iterations",
    "init_scale": "upper bound of the uniform factor initialization",
    "guard": "additive denominator guard in the multiplicative update",
    "out": "output directory",
    "checkpoint": "factor checkpoint file",
    "targets": "file of i,j,k positions to impute",
    "grid": "comma-separated lambda grid for sweep",
    "config": "flat key = value config file; flags override it",
}


def _add_flags(sub: argparse.ArgumentParser, keys) -> None:
    for key in keys:
        flag = "--" + key.replace("_", "-")
        kwargs = {"default": None, "help": _FLAG_HELP[key], "dest": key}
        if key == "loss":
            kwargs["choices"] = LOSS_TAGS
        sub.add_argument(flag, **kwargs)
    sub.add_argument("--config", default=None, help=_FLAG_HELP["config"])


_TRAIN_KEYS = (
    "data", "dims", "rank", "loss", "lambda", "gamma", "seed",
    "max_iters", "tol", "init_scale", "guard", "out",
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trafficfill",
        description="Sparse traffic-speed tensor completion with nonnegative "
                    "CP factors and multiplicative updates.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)

    sub = subs.add_parser("split", help="partition a COO file into train/val/test")
    _add_flags(sub, ("data", "dims", "ratios", "seed", "out"))
    sub.set_defaults(func=cmd_split)

    sub = subs.add_parser("train", help="train with a fixed lambda")
    _add_flags(sub, _TRAIN_KEYS)
    sub.set_defaults(func=cmd_train)

    sub = subs.add_parser("sweep", help="train across a lambda grid")
    _add_flags(sub, _TRAIN_KEYS + ("grid",))
    sub.set_defaults(func=cmd_sweep)

    sub = subs.add_parser("impute", help="predict target cells from a checkpoint")
    _add_flags(sub, ("checkpoint", "targets", "out"))
    sub.set_defaults(func=cmd_impute)

    sub = subs.add_parser("evaluate", help="score a checkpoint on held-out data")
    _add_flags(sub, ("checkpoint", "data", "dims", "out"))
    sub.set_defaults(func=cmd_evaluate)

    sub = subs.add_parser("compare", help="train all loss kinds on one split")
    _add_flags(sub, _TRAIN_KEYS + ("seeds",))
    sub.set_defaults(func=cmd_compare)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = assemble_config(args)
        return args.func(cfg)
    except (ValueError, OSError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
