"""Command-line interface.

Exit codes: 0 success, 1 verification failure (klcheck), 2 usage or input
error, 3 model/data mismatch, 4 training divergence.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from ._parallel import derived_rng
from .bounds import build_catalog, attach_verdicts
from .core import Logistic, TabularInstance, dataset_from_arrays, group_stats
from .erm import CURVE_HEADER, TrainConfig, fit_logistic, learning_curve
from .errors import (
    DivergenceDetected,
    FairGapError,
    InputError,
    LabelNotBinary,
    MissingColumn,
    ModelMismatch,
    ParseError,
)
from .gaps import BinningConfig, calibration_plot_data, estimate_gaps, write_plot_csv
from .losses import empirical_risk, get_loss
from .synth import CircleInstance, imbalance_experiment, kl_bound_check, lb_experiment, unit

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_MISMATCH, EXIT_DIVERGED = 0, 1, 2, 3, 4
REPORT_VERSION = "1"


class UsageError(InputError):
    pass


# --------------------------------------------------------------------------
# CSV ingestion


@dataclass(frozen=True)
class CsvSchema:
    label_col: str
    attribute_col: str
    score_col: str | None = None
    feature_cols: tuple = ()  # (name, "numeric" | "categorical")
    delimiter: str = ","


@dataclass
class Encoder:
    """Column layout of the encoded feature matrix; one-hot order is first appearance."""

    columns: list = field(default_factory=list)  # dicts: name, kind, [categories]
    mean: list | None = None
    std: list | None = None

    @property
    def width(self) -> int:
        return sum(len(c["categories"]) if c["kind"] == "categorical" else 1 for c in self.columns)

    def to_json(self) -> dict:
        std = None if self.mean is None else {"mean": self.mean, "std": self.std}
        return {"columns": self.columns, "standardize": std}

    @classmethod
    def from_json(cls, obj: dict) -> "Encoder":
        std = obj.get("standardize")
        return cls(
            columns=[dict(c) for c in obj["columns"]],
            mean=None if std is None else list(std["mean"]),
            std=None if std is None else list(std["std"]),
        )


def _read_table(path: str, delimiter: str):
    raw = Path(path).read_bytes()
    text = raw.decode("utf-8-sig")
    reader = csv.reader(io.StringIO(text, newline=""), delimiter=delimiter)
    try:
        header = next(reader)
    except StopIteration:
        raise InputError(f"{path}: empty file (a header row is required)") from None
    rows = [r for r in reader if r]
    for i, r in enumerate(rows):
        if len(r) != len(header):
            raise ParseError(i, "*", f"{len(r)} fields, header has {len(header)}")
    return header, rows, hashlib.sha256(raw).hexdigest()


def _col(header: list, name: str) -> int:
    try:
        return header.index(name)
    except ValueError:
        raise MissingColumn(name) from None


def _parse_float(row: int, col: str, value: str) -> float:
    try:
        v = float(value)
    except ValueError:
        raise ParseError(row, col, value) from None
    if not math.isfinite(v):
        raise ParseError(row, col, value)
    return v


def _encode(header, rows, encoder: Encoder, fit: bool, locked: dict | None = None) -> np.ndarray:
    blocks = []
    for spec in encoder.columns:
        j = _col(header, spec["name"])
        if spec["kind"] == "numeric":
            blocks.append(np.array([[_parse_float(i, spec["name"], r[j])] for i, r in enumerate(rows)]).reshape(-1, 1))
            continue
        if fit:
            cats = list((locked or {}).get(spec["name"], []))
            seen = set(cats)
            for i, r in enumerate(rows):
                if r[j] not in seen:
                    if locked and spec["name"] in locked:
                        raise ParseError(i, spec["name"], r[j])
                    seen.add(r[j])
                    cats.append(r[j])
            spec["categories"] = cats
        index = {c: k for k, c in enumerate(spec["categories"])}
        block = np.zeros((len(rows), len(index)))
        for i, r in enumerate(rows):
            k = index.get(r[j])
            if k is None:
                raise ModelMismatch(f"row {i}: category {r[j]!r} of column {spec['name']!r} unknown to the model")
            block[i, k] = 1.0
        blocks.append(block)
    X = np.hstack(blocks) if blocks else np.zeros((len(rows), 0))
    if encoder.mean is not None:
        X = (X - np.asarray(encoder.mean)) / np.asarray(encoder.std)
    return X


def _labels(header, rows, name: str) -> np.ndarray:
    j = _col(header, name)
    out = np.empty(len(rows), dtype=np.int64)
    for i, r in enumerate(rows):
        try:
            v = float(r[j])
        except ValueError:
            raise LabelNotBinary(i, r[j]) from None
        if v not in (0.0, 1.0):
            raise LabelNotBinary(i, r[j])
        out[i] = int(v)
    return out


def load_csv(path: str, schema: CsvSchema, encoder: Encoder | None = None, locked: dict | None = None):
    """Parse a CSV into ``(dataset, scores or None, encoder, sha256)``.

    With an ``encoder`` (from a model file) its columns and categories are
    reused; otherwise one is fitted from ``schema.feature_cols``.
    """
    header, rows, digest = _read_table(path, schema.delimiter)
    if not rows:
        raise InputError(f"{path}: no data rows")
    for name in (schema.label_col, schema.attribute_col):
        _col(header, name)
    y = _labels(header, rows, schema.label_col)
    ja = _col(header, schema.attribute_col)
    attrs = [r[ja] for r in rows]
    scores = None
    if schema.score_col is not None:
        js = _col(header, schema.score_col)
        scores = np.array([_parse_float(i, schema.score_col, r[js]) for i, r in enumerate(rows)])
        bad = np.flatnonzero((scores < 0) | (scores > 1))
        if bad.size:
            raise ParseError(int(bad[0]), schema.score_col, rows[int(bad[0])][js])
    fit = encoder is None
    if fit:
        encoder = Encoder(columns=[{"name": n, "kind": k} for n, k in schema.feature_cols])
    X = _encode(header, rows, encoder, fit, locked)
    if X.shape[1] == 0:
        X = np.zeros((len(rows), 1))  # audits by score column need no features
    ds = dataset_from_arrays(X, y, np.array(attrs, dtype=object))
    return ds, scores, encoder, digest


# --------------------------------------------------------------------------
# helpers


def _split_names(s: str | None) -> list:
    return [t.strip() for t in s.split(",") if t.strip()] if s else []


def _schema_from_args(args, with_features: bool = True) -> CsvSchema:
    feats = []
    if with_features:
        feats = [(n, "numeric") for n in _split_names(args.numeric)] + [
            (n, "categorical") for n in _split_names(args.categorical)
        ]
    return CsvSchema(
        label_col=args.label,
        attribute_col=args.attribute,
        score_col=getattr(args, "score_col", None),
        feature_cols=tuple(feats),
        delimiter=args.delimiter,
    )


def _int_grid(text: str, name: str) -> list:
    try:
        vals = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"{name}: expected comma-separated integers") from None
    if not vals or any(v < 1 for v in vals) or any(b <= a for a, b in zip(vals, vals[1:])):
        raise UsageError(f"{name}: values must be positive and strictly ascending")
    return vals


def _float_grid(text: str, name: str) -> list:
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"{name}: expected comma-separated numbers") from None
    if not vals:
        raise UsageError(f"{name}: empty grid")
    return vals


def _dump_json(obj, path: str) -> None:
    text = json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"
    Path(path).write_text(text, encoding="utf-8")


def _load_locked(path: str | None) -> dict | None:
    if not path:
        return None
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        return {k: [str(c) for c in v] for k, v in obj["categorical"].items()}
    except (OSError, ValueError, KeyError, AttributeError, TypeError) as exc:
        raise InputError(f"schema lock {path}: {exc}") from None


def _load_model(path: str):
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        weights = np.asarray(obj["weights"], dtype=float)
        bias = float(obj["bias"])
        enc = Encoder.from_json(obj["encoder"])
    except OSError as exc:
        raise InputError(f"model file {path}: {exc}") from None
    except (ValueError, KeyError, TypeError) as exc:
        raise ModelMismatch(f"model file {path} is malformed: {exc}") from None
    if obj.get("kind") != "logistic":
        raise ModelMismatch(f"model file {path}: unsupported kind {obj.get('kind')!r}")
    if weights.shape != (enc.width,):
        raise ModelMismatch(f"model has {weights.shape[0]} weights but its encoder yields {enc.width} columns")
    digest = hashlib.sha256(Path(path).read_bytes()).hexdigest()
    return Logistic(weights, bias), enc, digest


# --------------------------------------------------------------------------
# commands


def cmd_audit(args) -> int:
    if (args.score_col is None) == (args.model is None):
        raise UsageError("give exactly one of --score-col or --model")
    config = BinningConfig(args.buckets, "equal_width" if args.binning == "equal" else "quantile", args.min_cell)
    loss = get_loss(args.loss)
    if args.model:
        model, enc, model_digest = _load_model(args.model)
        try:
            ds, _, _, digest = load_csv(args.data, _schema_from_args(args, with_features=False), encoder=enc)
        except MissingColumn as exc:
            raise ModelMismatch(f"data lacks model column {exc.name!r}") from None
        scores = model(ds.features)
        source = {"kind": "model", "sha256": model_digest}
    else:
        ds, scores, _, digest = load_csv(args.data, _schema_from_args(args, with_features=False))
        source = {"kind": "column", "name": args.score_col}

    report = estimate_gaps(ds, scores, config, excess_risk=args.excess_risk, loss_name=loss.name)
    stats = group_stats(ds)
    bounds = {}
    if args.excess_risk is not None:
        q_spread = math.fsum(stats.p_a * np.abs(stats.q_bar - stats.q_a))
        catalog = build_catalog(loss.kappa, args.excess_risk, p_a=stats.p_a, Q_A=q_spread)
        report = attach_verdicts(report, catalog, args.tolerance)
        for name, v in report.bounds.items():
            e = catalog[name]
            bounds[name] = {
                "value": v.value,
                "satisfied": v.satisfied,
                "slack": v.slack,
                "kind": e.kind,
                "inputs": {k: float(x) for k, x in e.inputs.items()},
            }
    doc = {
        "version": REPORT_VERSION,
        "dataset": {
            "n": ds.n,
            "d_encoded": ds.d,
            "K": ds.K,
            "base_rate": stats.q_bar,
            "groups": [
                {"id": g, "label": str(lbl), "mass": float(stats.p_a[g]), "base_rate": float(stats.q_a[g])}
                for g, lbl in enumerate(ds.group_labels)
            ],
        },
        "gaps": report.gap_dict(),
        "bounds": bounds,
        "loss": {"name": loss.name, "kappa": loss.kappa, "empirical_risk": empirical_risk(loss, scores, ds)},
        "metadata": {
            "binning": config.as_dict(),
            "min_cell": config.min_cell,
            "loss": loss.name,
            "n": ds.n,
            "tolerance": args.tolerance,
        },
        "provenance": {
            "input_sha256": digest,
            "score_source": source,
            "seed": args.seed,
            "tool_version": __version__,
        },
    }
    _dump_json(doc, args.out)
    if args.plot_out:
        with open(args.plot_out, "w", encoding="utf-8", newline="") as fh:
            write_plot_csv(calibration_plot_data(ds, scores, config), fh)
    print(f"suf={report.suf:.6f} cal={report.cal:.6f} sep={report.sep:.6f} ind={report.ind:.6f}")
    return EXIT_OK


def cmd_train(args) -> int:
    if args.loss != "logistic":
        raise UsageError("train supports --loss logistic only")
    schema = _schema_from_args(args)
    declared = [n for n, _ in schema.feature_cols]
    if args.features:
        subset = _split_names(args.features)
        unknown = [n for n in subset if n not in declared]
        if unknown:
            raise UsageError(f"--features names not declared as numeric/categorical: {unknown}")
        schema = CsvSchema(
            schema.label_col,
            schema.attribute_col,
            None,
            tuple(fc for fc in schema.feature_cols if fc[0] in subset),
            schema.delimiter,
        )
    if not schema.feature_cols:
        raise UsageError("declare at least one feature with --numeric or --categorical")
    ds, _, enc, digest = load_csv(args.data, schema, locked=_load_locked(args.schema_lock))
    if args.standardize:
        mu = ds.features.mean(axis=0)
        sd = ds.features.std(axis=0)
        sd = np.where(sd > 0, sd, 1.0)
        enc.mean, enc.std = mu.tolist(), sd.tolist()
        ds = dataclasses.replace(ds, features=(ds.features - mu) / sd)
    cfg = TrainConfig(
        learning_rate=args.lr, max_iters=args.iters, grad_tol=args.grad_tol, l1_lambda=args.l1, seed=args.seed
    )
    res = fit_logistic(ds, cfg)
    loss = get_loss("logistic")
    train_loss = empirical_risk(loss, res.score, ds)
    doc = {
        "version": REPORT_VERSION,
        "kind": "logistic",
        "weights": [float(v) for v in res.score.weights],
        "bias": float(res.score.bias),
        "encoder": enc.to_json(),
        "training": {
            "learning_rate": cfg.learning_rate,
            "max_iters": cfg.max_iters,
            "grad_tol": cfg.grad_tol,
            "l1_lambda": cfg.l1_lambda,
            "seed": cfg.seed,
            "iterations": res.iterations,
            "converged": res.converged,
            "train_loss_bits": train_loss,
            "input_sha256": digest,
        },
    }
    _dump_json(doc, args.model_out)
    print(f"train_loss={train_loss:.6f} iterations={res.iterations} converged={str(res.converged).lower()}")
    return EXIT_OK


def _load_tabular(path: str) -> TabularInstance:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        return TabularInstance.from_support(obj["support"])
    except OSError as exc:
        raise InputError(f"{path}: {exc}") from None
    except (ValueError, KeyError, TypeError) as exc:
        raise InputError(f"{path}: malformed tabular spec ({exc})") from None


def cmd_curve(args) -> int:
    grid = _int_grid(args.n_grid, "--n-grid")
    if args.trials < 1:
        raise UsageError("--trials must be positive")
    if args.source == "circle":
        source = CircleInstance(unit(math.radians(args.theta_deg)))
        loss = args.loss or "square"
    else:
        source = _load_tabular(args.source)
        loss = args.loss or "logistic"
    cfg = TrainConfig(loss=loss, learning_rate=args.lr, max_iters=args.iters, l1_lambda=args.l1, seed=args.seed)
    config = BinningConfig(args.buckets, "equal_width" if args.binning == "equal" else "quantile")
    rows = learning_curve(source, grid, args.trials, cfg, test_n=args.test_n, binning=config)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVE_HEADER)
        for r in rows:
            w.writerow([r.n, r.trial, repr(r.suf), repr(r.cal), repr(r.sep), repr(r.ind), repr(r.test_loss)])
    print(f"wrote {len(rows)} rows to {args.out}")
    return EXIT_OK


def cmd_synth_lb(args) -> int:
    grid = _int_grid(args.n_grid, "--n-grid")
    summary = lb_experiment(grid, args.trials, args.seed, w_policy=args.w_policy)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("n", "trial", "suf", "cal", "excess"))
        for n, k, s, c, e in summary.rows:
            w.writerow([n, k, repr(s), repr(c), repr(e)])
    slopes_path = args.slopes_out or str(Path(args.out).with_suffix(".slopes.json"))
    _dump_json(
        {
            **summary.slopes,
            "n_grid": list(summary.n_grid),
            "mean_suf": summary.mean["suf"].tolist(),
            "mean_cal": summary.mean["cal"].tolist(),
            "mean_excess": summary.mean["excess"].tolist(),
            "trials": args.trials,
            "seed": args.seed,
        },
        slopes_path,
    )
    s = summary.slopes
    print(f"suf_slope={s['suf_slope']:.4f} cal_slope={s['cal_slope']:.4f} excess_slope={s['excess_slope']:.4f}")
    return EXIT_OK


def cmd_synth_imbalance(args) -> int:
    grid = _float_grid(args.p_grid, "--p-grid")
    rows = imbalance_experiment(grid, args.n, args.trials, args.seed)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("p", "mean_minority_suf", "mean_minority_cal", "mean_excess", "mean_minority_n"))
        for r in rows:
            w.writerow([repr(r.p), repr(r.mean_suf), repr(r.mean_cal), repr(r.mean_excess), repr(r.mean_minority_n)])
    for r in rows:
        print(f"p={r.p} mean_minority_suf={r.mean_suf:.6f} mean_minority_cal={r.mean_cal:.6f}")
    return EXIT_OK


def cmd_synth_klcheck(args) -> int:
    if args.pairs < 1:
        raise UsageError("--pairs must be positive")
    failed = 0
    for i in range(args.pairs):
        rng = derived_rng(args.seed, i)
        t1, t2 = unit(rng.uniform(0, 2 * math.pi)), unit(rng.uniform(0, 2 * math.pi))
        res = kl_bound_check(t1, t2, args.resolution)
        bound = res["bound"] * 12.0 * args.constant
        ok = res["kl_per_sample"] <= bound + 1e-9
        failed += not ok
        print(f"{'OK' if ok else 'FAIL'} pair={i} kl={res['kl_per_sample']:.6e} bound={bound:.6e}")
    return EXIT_VERIFY if failed else EXIT_OK


# --------------------------------------------------------------------------
# parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse already uses exit code 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_schema(p, features: bool = True):
    p.add_argument("--data", required=True, help="input CSV with a header row")
    p.add_argument("--label", required=True, help="binary label column")
    p.add_argument("--attribute", required=True, help="group attribute column")
    p.add_argument("--delimiter", default=",")
    if features:
        p.add_argument("--numeric", default="", help="comma-separated numeric feature columns")
        p.add_argument("--categorical", default="", help="comma-separated categorical feature columns")
        p.add_argument("--schema-lock", default=None, help="JSON pinning category order per column")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fairgap", description="Fairness-gap auditing and bound verification.")
    parser.add_argument("--version", action="version", version=f"fairgap {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("audit", help="estimate gaps of a score on a CSV")
    _add_schema(a, features=False)
    a.add_argument("--score-col", default=None)
    a.add_argument("--model", default=None, help="model JSON written by 'train'")
    a.add_argument("--loss", default="logistic", choices=["logistic", "square"])
    a.add_argument("--buckets", type=int, default=10)
    a.add_argument("--binning", default="equal", choices=["equal", "quantile"])
    a.add_argument("--min-cell", type=int, default=2)
    a.add_argument("--excess-risk", type=float, default=None, help="known excess risk; enables bound verdicts")
    a.add_argument("--tolerance", type=float, default=1e-9)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--out", required=True)
    a.add_argument("--plot-out", default=None)
    a.set_defaults(func=cmd_audit)

    t = sub.add_parser("train", help="fit an L1-regularised logistic score")
    _add_schema(t)
    t.add_argument("--loss", default="logistic")
    t.add_argument("--l1", type=float, default=0.0)
    t.add_argument("--lr", type=float, default=0.1)
    t.add_argument("--iters", type=int, default=5000)
    t.add_argument("--grad-tol", type=float, default=1e-7)
    t.add_argument("--features", default=None, help="subset of declared feature names")
    t.add_argument("--standardize", action="store_true")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--model-out", required=True)
    t.set_defaults(func=cmd_train)

    c = sub.add_parser("curve", help="learning curve on a synthetic source")
    c.add_argument("--source", required=True, help="tabular-spec JSON path, or 'circle'")
    c.add_argument("--n-grid", default="64,256,1024,4096,16384")
    c.add_argument("--trials", type=int, default=10)
    c.add_argument("--test-n", type=int, default=20000)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--loss", default=None, choices=["logistic", "square"])
    c.add_argument("--lr", type=float, default=0.1)
    c.add_argument("--iters", type=int, default=5000)
    c.add_argument("--l1", type=float, default=0.0)
    c.add_argument("--buckets", type=int, default=10)
    c.add_argument("--binning", default="equal", choices=["equal", "quantile"])
    c.add_argument("--theta-deg", type=float, default=0.0, help="direction of theta for the circle source")
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_curve)

    s = sub.add_parser("synth", help="lower-bound constructions")
    ssub = s.add_subparsers(dest="synth_command", required=True, parser_class=_Parser)
    lb = ssub.add_parser("lb", help="circle scaling experiment")
    lb.add_argument("--n-grid", default="64,256,1024,4096,16384")
    lb.add_argument("--trials", type=int, default=200)
    lb.add_argument("--seed", type=int, default=0)
    lb.add_argument("--w-policy", default="uniform", choices=["uniform", "orthogonal"])
    lb.add_argument("--out", required=True)
    lb.add_argument("--slopes-out", default=None)
    lb.set_defaults(func=cmd_synth_lb)
    im = ssub.add_parser("imbalance", help="minority-group gaps versus group mass")
    im.add_argument("--p-grid", default="0.45,0.25,0.125,0.0625")
    im.add_argument("--n", type=int, default=4096)
    im.add_argument("--trials", type=int, default=200)
    im.add_argument("--seed", type=int, default=0)
    im.add_argument("--out", required=True)
    im.set_defaults(func=cmd_synth_imbalance)
    kl = ssub.add_parser("klcheck", help="numeric check of the KL bound on random pairs")
    kl.add_argument("--pairs", type=int, default=100)
    kl.add_argument("--resolution", type=int, default=100_000)
    kl.add_argument("--seed", type=int, default=0)
    kl.add_argument("--constant", type=float, default=1.0 / 12.0, help="bound constant (default 1/12)")
    kl.set_defaults(func=cmd_synth_klcheck)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DivergenceDetected as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except ModelMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except (FairGapError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
