"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 input/output error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import dcf
from .classifier import Classifier, explain, model_size_report, predict
from .dataset import DataFormatError, labels_from_tokens, parse_table, resolve
from .estimator import FitConfig
from .features import enumerate_regressors
from .harness import TrainConfig, evaluate, run_cv, train
from .metrics import EvaluationError
from .selection import IterationTrace, RfscConfig

EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 1, 2, 3

# flag dest -> built-in default; a config file may override, explicit flags win
DEFAULTS = {
    "degree": 2,
    "population": 100,
    "iterations": 300,
    "epsilon": 0.01,
    "alpha": 0.99,
    "alpha_d": 0.05,
    "mu_init": None,
    "dcf": "auto",
    "dispersion": FitConfig.dispersion,
    "seed": 0,
    "folds": 10,
    "repeats": 10,
    "jobs": None,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _settings(p: argparse.ArgumentParser, folds: bool = False):
    g = p.add_argument_group("selection settings")
    g.add_argument("--config", help="JSON file with default values for these flags")
    g.add_argument("--degree", type=int, help="maximum monomial degree (default 2)")
    g.add_argument("--population", type=int, help="models extracted per iteration (default 100)")
    g.add_argument("--iterations", type=int, help="maximum RIP iterations (default 300)")
    g.add_argument("--epsilon", type=float, help="RIP convergence threshold (default 0.01)")
    g.add_argument("--alpha", type=float, help="t-test confidence level (default 0.99)")
    g.add_argument("--alpha-d", dest="alpha_d", type=float, help="DCF significance (default 0.05)")
    g.add_argument("--mu-init", dest="mu_init", type=float, help="initial RIP (default 1/N_r)")
    g.add_argument("--dcf", choices=("on", "off", "auto"), help="feature screening (default auto)")
    g.add_argument("--dispersion", choices=("pearson", "working", "fixed"),
                   help="residual variance used by the t-test")
    g.add_argument("--seed", type=int, help="master seed (default 0)")
    g.add_argument("--repeats", type=int, help="selection runs per class, best kept (default 10)")
    g.add_argument("--jobs", type=int, help="worker processes (default: all CPUs)")
    if folds:
        g.add_argument("--folds", type=int, help="cross-validation folds (default 10)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rfsc", description="Randomized feature selection and polynomial classifier")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("inspect", help="summarize a dataset")
    p.add_argument("--data", required=True, help="delimited file or bundled dataset name")
    p.add_argument("--degree", type=int, default=2)

    p = sub.add_parser("dcf", help="distance-correlation feature screening report")
    p.add_argument("--data", required=True)
    p.add_argument("--alpha-d", dest="alpha_d", type=float, default=0.05)
    p.add_argument("--out", help="output directory (default: timestamped)")

    p = sub.add_parser("train", help="train a classifier on a whole dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--out")
    _settings(p)

    p = sub.add_parser("cv", help="stratified k-fold evaluation")
    p.add_argument("--data", required=True)
    p.add_argument("--out")
    _settings(p, folds=True)

    p = sub.add_parser("predict", help="classify rows with a saved model")
    p.add_argument("--model", required=True, help="model.json written by train")
    p.add_argument("--data", required=True, help="rows of raw features, optionally labeled")
    p.add_argument("--out", help="predictions file (default: stdout)")

    p = sub.add_parser("explain", help="positive/negative decomposition of class outputs")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--class", dest="class_index", type=int,
                   help="class id to explain (default: the predicted class)")
    p.add_argument("--out", help="output file (default: stdout)")
    return parser


def _artifact_settings(meta: dict) -> dict:
    """Flag values recorded in a model artifact's metadata."""
    conf = dict(meta.get("config", {}))
    conf["degree"] = conf.pop("max_degree", DEFAULTS["degree"])
    conf.update(seed=meta.get("seed", DEFAULTS["seed"]), repeats=meta.get("n_repeats", DEFAULTS["repeats"]))
    return {k: v for k, v in conf.items() if k in DEFAULTS}


def merged_settings(args) -> dict:
    values = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            loaded = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise FileNotFoundError(f"cannot read config {args.config}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {args.config}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise UsageError(f"config {args.config}: expected a JSON object")
        if "metadata" in loaded:
            loaded = _artifact_settings(loaded["metadata"])
        unknown = set(loaded) - set(DEFAULTS) - {"out", "data"}
        if unknown:
            raise UsageError(f"config {args.config}: unknown keys {sorted(unknown)}")
        values.update({k: v for k, v in loaded.items() if k in DEFAULTS})
    for key in DEFAULTS:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    if values["jobs"] is None:
        values["jobs"] = os.cpu_count() or 1
    return values


def train_config(s: dict) -> TrainConfig:
    try:
        fit = FitConfig(alpha=s["alpha"], dispersion=s["dispersion"])
        rfsc = RfscConfig(n_population=s["population"], max_iterations=s["iterations"],
                          epsilon=s["epsilon"], mu_init=s["mu_init"], seed=s["seed"], fit=fit)
        cfg = TrainConfig(rfsc=rfsc, max_degree=s["degree"], dcf=s["dcf"], alpha_d=s["alpha_d"])
        if s["repeats"] < 1 or s["jobs"] < 1 or s.get("folds", 2) < 2:
            raise ValueError("repeats and jobs must be >= 1, folds >= 2")
        if not 0.0 < s["alpha_d"] < 1.0:
            raise ValueError("alpha-d must lie in (0, 1)")
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from exc
    return cfg


def _out_dir(arg: str | None, command: str) -> Path:
    path = Path(arg) if arg else Path(f"rfsc-{command}-{time.strftime('%Y%m%d-%H%M%S')}")
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


def cmd_inspect(args) -> int:
    raw = resolve(args.data)
    counts = np.bincount(raw.labels, minlength=raw.n_classes + 1)[1:]
    print(f"samples   {raw.n_samples}")
    print(f"features  {raw.n_features}")
    print(f"classes   {raw.n_classes}")
    for name, n in zip(raw.class_names, counts):
        print(f"  {name}: {n}")
    print(f"regressors (degree {args.degree})  {len(enumerate_regressors(raw.n_features, args.degree))}")
    print(f"DCF by default  {'on' if dcf.auto_enabled(raw.n_features) else 'off'}")
    return 0


def cmd_dcf(args) -> int:
    from .dataset import modeled_classes, normalize, recode

    if not 0.0 < args.alpha_d < 1.0:
        raise UsageError("alpha-d must lie in (0, 1)")
    raw = resolve(args.data)
    ds = normalize(raw)
    out = _out_dir(args.out, "dcf")
    rows = []
    for c in modeled_classes(ds.n_classes):
        res = dcf.filter_features(ds.features, recode(ds, c).y, args.alpha_d, class_index=c)
        rows += dcf.report_rows(res, raw.feature_names)
        print(f"class {c}: kept {len(res.kept)} of {ds.n_features} features")
    cols = ("class", "feature", "name", "statistic", "threshold", "kept")
    _write_csv(out / "dcf_report.csv", cols, ([_fmt(r[k]) for k in cols] for r in rows))
    print(f"wrote {out / 'dcf_report.csv'}")
    return 0


def _write_traces(out: Path, result) -> None:
    for c, runs in result.runs.items():
        for r, run in enumerate(runs):
            _write_csv(out / f"trace_class{c}_run{r}.csv", IterationTrace.COLUMNS,
                       ([_fmt(v) for v in tr.row()] for tr in run.trace))


def cmd_train(args) -> int:
    s = merged_settings(args)
    cfg = train_config(s)
    raw = resolve(args.data)
    out = _out_dir(args.out, "train")
    result = train(raw, cfg, s["seed"], s["repeats"], s["jobs"])
    clf = result.classifier
    clf.metadata["data"] = str(args.data)
    clf.save(out / "model.json")
    _write_traces(out, result)
    acc, kap, _ = evaluate(clf, raw)
    n_a, n_r = model_size_report(clf)
    for m in clf.models:
        terms = ", ".join(m.regressors.render(j, raw.feature_names) for j in m.model.selected)
        print(f"class {m.class_index}: J = {m.model.J:.4f}  [{terms or 'empty'}]")
    print(f"training accuracy {acc:.4f}  kappa {kap:.4f}  n_a {n_a}  n_r {n_r}")
    print(f"wrote {out / 'model.json'}")
    return 0


def cmd_cv(args) -> int:
    s = merged_settings(args)
    cfg = train_config(s)
    raw = resolve(args.data)
    out = _out_dir(args.out, "cv")
    name = Path(args.data).stem
    report = run_cv(raw, cfg, s["folds"], s["repeats"], s["seed"], s["jobs"], name=name)
    (out / "cv_report.csv").write_text(report.to_csv())
    (out / "cv_report.txt").write_text(report.to_table())
    (out / "timings.csv").write_text(report.timings_csv())
    print(report.to_table(), end="")
    print(f"wrote {out / 'cv_report.csv'}")
    return 0


def _rows_for_model(clf: Classifier, path: str):
    """Raw feature rows plus class ids when the file carries a label column."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise FileNotFoundError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        values, _, _ = parse_table(text, has_labels=False, source=path)
        if values.shape[1] == clf.n_features:
            return values, None
    except DataFormatError:
        pass  # probably a label column; retry below
    values, tokens, _ = parse_table(text, has_labels=True, source=path)
    if values.shape[1] != clf.n_features:
        raise DataFormatError(f"{path}: expected {clf.n_features} features, found {values.shape[1]}")
    labels, _ = labels_from_tokens(tokens, list(clf.class_names))
    return values, labels


def _open_out(path):
    return open(path, "w", newline="") if path else None


def cmd_predict(args) -> int:
    clf = Classifier.load(args.model)
    rows, labels = _rows_for_model(clf, args.data)
    classes, scores = predict(clf, rows)
    header = ["row", "class"] + [f"score_{m.class_index}" for m in clf.models]
    fh = _open_out(args.out)
    try:
        w = csv.writer(fh or sys.stdout, lineterminator="\n")
        w.writerow(header)
        for k, (c, sc) in enumerate(zip(classes, scores), start=1):
            w.writerow([k, clf.class_names[c - 1]] + [_fmt(v) for v in sc])
    finally:
        if fh:
            fh.close()
    if labels is not None:
        acc = float(np.mean(classes == labels))
        print(f"accuracy {acc:.4f} on {len(labels)} labeled rows", file=sys.stderr if not args.out else sys.stdout)
    return 0


def cmd_explain(args) -> int:
    clf = Classifier.load(args.model)
    rows, _ = _rows_for_model(clf, args.data)
    if args.class_index is not None and not 1 <= args.class_index <= clf.n_classes:
        raise UsageError(f"--class must lie in 1..{clf.n_classes}")
    fh = _open_out(args.out)
    try:
        w = csv.writer(fh or sys.stdout, lineterminator="\n")
        w.writerow(["row", "class", "y_plus", "y_minus", "delta", "score"])
        for k, row in enumerate(rows, start=1):
            c = args.class_index or predict(clf, row)[0]
            e = explain(clf, row, c)
            w.writerow([k, clf.class_names[c - 1], _fmt(e.y_plus), _fmt(e.y_minus),
                        _fmt(e.delta), _fmt(e.score)])
    finally:
        if fh:
            fh.close()
    return 0


COMMANDS = {
    "inspect": cmd_inspect,
    "dcf": cmd_dcf,
    "train": cmd_train,
    "cv": cmd_cv,
    "predict": cmd_predict,
    "explain": cmd_explain,
}


def _numeric(exc: BaseException) -> bool:
    while exc is not None:
        if isinstance(exc, (FloatingPointError, np.linalg.LinAlgError, EvaluationError,
                            OverflowError, ZeroDivisionError)):
            return True
        exc = exc.__cause__
    return False


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"rfsc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, DataFormatError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        where = f" (line {exc.line})" if getattr(exc, "line", None) else ""
        print(f"rfsc: {msg}{where}", file=sys.stderr)
        return EXIT_IO
    except Exception as exc:  # noqa: BLE001 - mapped to exit codes
        if _numeric(exc):
            print(f"rfsc: numeric failure: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        if isinstance(exc, ValueError):
            print(f"rfsc: {exc}", file=sys.stderr)
            return EXIT_IO
        raise


if __name__ == "__main__":
    sys.exit(main())
