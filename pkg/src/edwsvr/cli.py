"""``edwsvr`` command line: train, predict, eval, cv and synth.

Exit status is 0 on success, 1 for data, model or numerical failures and
2 for usage errors (bad or conflicting flags).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import bench
from .cd import SolverError
from .data import (
    DataFormatError,
    Dataset,
    bundled_path,
    evaluate,
    load_dataset,
    read_csv_table,
    synth_two_lines,
    write_dataset,
)
from .modelio import ModelFormatError, load_model, save_model


class UsageError(Exception):
    pass


def _pca_var(text):
    if text.lower() == "none":
        return None
    value = float(text)
    if not 0.0 < value <= 1.0:
        raise argparse.ArgumentTypeError("pca variance fraction must lie in (0, 1]")
    return value


def _add_data_args(p, required=True):
    p.add_argument("--in", dest="input", required=required, help="dataset file")
    p.add_argument("--format", choices=("csv", "sparse"), default="csv")
    p.add_argument("--target", default=None, help="CSV target column name or index (default: last)")
    p.add_argument("--n-features", type=int, default=None, help="width of sparse inputs")


def _add_hyper_args(p):
    p.add_argument("--kernel", choices=("linear", "rbf"), default=None)
    p.add_argument("--gamma", type=float, default=None, help="RBF width (default 1/d)")
    p.add_argument("--lambda1", type=float, default=1.0)
    p.add_argument("--C", dest="c_upper", type=float, default=1.0)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-sweeps", type=int, default=1000)
    p.add_argument("--T", type=int, default=5, help="ASGD passes over the data")
    p.add_argument("--t0", type=int, default=None, help="ASGD averaging start (default n)")
    p.add_argument("--eta0", type=float, default=0.1)
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--c-exp", type=float, default=0.75)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pca-var", type=_pca_var, default=None,
                   help="keep PCA components explaining this variance fraction ('none' to skip)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="edwsvr", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a model and write it to disk")
    _add_data_args(p)
    _add_hyper_args(p)
    p.add_argument("--solver", choices=("cd", "asgd", "esvr", "ols"), default="cd")
    p.add_argument("--out", required=True, help="model file to write")

    p = sub.add_parser("predict", help="predict targets for a dataset")
    _add_data_args(p)
    p.add_argument("--model", required=True)
    p.add_argument("--out", default="-", help="prediction file (default stdout)")

    p = sub.add_parser("eval", help="print MSE and R2 of predictions against a dataset")
    _add_data_args(p)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--pred", help="file of predictions, one per line")
    group.add_argument("--model", help="model file to evaluate")

    p = sub.add_parser("cv", help="repeated k-fold comparison of methods")
    _add_data_args(p, required=False)
    _add_hyper_args(p)
    p.set_defaults(pca_var=0.95)
    p.add_argument("--bundled", default=None, help="use a dataset shipped with the package")
    p.add_argument("--name", default=None, help="dataset label in the report")
    p.add_argument("--methods", default="cd-rbf,cd-linear,esvr-rbf,asgd,ols",
                   help=f"comma list from {', '.join(bench.METHODS)}; cd and esvr follow --kernel")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--repeats", type=int, default=30)
    p.add_argument("--grid", default=None,
                   help="search grid, e.g. 'C=0.1,1,10;epsilon=0.01,0.1;gamma=0.1,1'")
    p.add_argument("--report", default=None, help="write the machine-readable report here")
    p.add_argument("--timing", action="store_true", help="include seconds per fit in the report file")

    p = sub.add_parser("synth", help="write the two-lines synthetic dataset as CSV")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--frac-a", type=float, default=0.826)
    p.add_argument("--frac-b", type=float, default=0.165)
    p.add_argument("--frac-out", type=float, default=0.008)
    p.add_argument("--offset", type=float, default=0.3)
    p.add_argument("--noise-sd", type=float, default=0.01)
    p.add_argument("--outlier-shift", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--with-groups", action="store_true",
                   help="add a 'group' column (0 line A, 1 line B, 2 outlier) before the target")
    p.add_argument("--out", default="-")
    return parser


def _load(args) -> Dataset:
    return load_dataset(args.input, format=args.format, target_column=args.target,
                        n_features=args.n_features)


def _params(args) -> bench.FitParams:
    return bench.FitParams(lambda1=args.lambda1, c_upper=args.c_upper, epsilon=args.epsilon,
                           gamma=args.gamma, tol=args.tol, max_sweeps=args.max_sweeps, T=args.T,
                           t0=args.t0, eta0=args.eta0, a=args.a, c_exp=args.c_exp, seed=args.seed)


def _method_for(solver, kernel):
    if solver in ("asgd", "ols"):
        if kernel == "rbf":
            raise UsageError(f"{solver} supports linear only")
        return solver
    return f"{solver}-{kernel or 'rbf'}"


def cmd_train(args, out):
    method = _method_for(args.solver, args.kernel)
    data = _load(args)
    model = bench.fit_model(method, data, _params(args), args.pca_var)
    if model.info.get("converged") is False:
        print(f"warning: {method} stopped after {model.info['sweeps']} sweeps without converging",
              file=sys.stderr)
    save_model(model, args.out)
    return 0


def _model_dim(model):
    if model.preprocessing is not None:
        return model.preprocessing.input_dim
    if hasattr(model, "w_aug"):
        return model.w_aug.size - 1
    return model.support_points.shape[1]


def _query_features(args, model):
    """Features for prediction; a CSV without a target column is accepted when its width matches the model."""
    dim = _model_dim(model)
    if args.format == "csv" and args.target is None:
        header, values = read_csv_table(args.input)
        if values.shape[1] == dim:
            return values
        if values.shape[1] == dim + 1:
            return np.ascontiguousarray(values[:, :-1])
        raise DataFormatError(f"{args.input}: {values.shape[1]} columns, model expects {dim} features")
    X = _load(args).features
    if X.shape[1] != dim:
        raise DataFormatError(f"{args.input}: {X.shape[1]} features, model expects {dim}")
    return X


def _predict(args):
    model = load_model(args.model)
    return np.atleast_1d(model.predict(_query_features(args, model)))


def _write_text(path, text, out):
    if path == "-":
        out.write(text)
    else:
        Path(path).write_text(text)


def cmd_predict(args, out):
    pred = _predict(args)
    _write_text(args.out, "".join(f"{float(v)!r}\n" for v in pred), out)
    return 0


def cmd_eval(args, out):
    data = _load(args)
    if args.pred is not None:
        pred = np.array([float(line) for line in Path(args.pred).read_text().split()])
    else:
        model = load_model(args.model)
        if data.d != _model_dim(model):
            raise DataFormatError(f"{args.input}: {data.d} features, model expects {_model_dim(model)}")
        pred = np.atleast_1d(model.predict(data.features))
    if pred.shape != data.targets.shape:
        raise DataFormatError(f"{pred.size} predictions for {data.n} targets")
    metrics = evaluate(pred, data.targets)
    out.write(f"mse {metrics.mse!r}\nr2 {metrics.r2!r}\n")
    return 0


def parse_grid(text):
    grid = {}
    aliases = {"C": "c_upper", "c": "c_upper", "epsilon": "epsilon", "eps": "epsilon",
               "gamma": "gamma", "lambda1": "lambda1"}
    for part in filter(None, (p.strip() for p in text.split(";"))):
        key, sep, values = part.partition("=")
        if not sep or key.strip() not in aliases:
            raise UsageError(f"bad grid entry {part!r}; use C=..., epsilon=..., gamma=...")
        try:
            grid[aliases[key.strip()]] = [float(v) for v in values.split(",") if v.strip()]
        except ValueError:
            raise UsageError(f"bad grid values in {part!r}") from None
    return grid


def cmd_cv(args, out):
    if (args.input is None) == (args.bundled is None):
        raise UsageError("give exactly one of --in and --bundled")
    try:
        methods = bench.resolve_methods(args.methods.split(","), args.kernel or "rbf")
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.folds < 2 or args.repeats < 1:
        raise UsageError("need --folds >= 2 and --repeats >= 1")
    grid = parse_grid(args.grid) if args.grid else None
    if args.bundled is not None:
        try:
            path = bundled_path(args.bundled)
        except KeyError as exc:
            raise UsageError(exc.args[0]) from None
        data = load_dataset(path)
        name = args.name or args.bundled
    else:
        data = _load(args)
        name = args.name or Path(args.input).stem
    report = bench.cross_validate(data, methods, _params(args), folds=args.folds,
                                  repeats=args.repeats, seed=args.seed, pca_var=args.pca_var,
                                  grid=grid, dataset_name=name)
    out.write(report.table() + "\n")
    if args.report:
        Path(args.report).write_text(report.to_text(timing=args.timing))
    return 0


def cmd_synth(args, out):
    data = synth_two_lines(args.n, args.frac_a, args.frac_b, args.frac_out, offset=args.offset,
                           noise_sd=args.noise_sd, seed=args.seed, outlier_shift=args.outlier_shift)
    if args.with_groups:
        data = Dataset(np.column_stack([data.features, data.groups]), data.targets, ["x", "group"])
    if args.out == "-":
        names = data.feature_names
        out.write(",".join([*names, "y"]) + "\n")
        for row, y in zip(data.features, data.targets):
            out.write(",".join(repr(float(v)) for v in (*row, y)) + "\n")
    else:
        write_dataset(args.out, data)
    return 0


COMMANDS = {"train": cmd_train, "predict": cmd_predict, "eval": cmd_eval, "cv": cmd_cv,
            "synth": cmd_synth}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args, out)
    except UsageError as exc:
        print(f"edwsvr: error: {exc}", file=sys.stderr)
        return 2
    except (DataFormatError, ModelFormatError, SolverError, ValueError, OSError) as exc:
        print(f"edwsvr: error: {exc}", file=sys.stderr)
        return 1


def main_entry():
    sys.exit(main())
