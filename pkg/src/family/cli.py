"""Command-line entry point: ``family {fit,path,predict,df,simulate}``.

Exit codes: 0 on success, 1 on bad input, 2 when a fit did not converge (the
result is still written). Outputs are written atomically and carry the
resolved configuration.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys

import numpy as np

from . import serialize
from .design import Dataset, Standardizer, build_design, standardize
from .dof import df_l2, df_linf
from .errors import FamilyError
from .glm import admm_fit_logistic, check_binary, lambda_max_logistic
from .penalty import PenaltyKind, PenaltySpec
from .postfit import relax_refit
from .simulate import (
    MethodConfig,
    Scenario,
    load_scenario,
    run_replicates,
    summarize,
    TABLE_COLUMNS,
)
from .solver import AdmmOptions, FactorCache, admm_fit, lambda_max

EXIT_OK, EXIT_INPUT, EXIT_NOT_CONVERGED = 0, 1, 2
THREADS_ENV = "FAMILY_NUM_THREADS"


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # usage errors are input errors, not the non-convergence code
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


# -- data ------------------------------------------------------------------


def _split(names):
    if names is None:
        return None
    out = [c.strip() for c in names.split(",") if c.strip()]
    if not out:
        raise InputError("empty column list")
    return out


def _header(path):
    with open(path, newline="") as fh:
        try:
            return [h.strip() for h in next(csv.reader(fh))]
        except StopIteration:
            raise InputError(f"{path}: empty file") from None


def _read_table(path, needed):
    """Columns ``needed`` of a headed CSV as floats; missing values rejected."""
    header = _header(path)
    missing = [c for c in needed if c not in header]
    if missing:
        raise InputError(f"column(s) {', '.join(repr(c) for c in missing)} not found in {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        rows = [r for r in reader if r]
    idx = [header.index(c) for c in needed]
    out = np.empty((len(rows), len(needed)))
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise InputError(f"{path}:{i + 2}: expected {len(header)} fields")
        for j, col in enumerate(idx):
            value = row[col].strip()
            if value == "":
                raise InputError(f"{path}:{i + 2}: missing value in column {needed[j]!r}")
            try:
                out[i, j] = float(value)
            except ValueError:
                raise InputError(f"{path}:{i + 2}: non-numeric value {value!r}") from None
    return out


def _columns(args):
    header = _header(args.data)
    if args.response not in header:
        raise InputError(f"response column {args.response!r} not found in {args.data}")
    z_cols = _split(args.z_columns)
    x_cols = _split(args.x_columns)
    if x_cols is None:
        x_cols = [h for h in header if h != args.response and h not in (z_cols or [])]
    if not x_cols:
        raise InputError("no covariate columns")
    return x_cols, z_cols


def _load(path, x_cols, z_cols, response=None):
    needed = list(x_cols) + list(z_cols or []) + ([response] if response else [])
    values = _read_table(path, needed)
    p1 = len(x_cols)
    X = values[:, :p1]
    Z = None if z_cols is None else values[:, p1 : p1 + len(z_cols)]
    y = values[:, -1] if response else np.zeros(values.shape[0])
    return Dataset(X, y, Z=Z)


def _scaler_dict(scaler):
    if scaler is None:
        return None
    return {
        "x_means": scaler.x_means,
        "x_sds": scaler.x_sds,
        "z_means": scaler.z_means,
        "z_sds": scaler.z_sds,
        "y_mean": scaler.y_mean,
        "symmetric": scaler.symmetric,
    }


def _scaler_from(d):
    if d is None:
        return None
    return Standardizer(
        np.asarray(d["x_means"]), np.asarray(d["x_sds"]),
        np.asarray(d["z_means"]), np.asarray(d["z_sds"]),
        float(d["y_mean"]), bool(d["symmetric"]),
    )


def _prepare(args):
    x_cols, z_cols = _columns(args)
    data = _load(args.data, x_cols, z_cols, args.response)
    if args.family == "binomial":
        check_binary(data.y)
    scaler = None
    if not args.no_standardize:
        data, scaler = standardize(data)
    model = {
        "response": args.response,
        "x_columns": x_cols,
        "z_columns": z_cols,
        "symmetric": data.symmetric,
        "family": args.family,
        "standardizer": _scaler_dict(scaler),
    }
    return data, build_design(data), model, scaler


def _options(args):
    return AdmmOptions(
        eps_pri=args.eps,
        eps_dual=args.eps,
        max_iter=args.max_iter,
        zero_diagonal=args.zero_diagonal,
    )


def _lambda_max(args, design, y, alpha, p, cache):
    if args.family == "binomial":
        return lambda_max_logistic(design, y, args.penalty, alpha, p=p, cache=cache)
    return lambda_max(design, y, args.penalty, alpha, p=p, cache=cache)


def _spec(args, design, y, cache):
    kind = PenaltyKind.parse(args.penalty)
    p = max(design.p1, design.p2)
    if args.lambda3 is not None:
        if args.lam == "max":
            raise InputError("--lambda max needs the (alpha, lambda) form, not --lambda3")
        lam = float(args.lam)
        return PenaltySpec(kind, kind, lam, lam, args.lambda3)
    if args.alpha is None:
        raise InputError("give --alpha with --lambda, or --lambda with --lambda3")
    if args.lam == "max":
        lam = _lambda_max(args, design, y, args.alpha, p, cache)
    else:
        lam = float(args.lam)
    return PenaltySpec.from_alpha(kind, args.alpha, lam, p)


def _fit(args, design, y, spec, opts, cache, warm=None):
    if args.family == "binomial":
        return admm_fit_logistic(design, y, spec, opts, warm=warm, cache=cache)
    return admm_fit(design, y, spec, opts, warm=warm, cache=cache)


def _fit_extra(args, design, data, result, scaler):
    extra = {}
    if scaler is not None:
        extra["B_original"] = scaler.to_original(result.B_hat)
    if args.relax:
        B_relaxed = relax_refit(design, data.y, result.support, args.family)
        extra["B_relaxed"] = B_relaxed
        if scaler is not None:
            extra["B_relaxed_original"] = scaler.to_original(B_relaxed)
    return extra


def _config(args):
    return {k: v for k, v in sorted(vars(args).items()) if k != "func"}


# -- commands --------------------------------------------------------------


def cmd_fit(args):
    data, design, model, scaler = _prepare(args)
    cache = FactorCache(design)
    spec = _spec(args, design, data.y, cache)
    result = _fit(args, design, data.y, spec, _options(args), cache)
    extra = {"model": model, **_fit_extra(args, design, data, result, scaler)}
    serialize.write_json(args.out, serialize.result_to_dict(result, _config(args), extra))
    if not result.converged:
        print(f"warning: not converged after {result.iterations} iterations", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _parse_grid(text):
    """``AxL`` (alpha count by lambda count) or a JSON file."""
    if os.path.exists(text):
        with open(text) as fh:
            doc = json.load(fh)
        unknown = set(doc) - {"alphas", "lambdas", "n_lambda", "ratio"}
        if unknown:
            raise InputError(f"unknown grid keys: {', '.join(sorted(unknown))}")
        return doc
    try:
        a, l = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise InputError(f"--grid must be AxL (e.g. 10x50) or a JSON file, got {text!r}") from None
    if a < 1 or l < 1:
        raise InputError("grid sizes must be positive")
    alphas = [0.5] if a == 1 else list(np.linspace(0.05, 0.95, a))
    return {"alphas": alphas, "n_lambda": l}


def cmd_path(args):
    data, design, model, scaler = _prepare(args)
    cache = FactorCache(design)
    grid = _parse_grid(args.grid)
    p = max(design.p1, design.p2)
    alphas = grid.get("alphas") or ([args.alpha] if args.alpha is not None else [0.5])
    opts = _options(args)
    fits, rows = [], []
    for alpha in alphas:
        alpha = float(alpha)
        if "lambdas" in grid:
            lams = sorted((float(v) for v in grid["lambdas"]), reverse=True)
        else:
            top = _lambda_max(args, design, data.y, alpha, p, cache)
            ratio = float(grid.get("ratio", args.lambda_ratio))
            lams = np.geomspace(top, top * ratio, int(grid.get("n_lambda", 50)))
        warm = None
        for lam in lams:
            spec = PenaltySpec.from_alpha(args.penalty, alpha, float(lam), p)
            res = _fit(args, design, data.y, spec, opts, cache, warm=warm)
            warm = res.state
            doc = serialize.result_to_dict(res, extra=_fit_extra(args, design, data, res, scaler))
            doc.pop("config")
            doc.pop("schema_version")
            fits.append(doc)
            rows.append({
                "alpha": alpha,
                "lambda": float(lam),
                "objective": res.objective,
                "n_main": int(res.support[1:, 0].sum() + res.support[0, 1:].sum()),
                "n_interactions": res.n_interactions,
                "iterations": res.iterations,
                "converged": int(res.converged),
            })
    doc = {
        "schema_version": serialize.SCHEMA_VERSION,
        "config": _config(args),
        "model": model,
        "fits": fits,
    }
    serialize.write_json(args.out, doc)
    if args.csv:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows({k: repr(v) if isinstance(v, float) else v for k, v in r.items()} for r in rows)
        serialize.atomic_write(args.csv, buf.getvalue())
    if not all(r["converged"] for r in rows):
        print("warning: some grid points did not converge", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _load_model(path):
    doc = serialize.read_json(path)
    if "model" not in doc or "B" not in doc:
        raise InputError(f"{path} is not a single-fit result")
    return doc, serialize.result_from_dict(doc)


def _model_design(model, path, with_response):
    data = _load(path, model["x_columns"], model["z_columns"], model["response"] if with_response else None)
    scaler = _scaler_from(model["standardizer"])
    if scaler is not None:
        data = scaler.transform(data)
    return data, build_design(data)


def cmd_predict(args):
    doc, result = _load_model(args.model)
    model = doc["model"]
    _, design = _model_design(model, args.data, with_response=False)
    key = "B_relaxed" if args.relax else "B"
    if key not in doc:
        raise InputError(f"{args.model} has no {key!r}; refit with --relax")
    B = np.asarray(doc[key], dtype=float).reshape(result.B_hat.shape)
    eta = design.matrix() @ B.ravel()
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if model["family"] == "binomial":
        writer.writerow(["eta", "prob"])
        prob = 1.0 / (1.0 + np.exp(-np.clip(eta, -700, 700)))
        writer.writerows((repr(float(e)), repr(float(q))) for e, q in zip(eta, prob))
    else:
        writer.writerow(["prediction"])
        writer.writerows((repr(float(e)),) for e in eta)
    serialize.atomic_write(args.out, buf.getvalue())
    return EXIT_OK


def cmd_df(args):
    doc, result = _load_model(args.model)
    model = doc["model"]
    if model["family"] != "gaussian":
        raise InputError("df estimates are defined for the squared-error loss only")
    _, design = _model_design(model, args.data, with_response=True)
    kind = result.spec.row_kind
    if kind is not result.spec.col_kind:
        raise InputError("df needs the same row and column penalty")
    if kind is PenaltyKind.GroupL2:
        est = df_l2(design, result)
    elif kind is PenaltyKind.Linf:
        est = df_linf(design, result, q=args.df_q)
    else:
        raise InputError(f"no df estimate for the {kind.value!r} penalty (l2 or linf only)")
    out = {
        "schema_version": serialize.SCHEMA_VERSION,
        "config": _config(args),
        "df": est.df,
        "active_size": est.active_size,
        "condition": est.condition,
        "dropped_directions": est.dropped,
        "penalty": kind.value,
        "q": 2 if kind is PenaltyKind.GroupL2 else args.df_q,
    }
    serialize.write_json(args.out, out)
    return EXIT_OK


def cmd_simulate(args):
    if args.scenario:
        scenario = load_scenario(args.scenario)
        updates = {}
    else:
        scenario = Scenario()
        updates = {"family": args.family}
    for name in ("n_true_main", "n_true_inter", "covariance", "cov_param", "p", "seed"):
        value = getattr(args, name)
        if value is not None:
            updates[name] = value
    if args.n is not None:
        updates.update(n_train=args.n, n_test=args.n, n_valid=args.n)
    scenario = Scenario.from_dict({**scenario.to_dict(), **updates})
    grid = _parse_grid(args.grid)
    if "lambdas" in grid:
        raise InputError("simulate grids take alphas and n_lambda, not explicit lambdas")
    method = MethodConfig(
        kind=args.penalty,
        alphas=tuple(grid["alphas"]),
        n_lambda=int(grid.get("n_lambda", 50)),
        lambda_ratio=float(grid.get("ratio", args.lambda_ratio)),
        eps=args.eps,
        max_iter=args.max_iter,
    )
    workers = args.workers or int(os.environ.get(THREADS_ENV, "1") or 1)
    reports = run_replicates(scenario, method, args.replicates, workers=workers)
    os.makedirs(args.out, exist_ok=True)
    rows = summarize(reports)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=TABLE_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows({k: repr(v) if isinstance(v, float) else v for k, v in r.items()} for r in rows)
    serialize.atomic_write(os.path.join(args.out, "table.csv"), buf.getvalue())
    serialize.write_json(
        os.path.join(args.out, "replicates.json"),
        {
            "schema_version": serialize.SCHEMA_VERSION,
            "config": _config(args),
            "scenario": scenario.to_dict(),
            "method": method.to_dict(),
            "replicates": reports,
        },
    )
    return EXIT_OK


# -- parser ----------------------------------------------------------------


def _add_data(p, response=True):
    p.add_argument("--data", required=True, help="headed CSV file")
    if response:
        p.add_argument("--response", required=True, help="response column name")
        p.add_argument("--x-columns", help="comma-separated X columns (default: all but the response)")
        p.add_argument("--z-columns", help="comma-separated Z columns (default: Z = X)")


def _add_penalty(p):
    p.add_argument("--penalty", default="l2", choices=[k.value for k in PenaltyKind])
    p.add_argument("--alpha", type=float, help="mixing weight in (0, 1)")
    p.add_argument("--family", default="gaussian", choices=["gaussian", "binomial"])
    p.add_argument("--no-standardize", action="store_true", help="fit on the raw covariate scale")
    _add_solver(p)


def _add_solver(p):
    p.add_argument("--eps", type=float, help="primal and dual tolerance")
    p.add_argument("--max-iter", type=int, default=10_000)
    p.add_argument("--zero-diagonal", action="store_true", help="exclude squared terms when Z = X")
    p.add_argument("--seed", type=int, default=0)


def build_parser():
    parser = _Parser(prog="family", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="fit one penalty level")
    _add_data(p)
    _add_penalty(p)
    p.add_argument("--lambda", dest="lam", required=True, help="penalty level, or 'max'")
    p.add_argument("--lambda3", type=float, help="interaction l1 level; --lambda then sets lambda1 = lambda2")
    p.add_argument("--relax", action="store_true", help="add the unpenalized refit on the support")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("path", help="fit an (alpha, lambda) grid with warm starts")
    _add_data(p)
    _add_penalty(p)
    p.add_argument("--grid", default="1x20", help="AxL or a JSON file with alphas/lambdas/n_lambda/ratio")
    p.add_argument("--lambda-ratio", type=float, default=1e-3)
    p.add_argument("--relax", action="store_true")
    p.add_argument("--out", required=True)
    p.add_argument("--csv", help="also write one CSV row per grid point")
    p.set_defaults(func=cmd_path)

    p = sub.add_parser("predict", help="linear predictor from a saved fit")
    p.add_argument("--model", required=True, help="JSON written by 'fit'")
    _add_data(p, response=False)
    p.add_argument("--relax", action="store_true", help="use the relaxed coefficients")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("df", help="degrees-of-freedom estimate of a saved fit")
    p.add_argument("--model", required=True)
    _add_data(p, response=False)
    p.add_argument("--df-q", type=int, default=500, help="l-q proxy for l-infinity")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_df)

    p = sub.add_parser("simulate", help="replicated synthetic-data experiment")
    p.add_argument("--scenario", help="scenario JSON; flags below override it")
    p.add_argument("--n-true-main", type=int)
    p.add_argument("--n-true-inter", type=int)
    p.add_argument("--covariance")
    p.add_argument("--cov-param", type=float)
    p.add_argument("--p", type=int)
    p.add_argument("--n", type=int, help="observations in each of train/test/validation")
    p.add_argument("--replicates", type=int, default=20)
    p.add_argument("--workers", type=int, help=f"processes (default ${THREADS_ENV} or 1)")
    p.add_argument("--penalty", default="l2", choices=[k.value for k in PenaltyKind])
    p.add_argument("--family", default="gaussian", choices=["gaussian", "binomial"])
    p.add_argument("--grid", default="10x50")
    p.add_argument("--lambda-ratio", type=float, default=1e-3)
    p.add_argument("--eps", type=float)
    p.add_argument("--max-iter", type=int, default=10_000)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "max_iter", 1) < 1:
        parser.error("--max-iter must be positive")
    try:
        return args.func(args)
    except (InputError, FamilyError, ValueError, KeyError, OSError) as exc:
        message = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {message}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
