"""Command-line front end: fit, select, predict, simulate, holdout.

Every subcommand reads a CSV with named columns, applies the robust
standardization, runs the requested pipeline and writes a structured
result file (or CSV tables for the study commands). Exit codes: 0 on
success, 2 for usage/config errors, 3 for data errors, 4 for fit
failures, 5 for selection failures.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .loss import ScaleConvergenceError, SquareLoss, TukeyBisquare
from .preliminary import (
    FitFailureError,
    PlamData,
    RidgeSOptions,
    ls_options,
    ridge_s_fit,
)
from .resultfile import FittedModel, read_result, write_result
from .selection import SelectionError, make_grid, rbic, select
from .simulate import (
    SCHEMES,
    SimDesign,
    StudyConfig,
    contaminate,
    gen_clean,
    resolve_jobs,
    run_study,
)
from .solver import SolverOptions, penalized_fit
from .splines import SplineSpec, build_design, default_internal_knots
from .standardize import RunConfig, StandardizationMap, load_csv

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_FIT = 4
EXIT_SELECT = 5


def mape(y_true, y_pred) -> float:
    """Median absolute prediction error."""
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if y_true.size == 0 or y_true.size != y_pred.size:
        raise ValueError("mape needs equal-length, non-empty inputs")
    return float(np.median(np.abs(y_true - y_pred)))


@dataclass
class PipelineSettings:
    method: str = "rob"
    penalty: str = "scad"
    a: float | None = None
    gamma: float = 1.0
    c0: float = 1.54764
    c1: float = 4.685
    b: float = 0.5
    order: int = 4
    knots: int | None = None  # None -> max(1, round(n^(1/5)))
    seed: int = 0

    def spline_spec(self, n: int) -> SplineSpec:
        k = self.knots if self.knots is not None else default_internal_knots(n)
        return SplineSpec(order=self.order, internal_knots=k)

    def prelim_options(self) -> RidgeSOptions:
        if self.method == "ls":
            return ls_options(seed=self.seed)
        return RidgeSOptions(rho0=TukeyBisquare(self.c0), b=self.b, seed=self.seed)

    def solver_options(self) -> SolverOptions:
        rho1 = SquareLoss() if self.method == "ls" else TukeyBisquare(self.c1)
        if self.method == "rob" and self.c1 < self.c0:
            import warnings

            warnings.warn(
                "c1 < c0 breaks the loss dominance the two-stage construction "
                "needs; expect degraded robustness"
            )
        return SolverOptions(rho1=rho1)


def run_fit_pipeline(data: PlamData, settings: PipelineSettings, *,
                     lam=None, grid=None, warm_start=False):
    """Preliminary stage plus either one penalized fit or a grid selection.

    Returns (prelim, fit, rbic_value, rbic_table or None, best_lambda).
    """
    from .penalties import make_penalty
    from .preliminary import adjusted_response

    design = build_design(data.X, settings.spline_spec(data.n))
    prelim = ridge_s_fit(data, design, options=settings.prelim_options())
    solver_opts = settings.solver_options()
    if grid is not None:
        result = select(data, prelim, settings.penalty, grid, solver_opts,
                        a=settings.a, gamma=settings.gamma, warm_start=warm_start)
        table = [(tuple(row.lam), row.rbic, row.df, row.converged)
                 for row in result.table]
        return prelim, result.best_fit, result.rbic_best, table, result.best_lambda
    lam = np.zeros(data.q) if lam is None else np.asarray(lam, dtype=float)
    if lam.size == 1:
        lam = np.full(data.q, lam[0])
    pen = make_penalty(settings.penalty, lam, a=settings.a, gamma=settings.gamma,
                       beta_tilde=prelim.beta_ini, q=data.q)
    fit = penalized_fit(adjusted_response(data, prelim), data.Z,
                        prelim.sigma_hat, pen, solver_opts,
                        beta_ini=prelim.beta_ini)
    crit = rbic(fit.residuals, prelim.sigma_hat, solver_opts.rho1, fit.df, data.n)
    return prelim, fit, crit, None, lam


def _model_from_fit(config, smap, prelim, fit, settings, meta) -> FittedModel:
    blocks = prelim.design.split_coef(prelim.c_hat)
    return FittedModel(
        config=config,
        smap=smap,
        mu_hat=prelim.mu_hat,
        sigma_hat=prelim.sigma_hat,
        beta=fit.beta_hat.copy(),
        bases=list(prelim.design.bases),
        spline_coefs=[b.copy() for b in blocks],
        meta=meta,
    )


@dataclass
class HoldoutConfig:
    test_size: int = 100
    reps: int = 50
    seed: int = 0
    modes: tuple = (("rob", True), ("ls", True), ("rob", False), ("ls", False))
    grid_levels: tuple = (0.0, 0.2, 0.4, 0.6)
    grid_mode: str = "shared"


def holdout_study(data: PlamData, settings: PipelineSettings,
                  config: HoldoutConfig):
    """Repeated train/test splits; prediction error and model size per mode.

    Each replication draws one test set shared by all modes, refits the
    whole pipeline (preliminary stage included) on the training rows, and
    scores the median absolute prediction error on the held-out rows.
    Returns (summary frame, per-replication frame).
    """
    n = data.n
    if n <= config.test_size:
        raise ValueError("test_size must be smaller than the sample size")
    rows = []
    for rep in range(config.reps):
        rng = np.random.default_rng(np.random.SeedSequence([config.seed, rep]))
        test_idx = np.sort(rng.choice(n, size=config.test_size, replace=False))
        train_mask = np.ones(n, dtype=bool)
        train_mask[test_idx] = False
        train = PlamData(data.Y[train_mask], data.Z[train_mask], data.X[train_mask])
        Yte, Zte, Xte = data.Y[test_idx], data.Z[test_idx], data.X[test_idx]

        for method, penalized in config.modes:
            mode = ("penalized-" if penalized else "") + method
            run = PipelineSettings(**{**settings.__dict__, "method": method})
            run.seed = settings.seed + rep
            try:
                if penalized:
                    grid = make_grid(data.q, config.grid_mode, config.grid_levels)
                    prelim, fit, _, _, _ = run_fit_pipeline(train, run, grid=grid)
                else:
                    prelim, fit, _, _, _ = run_fit_pipeline(
                        train, run, lam=np.zeros(data.q))
                yhat = (prelim.mu_hat + Zte @ fit.beta_hat
                        + prelim.design.rows(np.clip(Xte, 0.0, 1.0)) @ prelim.c_hat)
                rows.append({"rep": rep, "mode": mode, "mape": mape(Yte, yhat),
                             "size": fit.df, "failed": False})
            except (FitFailureError, SelectionError, ScaleConvergenceError,
                    np.linalg.LinAlgError) as exc:
                rows.append({"rep": rep, "mode": mode, "mape": np.nan,
                             "size": np.nan, "failed": True,
                             "message": f"{type(exc).__name__}: {exc}"})

    per_rep = pd.DataFrame(rows)
    summary_rows = []
    for method, penalized in config.modes:
        mode = ("penalized-" if penalized else "") + method
        sub = per_rep[(per_rep["mode"] == mode) & (~per_rep["failed"])]
        summary_rows.append({
            "mode": mode,
            "mape_mean": float(sub["mape"].mean()) if len(sub) else np.nan,
            "avsize": float(sub["size"].mean()) if len(sub) else np.nan,
            "failures": int((per_rep["mode"] == mode).sum() - len(sub)),
        })
    return pd.DataFrame(summary_rows), per_rep


# ---------------------------------------------------------------------------
# argument parsing


def _add_column_args(sp):
    sp.add_argument("--data", required=True, help="input CSV path")
    sp.add_argument("--response", required=True)
    sp.add_argument("--linear", required=True,
                    help="comma-separated linear covariate columns")
    sp.add_argument("--additive", required=True,
                    help="comma-separated additive covariate columns")
    sp.add_argument("--binary", default="",
                    help="columns to treat as binary (no standardization)")
    sp.add_argument("--standardize", default="median_mad",
                    choices=["median_mad", "mean_sd"])
    sp.add_argument("--delimiter", default=",")


def _add_model_args(sp):
    sp.add_argument("--penalty", default="scad",
                    choices=["scad", "mcp", "adalasso"])
    sp.add_argument("--a", type=float, default=None,
                    help="concavity constant (SCAD default 3.7, MCP 3.0)")
    sp.add_argument("--gamma", type=float, default=1.0,
                    help="adaptive lasso exponent")
    sp.add_argument("--method", default="rob", choices=["rob", "ls"])
    sp.add_argument("--c0", type=float, default=1.54764)
    sp.add_argument("--c1", type=float, default=4.685)
    sp.add_argument("--b", type=float, default=0.5)
    sp.add_argument("--order", type=int, default=4)
    sp.add_argument("--knots", type=int, default=None)
    sp.add_argument("--seed", type=int, default=0)


def _add_grid_args(sp):
    sp.add_argument("--grid", default="0,0.2,0.4,0.6",
                    help="penalty levels, comma-separated")
    sp.add_argument("--grid-mode", default="shared",
                    choices=["shared", "cartesian", "explicit"])
    sp.add_argument("--grid-file", default=None,
                    help="explicit candidates, one comma-separated vector per line")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rplam",
        description="Robust sparse fits for partially linear additive models",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="one penalized fit at a fixed lambda")
    _add_column_args(fit)
    _add_model_args(fit)
    fit.add_argument("--lam", default="0",
                     help="lambda: scalar (shared) or comma-separated vector")
    fit.add_argument("--out", required=True, help="result file path")

    sel = sub.add_parser("select", help="criterion-based lambda selection")
    _add_column_args(sel)
    _add_model_args(sel)
    _add_grid_args(sel)
    sel.add_argument("--out", required=True)

    pred = sub.add_parser("predict", help="predict from a result file")
    pred.add_argument("--model", required=True)
    pred.add_argument("--data", required=True)
    pred.add_argument("--out", required=True, help="predictions CSV path")
    pred.add_argument("--delimiter", default=",")

    sim = sub.add_parser("simulate", help="contamination study or data emission")
    sim.add_argument("--n", type=int, default=400)
    sim.add_argument("--reps", type=int, default=100)
    sim.add_argument("--schemes", default=",".join(SCHEMES))
    sim.add_argument("--method", default="rob", choices=["rob", "ls"])
    sim.add_argument("--penalty", default="scad",
                     choices=["scad", "mcp", "adalasso"])
    sim.add_argument("--a", type=float, default=None)
    sim.add_argument("--seed", type=int, default=20240)
    sim.add_argument("--no-oracle", action="store_true")
    sim.add_argument("--jobs", type=int, default=None)
    _add_grid_args(sim)
    sim.add_argument("--out-dir", default=None,
                     help="directory for summary/zero-proportion/replication CSVs")
    sim.add_argument("--emit-data", default=None,
                     help="write one synthetic data set to this CSV and exit")
    sim.add_argument("--emit-scheme", default="C0", choices=SCHEMES)

    hold = sub.add_parser("holdout", help="train/test prediction study")
    _add_column_args(hold)
    _add_model_args(hold)
    _add_grid_args(hold)
    hold.add_argument("--test-size", type=int, default=100)
    hold.add_argument("--reps", type=int, default=50)
    hold.add_argument("--modes", default="penalized-rob,penalized-ls,rob,ls")
    hold.add_argument("--out", default=None, help="summary CSV path")

    return parser


def _split_cols(text: str) -> list[str]:
    return [c.strip() for c in text.split(",") if c.strip()]


def _run_config(args) -> RunConfig:
    return RunConfig(
        response=args.response,
        linear=_split_cols(args.linear),
        additive=_split_cols(args.additive),
        binary=_split_cols(args.binary),
        standardize_method=args.standardize,
    )


def _settings(args) -> PipelineSettings:
    return PipelineSettings(
        method=args.method, penalty=args.penalty, a=args.a, gamma=args.gamma,
        c0=args.c0, c1=args.c1, b=args.b, order=args.order, knots=args.knots,
        seed=args.seed,
    )


def _grid_from_args(args, q: int):
    levels = [float(x) for x in _split_cols(args.grid)]
    explicit = None
    if args.grid_mode == "explicit":
        if args.grid_file is None:
            raise ValueError("--grid-mode explicit requires --grid-file")
        with open(args.grid_file, "r", encoding="utf-8") as fh:
            explicit = [[float(x) for x in _split_cols(line)]
                        for line in fh if line.strip()]
    return make_grid(q, args.grid_mode, levels, explicit=explicit)


def _meta_from(args, settings: PipelineSettings, report) -> dict:
    return {
        "method": settings.method,
        "penalty": settings.penalty,
        "penalty_a": settings.a if settings.a is not None else "default",
        "c0": settings.c0,
        "c1": settings.c1,
        "b_target": settings.b,
        "seed": settings.seed,
        "rows_used": report.n_rows,
        "rows_dropped": report.n_dropped,
    }


def _cmd_fit(args) -> int:
    config = _run_config(args)
    data, smap, report = load_csv(args.data, config, args.delimiter)
    settings = _settings(args)
    lam = np.array([float(x) for x in _split_cols(args.lam)])
    prelim, fit, crit, _, lam_used = run_fit_pipeline(data, settings, lam=lam)
    model = _model_from_fit(config, smap, prelim, fit, settings,
                            _meta_from(args, settings, report))
    extra = {"lambda": ",".join(repr(float(x)) for x in lam_used),
             "rbic": crit, "df": fit.df, "converged": fit.converged}
    write_result(args.out, model, command="fit", extra_meta=extra)
    print(f"fit: df={fit.df} sigma_hat={prelim.sigma_hat:.6g} rbic={crit:.6g} "
          f"-> {args.out}")
    return 0


def _cmd_select(args) -> int:
    config = _run_config(args)
    data, smap, report = load_csv(args.data, config, args.delimiter)
    settings = _settings(args)
    grid = _grid_from_args(args, data.q)
    prelim, fit, crit, table, lam_best = run_fit_pipeline(data, settings, grid=grid)
    model = _model_from_fit(config, smap, prelim, fit, settings,
                            _meta_from(args, settings, report))
    model.rbic_table = table
    extra = {"lambda": ",".join(repr(float(x)) for x in lam_best),
             "rbic": crit, "df": fit.df, "converged": fit.converged,
             "grid_size": len(grid)}
    write_result(args.out, model, command="select", extra_meta=extra)
    selected = [c for c, b in zip(config.linear, fit.beta_hat) if b != 0.0]
    print(f"select: best lambda=({extra['lambda']}) df={fit.df} "
          f"support={selected} -> {args.out}")
    return 0


def _cmd_predict(args) -> int:
    model = read_result(args.model)
    frame = pd.read_csv(args.data, sep=args.delimiter)
    needed = list(model.config.linear) + list(model.config.additive)
    missing = [c for c in needed if c not in frame.columns]
    if missing:
        raise ValueError(f"columns not found in {args.data}: {missing}")
    sub = frame[needed].apply(pd.to_numeric, errors="coerce")
    keep = sub.dropna().index.to_numpy()
    yhat = model.predict_frame(frame.loc[keep])
    out = pd.DataFrame({"row": keep, "prediction": yhat})
    out.to_csv(args.out, index=False)
    print(f"predict: {len(out)} rows ({len(frame) - len(out)} dropped) "
          f"-> {args.out}")
    return 0


def _cmd_simulate(args) -> int:
    design = SimDesign(n=args.n)
    if args.emit_data is not None:
        seed_data = np.random.SeedSequence([args.seed, 1, 0])
        seed_cont = np.random.SeedSequence(
            [args.seed, 2, SCHEMES.index(args.emit_scheme), 0])
        data = contaminate(gen_clean(design, seed_data), design,
                           args.emit_scheme, seed_cont)
        cols = {"Y": data.Y}
        cols.update({f"Z{j + 1}": data.Z[:, j] for j in range(data.q)})
        cols.update({f"X{j + 1}": data.X[:, j] for j in range(data.p)})
        pd.DataFrame(cols).to_csv(args.emit_data, index=False)
        print(f"simulate: wrote {args.emit_scheme} data set ({data.n} rows) "
              f"-> {args.emit_data}")
        return 0

    config = StudyConfig(
        design=design,
        schemes=tuple(_split_cols(args.schemes)),
        n_reps=args.reps,
        method=args.method,
        penalty=args.penalty,
        a=args.a,
        grid_mode=args.grid_mode,
        grid_levels=tuple(float(x) for x in _split_cols(args.grid)),
        master_seed=args.seed,
        with_oracle=not args.no_oracle,
        n_jobs=args.jobs,
    )
    result = run_study(config, out_dir=args.out_dir)
    print(result.summary.to_string(index=False))
    if args.out_dir:
        print(f"simulate: tables written under {args.out_dir}")
    return 0


def _cmd_holdout(args) -> int:
    config = _run_config(args)
    data, smap, report = load_csv(args.data, config, args.delimiter)
    settings = _settings(args)
    mode_map = {"penalized-rob": ("rob", True), "penalized-ls": ("ls", True),
                "rob": ("rob", False), "ls": ("ls", False)}
    try:
        modes = tuple(mode_map[m] for m in _split_cols(args.modes))
    except KeyError as exc:
        raise ValueError(f"unknown holdout mode: {exc}") from exc
    hconfig = HoldoutConfig(
        test_size=args.test_size, reps=args.reps, seed=args.seed, modes=modes,
        grid_levels=tuple(float(x) for x in _split_cols(args.grid)),
        grid_mode=args.grid_mode,
    )
    summary, per_rep = holdout_study(data, settings, hconfig)
    print(summary.to_string(index=False))
    if args.out:
        summary.to_csv(args.out, index=False)
        per_rep.to_csv(str(args.out) + ".reps.csv", index=False)
        print(f"holdout: summary -> {args.out}")
    return 0


_COMMANDS = {
    "fit": _cmd_fit,
    "select": _cmd_select,
    "predict": _cmd_predict,
    "simulate": _cmd_simulate,
    "holdout": _cmd_holdout,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, KeyError) as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, pd.errors.ParserError) as exc:
        print(f"error: data: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (FitFailureError, ScaleConvergenceError) as exc:
        print(f"error: fit-failure: {exc}", file=sys.stderr)
        return EXIT_FIT
    except SelectionError as exc:
        print(f"error: selection: {exc}", file=sys.stderr)
        return EXIT_SELECT


if __name__ == "__main__":
    sys.exit(main())
