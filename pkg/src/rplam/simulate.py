"""Monte Carlo harness: data generation, contamination, metrics, studies.

The synthetic model has six linear covariates (three active), three
additive components that integrate to zero, and unit error scale. Four
contamination schemes stress the estimators: heavy tails, variance
inflation, vertical outliers, and bad leverage rows in the linear
covariates. Per-replication seeds are derived from
(master seed, scheme, replication) so scheme order and parallel
scheduling cannot change any result.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import pandas as pd

from .loss import ScaleConvergenceError, SquareLoss, TukeyBisquare, TUKEY_C1_EFF85, mad_scale
from .penalties import make_penalty
from .preliminary import (
    FitFailureError,
    PlamData,
    PreliminaryFit,
    RidgeSOptions,
    ls_options,
    ridge_s_fit,
)
from .selection import PenaltyGrid, SelectionError, make_grid, select
from .solver import SolverOptions, penalized_fit
from .splines import SplineSpec, build_design, default_internal_knots

SCHEMES = ("C0", "C1", "C2", "C3", "C4")
LEVERAGE_VALUE = 20.0
LEVERAGE_FRACTION = 0.05


def eta_linear(x):
    """5x - 5/2 on [0,1]; integrates to zero."""
    return 5.0 * np.asarray(x, dtype=float) - 2.5


def eta_quadratic(x):
    """3(2x-1)^2 - 1; integrates to zero."""
    x = np.asarray(x, dtype=float)
    return 3.0 * (2.0 * x - 1.0) ** 2 - 1.0


def eta_cubic(x):
    """60x^3 - 90x^2 + 30x; integrates to zero."""
    x = np.asarray(x, dtype=float)
    return 60.0 * x**3 - 90.0 * x**2 + 30.0 * x


DEFAULT_ETAS = (eta_linear, eta_quadratic, eta_cubic)


def ar_covariance(q: int, rho: float = 0.5) -> np.ndarray:
    idx = np.arange(q)
    return rho ** np.abs(idx[:, None] - idx[None, :])


@dataclass(frozen=True)
class SimDesign:
    """Synthetic-model configuration for the contamination study."""

    n: int = 400
    beta_true: tuple = (3.0, -1.5, 2.0, 0.0, 0.0, 0.0)
    mu: float = 0.0
    sigma: float = 1.0
    etas: tuple = DEFAULT_ETAS
    z_corr: float = 0.5

    @property
    def q(self) -> int:
        return len(self.beta_true)

    @property
    def p(self) -> int:
        return len(self.etas)

    def covariance(self) -> np.ndarray:
        return ar_covariance(self.q, self.z_corr)

    def beta(self) -> np.ndarray:
        return np.asarray(self.beta_true, dtype=float)

    def regression_mean(self, Z, X) -> np.ndarray:
        total = self.mu + Z @ self.beta()
        for j, eta in enumerate(self.etas):
            total = total + eta(X[:, j])
        return total


def gen_clean(design: SimDesign, seed) -> PlamData:
    """Clean draw: Z ~ N(0, Sigma) via Cholesky, X ~ U(0,1), normal errors."""
    rng = np.random.default_rng(seed)
    L = np.linalg.cholesky(design.covariance())
    Z = rng.standard_normal((design.n, design.q)) @ L.T
    X = rng.uniform(0.0, 1.0, size=(design.n, design.p))
    eps = rng.standard_normal(design.n)
    Y = design.regression_mean(Z, X) + design.sigma * eps
    return PlamData(Y, Z, X)


def _t3(rng, n):
    # ratio construction keeps everything on one generator stream
    return rng.standard_normal(n) / np.sqrt(rng.chisquare(3, size=n) / 3.0)


def contaminate(data: PlamData, design: SimDesign, scheme: str, seed) -> PlamData:
    """Apply one contamination scheme to a clean draw.

    C0 passes through. C1-C3 redraw the errors (t3, 5% variance-inflated,
    15% mean-shifted) on top of the clean regression surface. C4 replaces
    floor(5% n) random rows of Z by the leverage point (20,...,20) and
    keeps the clean responses.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown contamination scheme: {scheme!r}")
    if scheme == "C0":
        return data
    rng = np.random.default_rng(seed)
    n = data.n
    if scheme == "C4":
        k = int(math.floor(LEVERAGE_FRACTION * n))
        rows = rng.choice(n, size=k, replace=False)
        Z = data.Z.copy()
        Z[rows] = LEVERAGE_VALUE
        return PlamData(data.Y.copy(), Z, data.X.copy())

    if scheme == "C1":
        eps = _t3(rng, n)
    elif scheme == "C2":
        eps = rng.standard_normal(n)
        inflated = rng.uniform(size=n) < 0.05
        eps = np.where(inflated, 10.0 * eps, eps)
    else:  # C3
        eps = rng.standard_normal(n)
        shifted = rng.uniform(size=n) < 0.15
        eps = np.where(shifted, eps + 15.0, eps)
    Y = design.regression_mean(data.Z, data.X) + design.sigma * eps
    return PlamData(Y, data.Z.copy(), data.X.copy())


@dataclass
class MetricsRow:
    CN0: int
    IN0: int
    CF: int
    GMSE: float


def metrics(beta_hat, beta_true, Sigma) -> MetricsRow:
    """Zero-pattern counts and the covariance-weighted squared error."""
    beta_hat = np.asarray(beta_hat, dtype=float)
    beta_true = np.asarray(beta_true, dtype=float)
    Sigma = np.asarray(Sigma, dtype=float)
    if beta_hat.size != beta_true.size or Sigma.shape != (beta_hat.size,) * 2:
        raise ValueError("dimension mismatch in metrics")
    zero_hat = beta_hat == 0.0
    zero_true = beta_true == 0.0
    diff = beta_hat - beta_true
    return MetricsRow(
        CN0=int(np.sum(zero_hat & zero_true)),
        IN0=int(np.sum(zero_hat & ~zero_true)),
        CF=int(np.array_equal(zero_hat, zero_true)),
        GMSE=float(diff @ Sigma @ diff),
    )


def _method_options(method: str, seed: int):
    if method == "rob":
        prelim_opts = RidgeSOptions(seed=seed)
        solver_opts = SolverOptions(rho1=TukeyBisquare(TUKEY_C1_EFF85))
    elif method == "ls":
        prelim_opts = ls_options(seed=seed)
        solver_opts = SolverOptions(rho1=SquareLoss())
    else:
        raise ValueError(f"method must be 'rob' or 'ls', got {method!r}")
    return prelim_opts, solver_opts


def _spline_spec(n: int) -> SplineSpec:
    return SplineSpec(order=4, internal_knots=default_internal_knots(n))


def oracle_fit(data: PlamData, design: SimDesign, method: str = "rob",
               seed: int = 0):
    """Unpenalized fit on the true support; returns (beta, OGMSE).

    The reduced model keeps only the covariates with nonzero true
    coefficients, so no selection is involved; its error benchmarks the
    cost of having to select.
    """
    support = np.flatnonzero(design.beta())
    Zr = data.Z[:, support]
    reduced = PlamData(data.Y, Zr, data.X)
    prelim_opts, solver_opts = _method_options(method, seed)
    add_design = build_design(reduced.X, _spline_spec(data.n))
    prelim = ridge_s_fit(reduced, add_design, options=prelim_opts)
    pen = make_penalty("scad", np.zeros(support.size))
    Ystar = data.Y - prelim.mu_hat - add_design.rows(data.X) @ prelim.c_hat
    fit = penalized_fit(Ystar, Zr, prelim.sigma_hat, pen, solver_opts,
                        beta_ini=prelim.beta_ini)
    diff = fit.beta_hat - design.beta()[support]
    Sig = design.covariance()[np.ix_(support, support)]
    return fit.beta_hat, float(diff @ Sig @ diff)


@dataclass
class StudyConfig:
    design: SimDesign = field(default_factory=SimDesign)
    schemes: Sequence[str] = SCHEMES
    n_reps: int = 100
    method: str = "rob"
    penalty: str = "scad"
    a: float | None = None
    gamma: float = 1.0
    grid_mode: str = "shared"
    grid_levels: Sequence[float] = (0.0, 0.2, 0.4, 0.6)
    master_seed: int = 20240
    with_oracle: bool = True
    n_jobs: int | None = None  # None -> RPLAM_THREADS or 1


def _worker_seeds(master_seed: int, scheme: str, rep: int):
    scheme_idx = SCHEMES.index(scheme)
    data_seed = np.random.SeedSequence([master_seed, 1, rep])
    contam_seed = np.random.SeedSequence([master_seed, 2, scheme_idx, rep])
    fit_seed = int(
        np.random.SeedSequence([master_seed, 3, scheme_idx, rep]).generate_state(1)[0]
    )
    return data_seed, contam_seed, fit_seed


def run_replication(config: StudyConfig, scheme: str, rep: int) -> dict:
    """One replication: generate, contaminate, fit, select, score."""
    design = config.design
    data_seed, contam_seed, fit_seed = _worker_seeds(config.master_seed, scheme, rep)
    clean = gen_clean(design, data_seed)
    data = contaminate(clean, design, scheme, contam_seed)

    row = {"scheme": scheme, "method": config.method, "rep": rep, "failed": False,
           "message": ""}
    try:
        prelim_opts, solver_opts = _method_options(config.method, fit_seed)
        add_design = build_design(data.X, _spline_spec(data.n))
        prelim = ridge_s_fit(data, add_design, options=prelim_opts)
        grid = make_grid(design.q, config.grid_mode, config.grid_levels)
        result = select(data, prelim, config.penalty, grid, solver_opts,
                        a=config.a, gamma=config.gamma)
        m = metrics(result.best_fit.beta_hat, design.beta(), design.covariance())
        row.update(
            CN0=m.CN0, IN0=m.IN0, CF=m.CF, GMSE=m.GMSE,
            df=result.best_fit.df,
            sigma_hat=prelim.sigma_hat,
            rbic=result.rbic_best,
            lam=",".join(f"{x:g}" for x in result.best_lambda),
        )
        for s in range(design.q):
            row[f"zero_b{s + 1}"] = int(result.best_fit.beta_hat[s] == 0.0)
        if config.with_oracle:
            _, ogmse = oracle_fit(data, design, config.method, fit_seed)
            row["OGMSE"] = ogmse
    except (FitFailureError, SelectionError, ScaleConvergenceError,
            np.linalg.LinAlgError) as exc:
        row["failed"] = True
        row["message"] = f"{type(exc).__name__}: {exc}"
    return row


def _run_replication_args(args):
    return run_replication(*args)


def resolve_jobs(n_jobs: int | None) -> int:
    if n_jobs is not None:
        return max(1, int(n_jobs))
    env = os.environ.get("RPLAM_THREADS", "")
    if env.strip():
        return max(1, int(env))
    return 1


@dataclass
class StudyResult:
    summary: pd.DataFrame
    zero_proportions: pd.DataFrame
    replications: pd.DataFrame

    def write_csv(self, out_dir):
        out_dir = str(out_dir)
        os.makedirs(out_dir, exist_ok=True)
        paths = {}
        for name, frame in (
            ("summary", self.summary),
            ("zero_proportions", self.zero_proportions),
            ("replications", self.replications),
        ):
            path = os.path.join(out_dir, f"{name}.csv")
            frame.to_csv(path, index=False)
            paths[name] = path
        return paths


def summarize(rows: list[dict], config: StudyConfig) -> StudyResult:
    frame = pd.DataFrame(rows)
    summaries = []
    zero_rows = []
    for scheme in config.schemes:
        sub = frame[frame["scheme"] == scheme]
        good = sub[~sub["failed"]]
        entry = {"scheme": scheme, "method": config.method,
                 "failures": int(sub["failed"].sum())}
        for key in ("CN0", "IN0", "CF"):
            vals = good[key].to_numpy(dtype=float) if len(good) else np.array([])
            entry[f"{key}_mean"] = float(vals.mean()) if vals.size else math.nan
            entry[f"{key}_sd"] = float(vals.std(ddof=1)) if vals.size > 1 else math.nan
        for key in ("GMSE", "OGMSE"):
            if key not in good.columns:
                entry[f"{key}_med"] = math.nan
                entry[f"{key}_mad"] = math.nan
                continue
            vals = good[key].dropna().to_numpy(dtype=float)
            entry[f"{key}_med"] = float(np.median(vals)) if vals.size else math.nan
            entry[f"{key}_mad"] = mad_scale(vals) if vals.size else math.nan
        summaries.append(entry)

        zp = {"scheme": scheme, "method": config.method}
        for s in range(config.design.q):
            col = f"zero_b{s + 1}"
            vals = good[col].to_numpy(dtype=float) if col in good.columns and len(good) else np.array([])
            zp[f"beta{s + 1}"] = float(vals.mean()) if vals.size else math.nan
        zero_rows.append(zp)

    order = ["scheme", "method", "CN0_mean", "CN0_sd", "IN0_mean", "IN0_sd",
             "CF_mean", "CF_sd", "GMSE_med", "GMSE_mad", "OGMSE_med",
             "OGMSE_mad", "failures"]
    summary = pd.DataFrame(summaries)[order]
    return StudyResult(summary, pd.DataFrame(zero_rows), frame)


def run_study(config: StudyConfig, out_dir=None) -> StudyResult:
    """Full contamination study; per-scheme summaries plus raw rows.

    Failed replications are counted and excluded from the summary
    statistics. With n_jobs > 1 replications run in separate processes;
    seed derivation makes the output identical to a serial run.
    """
    tasks = [(config, scheme, rep)
             for scheme in config.schemes
             for rep in range(config.n_reps)]
    jobs = resolve_jobs(config.n_jobs)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_replication_args, tasks, chunksize=4))
    else:
        rows = [run_replication(*t) for t in tasks]
    result = summarize(rows, config)
    if out_dir is not None:
        result.write_csv(out_dir)
    return result
