"""Preliminary fit: ridge S-estimation of intercept, slopes, and splines.

Minimizes s_n^2(a, b, c) + lam1 ||b||^2 + lam2 sum_j ||c_j||^2_Gj where
s_n is the M-scale of the residuals Y - a - Z b - V c and the Gram-norm
ridge terms only stabilize the solve. The output supplies everything the
penalized stage consumes: the intercept, initial slopes, the fitted
additive components, and the residual scale.

The optimizer is iteratively reweighted least squares with a scale
refresh each step, safeguarded by step halving so the objective never
increases, and multi-started from a ridge least-squares fit plus random
elemental regressions so that contaminated starts cannot trap the fit.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .loss import (
    MScaleSpec,
    RhoFunction,
    SquareLoss,
    TukeyBisquare,
    TUKEY_C0_50,
    m_scale,
    mad_scale,
)
from .splines import AdditiveDesign

RIDGE_FLOOR = 1e-10


class FitFailureError(RuntimeError):
    """The S-stage collapsed (degenerate scale away from an exact fit)."""


@dataclass
class PlamData:
    """Observations: response Y, linear covariates Z, additive covariates X.

    X must already be rescaled to [0, 1]; Z enters the model linearly and
    may contain dummies or unbounded columns.
    """

    Y: np.ndarray
    Z: np.ndarray
    X: np.ndarray

    def __post_init__(self):
        self.Y = np.asarray(self.Y, dtype=float).ravel()
        self.Z = np.atleast_2d(np.asarray(self.Z, dtype=float))
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        if self.Z.shape[0] != self.n or self.X.shape[0] != self.n:
            raise ValueError("Y, Z, X must have the same number of rows")
        for name, arr in (("Y", self.Y), ("Z", self.Z), ("X", self.X)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite entries")

    @property
    def n(self) -> int:
        return self.Y.size

    @property
    def q(self) -> int:
        return self.Z.shape[1]

    @property
    def p(self) -> int:
        return self.X.shape[1]


@dataclass
class RidgeSOptions:
    rho0: RhoFunction = field(default_factory=lambda: TukeyBisquare(TUKEY_C0_50))
    b: float = 0.5
    tol: float = 1e-8
    max_iter: int = 500
    n_elemental: int = 20
    burnin_iter: int = 10
    n_keep: int = 3
    seed: int = 0
    scale_source: str = "s"  # "s" (S-scale) or "mad" over initial residuals
    scale_tol: float = 1e-10
    scale_max_iter: int = 100

    def scale_spec(self) -> MScaleSpec:
        return MScaleSpec(self.rho0, self.b, self.scale_tol, self.scale_max_iter)


def ls_options(**overrides) -> RidgeSOptions:
    """Classical configuration: squared loss, scale = RMS of residuals."""
    opts = RidgeSOptions(rho0=SquareLoss(), b=1.0, n_elemental=0, n_keep=1)
    return replace(opts, **overrides)


@dataclass
class PreliminaryFit:
    mu_hat: float
    beta_ini: np.ndarray
    c_hat: np.ndarray
    sigma_hat: float
    design: AdditiveDesign
    lam1: float
    lam2: float
    iterations: int
    converged: bool
    objective: float
    degenerate: bool = False

    def theta(self) -> np.ndarray:
        return np.concatenate([[self.mu_hat], self.beta_ini, self.c_hat])


def _solve_ridge(A, rhs):
    try:
        return np.linalg.solve(A, rhs), False
    except np.linalg.LinAlgError:
        warnings.warn("singular weighted system; applying ridge floor 1e-10")
        A = A + RIDGE_FLOOR * np.eye(A.shape[0])
        return np.linalg.solve(A, rhs), True


def _elemental_starts(Y, Z, rng, count):
    """Exact-fit (intercept, slopes) candidates from random row subsets."""
    n, q = Z.shape
    starts = []
    attempts = 0
    while len(starts) < count and attempts < 20 * max(count, 1):
        attempts += 1
        idx = rng.choice(n, size=q + 1, replace=False)
        M = np.column_stack([np.ones(q + 1), Z[idx]])
        try:
            sol = np.linalg.solve(M, Y[idx])
        except np.linalg.LinAlgError:
            continue
        if np.all(np.isfinite(sol)):
            starts.append(sol)
    return starts


class _SObjective:
    """Shared state for one data set: design matrix, penalty, scale calls."""

    def __init__(self, Y, Xmat, P, spec, exact_tol):
        self.Y = Y
        self.X = Xmat
        self.P = P
        self.spec = spec
        self.n = Y.size
        self.exact_tol = exact_tol

    def residuals(self, theta):
        return self.Y - self.X @ theta

    def scale(self, r, s0=None):
        return m_scale(r, self.spec, s0=s0)

    def value(self, theta, scale):
        return scale * scale + float(theta @ (self.P @ theta))

    def exact_fit(self, r) -> bool:
        return bool(np.max(np.abs(r)) <= self.exact_tol)


def _irls(objective: _SObjective, theta, max_iter, tol):
    """Weighted-ridge iterations with scale refresh and step halving.

    Returns (theta, scale, obj, iterations, converged, degenerate). The
    objective value is non-increasing across accepted iterations; a step
    that cannot be made to descend ends the iteration at the previous
    point.
    """
    rho0 = objective.spec.rho0
    r = objective.residuals(theta)
    s, degen = objective.scale(r)
    if degen:
        if objective.exact_fit(r):
            return theta, 0.0, objective.value(theta, 0.0), 0, True, True
        raise FitFailureError("degenerate residual scale at the starting point")
    obj = objective.value(theta, s)

    it = 0
    converged = False
    for it in range(1, max_iter + 1):
        w = rho0.weight(r / s)
        Xw = objective.X * w[:, None]
        A = (objective.X.T @ Xw) / objective.n + objective.P
        rhs = (Xw.T @ objective.Y) / objective.n
        theta_new, _ = _solve_ridge(A, rhs)

        # keep the objective monotone: halve toward the current point
        accepted = False
        step = theta_new - theta
        for _ in range(30):
            cand = theta + step
            r_new = objective.residuals(cand)
            s_new, degen = objective.scale(r_new, s0=s)
            if degen:
                if objective.exact_fit(r_new):
                    return cand, 0.0, objective.value(cand, 0.0), it, True, True
                raise FitFailureError("degenerate residual scale during iteration")
            obj_new = objective.value(cand, s_new)
            if obj_new <= obj + 1e-12:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            converged = True
            break

        change = np.max(np.abs(cand - theta)) / max(1.0, np.max(np.abs(theta)))
        theta, r, s, obj = cand, r_new, s_new, obj_new
        if change < tol:
            converged = True
            break
    return theta, s, obj, it, converged, False


def ridge_s_fit(
    data: PlamData,
    design: AdditiveDesign,
    lam1: float | None = None,
    lam2: float | None = None,
    options: RidgeSOptions | None = None,
) -> PreliminaryFit:
    """Fit the ridge S-estimator of (mu, beta, c) and the residual scale.

    lam1/lam2 default to the numerical stabilizer 1e-4 (q+K)/n. An exact
    interpolating fit is reported as success with sigma_hat = 0 and the
    degenerate flag set; a degenerate scale away from an exact fit raises
    FitFailureError.
    """
    opts = options or RidgeSOptions()
    if lam1 is None or lam2 is None:
        stabilizer = 1e-4 * (data.q + design.K) / data.n
        lam1 = stabilizer if lam1 is None else lam1
        lam2 = stabilizer if lam2 is None else lam2
    if lam1 < 0 or lam2 < 0:
        raise ValueError("ridge parameters must be non-negative")

    n, q, K = data.n, data.q, design.K
    if n <= 1 + q + K:
        warnings.warn(
            f"n = {n} does not exceed the parameter count {1 + q + K}; "
            "the preliminary fit may be unstable"
        )

    V = design.rows(data.X)
    Xmat = np.column_stack([np.ones(n), data.Z, V])
    P = np.zeros((1 + q + K, 1 + q + K))
    P[1 : 1 + q, 1 : 1 + q] = lam1 * np.eye(q)
    P[1 + q :, 1 + q :] = design.penalty_matrix(lam2)

    exact_tol = 1e-10 * (1.0 + float(np.max(np.abs(data.Y))))
    objective = _SObjective(data.Y, Xmat, P, opts.scale_spec(), exact_tol)

    # start 1: ridge least squares on the full design
    A0 = (Xmat.T @ Xmat) / n + P
    rhs0 = (Xmat.T @ data.Y) / n
    theta_ls, _ = _solve_ridge(A0, rhs0)
    starts = [theta_ls]

    # starts 2..: elemental regressions on (1, Z) with spline block zero
    rng = np.random.default_rng(opts.seed)
    for sol in _elemental_starts(data.Y, data.Z, rng, opts.n_elemental):
        theta = np.zeros(1 + q + K)
        theta[: 1 + q] = sol
        starts.append(theta)

    # burn-in every start, then run the most promising ones to convergence
    burned = []
    for theta in starts:
        try:
            burned.append(_irls(objective, theta, opts.burnin_iter, opts.tol))
        except FitFailureError:
            continue
    if not burned:
        raise FitFailureError("all starting points produced degenerate scales")
    burned.sort(key=lambda res: res[2])

    best = None
    for res in burned[: max(1, opts.n_keep)]:
        theta, s, obj, it0, conv, degen = res
        if degen:
            final = res
        else:
            theta, s, obj, it, conv, degen = _irls(
                objective, theta, opts.max_iter, opts.tol
            )
            final = (theta, s, obj, it0 + it, conv, degen)
        if best is None or final[2] < best[2]:
            best = final

    theta, s, obj, iterations, converged, degenerate = best
    mu_hat = float(theta[0])
    beta_ini = theta[1 : 1 + q].copy()
    c_hat = theta[1 + q :].copy()

    sigma_hat = float(s)
    if opts.scale_source == "mad":
        sigma_hat = mad_scale(data.Y - Xmat @ theta)
    elif opts.scale_source != "s":
        raise ValueError("scale_source must be 's' or 'mad'")

    return PreliminaryFit(
        mu_hat=mu_hat,
        beta_ini=beta_ini,
        c_hat=c_hat,
        sigma_hat=sigma_hat,
        design=design,
        lam1=lam1,
        lam2=lam2,
        iterations=iterations,
        converged=converged,
        objective=obj,
        degenerate=degenerate,
    )


def eta_functions(fit: PreliminaryFit):
    """Evaluable fitted additive components, one callable per covariate."""
    blocks = fit.design.split_coef(fit.c_hat)

    def make(basis, coef):
        return lambda x: basis.eval_component(coef, x)

    return [make(basis, coef) for basis, coef in zip(fit.design.bases, blocks)]


def additive_part(fit: PreliminaryFit, X) -> np.ndarray:
    """sum_j etahat_j(X_ij) for rows of X."""
    return fit.design.rows(X) @ fit.c_hat


def adjusted_response(data: PlamData, fit: PreliminaryFit) -> np.ndarray:
    """Y with the fitted intercept and additive components removed."""
    return data.Y - fit.mu_hat - additive_part(fit, data.X)


def initial_residual_scale(data: PlamData, fit: PreliminaryFit) -> float:
    """MAD of the full initial residuals (alternative scale source)."""
    r = adjusted_response(data, fit) - data.Z @ fit.beta_ini
    return mad_scale(r)
