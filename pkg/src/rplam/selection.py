"""Penalty-parameter grids and the information-criterion outer loop.

The criterion is log(sigma^2 sum_i rho1(r_i/sigma)) + df log(n)/n with
residuals computed against the preliminary intercept and additive
components; for the squared loss the first term collapses to
log(sum r_i^2), the classical BIC analogue. Candidates are fitted
independently so the selected model cannot depend on grid order or on
how the work is scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .loss import RhoFunction
from .penalties import Penalty, make_penalty
from .preliminary import PlamData, PreliminaryFit, adjusted_response
from .solver import PenalizedFit, SolverOptions, penalized_fit

GRID_CAP = 10**6
DEFAULT_LEVELS = (0.0, 0.2, 0.4, 0.6)


class SelectionError(RuntimeError):
    """Every candidate fit failed; carries the per-candidate diagnostics."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or []


@dataclass(frozen=True)
class PenaltyGrid:
    values: tuple  # tuple of lambda vectors, each a tuple of q floats
    mode: str

    def __len__(self):
        return len(self.values)

    def arrays(self):
        return [np.asarray(v, dtype=float) for v in self.values]


def make_grid(q: int, mode: str = "shared", levels=DEFAULT_LEVELS,
              explicit=None, cap: int = GRID_CAP) -> PenaltyGrid:
    """Candidate lambda vectors in R^q.

    shared: one level replicated across coordinates (len(levels) candidates);
    cartesian: all combinations, len(levels)^q of them, refused above cap;
    explicit: the given list of vectors passed through unchanged.
    """
    if mode == "explicit":
        if explicit is None:
            raise ValueError("explicit mode needs the candidate list")
        vals = []
        for v in explicit:
            v = np.asarray(v, dtype=float)
            if v.size != q:
                raise ValueError(f"explicit candidate has size {v.size}, expected {q}")
            if np.any(v < 0):
                raise ValueError("penalty levels must be non-negative")
            vals.append(tuple(float(x) for x in v))
        return PenaltyGrid(tuple(vals), "explicit")

    levels = [float(x) for x in levels]
    if any(x < 0 for x in levels):
        raise ValueError("penalty levels must be non-negative")
    if mode == "shared":
        return PenaltyGrid(tuple((lv,) * q for lv in levels), "shared")
    if mode == "cartesian":
        count = len(levels) ** q
        if count > cap:
            raise ValueError(
                f"cartesian grid would hold {count} candidates (cap {cap}); "
                "use shared mode or an explicit list"
            )
        return PenaltyGrid(tuple(product(levels, repeat=q)), "cartesian")
    raise ValueError(f"unknown grid mode: {mode!r}")


def rbic(residuals, sigma_hat: float, rho1: RhoFunction, df: int, n: int) -> float:
    """log(sigma^2 sum rho1(r_i/sigma)) + df log(n)/n.

    An exact fit (all rho terms zero) returns -inf, which any caller can
    detect with isinf; it wins every comparison, as an exact fit should.
    """
    if sigma_hat <= 0:
        raise ValueError("sigma_hat must be positive")
    r = np.asarray(residuals, dtype=float)
    total = float(np.sum(rho1.rho(r / sigma_hat)))
    if total <= 0.0:
        return -math.inf
    return math.log(sigma_hat**2 * total) + df * math.log(n) / n


@dataclass
class CandidateRow:
    lam: np.ndarray
    rbic: float
    df: int
    converged: bool
    failed: bool = False
    message: str = ""


@dataclass
class SelectionResult:
    best_lambda: np.ndarray
    best_fit: PenalizedFit
    rbic_best: float
    table: list  # one CandidateRow per grid entry, in grid order
    prelim: PreliminaryFit


def _candidate_key(row: CandidateRow):
    # smallest criterion, then smallest df, then lexicographically largest
    # lambda; grid order breaks ties among identical vectors
    return (row.rbic, row.df, tuple(-x for x in row.lam))


def select(
    data: PlamData,
    prelim: PreliminaryFit,
    pen_kind: str,
    grid: PenaltyGrid,
    opts: SolverOptions | None = None,
    *,
    a: float | None = None,
    gamma: float = 1.0,
    warm_start: bool = False,
) -> SelectionResult:
    """Fit every candidate penalty vector and keep the criterion argmin.

    Warm starting feeds the previous candidate's estimate as an extra
    start; it is off by default so results are exactly invariant to grid
    reordering.
    """
    opts = opts or SolverOptions()
    if len(grid) == 0:
        raise SelectionError("empty penalty grid")
    Ystar = adjusted_response(data, prelim)
    sigma = prelim.sigma_hat
    if sigma <= 0:
        raise SelectionError("preliminary scale is zero; nothing to select over")

    def build_penalty(lam) -> Penalty:
        return make_penalty(pen_kind, lam, a=a, gamma=gamma,
                            beta_tilde=prelim.beta_ini, q=data.q)

    table: list[CandidateRow] = []
    fits: list[PenalizedFit | None] = []
    previous: PenalizedFit | None = None
    for lam in grid.arrays():
        run_opts = opts
        if warm_start and previous is not None:
            run_opts = SolverOptions(
                rho1=opts.rho1, max_iter=opts.max_iter, tol=opts.tol,
                freeze_tol=opts.freeze_tol, b_init=previous.beta_hat.copy(),
            )
        try:
            fit = penalized_fit(Ystar, data.Z, sigma, build_penalty(lam),
                                run_opts, beta_ini=prelim.beta_ini)
        except (np.linalg.LinAlgError, ValueError) as exc:
            table.append(CandidateRow(lam, math.inf, -1, False, True, str(exc)))
            fits.append(None)
            continue
        crit = rbic(fit.residuals, sigma, opts.rho1, fit.df, data.n)
        table.append(CandidateRow(lam, crit, fit.df, fit.converged))
        fits.append(fit)
        previous = fit

    ok = [i for i, row in enumerate(table) if not row.failed]
    if not ok:
        raise SelectionError("every candidate fit failed", table)
    best_idx = min(ok, key=lambda i: _candidate_key(table[i]))
    best_fit = fits[best_idx]
    return SelectionResult(
        best_lambda=np.asarray(grid.values[best_idx], dtype=float),
        best_fit=best_fit,
        rbic_best=table[best_idx].rbic,
        table=table,
        prelim=prelim,
    )
