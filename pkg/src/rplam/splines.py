"""Centered B-spline bases for the additive components.

Each additive covariate gets a clamped B-spline basis on [0, 1]. The raw
basis is centered by its exact integrals so every basis function (and
hence every fitted component) integrates to zero, which is the
identifiability constraint of the model. Dropping the last centered
column gives the reduced coordinate system actually used in the design
matrix; the Gram matrices of the reduced system turn coefficient norms
into exact L2 norms of the fitted component.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import BSpline

_TIE_NUDGE = 1e-9


@dataclass(frozen=True)
class SplineSpec:
    """order = polynomial degree + 1 (4 = cubic); internal_knots >= 0."""

    order: int = 4
    internal_knots: int = 1
    knot_placement: str = "quantile"

    def __post_init__(self):
        if self.order < 2:
            raise ValueError("spline order must be >= 2")
        if self.internal_knots < 0:
            raise ValueError("internal knot count must be >= 0")
        if self.knot_placement not in ("quantile", "uniform"):
            raise ValueError("knot_placement must be 'quantile' or 'uniform'")

    @property
    def basis_size(self) -> int:
        return self.internal_knots + self.order


def default_internal_knots(n: int) -> int:
    """Knot-count rule max(1, round(n^(1/5))) keeping the basis small vs n."""
    return max(1, int(round(n ** 0.2)))


def make_knots(x_sample, spec: SplineSpec) -> np.ndarray:
    """Clamped knot vector on [0,1] for data already rescaled to [0,1].

    Quantile placement puts the i-th internal knot at the empirical
    i/(N+1) quantile; coincident interior knots are separated by a 1e-9
    nudge so the basis stays well defined.
    """
    x = np.asarray(x_sample, dtype=float)
    if x.size and (x.min() < 0.0 or x.max() > 1.0):
        raise ValueError("covariate values must lie in [0, 1]")
    n_int = spec.internal_knots
    if n_int > 0:
        if np.unique(x).size < n_int:
            raise ValueError(
                f"need at least {n_int} distinct covariate values for "
                f"{n_int} internal knots, got {np.unique(x).size}"
            )
        probs = np.arange(1, n_int + 1) / (n_int + 1)
        if spec.knot_placement == "uniform":
            interior = probs.copy()
        else:
            interior = np.quantile(x, probs)
        interior = np.clip(interior, _TIE_NUDGE, 1.0 - _TIE_NUDGE)
        for i in range(1, n_int):
            if interior[i] <= interior[i - 1]:
                interior[i] = interior[i - 1] + _TIE_NUDGE
        interior = np.minimum(interior, 1.0 - _TIE_NUDGE)
    else:
        interior = np.empty(0)
    return np.concatenate([np.zeros(spec.order), interior, np.ones(spec.order)])


class CenteredBasis:
    """One covariate's centered B-spline system.

    Holds the raw clamped basis of size k = internal_knots + order together
    with the centering offsets m_s = int_0^1 B_s. The reduced design uses
    the first k-1 centered functions; the dropped one is minus their sum.
    """

    def __init__(self, knots: np.ndarray, spec: SplineSpec):
        self.spec = spec
        self.knots = np.asarray(knots, dtype=float)
        self.size = spec.basis_size
        if self.knots.size != self.size + spec.order:
            raise ValueError("knot vector length inconsistent with spec")
        self.degree = spec.order - 1
        self.offsets = self._integrals()

    @classmethod
    def from_data(cls, x_sample, spec: SplineSpec) -> "CenteredBasis":
        return cls(make_knots(x_sample, spec), spec)

    def _gauss_nodes(self, n_nodes):
        """Gauss-Legendre nodes/weights mapped to each knot interval."""
        z, w = leggauss(n_nodes)
        breaks = np.unique(self.knots)
        a, b = breaks[:-1], breaks[1:]
        half = 0.5 * (b - a)
        nodes = (0.5 * (a + b)[:, None] + half[:, None] * z[None, :]).ravel()
        weights = (half[:, None] * w[None, :]).ravel()
        return nodes, weights

    def _integrals(self):
        # exact for piecewise degree <= 2*nodes - 1; basis degree is order-1
        nodes, weights = self._gauss_nodes((self.spec.order + 1) // 2 + 1)
        raw = self.eval_raw(nodes)
        return raw.T @ weights

    def eval_raw(self, x) -> np.ndarray:
        """Raw basis values, shape (len(x), k). Entries >= 0, rows sum to 1."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.size == 0:
            return np.empty((0, self.size))
        if x.min() < 0.0 or x.max() > 1.0:
            raise ValueError("evaluation points must lie in [0, 1]")
        return BSpline.design_matrix(x, self.knots, self.degree).toarray()

    def eval_centered(self, x) -> np.ndarray:
        """Centered basis values B_s - m_s, all k columns (rows sum to 0)."""
        return self.eval_raw(x) - self.offsets

    def eval_reduced(self, x) -> np.ndarray:
        """First k-1 centered columns: the block this covariate puts in V."""
        return self.eval_centered(x)[:, :-1]

    def eval_component(self, coef, x):
        """Fitted component sum_s c_s (B_s - m_s) over the reduced system."""
        coef = np.asarray(coef, dtype=float)
        if coef.size != self.size - 1:
            raise ValueError(f"need {self.size - 1} coefficients, got {coef.size}")
        scalar = np.isscalar(x) or np.ndim(x) == 0
        vals = self.eval_reduced(x) @ coef
        return float(vals[0]) if scalar else vals

    def gram_matrix(self) -> np.ndarray:
        """Gram of the reduced centered system: G[s,s'] = int Bt_s Bt_s'.

        Products have piecewise degree 2(order-1), so order-node
        Gauss-Legendre per interval is exact. For a coefficient vector c,
        c' G c equals the squared L2 norm of the fitted component.
        """
        nodes, weights = self._gauss_nodes(self.spec.order)
        red = self.eval_reduced(nodes)
        return red.T @ (weights[:, None] * red)


class AdditiveDesign:
    """Stacked reduced design for all additive covariates.

    Row i concatenates each covariate's reduced centered basis at X[i, j];
    total width K = sum_j (k_j - 1). Column block j maps to that
    covariate's coefficient vector.
    """

    def __init__(self, bases: list[CenteredBasis]):
        self.bases = bases
        self.block_sizes = [b.size - 1 for b in bases]
        self.K = int(sum(self.block_sizes))
        edges = np.concatenate([[0], np.cumsum(self.block_sizes)]).astype(int)
        self.block_slices = [slice(edges[j], edges[j + 1]) for j in range(len(bases))]
        self.grams = [b.gram_matrix() for b in bases]

    @property
    def p(self) -> int:
        return len(self.bases)

    def rows(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.shape[1] != self.p:
            raise ValueError(f"expected {self.p} additive covariates, got {X.shape[1]}")
        return np.hstack([b.eval_reduced(X[:, j]) for j, b in enumerate(self.bases)])

    def split_coef(self, c) -> list[np.ndarray]:
        c = np.asarray(c, dtype=float)
        if c.size != self.K:
            raise ValueError(f"coefficient vector must have length {self.K}")
        return [c[sl] for sl in self.block_slices]

    def penalty_matrix(self, lam2: float) -> np.ndarray:
        """Block-diagonal lam2 * Gram penalty over all covariates."""
        P = np.zeros((self.K, self.K))
        for sl, G in zip(self.block_slices, self.grams):
            P[sl, sl] = lam2 * G
        return P


def build_design(X, specs) -> AdditiveDesign:
    """Per-covariate bases (knots from the data) stacked into one design.

    specs may be a single SplineSpec applied to every column or one per
    column. X must already be rescaled to [0, 1].
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    p = X.shape[1]
    if isinstance(specs, SplineSpec):
        specs = [specs] * p
    if len(specs) != p:
        raise ValueError(f"expected {p} spline specs, got {len(specs)}")
    bases = [CenteredBasis.from_data(X[:, j], sp) for j, sp in enumerate(specs)]
    return AdditiveDesign(bases)


@dataclass(frozen=True)
class DomainMap:
    """Affine map of a raw covariate onto [0,1], kept around for prediction."""

    lo: float
    hi: float

    @classmethod
    def from_data(cls, x) -> "DomainMap":
        x = np.asarray(x, dtype=float)
        lo, hi = float(x.min()), float(x.max())
        if hi <= lo:
            raise ValueError("covariate is constant; cannot map to [0, 1]")
        return cls(lo, hi)

    def to_unit(self, x, clamp: bool = False):
        x = np.asarray(x, dtype=float)
        u = (x - self.lo) / (self.hi - self.lo)
        if clamp:
            u = np.clip(u, 0.0, 1.0)
        return u

    def from_unit(self, u):
        return self.lo + np.asarray(u, dtype=float) * (self.hi - self.lo)
