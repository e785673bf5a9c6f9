"""Sparsity penalties and their local quadratic approximation.

SCAD and MCP are the bounded-derivative penalties; the adaptive lasso is
the data-weighted L1 variant. Every penalty carries one tuning value per
coefficient so that individual coordinates can be penalized at different
strengths. The LQA diagonal p'(|b0|)/(2|b0|) is what the reweighted
solver adds to its normal equations; coordinates that fall below the
freeze tolerance are removed from the active set and pinned at zero.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

DEFAULT_FREEZE_TOL_FACTOR = 1e-8  # times the residual scale estimate


class LqaDiagonal(NamedTuple):
    diag: np.ndarray      # LQA weights, 0 on frozen coordinates
    active: np.ndarray    # bool mask of coordinates left in the solve


def _as_lambda(lam, q=None):
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    if q is not None and lam.size == 1:
        lam = np.full(q, lam[0])
    if np.any(lam < 0):
        raise ValueError("penalty parameters must be non-negative")
    return lam


class Penalty:
    """Per-coordinate penalty p_s applied to |b_s|; subclasses fill in
    value()/derivative() on non-negative amplitudes."""

    lam: np.ndarray

    @property
    def q(self) -> int:
        return self.lam.size

    def value(self, b):
        """Per-coordinate p_s(b_s) for b_s >= 0."""
        raise NotImplementedError

    def derivative(self, b):
        """Per-coordinate p_s'(b_s) for b_s > 0 (undefined at 0)."""
        raise NotImplementedError

    def value_at(self, s: int, b: float) -> float:
        out = self.value(np.where(np.arange(self.q) == s, b, 0.0))
        return float(out[s])

    def derivative_at(self, s: int, b: float) -> float:
        if b <= 0:
            raise ValueError("penalty derivative requires b > 0")
        out = self.derivative(np.full(self.q, b))
        return float(out[s])

    def total(self, beta) -> float:
        """sum_s p_s(|b_s|); +inf propagates for degenerate adaptive weights."""
        beta = np.asarray(beta, dtype=float)
        if beta.size != self.q:
            raise ValueError(f"expected {self.q} coefficients, got {beta.size}")
        return float(np.sum(self.value(np.abs(beta))))

    def lqa_diagonal(self, b0, freeze_tol: float) -> LqaDiagonal:
        """Quadratic-approximation weights p'(|b0_s|)/(2|b0_s|).

        Coordinates with |b0_s| < freeze_tol are frozen (treated as exact
        zeros, excluded from the solve). Infinite penalty weights freeze a
        coordinate regardless of b0.
        """
        if freeze_tol <= 0:
            raise ValueError("freeze_tol must be positive")
        b0 = np.abs(np.asarray(b0, dtype=float))
        active = (b0 >= freeze_tol) & np.isfinite(self.lam)
        diag = np.zeros(self.q)
        if active.any():
            deriv = self.derivative(b0)
            diag[active] = deriv[active] / (2.0 * b0[active])
        return LqaDiagonal(diag, active)


class ScadPenalty(Penalty):
    """Three-branch concave penalty: linear, quadratic blend, then flat.

    p(b) = lam*b                       for b <= lam
         = -(b^2 - 2a*lam*b + lam^2)
            / (2(a-1))                 for lam < b <= a*lam
         = lam^2 (a+1)/2               for b > a*lam
    """

    def __init__(self, lam, a: float = 3.7, q: int | None = None):
        if a <= 2:
            raise ValueError(f"SCAD requires a > 2, got {a}")
        self.lam = _as_lambda(lam, q)
        self.a = float(a)

    def __repr__(self):
        return f"ScadPenalty(a={self.a}, lam={self.lam})"

    def value(self, b):
        b = np.asarray(b, dtype=float)
        lam, a = self.lam, self.a
        mid = -(b * b - 2.0 * a * lam * b + lam * lam) / (2.0 * (a - 1.0))
        flat = lam * lam * (a + 1.0) / 2.0
        return np.where(b <= lam, lam * b, np.where(b <= a * lam, mid, flat))

    def derivative(self, b):
        b = np.asarray(b, dtype=float)
        lam, a = self.lam, self.a
        mid = (a * lam - b) / (a - 1.0)
        return np.where(b <= lam, lam, np.where(b <= a * lam, mid, 0.0))


class McpPenalty(Penalty):
    """Minimax concave penalty: quadratic ramp to a flat cap at a*lam.

    p(b) = lam*b - b^2/(2a)  for b <= a*lam, then a*lam^2/2.
    """

    def __init__(self, lam, a: float = 3.0, q: int | None = None):
        if a <= 0:
            raise ValueError(f"MCP requires a > 0, got {a}")
        self.lam = _as_lambda(lam, q)
        self.a = float(a)

    def __repr__(self):
        return f"McpPenalty(a={self.a}, lam={self.lam})"

    def value(self, b):
        b = np.asarray(b, dtype=float)
        lam, a = self.lam, self.a
        ramp = lam * b - b * b / (2.0 * a)
        return np.where(b <= a * lam, ramp, a * lam * lam / 2.0)

    def derivative(self, b):
        b = np.asarray(b, dtype=float)
        lam, a = self.lam, self.a
        return np.where(b <= a * lam, lam - b / a, 0.0)


class AdaptiveLassoPenalty(Penalty):
    """L1 penalty reweighted by a preliminary estimate:
    p_s(b) = iota * b / |beta_tilde_s|^gamma.

    A zero preliminary coefficient makes the effective weight infinite;
    the convention is p = +inf for b > 0 and p = 0 for b = 0, which the
    solver realizes by pinning such coordinates at zero up front.
    """

    def __init__(self, iota, gamma: float, beta_tilde):
        if gamma <= 0:
            raise ValueError(f"adaptive lasso requires gamma > 0, got {gamma}")
        beta_tilde = np.asarray(beta_tilde, dtype=float)
        iota = _as_lambda(iota, beta_tilde.size)
        if iota.size != beta_tilde.size:
            raise ValueError("iota and beta_tilde sizes disagree")
        self.gamma = float(gamma)
        self.iota = iota
        self.beta_tilde = beta_tilde
        with np.errstate(divide="ignore"):
            self.lam = np.where(
                beta_tilde == 0.0,
                np.where(iota == 0.0, 0.0, np.inf),
                iota / np.abs(beta_tilde) ** gamma,
            )

    def __repr__(self):
        return f"AdaptiveLassoPenalty(gamma={self.gamma}, lam={self.lam})"

    def value(self, b):
        b = np.asarray(b, dtype=float)
        # 0 * inf is 0 here by the stated convention
        return np.where(b == 0.0, 0.0, self.lam * b)

    def derivative(self, b):
        b = np.asarray(b, dtype=float)
        return np.broadcast_to(self.lam, b.shape).copy()


def make_penalty(kind: str, lam, *, a: float | None = None, gamma: float = 1.0,
                 beta_tilde=None, q: int | None = None) -> Penalty:
    """Factory from a penalty name; for 'adalasso' lam is the iota weight."""
    kind = kind.lower()
    if kind == "scad":
        return ScadPenalty(lam, a=3.7 if a is None else a, q=q)
    if kind == "mcp":
        return McpPenalty(lam, a=3.0 if a is None else a, q=q)
    if kind == "adalasso":
        if beta_tilde is None:
            raise ValueError("adaptive lasso needs the preliminary estimate")
        return AdaptiveLassoPenalty(lam, gamma, beta_tilde)
    raise ValueError(f"unknown penalty kind: {kind!r}")
