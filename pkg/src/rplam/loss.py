"""Bounded loss functions and robust scale estimators.

Provides the Tukey bisquare rho-function (and the unbounded squared loss
used by the classical pipeline), their first two derivatives, the
reweighting function w(t) = psi(t)/t, the M-scale solver and the MAD.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

# 50% breakdown bisquare constant: E rho(Z) = 0.5 for Z ~ N(0,1).
TUKEY_C0_50 = 1.54764
# 85% Gaussian efficiency constant for the regression M-step.
TUKEY_C1_EFF85 = 4.685


class ScaleConvergenceError(RuntimeError):
    """M-scale iteration hit max_iter; carries the last iterate."""

    def __init__(self, message, last_scale):
        super().__init__(message)
        self.last_scale = last_scale


class RhoFunction:
    """Base interface: rho, psi = rho', psi_prime = rho'' and w = psi/t."""

    def rho(self, t):
        raise NotImplementedError

    def psi(self, t):
        raise NotImplementedError

    def psi_prime(self, t):
        raise NotImplementedError

    def weight(self, t):
        raise NotImplementedError


class TukeyBisquare(RhoFunction):
    """Bisquare loss rho(t) = min(1 - (1 - (t/c)^2)^3, 1).

    Bounded, even, non-decreasing in |t| with sup rho = 1, so the tuning
    constant c fully controls the rejection point: rho(t) = 1 for |t| >= c.
    """

    def __init__(self, c: float):
        if c <= 0:
            raise ValueError(f"tuning constant must be positive, got {c}")
        self.c = float(c)

    def __repr__(self):
        return f"TukeyBisquare(c={self.c})"

    def rho(self, t):
        t = np.asarray(t, dtype=float)
        u2 = np.minimum((t / self.c) ** 2, 1.0)
        out = 1.0 - (1.0 - u2) ** 3
        return out if out.ndim else float(out)

    def psi(self, t):
        t = np.asarray(t, dtype=float)
        u2 = (t / self.c) ** 2
        inside = u2 <= 1.0
        out = np.where(inside, (6.0 * t / self.c**2) * (1.0 - u2) ** 2, 0.0)
        return out if out.ndim else float(out)

    def psi_prime(self, t):
        t = np.asarray(t, dtype=float)
        u2 = (t / self.c) ** 2
        inside = u2 <= 1.0
        out = np.where(inside, (6.0 / self.c**2) * (1.0 - u2) * (1.0 - 5.0 * u2), 0.0)
        return out if out.ndim else float(out)

    def weight(self, t):
        # psi(t)/t extended continuously: w(0) = psi'(0) = 6/c^2.
        t = np.asarray(t, dtype=float)
        u2 = (t / self.c) ** 2
        inside = u2 <= 1.0
        out = np.where(inside, (6.0 / self.c**2) * (1.0 - u2) ** 2, 0.0)
        return out if out.ndim else float(out)


class SquareLoss(RhoFunction):
    """rho(t) = t^2. Unbounded; only for the classical least-squares mode."""

    def __repr__(self):
        return "SquareLoss()"

    def rho(self, t):
        t = np.asarray(t, dtype=float)
        out = t * t
        return out if out.ndim else float(out)

    def psi(self, t):
        t = np.asarray(t, dtype=float)
        out = 2.0 * t
        return out if out.ndim else float(out)

    def psi_prime(self, t):
        t = np.asarray(t, dtype=float)
        out = np.full_like(t, 2.0)
        return out if out.ndim else float(out)

    def weight(self, t):
        t = np.asarray(t, dtype=float)
        out = np.full_like(t, 2.0)
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class MScaleSpec:
    """Target equation (1/n) sum rho0(r_i/s) = b solved for s.

    Defaults give the 50% breakdown scale that is consistent for the
    standard deviation under Gaussian errors.
    """

    rho0: RhoFunction = field(default_factory=lambda: TukeyBisquare(TUKEY_C0_50))
    b: float = 0.5
    tol: float = 1e-10
    max_iter: int = 100

    def __post_init__(self):
        if not (self.b > 0):
            raise ValueError("b must be positive")
        if isinstance(self.rho0, TukeyBisquare) and not (self.b < 1.0):
            raise ValueError("b must be below sup rho = 1 for a bounded loss")


class MScaleResult(NamedTuple):
    scale: float
    degenerate: bool


def mad_scale(residuals) -> float:
    """median |r - median(r)| / 0.6745 (consistent for sigma at the normal)."""
    r = np.asarray(residuals, dtype=float)
    if r.size == 0:
        raise ValueError("mad_scale needs at least one residual")
    return float(np.median(np.abs(r - np.median(r))) / 0.6745)


def m_scale(residuals, spec: MScaleSpec = MScaleSpec(), s0: float | None = None
            ) -> MScaleResult:
    """Solve (1/n) sum rho0(r_i/s) = b for s > 0.

    The left side is non-increasing in s, so the positive root is unique
    when it exists. It exists iff the fraction of nonzero residuals
    exceeds b; otherwise the result is (0.0, degenerate=True) and the
    caller decides what a zero scale means.

    Newton steps safeguarded by a bisection bracket, started from s0 when
    the caller has a nearby scale (IRLS warm starts) and from the MAD
    otherwise. Raises ScaleConvergenceError if max_iter is hit before
    |mean rho0(r/s) - b| <= tol.
    """
    r = np.abs(np.asarray(residuals, dtype=float))
    n = r.size
    if n == 0:
        raise ValueError("m_scale needs at least one residual")
    b = spec.b
    rho0 = spec.rho0

    if isinstance(rho0, SquareLoss):
        # Closed form: mean (r/s)^2 = b.
        s = float(np.sqrt(np.mean(r * r) / b))
        return MScaleResult(s, s == 0.0)
    if np.mean(r > 0) <= b:
        return MScaleResult(0.0, True)

    if s0 is not None and np.isfinite(s0) and s0 > 0:
        s = float(s0)
    else:
        s = mad_scale(residuals)
        if s == 0.0:
            s = float(np.mean(r))

    lo, hi = 0.0, np.inf
    for _ in range(spec.max_iter):
        u = r / s
        val = float(np.mean(rho0.rho(u)))
        if abs(val - b) <= spec.tol:
            return MScaleResult(float(s), False)
        if val > b:
            lo = s
        else:
            hi = s
        slope = float(np.mean(rho0.psi(u) * u))  # = -s * d/ds mean rho0(r/s)
        s_new = s + (val - b) * s / slope if slope > 0 else -1.0
        if not (lo < s_new < hi):
            s_new = 0.5 * (lo + hi) if np.isfinite(hi) else 2.0 * s
        s = s_new
    raise ScaleConvergenceError(
        f"M-scale did not reach tol={spec.tol} in {spec.max_iter} iterations", s
    )
