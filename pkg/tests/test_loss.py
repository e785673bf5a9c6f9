import numpy as np
import pytest
from scipy.optimize import brentq

from rplam.loss import (
    MScaleSpec,
    ScaleConvergenceError,
    SquareLoss,
    TukeyBisquare,
    TUKEY_C0_50,
    m_scale,
    mad_scale,
)

GRID = np.linspace(-8.0, 8.0, 10_001)


class TestRho:
    def test_zero(self):
        assert TukeyBisquare(4.685).rho(0.0) == 0.0

    def test_saturates_beyond_c(self):
        f = TukeyBisquare(4.685)
        assert f.rho(10.0) == 1.0
        assert f.rho(-4.685) == 1.0

    def test_closed_form_value(self):
        # c=2, t=1: 1 - (3/4)^3
        assert TukeyBisquare(2.0).rho(1.0) == pytest.approx(37.0 / 64.0, abs=1e-15)

    def test_even_bounded_monotone(self):
        f = TukeyBisquare(4.685)
        vals = f.rho(GRID)
        assert np.allclose(vals, f.rho(-GRID))
        assert vals.min() >= 0.0 and vals.max() <= 1.0
        half = f.rho(np.linspace(0, 8, 5001))
        assert np.all(np.diff(half) >= -1e-15)

    def test_dominance_for_larger_c(self):
        # the two-stage construction needs rho_{c1} <= rho_{c0} when c1 >= c0
        r0 = TukeyBisquare(TUKEY_C0_50).rho(GRID)
        r1 = TukeyBisquare(4.685).rho(GRID)
        assert np.all(r1 <= r0 + 1e-15)

    def test_square(self):
        f = SquareLoss()
        assert f.rho(3.0) == 9.0
        assert f.psi(3.0) == 6.0
        assert f.psi_prime(-1.0) == 2.0
        assert f.weight(0.0) == 2.0

    def test_invalid_constant(self):
        with pytest.raises(ValueError):
            TukeyBisquare(0.0)


class TestDerivatives:
    def test_psi_odd_and_flat(self):
        f = TukeyBisquare(4.685)
        assert f.psi(0.0) == 0.0
        assert f.psi(5.0) == 0.0
        assert f.psi(-5.0) == 0.0

    @pytest.mark.parametrize("c", [1.54764, 2.0, 4.685])
    def test_psi_matches_finite_difference(self, c):
        f = TukeyBisquare(c)
        h = 1e-5
        fd = (f.rho(GRID + h) - f.rho(GRID - h)) / (2 * h)
        assert np.max(np.abs(f.psi(GRID) - fd)) <= 1e-5

    @pytest.mark.parametrize("c", [1.54764, 4.685])
    def test_psi_prime_matches_finite_difference(self, c):
        f = TukeyBisquare(c)
        h = 1e-5
        # skip the kink at |t| = c where the second derivative jumps
        grid = GRID[np.abs(np.abs(GRID) - c) > 1e-3]
        fd = (f.psi(grid + h) - f.psi(grid - h)) / (2 * h)
        assert np.max(np.abs(f.psi_prime(grid) - fd)) <= 1e-5

    def test_psi_prime_at_zero(self):
        f = TukeyBisquare(4.685)
        assert f.psi_prime(0.0) == pytest.approx(6.0 / 4.685**2, rel=1e-14)

    def test_relative_fd_check_at_one(self):
        f = TukeyBisquare(4.685)
        h = 1e-6
        fd = (f.rho(1.0 + h) - f.rho(1.0 - h)) / (2 * h)
        assert f.psi(1.0) == pytest.approx(fd, rel=1e-6)


class TestWeight:
    def test_limit_at_zero(self):
        f = TukeyBisquare(4.685)
        assert f.weight(0.0) == pytest.approx(6.0 / 4.685**2, rel=1e-14)
        ts = np.array([1e-10, 1e-8, 1e-6])
        assert np.allclose(f.weight(ts), f.psi(ts) / ts, rtol=1e-9)

    def test_zero_outside_c(self):
        assert TukeyBisquare(4.685).weight(5.0) == 0.0

    def test_even_nonnegative(self):
        f = TukeyBisquare(3.0)
        w = f.weight(GRID)
        assert np.all(w >= 0)
        assert np.allclose(w, f.weight(-GRID))


class TestMadScale:
    def test_hand_value(self):
        assert mad_scale([-1.0, 0.0, 1.0]) == pytest.approx(1.0 / 0.6745)

    def test_constant_vector(self):
        assert mad_scale([2.5, 2.5, 2.5]) == 0.0

    def test_equivariance(self):
        rng = np.random.default_rng(7)
        r = rng.standard_normal(101)
        assert mad_scale(-3.0 * r) == pytest.approx(3.0 * mad_scale(r), rel=1e-12)


class TestMScale:
    def test_constant_residuals_match_root_oracle(self):
        spec = MScaleSpec()
        rho0 = spec.rho0
        # scalar root solve of rho0(r/s) = b as the independent oracle
        r = 1.7
        root = brentq(lambda s: rho0.rho(r / s) - spec.b, 1e-6, 1e6, xtol=1e-14)
        got = m_scale(np.full(50, r), spec)
        assert not got.degenerate
        assert got.scale == pytest.approx(root, rel=1e-9)

    def test_root_residual_small(self):
        rng = np.random.default_rng(3)
        r = rng.standard_normal(500)
        spec = MScaleSpec()
        s = m_scale(r, spec).scale
        assert abs(np.mean(spec.rho0.rho(r / s)) - spec.b) <= spec.tol

    @pytest.mark.parametrize("c", [-3.0, 0.1, 7.0])
    def test_scale_equivariance(self, c):
        rng = np.random.default_rng(11)
        r = rng.standard_normal(200)
        base = m_scale(r).scale
        scaled = m_scale(c * r).scale
        assert scaled == pytest.approx(abs(c) * base, rel=1e-8)

    def test_all_zero_degenerate(self):
        got = m_scale(np.zeros(10))
        assert got.scale == 0.0 and got.degenerate

    def test_mostly_zero_degenerate(self):
        # 60% zeros > 1 - b: no positive root
        r = np.concatenate([np.zeros(6), np.ones(4)])
        got = m_scale(r)
        assert got.scale == 0.0 and got.degenerate

    def test_gaussian_consistency(self):
        rng = np.random.default_rng(2024)
        r = rng.standard_normal(10_000)
        s = m_scale(r).scale
        assert 0.95 <= s <= 1.05

    def test_warm_start_agrees(self):
        rng = np.random.default_rng(5)
        r = rng.standard_normal(300)
        cold = m_scale(r).scale
        warm = m_scale(r, s0=cold * 1.3).scale
        assert warm == pytest.approx(cold, rel=1e-8, abs=1e-12)

    def test_square_loss_closed_form(self):
        r = np.array([1.0, -2.0, 2.0])
        spec = MScaleSpec(rho0=SquareLoss(), b=1.0)
        assert m_scale(r, spec).scale == pytest.approx(np.sqrt(3.0), rel=1e-14)

    def test_max_iter_exceeded_raises(self):
        rng = np.random.default_rng(9)
        r = rng.standard_normal(100)
        spec = MScaleSpec(tol=0.0, max_iter=3)
        with pytest.raises(ScaleConvergenceError) as err:
            m_scale(r, spec)
        assert err.value.last_scale > 0
