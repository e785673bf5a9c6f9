import numpy as np
import pytest

from rplam.penalties import (
    AdaptiveLassoPenalty,
    McpPenalty,
    ScadPenalty,
    make_penalty,
)

Q = 6


def scad(lam=0.2, a=3.7):
    return ScadPenalty(lam, a=a, q=Q)


def mcp(lam=1.0, a=3.0):
    return McpPenalty(lam, a=a, q=Q)


class TestValues:
    def test_zero_amplitude(self):
        for pen in (scad(), mcp(), AdaptiveLassoPenalty(0.3, 1.0, np.ones(Q))):
            assert np.all(pen.value(np.zeros(Q)) == 0.0)

    def test_scad_flat_branch(self):
        # b = 1 > a*lam = 0.74: constant lam^2 (a+1)/2 = 0.094
        val = scad().value_at(0, 1.0)
        assert val == pytest.approx(0.2**2 * 4.7 / 2, abs=1e-15)

    def test_scad_linear_branch(self):
        assert scad(0.5).value_at(2, 0.3) == pytest.approx(0.15, abs=1e-15)

    def test_mcp_ramp_branch(self):
        # lam=1, a=3, b=1 < a*lam: 1 - 1/6
        assert mcp().value_at(0, 1.0) == pytest.approx(5.0 / 6.0, abs=1e-15)

    def test_mcp_flat_branch(self):
        assert mcp().value_at(0, 5.0) == pytest.approx(1.5, abs=1e-15)

    def test_total_two_flat_coordinates(self):
        b = np.array([1.0, 1.0, 0.0, 0.0, 0.0, 0.0])
        assert scad().total(b) == pytest.approx(0.188, abs=1e-15)

    def test_total_zero_lambda(self):
        pen = ScadPenalty(np.zeros(Q))
        rng = np.random.default_rng(0)
        assert pen.total(rng.standard_normal(Q)) == 0.0

    def test_construction_errors(self):
        with pytest.raises(ValueError):
            ScadPenalty(0.2, a=2.0)
        with pytest.raises(ValueError):
            McpPenalty(0.2, a=0.0)
        with pytest.raises(ValueError):
            ScadPenalty(-0.1)
        with pytest.raises(ValueError):
            AdaptiveLassoPenalty(0.1, 0.0, np.ones(3))


class TestDerivatives:
    def test_scad_branches(self):
        pen = scad(1.0)
        assert pen.derivative_at(0, 0.5) == 1.0                       # b <= lam
        assert pen.derivative_at(0, 2.0) == pytest.approx(1.7 / 2.7)  # middle
        assert pen.derivative_at(0, 4.0) == 0.0                       # flat

    def test_mcp_branches(self):
        pen = mcp(1.0, 3.0)
        assert pen.derivative_at(0, 1.5) == pytest.approx(0.5)
        assert pen.derivative_at(0, 3.5) == 0.0

    def test_derivative_at_zero_rejected(self):
        with pytest.raises(ValueError):
            scad().derivative_at(0, 0.0)

    @pytest.mark.parametrize("pen", [scad(0.3), mcp(0.3, 2.5)])
    def test_matches_finite_difference(self, pen):
        h = 1e-7
        for b in (0.05, 0.5, 0.9, 2.0):
            fd = (pen.value_at(0, b + h) - pen.value_at(0, b - h)) / (2 * h)
            assert pen.derivative_at(0, b) == pytest.approx(fd, abs=1e-6)

    @pytest.mark.parametrize("pen", [scad(0.4), mcp(0.7, 3.0)])
    def test_nonnegative_nonincreasing(self, pen):
        grid = np.linspace(1e-6, 5.0, 2000)
        d = np.array([pen.derivative_at(0, b) for b in grid])
        assert np.all(d >= 0)
        assert np.all(np.diff(d) <= 1e-12)


class TestContinuity:
    @pytest.mark.parametrize("lam,a", [(0.2, 3.7), (1.0, 2.5), (0.6, 3.7)])
    def test_scad_branch_points(self, lam, a):
        pen = ScadPenalty(lam, a=a, q=1)
        for knot in (lam, a * lam):
            left = pen.value(np.array([knot - 1e-13]))[0]
            right = pen.value(np.array([knot + 1e-13]))[0]
            assert abs(left - right) <= 1e-12

    @pytest.mark.parametrize("lam,a", [(1.0, 3.0), (0.2, 1.5)])
    def test_mcp_branch_point(self, lam, a):
        pen = McpPenalty(lam, a=a, q=1)
        left = pen.value(np.array([a * lam - 1e-13]))[0]
        right = pen.value(np.array([a * lam + 1e-13]))[0]
        assert abs(left - right) <= 1e-12

    def test_monotone_in_lambda(self):
        grid_b = np.linspace(0.0, 3.0, 301)
        lams = np.linspace(0.0, 1.0, 21)
        prev = None
        for lam in lams:
            vals = ScadPenalty(lam, q=1).value(grid_b)
            if prev is not None:
                assert np.all(vals >= prev - 1e-14)
            prev = vals


class TestSelectionRateCondition:
    """Small-amplitude behavior that the sparsity theory leans on."""

    def test_scad_exact_linear_below_lambda(self):
        n, lam = 400, 0.2
        pen = ScadPenalty(lam, q=1)
        for u in np.linspace(0.0, lam * np.sqrt(n), 25):
            b = u / np.sqrt(n)
            if b <= lam:
                assert pen.value(np.array([b]))[0] == pytest.approx(lam * b, rel=1e-14)

    def test_mcp_at_least_half_linear(self):
        n, lam, a = 400, 0.2, 3.0
        pen = McpPenalty(lam, a=a, q=1)
        for u in np.linspace(1e-6, a * lam * np.sqrt(n), 25):
            b = u / np.sqrt(n)
            if b <= a * lam:
                assert pen.value(np.array([b]))[0] >= 0.5 * lam * b - 1e-15


class TestAdaptiveLasso:
    def test_effective_weights(self):
        pen = AdaptiveLassoPenalty(0.3, 2.0, np.array([2.0, -0.5, 0.0]))
        assert pen.lam[0] == pytest.approx(0.3 / 4.0)
        assert pen.lam[1] == pytest.approx(0.3 / 0.25)
        assert np.isinf(pen.lam[2])

    def test_infinite_weight_convention(self):
        pen = AdaptiveLassoPenalty(0.3, 1.0, np.array([1.0, 0.0]))
        vals = pen.value(np.array([0.5, 0.0]))
        assert vals[1] == 0.0
        assert np.isinf(pen.total(np.array([0.0, 0.1])))
        assert pen.total(np.array([0.5, 0.0])) == pytest.approx(0.15)

    def test_derivative_constant(self):
        pen = AdaptiveLassoPenalty(0.4, 1.0, np.array([2.0, 1.0]))
        assert pen.derivative_at(0, 0.7) == pytest.approx(0.2)
        assert pen.derivative_at(0, 2.5) == pytest.approx(0.2)


class TestLqaDiagonal:
    def test_zero_lambda(self):
        pen = ScadPenalty(np.zeros(Q))
        out = pen.lqa_diagonal(np.full(Q, 0.4), freeze_tol=1e-8)
        assert np.all(out.diag == 0.0)
        assert out.active.all()

    def test_flat_branch_gives_zero(self):
        pen = scad(0.2)
        b0 = np.full(Q, 1.0)  # beyond a*lam
        out = pen.lqa_diagonal(b0, freeze_tol=1e-8)
        assert np.all(out.diag == 0.0)

    def test_linear_branch_value(self):
        pen = scad(0.2)
        b0 = np.full(Q, 0.1)
        out = pen.lqa_diagonal(b0, freeze_tol=1e-8)
        assert np.allclose(out.diag, 1.0)

    def test_freezing(self):
        pen = scad(0.2)
        b0 = np.array([0.5, 1e-12, 0.3, 0.0, 0.2, 0.4])
        out = pen.lqa_diagonal(b0, freeze_tol=1e-8)
        assert out.active.tolist() == [True, False, True, False, True, True]
        assert np.all(out.diag[~out.active] == 0.0)

    def test_infinite_weight_frozen(self):
        pen = AdaptiveLassoPenalty(0.3, 1.0, np.array([1.0, 0.0]))
        out = pen.lqa_diagonal(np.array([0.5, 0.5]), freeze_tol=1e-8)
        assert out.active.tolist() == [True, False]

    def test_bad_tol(self):
        with pytest.raises(ValueError):
            scad().lqa_diagonal(np.ones(Q), freeze_tol=0.0)


class TestFactory:
    def test_kinds(self):
        assert isinstance(make_penalty("scad", 0.2, q=3), ScadPenalty)
        assert isinstance(make_penalty("mcp", 0.2, q=3), McpPenalty)
        pen = make_penalty("adalasso", 0.2, beta_tilde=np.ones(3))
        assert isinstance(pen, AdaptiveLassoPenalty)

    def test_default_constants(self):
        assert make_penalty("scad", 0.1, q=2).a == 3.7
        assert make_penalty("mcp", 0.1, q=2).a == 3.0

    def test_unknown(self):
        with pytest.raises(ValueError):
            make_penalty("lasso", 0.1, q=2)
