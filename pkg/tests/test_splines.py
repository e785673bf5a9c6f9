import numpy as np
import pytest
from scipy.integrate import quad

from rplam.splines import (
    AdditiveDesign,
    CenteredBasis,
    DomainMap,
    SplineSpec,
    build_design,
    default_internal_knots,
    make_knots,
)


def cubic_spec(n_int=1):
    return SplineSpec(order=4, internal_knots=n_int)


class TestKnots:
    def test_no_interior(self):
        knots = make_knots(np.linspace(0, 1, 10), cubic_spec(0))
        assert np.array_equal(knots, np.array([0, 0, 0, 0, 1, 1, 1, 1], float))

    def test_uniform_single(self):
        spec = SplineSpec(order=4, internal_knots=1, knot_placement="uniform")
        knots = make_knots(np.linspace(0, 1, 10), spec)
        assert knots[4] == 0.5

    def test_quantile_placement(self):
        x = np.arange(1, 10) * 0.1  # 0.1 .. 0.9
        spec = SplineSpec(order=4, internal_knots=3, knot_placement="quantile")
        knots = make_knots(x, spec)
        expected = np.quantile(x, [0.25, 0.5, 0.75])
        assert np.allclose(knots[4:7], expected)

    def test_too_few_distinct_values(self):
        with pytest.raises(ValueError, match="distinct"):
            make_knots(np.array([0.3, 0.3, 0.3]), cubic_spec(2))

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            make_knots(np.array([-0.1, 0.5]), cubic_spec(1))

    def test_tied_quantiles_nudged(self):
        x = np.concatenate([np.full(50, 0.4), [0.0, 1.0, 0.2]])
        knots = make_knots(x, cubic_spec(3))
        interior = knots[4:7]
        assert np.all(np.diff(interior) > 0)
        assert interior.min() > 0 and interior.max() < 1

    def test_default_knot_rule(self):
        assert default_internal_knots(400) == 3
        assert default_internal_knots(2) == 1


class TestRawBasis:
    def test_partition_of_unity(self):
        basis = CenteredBasis.from_data(np.linspace(0, 1, 50), cubic_spec(3))
        grid = np.linspace(0, 1, 1000)
        vals = basis.eval_raw(grid)
        assert np.all(vals >= 0)
        assert np.allclose(vals.sum(axis=1), 1.0, atol=1e-12)

    def test_clamped_left_end(self):
        basis = CenteredBasis.from_data(np.linspace(0, 1, 50), cubic_spec(2))
        row = basis.eval_raw(0.0)[0]
        expected = np.zeros(basis.size)
        expected[0] = 1.0
        assert np.allclose(row, expected)

    def test_bernstein_at_half(self):
        # single-interval cubic basis is the Bernstein basis
        basis = CenteredBasis.from_data(np.linspace(0, 1, 10), cubic_spec(0))
        row = basis.eval_raw(0.5)[0]
        assert np.allclose(row, [0.125, 0.375, 0.375, 0.125], atol=1e-14)

    def test_at_most_order_nonzero(self):
        basis = CenteredBasis.from_data(np.linspace(0, 1, 100), cubic_spec(4))
        vals = basis.eval_raw(np.linspace(0.01, 0.99, 37))
        assert int(np.max((vals > 0).sum(axis=1))) <= basis.spec.order

    def test_rejects_outside_domain(self):
        basis = CenteredBasis.from_data(np.linspace(0, 1, 10), cubic_spec(1))
        with pytest.raises(ValueError):
            basis.eval_raw(1.2)


class TestCentering:
    def test_offsets_sum_to_one(self):
        basis = CenteredBasis.from_data(np.linspace(0, 1, 60), cubic_spec(3))
        assert basis.offsets.sum() == pytest.approx(1.0, abs=1e-13)

    def test_bernstein_offsets(self):
        basis = CenteredBasis.from_data(np.linspace(0, 1, 10), cubic_spec(0))
        assert np.allclose(basis.offsets, 0.25, atol=1e-14)

    def test_offsets_match_trapezoid(self):
        basis = CenteredBasis.from_data(np.linspace(0, 1, 200) ** 2, cubic_spec(3))
        grid = np.linspace(0, 1, 1_000_001)
        vals = basis.eval_raw(grid)
        trap = np.trapezoid(vals, grid, axis=0)
        assert np.max(np.abs(trap - basis.offsets)) <= 1e-9

    def test_centered_rows_sum_to_zero(self):
        basis = CenteredBasis.from_data(np.linspace(0, 1, 60), cubic_spec(2))
        vals = basis.eval_centered(np.linspace(0, 1, 101))
        assert np.allclose(vals.sum(axis=1), 0.0, atol=1e-12)


class TestGram:
    def test_symmetric_psd(self):
        basis = CenteredBasis.from_data(np.linspace(0, 1, 80), cubic_spec(3))
        H = basis.gram_matrix()
        assert np.allclose(H, H.T, atol=1e-14)
        assert np.linalg.eigvalsh(H).min() >= -1e-12

    def test_norm_matches_fine_quadrature(self):
        rng = np.random.default_rng(4)
        basis = CenteredBasis.from_data(rng.uniform(size=100), cubic_spec(3))
        c = rng.standard_normal(basis.size - 1)
        H = basis.gram_matrix()
        quad_val, _ = quad(
            lambda x: basis.eval_component(c, x) ** 2, 0, 1,
            points=np.unique(basis.knots), limit=200, epsabs=1e-12, epsrel=1e-12,
        )
        assert c @ H @ c == pytest.approx(quad_val, rel=1e-8)

    def test_zero_coefficients(self):
        basis = CenteredBasis.from_data(np.linspace(0, 1, 30), cubic_spec(1))
        H = basis.gram_matrix()
        c = np.zeros(basis.size - 1)
        assert c @ H @ c == 0.0


class TestDesign:
    def test_column_count_single(self):
        # k = 1 internal + order 4 = 5 raw functions -> 4 design columns
        design = build_design(np.linspace(0, 1, 40), cubic_spec(1))
        assert design.K == 4
        assert design.rows(np.linspace(0, 1, 7)).shape == (7, 4)

    def test_column_count_two_covariates(self):
        X = np.random.default_rng(0).uniform(size=(60, 2))
        design = build_design(X, cubic_spec(2))  # k_j = 6 each
        assert design.K == 10

    def test_block_alignment(self):
        rng = np.random.default_rng(1)
        X = rng.uniform(size=(50, 3))
        design = build_design(X, cubic_spec(2))
        c = rng.standard_normal(design.K)
        total = design.rows(X) @ c
        by_blocks = sum(
            basis.eval_reduced(X[:, j]) @ blk
            for j, (basis, blk) in enumerate(zip(design.bases, design.split_coef(c)))
        )
        assert np.allclose(total, by_blocks, atol=1e-12)

    def test_dimension_mismatch(self):
        design = build_design(np.random.default_rng(2).uniform(size=(30, 2)),
                              cubic_spec(1))
        with pytest.raises(ValueError):
            design.rows(np.zeros((5, 3)))


class TestComponentEvaluation:
    def test_zero_coefficients_zero_function(self):
        basis = CenteredBasis.from_data(np.linspace(0, 1, 30), cubic_spec(2))
        c = np.zeros(basis.size - 1)
        assert basis.eval_component(c, 0.3) == 0.0

    def test_component_integrates_to_zero(self):
        rng = np.random.default_rng(8)
        basis = CenteredBasis.from_data(rng.uniform(size=80), cubic_spec(3))
        c = rng.standard_normal(basis.size - 1)
        val, _ = quad(lambda x: basis.eval_component(c, x), 0, 1,
                      points=np.unique(basis.knots), limit=200,
                      epsabs=1e-12, epsrel=1e-12)
        assert abs(val) <= 1e-8

    def test_matches_design_rows(self):
        rng = np.random.default_rng(9)
        X = rng.uniform(size=(40, 1))
        design = build_design(X, cubic_spec(2))
        c = rng.standard_normal(design.K)
        xs = rng.uniform(size=11)
        direct = design.bases[0].eval_component(c, xs)
        via_rows = design.rows(xs[:, None]) @ c
        assert np.allclose(direct, via_rows, atol=1e-13)

    def test_span_reproduction(self):
        # least squares on well-spread points recovers span members exactly
        rng = np.random.default_rng(10)
        basis = CenteredBasis.from_data(rng.uniform(size=200), cubic_spec(3))
        c_true = rng.standard_normal(basis.size - 1)
        xs = np.linspace(0, 1, 97)
        M = basis.eval_reduced(xs)
        y = M @ c_true
        c_fit, *_ = np.linalg.lstsq(M, y, rcond=None)
        assert np.linalg.norm(c_fit - c_true) <= 1e-8 * max(1.0, np.linalg.norm(c_true))


class TestDomainMap:
    def test_round_trip(self):
        x = np.array([3.0, 7.0, 5.0])
        dm = DomainMap.from_data(x)
        assert np.allclose(dm.from_unit(dm.to_unit(x)), x, atol=1e-12)
        assert dm.to_unit(x).min() == 0.0 and dm.to_unit(x).max() == 1.0

    def test_clamp(self):
        dm = DomainMap(0.0, 2.0)
        assert dm.to_unit(np.array([-1.0, 3.0]), clamp=True).tolist() == [0.0, 1.0]

    def test_constant_column_rejected(self):
        with pytest.raises(ValueError):
            DomainMap.from_data(np.full(5, 1.0))
