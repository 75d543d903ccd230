import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gprice import (
    ConfigError,
    CylinderPayoff,
    DomainError,
    GridFunction,
    SpatialGrid,
    TimeGrid,
    UncertaintySet,
    brownian,
    constant_payoff,
    g_lower,
    g_upper,
)

from conftest import THETA

finite = st.floats(-1e6, 1e6, allow_nan=False)
variances = st.tuples(st.floats(0, 4), st.floats(0, 4)).map(sorted)


class TestUncertaintySet:
    def test_interval_bounds_and_sigmas(self):
        assert THETA.sigma_lower == pytest.approx(0.2)
        assert THETA.sigma_upper == pytest.approx(0.3)
        assert not THETA.is_singleton

    @pytest.mark.parametrize("lo,up", [(-0.1, 0.2), (0.3, 0.2), (math.nan, 1.0), (0, math.inf)])
    def test_rejects_bad_bounds(self, lo, up):
        with pytest.raises(ConfigError):
            UncertaintySet(lo, up)

    def test_finite_list(self):
        th = UncertaintySet.from_list([0.09, 0.04, 0.06])
        assert (th.lower_variance, th.upper_variance) == (0.04, 0.09)
        assert th.contains(0.06) and not th.contains(0.05)
        assert THETA.contains(0.05)

    def test_list_extremes_must_match(self):
        with pytest.raises(ConfigError):
            UncertaintySet(0.04, 0.09, (0.05, 0.09))

    def test_subset(self):
        assert UncertaintySet.interval(0.06, 0.07).issubset(THETA)
        assert not THETA.issubset(UncertaintySet.interval(0.06, 0.07))
        assert UncertaintySet.from_list([0.04, 0.09]).issubset(THETA)

    def test_scaled(self):
        th = THETA.scaled(4.0)
        assert th.sigma_upper == pytest.approx(0.6)


class TestGenerators:
    def test_values(self):
        assert g_upper(1.0, THETA) == pytest.approx(0.045)
        assert g_upper(-1.0, THETA) == pytest.approx(-0.02)
        assert g_lower(1.0, THETA) == pytest.approx(0.02)
        assert g_lower(-1.0, THETA) == pytest.approx(-0.045)

    @given(a=finite, b=finite, bounds=variances)
    def test_sublinear_and_dual(self, a, b, bounds):
        th = UncertaintySet(*bounds)
        tol = 1e-9 * (1 + abs(a) + abs(b))
        assert g_upper(a + b, th) <= g_upper(a, th) + g_upper(b, th) + tol
        assert g_lower(a, th) == -g_upper(-a, th)
        assert g_lower(a, th) <= g_upper(a, th)

    @given(a=finite, lam=st.floats(0, 100))
    def test_positive_homogeneity(self, a, lam):
        assert g_upper(lam * a, THETA) == pytest.approx(lam * g_upper(a, THETA), abs=1e-9)

    def test_vectorized_and_rejects_nonfinite(self):
        out = g_upper(np.array([1.0, -1.0]), THETA)
        assert out.shape == (2,)
        with pytest.raises(DomainError):
            g_upper(np.array([1.0, np.nan]), THETA)

    def test_only_extremes_matter(self):
        a = np.linspace(-3, 3, 13)
        th = UncertaintySet.from_list([0.04, 0.05, 0.09])
        np.testing.assert_array_equal(g_upper(a, th), g_upper(a, THETA))


class TestGrids:
    def test_spatial_grid(self):
        g = SpatialGrid.symmetric(1.0, 5)
        assert g.h == 0.5
        np.testing.assert_allclose(g.points, [-1, -0.5, 0, 0.5, 1])
        assert g.contains(1.0) and not g.contains(1.01)

    @pytest.mark.parametrize("args", [(1.0, 0.0, 5), (0.0, 1.0, 2), (0.0, math.inf, 5), (0, 1, 4.5)])
    def test_spatial_grid_rejects(self, args):
        with pytest.raises(ConfigError):
            SpatialGrid(*args)

    def test_time_grid(self):
        tg = TimeGrid((0.5, 1.0))
        assert tg.horizon == 1.0
        assert tg.intervals == (0.5, 0.5)
        with pytest.raises(ConfigError):
            TimeGrid((1.0, 0.5))
        with pytest.raises(ConfigError):
            TimeGrid((0.5, 1.0), (1,))


class TestPayoff:
    def test_sample_tensor_grid(self):
        g = SpatialGrid.symmetric(1.0, 3)
        p = CylinderPayoff((0.5, 1.0), lambda a, b: a + 10 * b)
        v = p.sample(g)
        assert v.shape == (3, 3)
        assert v[0, 2] == -1 + 10

    def test_arity_limit(self):
        with pytest.raises(ConfigError):
            CylinderPayoff((0.25, 0.5, 0.75, 1.0), lambda *x: x[0])

    def test_embed_keeps_values(self):
        p = CylinderPayoff((1.0,), lambda x: x * x)
        q = p.embed((0.5, 1.0))
        assert q.times == (0.5, 1.0)
        assert q(3.0, 2.0) == 4.0
        with pytest.raises(ConfigError):
            p.embed((0.5,))

    def test_algebra_merges_times(self):
        a = CylinderPayoff((0.5,), lambda x: x)
        b = brownian(1.0)
        s = b - a
        assert s.times == (0.5, 1.0)
        assert s(0.1, 0.4) == pytest.approx(0.3)
        assert (2 * s)(0.1, 0.4) == pytest.approx(0.6)
        assert (s + 1.0)(0.1, 0.4) == pytest.approx(1.3)
        assert (1.0 - s)(0.1, 0.4) == pytest.approx(0.7)

    def test_constant_broadcasts(self):
        c = constant_payoff(2.5)
        assert c.sample(SpatialGrid.symmetric(1.0, 4)).tolist() == [2.5] * 4

    def test_growth_spot_check(self):
        p = CylinderPayoff((1.0,), lambda x: x * x, growth_degree=1, lipschitz=1.0)
        assert p.spot_check_growth() <= 1.0
        bad = CylinderPayoff((1.0,), lambda x: x**4, growth_degree=1, lipschitz=0.1)
        assert bad.spot_check_growth() > 1.0


class TestGridFunction:
    def test_exact_at_nodes(self):
        g = SpatialGrid(-1.0, 2.0, 31)
        f = GridFunction.from_callable(g, np.sin)
        np.testing.assert_array_equal(f(g.points), np.sin(g.points))

    @settings(max_examples=50)
    @given(x=st.floats(-3, 3), y=st.floats(-3, 3))
    def test_bilinear_reproduces_bilinear(self, x, y):
        g = SpatialGrid.symmetric(2.0, 9)
        f = GridFunction.from_callable(g, lambda a, b: 1 + 2 * a - b + 0.5 * a * b, ndim=2)
        assert f(x, y) == pytest.approx(1 + 2 * x - y + 0.5 * x * y, abs=1e-12)

    def test_validates(self):
        g = SpatialGrid.symmetric(1.0, 5)
        with pytest.raises(ConfigError):
            GridFunction(g, np.zeros(4))
        with pytest.raises(DomainError):
            GridFunction(g, np.array([0, 1, np.inf, 0, 0]))
        f = GridFunction(g, np.zeros(5))
        with pytest.raises(ValueError):
            f.values[0] = 1.0
