import numpy as np
import pytest

from spdelab.torus import (
    FieldState,
    PeriodicGrid,
    lq_norm,
    roundtrip_error,
    torus_distance,
    wrap,
)


class TestWrap:
    def test_identity_case(self):
        assert wrap(0.0) == 0.0

    def test_one_period(self):
        assert wrap(0.75) == -0.25

    def test_hand_computed_pair(self):
        # x - round(x) per coordinate: -1.3 -> -0.3, 2.5 -> 0.5 wraps to -0.5
        np.testing.assert_allclose(wrap([-1.3, 2.5]), [-0.3, -0.5], rtol=0, atol=1e-15)

    def test_half_is_wrapped_to_minus_half(self):
        assert wrap(0.5) == -0.5
        assert wrap(-0.5) == -0.5

    def test_idempotent_bitwise(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(-10, 10, size=1000)
        once = wrap(x)
        np.testing.assert_array_equal(wrap(once), once)
        assert np.all(once >= -0.5) and np.all(once < 0.5)

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            wrap([0.1, np.nan])
        with pytest.raises(ValueError):
            wrap(np.inf)


class TestDistance:
    def test_symmetry_and_diameter(self):
        rng = np.random.default_rng(1)
        for d in (1, 2, 3):
            x = rng.uniform(-0.5, 0.5, size=(50, d))
            y = rng.uniform(-0.5, 0.5, size=(50, d))
            dxy = torus_distance(x, y)
            np.testing.assert_allclose(dxy, torus_distance(y, x), rtol=0, atol=1e-15)
            assert np.all(dxy <= np.sqrt(d) / 2 + 1e-15)


class TestGrid:
    def test_power_of_two_enforced(self):
        with pytest.raises(ValueError):
            PeriodicGrid(1, 100)
        with pytest.raises(ValueError):
            PeriodicGrid(4, 64)

    def test_nodes(self):
        g = PeriodicGrid(1, 8)
        np.testing.assert_allclose(g.axis_nodes, -0.5 + np.arange(8) / 8)

    def test_quadrature_of_one_exact(self):
        for d, M in ((1, 64), (2, 32)):
            g = PeriodicGrid(d, M)
            f = FieldState(g, np.ones(g.shape))
            assert f.quadrature() == 1.0


class TestTransform:
    def test_constant(self):
        g = PeriodicGrid(1, 64)
        f = FieldState(g, np.ones(64))
        c = f.coeffs()
        assert abs(c[0] - 1.0) < 1e-14
        assert np.max(np.abs(c[1:])) < 1e-14

    def test_cosine_modes(self):
        g = PeriodicGrid(1, 64)
        f = FieldState(g, np.cos(2 * np.pi * g.axis_nodes))
        assert abs(f.coefficient([1]) - 0.5) < 1e-14
        assert abs(f.coefficient([-1]) - 0.5) < 1e-14
        assert abs(f.coefficient([0])) < 1e-14

    def test_roundtrip_random(self):
        rng = np.random.default_rng(2)
        for d, M in ((1, 128), (2, 32)):
            g = PeriodicGrid(d, M)
            f = FieldState(g, rng.normal(size=g.shape))
            assert roundtrip_error(f) < 1e-12

    def test_parseval(self):
        rng = np.random.default_rng(3)
        g = PeriodicGrid(2, 32)
        f = FieldState(g, rng.normal(size=g.shape))
        lhs = np.sum(np.abs(f.coeffs()) ** 2)
        rhs = f.grid.cell_volume * np.sum(f.values**2)
        assert abs(lhs - rhs) < 1e-12 * rhs


class TestLqNorm:
    @pytest.mark.parametrize("q", [1, 2, 4, np.inf])
    def test_constant(self, q):
        g = PeriodicGrid(1, 32)
        assert lq_norm(FieldState(g, np.ones(32)), q) == pytest.approx(1.0, abs=1e-14)

    def test_cosine_l2(self):
        g = PeriodicGrid(1, 256)
        f = FieldState(g, np.cos(2 * np.pi * g.axis_nodes))
        assert lq_norm(f, 2) == pytest.approx(np.sqrt(0.5), abs=1e-12)

    def test_grid_spike_l1(self):
        g = PeriodicGrid(1, 128)
        v = np.zeros(128)
        v[5] = 128.0
        assert lq_norm(FieldState(g, v), 1) == pytest.approx(1.0, abs=1e-14)

    def test_q_below_one_rejected(self):
        g = PeriodicGrid(1, 32)
        with pytest.raises(ValueError):
            lq_norm(FieldState(g, np.ones(32)), 0.5)


class TestQuadratureExactness:
    def test_trig_polynomials(self):
        # rectangle rule integrates modes |k| < M exactly; degree < M/2 well inside
        g = PeriodicGrid(1, 64)
        rng = np.random.default_rng(4)
        x = g.axis_nodes
        vals = np.zeros(64)
        mean = rng.normal()
        vals += mean
        for k in range(1, 31):
            vals += rng.normal() * np.cos(2 * np.pi * k * x)
            vals += rng.normal() * np.sin(2 * np.pi * k * x)
        assert FieldState(g, vals).quadrature() == pytest.approx(mean, abs=1e-12)


class TestNormMonotonicity:
    def test_densities(self):
        rng = np.random.default_rng(5)
        g = PeriodicGrid(1, 128)
        for _ in range(20):
            v = np.abs(rng.normal(size=128)) + 0.01
            v /= np.sum(v) * g.h
            f = FieldState(g, v)
            norms = [lq_norm(f, q) for q in (1, 1.5, 2, 4, np.inf)]
            assert all(a <= b * (1 + 1e-12) for a, b in zip(norms, norms[1:]))
