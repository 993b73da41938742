import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from varexp.grid import distance_field, gradient, integrate, make_grid


def test_nodes_1d():
    g = make_grid(1, (0, 1), 3)
    np.testing.assert_array_equal(g.axes[0], [0.0, 0.5, 1.0])


def test_node_counts_2d():
    g = make_grid(2, [(0, 1), (0, 1)], (3, 3))
    assert g.size == 9
    assert g.boundary_mask.sum() == 8
    assert g.interior_mask.sum() == 1


@pytest.mark.parametrize("n", [2, 1, 0])
def test_rejects_small_n(n):
    with pytest.raises(ValueError):
        make_grid(1, (0, 1), n)


def test_rejects_degenerate_extent():
    with pytest.raises(ValueError):
        make_grid(1, (1, 1), 5)
    with pytest.raises(ValueError):
        make_grid(2, [(0, 1), (2, 1)], 5)


def test_distance_examples():
    g = make_grid(1, (0, 1), 11)
    d = distance_field(g)
    assert d.values[3] == pytest.approx(0.3)
    g2 = make_grid(2, [(0, 1), (0, 1)], 11)
    d2 = distance_field(g2)
    assert d2.values[5, 5] == pytest.approx(0.5)
    assert d2.values[1, 4] == pytest.approx(0.1)


def test_integrate_exactness():
    g = make_grid(1, (0, 1), 64)
    assert integrate(g.constant(1.0)) == pytest.approx(1.0, abs=1e-15)
    assert integrate(g.sample(lambda x: x)) == pytest.approx(0.5, abs=1e-15)
    g = make_grid(1, (0, 1), 256)
    assert abs(integrate(g.sample(lambda x: x**2)) - 1.0 / 3.0) < 1e-5


def test_integrate_2d_bilinear():
    g = make_grid(2, [(0, 2), (-1, 1)], (9, 17))
    # trapezoid is exact on bilinear integrands: int_0^2 int_-1^1 (1 + x y + x) = 4 + 0 + 4
    assert integrate(g.sample(lambda x, y: 1 + x * y + x)) == pytest.approx(8.0, abs=1e-13)


def test_gradient_examples():
    g = make_grid(1, (0, 1), 101)
    (gc,) = gradient(g.constant(3.0))
    assert np.all(gc == 0)
    (gx,) = gradient(g.sample(lambda x: x))
    np.testing.assert_allclose(gx, 1.0, atol=1e-12)
    (gq,) = gradient(g.sample(lambda x: x**2))
    assert gq[50] == pytest.approx(1.0, abs=1e-10)
    # second-order one-sided stencils are exact on quadratics too
    np.testing.assert_allclose(gq, 2 * g.axes[0], atol=1e-10)


def test_gradient_affine_2d():
    g = make_grid(2, [(0, 1), (0, 2)], (7, 9))
    gx, gy = gradient(g.sample(lambda x, y: 3 * x - 2 * y + 1))
    np.testing.assert_allclose(gx, 3.0, atol=1e-12)
    np.testing.assert_allclose(gy, -2.0, atol=1e-12)


coef = st.floats(-10, 10, allow_nan=False)


@settings(max_examples=50, deadline=None)
@given(a=coef, b=coef, seed=st.integers(0, 2**31 - 1))
def test_quadrature_linear(a, b, seed):
    rng = np.random.default_rng(seed)
    g = make_grid(2, [(0, 1), (0, 3)], (9, 12))
    u = g.field(rng.normal(size=g.shape))
    v = g.field(rng.normal(size=g.shape))
    lhs = integrate(a * u + b * v)
    rhs = a * integrate(u) + b * integrate(v)
    assert lhs == pytest.approx(rhs, abs=1e-12 * (1 + abs(a) + abs(b)) * 10)


@pytest.mark.parametrize("dim,extents,n", [
    (1, (0, 1), 17),
    (1, (-2, 3), 40),
    (2, [(0, 1), (0, 1)], (11, 11)),
    (2, [(0, 2), (1, 2)], (13, 6)),
])
def test_distance_properties(dim, extents, n):
    g = make_grid(dim, extents, n)
    d = distance_field(g).values
    assert np.all(d >= 0)
    assert np.all((d == 0) == g.boundary_mask)
    for ax, h in enumerate(g.h):
        step = np.abs(np.diff(d, axis=ax))
        assert np.all(step <= h + 1e-12)


def test_fields_are_immutable():
    g = make_grid(1, (0, 1), 5)
    u = g.constant(1.0)
    with pytest.raises(ValueError):
        u.values[0] = 3.0
    with pytest.raises(AttributeError):
        u.values = np.zeros(5)


def test_field_rejects_nonfinite():
    g = make_grid(1, (0, 1), 5)
    with pytest.raises(ValueError):
        g.field([0, 1, np.nan, 1, 0])
