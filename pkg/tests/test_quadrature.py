import numpy as np
import pytest
import sympy as sym

from plateflow.quadrature import tet_rule, triangle_rule

# symbolic integration oracle over the reference simplices
_x, _y, _z = sym.symbols("x y z")
X5Y5_TRI = sym.Rational(1, 33264)
assert sym.integrate(_x ** 5 * _y ** 5, (_y, 0, 1 - _x), (_x, 0, 1)) == X5Y5_TRI
X2YZ_TET = sym.Rational(1, 2520)
assert sym.integrate(_x ** 2 * _y * _z,
                     (_z, 0, 1 - _x - _y), (_y, 0, 1 - _x), (_x, 0, 1)) == X2YZ_TET


def tri_monomial_exact(i, j):
    # int x^i y^j over the reference triangle = i! j! / (i + j + 2)!
    return float(sym.factorial(i) * sym.factorial(j) / sym.factorial(i + j + 2))


def tet_monomial_exact(i, j, k):
    return float(sym.factorial(i) * sym.factorial(j) * sym.factorial(k)
                 / sym.factorial(i + j + k + 3))


@pytest.mark.parametrize("degree", [1, 2, 4, 6, 10, 12, 14])
def test_triangle_weights_and_exactness(degree):
    rule = triangle_rule(degree)
    assert rule.exact_degree >= degree
    assert abs(rule.weights.sum() - 0.5) < 1e-14
    x, y = rule.xy[:, 0], rule.xy[:, 1]
    for i in range(rule.exact_degree + 1):
        for j in range(rule.exact_degree + 1 - i):
            val = np.dot(rule.weights, x ** i * y ** j)
            exact = tri_monomial_exact(i, j)
            assert abs(val - exact) < 1e-12 * max(1.0, abs(exact)), (i, j)


@pytest.mark.parametrize("degree", [1, 2, 4, 6, 8])
def test_tet_weights_and_exactness(degree):
    rule = tet_rule(degree)
    assert rule.exact_degree >= degree
    assert abs(rule.weights.sum() - 1.0 / 6.0) < 1e-14
    x, y, z = rule.xy[:, 0], rule.xy[:, 1], rule.xy[:, 2]
    for i in range(rule.exact_degree + 1):
        for j in range(rule.exact_degree + 1 - i):
            for k in range(rule.exact_degree + 1 - i - j):
                val = np.dot(rule.weights, x ** i * y ** j * z ** k)
                exact = tet_monomial_exact(i, j, k)
                assert abs(val - exact) < 1e-12 * max(1.0, abs(exact)), (i, j, k)


def test_degree_one_rules_are_centroid_rules():
    tri = triangle_rule(1)
    assert len(tri) == 1
    np.testing.assert_allclose(tri.xy[0], [1 / 3, 1 / 3], atol=1e-15)
    np.testing.assert_allclose(tri.weights[0], 0.5, atol=1e-15)
    tet = tet_rule(1)
    assert len(tet) == 1
    np.testing.assert_allclose(tet.xy[0], [0.25, 0.25, 0.25], atol=1e-15)
    np.testing.assert_allclose(tet.weights[0], 1 / 6, atol=1e-15)


def test_frozen_oracle_values():
    tri = triangle_rule(10)
    x, y = tri.xy[:, 0], tri.xy[:, 1]
    assert abs(np.dot(tri.weights, x ** 5 * y ** 5) - float(X5Y5_TRI)) < 1e-16
    tet = tet_rule(4)
    x, y, z = tet.xy[:, 0], tet.xy[:, 1], tet.xy[:, 2]
    assert abs(np.dot(tet.weights, x ** 2 * y * z) - float(X2YZ_TET)) < 1e-16


def test_unsupported_degree_rejected():
    with pytest.raises(ValueError):
        triangle_rule(-1)
    with pytest.raises(ValueError):
        triangle_rule(51)
    with pytest.raises(ValueError):
        tet_rule(99)


def test_barycentric_points_sum_to_one():
    for rule in (triangle_rule(7), tet_rule(5)):
        np.testing.assert_allclose(rule.points.sum(axis=1), 1.0, atol=1e-14)
        assert np.all(rule.points > 0)
