import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rptlab.errors import CharacteristicBoundary, ConfigError, PrincipalMismatch
from rptlab.symbols import (builtin_symbol, hamilton_field, hessian_blocks, normal_char_poly, principal,
                            subprincipal_diff, symbol_from_config)

BUILTINS = ["wave1d", "wave2d", "tricomi", "laplace", "quartic", "transport", "magneticwave"]


def test_principal_examples():
    assert principal(builtin_symbol("wave1d"), [0.3, 0.1], [1, 1]) == 0
    assert principal(builtin_symbol("tricomi"), [0, 0], [1, 0]) == 0
    assert principal(builtin_symbol("laplace"), [0, 0], [3, 4]) == 25


def test_hamilton_field_examples():
    v, w = hamilton_field(builtin_symbol("wave1d"), [0.2, 0.5], [1, 1])
    np.testing.assert_array_equal(v, [-2, 2])
    np.testing.assert_array_equal(w, [0, 0])
    v, w = hamilton_field(builtin_symbol("tricomi"), [0, 0], [1, 0])
    np.testing.assert_array_equal(v, [0, 0])
    np.testing.assert_array_equal(w, [0, -1])


def test_hessian_examples():
    hb = hessian_blocks(builtin_symbol("wave1d"), [0.1, 0.2], [1, 1])
    np.testing.assert_array_equal(hb.C, np.diag([-2, 2]))
    np.testing.assert_array_equal(hb.B, 0)
    np.testing.assert_array_equal(hb.D, 0)
    hb = hessian_blocks(builtin_symbol("tricomi"), [0, 0], [1, 0])
    np.testing.assert_array_equal(hb.C, np.diag([0, 2]))
    np.testing.assert_array_equal(hb.B, [[0, 0], [2, 0]])
    np.testing.assert_array_equal(hb.D, 0)
    hb = hessian_blocks(builtin_symbol("laplace"), [0.4, 0.4], [2, -1])
    np.testing.assert_array_equal(hb.C, 2 * np.eye(2))


def test_subprincipal_examples():
    w = builtin_symbol("wave1d")
    assert subprincipal_diff(w, w, [0.1, 0.2], [1, 1]) == 0
    # flat metric diag(-1, 1): the operator gives 2 <a, xi>_g
    m = builtin_symbol("magneticwave", {"a": ["x2", "3"]})
    x, xi = np.array([0.5, 0.2]), np.array([1.0, 2.0])
    assert subprincipal_diff(m, builtin_symbol("magneticwave"), x, xi) == pytest.approx(2 * (-0.2 * 1 + 3 * 2))
    assert subprincipal_diff(w, builtin_symbol("wave1d", {"V": "x1^2"}), x, xi) == 0


def test_subprincipal_requires_shared_principal():
    with pytest.raises(PrincipalMismatch):
        subprincipal_diff(builtin_symbol("wave1d"), builtin_symbol("laplace"), [0, 0], [1, 1])


def test_normal_char_poly_examples():
    # coefficients are ordered highest degree first
    np.testing.assert_array_equal(normal_char_poly(builtin_symbol("wave1d"), [1, 0], [0, 1], [-1, 0]), [-1, 0, 1])
    np.testing.assert_array_equal(normal_char_poly(builtin_symbol("laplace"), [1, 0], [0, 1], [-1, 0]), [1, 0, 1])
    np.testing.assert_array_equal(normal_char_poly(builtin_symbol("tricomi"), [0, -1], [1, 0], [0, 1]), [1, 0, -1])


def test_characteristic_boundary_detected():
    with pytest.raises(CharacteristicBoundary):
        normal_char_poly(builtin_symbol("wave1d"), [0, 0], [1, -1], [np.sqrt(0.5), np.sqrt(0.5)])


def test_complex_principal_rejected():
    cfg = {"order": 2, "principal": [{"alpha": [2, 0], "coeff": {"re": "1", "im": "x1"}}]}
    with pytest.raises(ConfigError):
        symbol_from_config(cfg)


def test_explicit_config_matches_builtin():
    cfg = {"order": 2, "principal": [{"alpha": [2, 0], "coeff": "x2"}, {"alpha": [0, 2], "coeff": "1"}]}
    s = symbol_from_config(cfg)
    t = builtin_symbol("tricomi")
    x, xi = np.array([[0.3, -0.7]]), np.array([[1.2, 0.4]])
    assert s.principal(x, xi) == pytest.approx(t.principal(x, xi))


def test_unknown_operator_param():
    with pytest.raises(ConfigError):
        builtin_symbol("wave1d", {"speed": "2"})


PHASE = st.tuples(st.lists(st.floats(-1, 1), min_size=3, max_size=3), st.lists(st.floats(-2, 2), min_size=3,
                                                                                 max_size=3))


def _model(name):
    if name == "transport":
        return builtin_symbol(name, {"L": ["1 + x2^2", "sin(x1)"]})
    if name == "magneticwave":
        return builtin_symbol(name, {"a": ["x2", "x1^2"]})
    if name == "wave1d":
        return builtin_symbol(name, {"c": "1 + 0.3*sin(x1*x2)"})
    return builtin_symbol(name)


@pytest.mark.parametrize("name", BUILTINS)
@given(PHASE)
def test_hamilton_matches_finite_differences(name, pt):
    s = _model(name)
    x, xi = np.array(pt[0][: s.n]), np.array(pt[1][: s.n])
    v, w = s.hamilton_field(x, xi)
    step = 1e-6
    for j in range(s.n):
        e = np.zeros(s.n)
        e[j] = step
        dxi = (s.principal(x, xi + e) - s.principal(x, xi - e)) / (2 * step)
        dx = (s.principal(x + e, xi) - s.principal(x - e, xi)) / (2 * step)
        scale = max(1.0, abs(v[j]), abs(w[j]))
        assert abs(v[j] - dxi) <= 1e-6 * scale
        assert abs(-w[j] - dx) <= 1e-6 * scale


@pytest.mark.parametrize("name", BUILTINS)
@given(PHASE, st.floats(0.1, 10))
def test_euler_identity_and_homogeneity(name, pt, lam):
    s = _model(name)
    x, xi = np.array(pt[0][: s.n]), np.array(pt[1][: s.n])
    v, _ = s.hamilton_field(x, xi)
    p = s.principal(x, xi)
    assert abs(xi @ v - s.m * p) <= 1e-10 * max(1.0, abs(p)) * max(1.0, np.linalg.norm(xi)) ** s.m
    assert s.principal(x, lam * xi) == pytest.approx(lam**s.m * p, rel=1e-10, abs=1e-10 * lam**s.m)
    assert np.isrealobj(p)


@pytest.mark.parametrize("name", BUILTINS)
def test_hessian_c_symmetric(name):
    s = _model(name)
    rng = np.random.default_rng(1)
    x, xi = rng.uniform(-1, 1, (20, s.n)), rng.normal(size=(20, s.n))
    _, _, C = s.hessian_blocks_array(x, xi)
    assert np.max(np.abs(C - np.swapaxes(C, 1, 2))) <= 1e-12
