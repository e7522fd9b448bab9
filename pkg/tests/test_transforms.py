import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rptlab.errors import (ConfigError, EndpointNotVanishing, NotMaximal, PrincipalMismatch, StartsOutside,
                           Trapped)
from rptlab.flow import PhasePoint, integrate_maximal, integrate_segment, random_null_points
from rptlab.geometry import builtin_domain
from rptlab.symbols import builtin_symbol
from rptlab.transforms import (RayWeight, curve_integral, gauge_null_check, outflow_trace, ray_transform,
                               subprincipal_holonomy, transport_cauchy_solve)

WAVE = builtin_symbol("wave1d")
DISK = builtin_domain("disk")
BOX = builtin_domain("box2d", {"lo": [0, 0], "hi": [1, 1]})
CHORD = PhasePoint([1, 0], [1, 1])


def test_chord_travel_time_and_first_moment():
    g = integrate_maximal(WAVE, DISK, CHORD)
    # from (1, 0) to (0, 1) in time 1/2 with x2 = 2t
    assert ray_transform(RayWeight.function("1", 2), g) == pytest.approx(0.5, abs=1e-10)
    assert ray_transform(RayWeight.function("x2", 2), g) == pytest.approx(0.25, abs=1e-10)


def test_complex_weight_from_config():
    q = RayWeight.from_config({"degree": 1, "terms": [{"alpha": [1, 0], "coeff": {"re": "0", "im": "1"}}]}, 2)
    g = integrate_maximal(WAVE, DISK, CHORD)
    assert ray_transform(q, g) == pytest.approx(0.5j, abs=1e-10)
    assert q.homogeneous


def test_weight_degree_checked():
    with pytest.raises(ConfigError):
        RayWeight.from_config({"degree": 0, "terms": [{"alpha": [1, 0], "coeff": "1"}]}, 2)


def test_ray_transform_needs_maximal_curve():
    g = integrate_segment(WAVE, PhasePoint([0, 0], [1, 1]), (0, 0.1))
    with pytest.raises(NotMaximal):
        ray_transform(RayWeight.function("1", 2), g)


def test_holonomy_of_exact_potential():
    psi = lambda x: x[0] * x[1] + 0.5 * np.sin(x[0]) + x[1] ** 2  # noqa: E731
    sm = builtin_symbol("magneticwave", {"a": ["x2 + 0.5*cos(x1)", "x1 + 2*x2"]})
    s0 = builtin_symbol("magneticwave")
    g = integrate_maximal(sm, DISK, PhasePoint([0.2, -0.1], [1, 1]))
    hol = subprincipal_holonomy(sm, s0, g)
    assert hol.drift <= 1e-12
    assert abs(hol.value - np.exp(1j * (psi(g.x[-1]) - psi(g.x[0])))) <= 1e-9


def test_holonomy_rejects_different_principal():
    g = integrate_maximal(WAVE, DISK, CHORD)
    with pytest.raises(PrincipalMismatch):
        subprincipal_holonomy(WAVE, builtin_symbol("laplace"), g)


def test_gauge_identity_and_endpoint_check():
    g = integrate_maximal(WAVE, DISK, PhasePoint([0.3, 0.1], [1, -1]))
    assert gauge_null_check("(1 - x1^2 - x2^2)*(sin(x1) + 2)", WAVE, g) <= 1e-9
    with pytest.raises(EndpointNotVanishing):
        gauge_null_check("x1 + 2", WAVE, g)


def test_transport_closed_form():
    s = builtin_symbol("transport", {"L": ["1", "0"], "V": "1"})
    pts = np.array([[0.3, 0.5], [0.8, 0.4], [0.0, 0.5]])
    sol = transport_cauchy_solve(s, BOX, "1 + x2", pts)
    np.testing.assert_allclose(sol.values, (1 + pts[:, 1]) * np.exp(-1j * pts[:, 0]), atol=1e-10)
    np.testing.assert_allclose(sol.feet[:, 0], 0, atol=1e-9)
    np.testing.assert_allclose(sol.times, pts[:, 0], atol=1e-9)


def test_outflow_trace_on_face():
    s = builtin_symbol("transport", {"L": ["1", "0"]})
    sol = outflow_trace(s, BOX, "x2", count=64, rng=np.random.default_rng(0))
    face = np.abs(sol.points[:, 0] - 1) < 1e-9
    mid = face & (sol.points[:, 1] > 0.25) & (sol.points[:, 1] < 0.75)
    assert mid.any()
    np.testing.assert_allclose(sol.values[mid], sol.points[mid, 1], atol=1e-9)


def test_transport_errors():
    s = builtin_symbol("transport", {"L": ["1", "0"]})
    with pytest.raises(StartsOutside):
        transport_cauchy_solve(s, BOX, "1", [[2.0, 0.5]])
    rot = builtin_symbol("transport", {"L": ["-x2", "x1"]})
    with pytest.raises(Trapped):
        transport_cauchy_solve(rot, DISK, "1", [[0.5, 0.0]], t_max=3.0)
    with pytest.raises(ConfigError):
        transport_cauchy_solve(WAVE, DISK, "1", [[0.0, 0.0]])


Q1 = RayWeight.from_config({"degree": 1, "terms": [{"alpha": [1, 0], "coeff": "x2 + 1"},
                                                    {"alpha": [0, 1], "coeff": {"re": "sin(x1)", "im": "x1"}}]}, 2)
Q2 = RayWeight.from_config({"degree": 2, "terms": [{"alpha": [2, 0], "coeff": "1 + x1^2"},
                                                    {"alpha": [1, 1], "coeff": "cos(x2)"}]}, 2)


def _curve(seed):
    p0 = random_null_points(WAVE, DISK, 1, np.random.default_rng(seed))[0]
    return p0, integrate_maximal(WAVE, DISK, p0)


@given(st.integers(0, 10_000), st.floats(0.05, 0.95))
def test_ray_integral_additive_under_splitting(seed, frac):
    _, g = _curve(seed)
    ts = g.t[0] + frac * (g.t[-1] - g.t[0])
    whole = curve_integral(Q1, g)
    parts = curve_integral(Q1, g, None, ts) + curve_integral(Q1, g, ts, None)
    assert abs(whole - parts) <= 1e-10 * max(1.0, abs(whole))


@given(st.integers(0, 10_000), st.floats(0.05, 0.95))
def test_holonomy_multiplicative_under_splitting(seed, frac):
    sm = builtin_symbol("magneticwave", {"a": ["x2^2", "sin(x1)"]})
    s0 = builtin_symbol("magneticwave")
    p0 = random_null_points(sm, DISK, 1, np.random.default_rng(seed))[0]
    g = integrate_maximal(sm, DISK, p0)
    ts = g.t[0] + frac * (g.t[-1] - g.t[0])
    whole = subprincipal_holonomy(sm, s0, g).value
    split = subprincipal_holonomy(sm, s0, g.restrict(g.t[0], ts)).value * \
        subprincipal_holonomy(sm, s0, g.restrict(ts, g.t[-1])).value
    assert abs(whole - split) <= 1e-9


@given(st.integers(0, 10_000))
def test_ray_transform_scales_with_covector(seed):
    # along the curve through 2 xi the parameter runs 2^(m-1) times faster and
    # a degree-k weight grows by 2^k, so the integral scales by 2^(k-m+1)
    p0, g = _curve(seed)
    g2 = integrate_maximal(WAVE, DISK, p0.scaled(2.0))
    for q in (Q1, Q2):
        a, b = ray_transform(q, g), ray_transform(q, g2)
        assert abs(b - 2.0 ** (q.degree - 1) * a) <= 1e-8 * max(1.0, abs(a))


@given(st.floats(-2, 2), st.floats(-2, 2), st.integers(0, 10_000))
def test_transport_solution_is_linear_in_data(a, b, seed):
    s = builtin_symbol("transport", {"L": ["1 + 0.3*x2", "0.5*sin(x1)"], "V": "x2"})
    pts = np.random.default_rng(seed).uniform(0.1, 0.9, (3, 2))
    u_f = transport_cauchy_solve(s, BOX, "1 + x2^2", pts).values
    u_g = transport_cauchy_solve(s, BOX, "sin(3*x1) + x2", pts).values
    u_fg = transport_cauchy_solve(s, BOX, f"{a!r}*(1 + x2^2) + {b!r}*(sin(3*x1) + x2)", pts).values
    np.testing.assert_allclose(u_fg, a * u_f + b * u_g, atol=1e-10)
