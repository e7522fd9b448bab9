import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rptlab.boundary import (char_roots, check_curve_pair, collar_study, elliptic_quasimode,
                             nice_intersection_check)
from rptlab.errors import NoEllipticRoot
from rptlab.flow import PhasePoint, integrate_maximal
from rptlab.geometry import boundary_points, builtin_domain, inward_conormal, tangent_basis
from rptlab.symbols import builtin_symbol

DISK = builtin_domain("disk")


def _sorted(z):
    return sorted(np.asarray(z, dtype=complex), key=lambda w: (w.real, w.imag))


@pytest.mark.parametrize("name, roots, cls", [
    ("wave1d", [-1, 1], "hyperbolic"),
    ("laplace", [-1j, 1j], "elliptic"),
    ("quartic", [-1, -1j, 1j, 1], "mixed"),
])
def test_root_examples(name, roots, cls):
    rep = char_roots(builtin_symbol(name), DISK, [1, 0], [0, 1])
    np.testing.assert_allclose(_sorted(rep.roots), _sorted(roots), atol=1e-10)
    assert rep.classification == cls
    assert np.all(rep.multiplicity == 1)


def test_double_real_root_is_glancing():
    # tricomi at x2 = 0 on a horizontal boundary: p = tau^2 with xi_tan = (1, 0)
    box = builtin_domain("box2d", {"lo": [-1, 0], "hi": [1, 1]})
    rep = char_roots(builtin_symbol("tricomi"), box, [0, 0], [1, 0])
    assert rep.classification == "glancing"
    assert rep.multiplicity.tolist() == [2]


def test_upper_roots_feed_elliptic_construction():
    rep = char_roots(builtin_symbol("quartic"), DISK, [1, 0], [0, 1])
    assert rep.simple_upper_roots == pytest.approx([1j])


def test_wave_pair_on_disk_is_nice():
    rep = nice_intersection_check(builtin_symbol("wave1d"), DISK, [1, 0], [0, 1], -1.0, 1.0)
    assert rep.nice, rep.describe()


def test_parallel_velocities_flagged():
    s = builtin_symbol("wave1d")
    g1 = integrate_maximal(s, DISK, PhasePoint([1, 0], [1, 1]))
    g2 = integrate_maximal(s, DISK, PhasePoint([1, 0], [2, 2]))
    rep = check_curve_pair(g1, g2, [1, 0])
    assert not rep.nice
    assert any(v.startswith("(i)") for v in rep.violations)
    # same trace: both endpoints shared as well
    assert any(v.startswith("(ii)") for v in rep.violations)


def test_no_elliptic_root_for_wave():
    with pytest.raises(NoEllipticRoot):
        elliptic_quasimode(builtin_symbol("wave1d"), DISK, [1, 0], [0, 1], "1")


def test_elliptic_decay_profile():
    box = builtin_domain("box2d", {"lo": [-2, 0], "hi": [2, 1]})
    qm = elliptic_quasimode(builtin_symbol("laplace"), box, [0, 0], [1, 0], "1")
    assert qm.z0 == pytest.approx(1j)
    h = 0.05
    depth = 5 * h / qm.z0.imag
    ratio = abs(qm.evaluate(np.array([0.0, depth]), h)) / abs(qm.evaluate(np.array([0.0, 0.0]), h))
    assert ratio == pytest.approx(np.exp(-5), rel=1e-10)


def test_collar_norm_exponents_short():
    box = builtin_domain("box2d", {"lo": [-2, 0], "hi": [2, 1]})
    qm = elliptic_quasimode(builtin_symbol("laplace"), box, [0, 0], [1, 0], "exp(-x1^2/0.3)")
    st_ = collar_study(qm, [0.1, 0.05, 0.025], 1.8, residual=False)
    assert st_.l2_exponent == pytest.approx(0.5, abs=0.05)
    assert st_.h1_ratio_exponent == pytest.approx(-1.0, abs=0.05)


SYMS = ["laplace", "quartic", "wave1d", "tricomi"]


@given(st.sampled_from(SYMS), st.integers(0, 10_000), st.floats(-3, 3).filter(lambda v: abs(v) > 1e-3))
def test_roots_closed_under_conjugation(name, seed, scale):
    s = builtin_symbol(name)
    xb = boundary_points(DISK, 1, np.random.default_rng(seed))[0]
    nu = inward_conormal(DISK, xb)
    xi_tan = scale * tangent_basis(nu)[0]
    try:
        rep = char_roots(s, DISK, xb, xi_tan)
    except Exception as exc:  # characteristic boundary points are legitimately rejected
        assert type(exc).__name__ == "CharacteristicBoundary"
        return
    assert rep.conjugate_defect() <= 1e-7 * max(1.0, np.max(np.abs(rep.roots)))
    assert int(np.sum(rep.multiplicity)) == len(rep.coeffs) - 1


@given(st.integers(0, 10_000), st.floats(1e-10, 1e-7))
def test_simple_roots_are_well_conditioned(seed, eps):
    # a simple root moves by about eps |p(z + d)| / |p'(z)| under a coefficient perturbation
    s = builtin_symbol("quartic")
    xb = boundary_points(DISK, 1, np.random.default_rng(seed))[0]
    nu = inward_conormal(DISK, xb)
    rep = char_roots(s, DISK, xb, tangent_basis(nu)[0])
    rng = np.random.default_rng(seed + 1)
    c = rep.coeffs * (1 + eps * rng.uniform(-1, 1, len(rep.coeffs)))
    moved = np.roots(c)
    dp = np.polyder(rep.coeffs)
    for z in rep.roots:
        bound = 10 * eps * np.sum(np.abs(rep.coeffs) * np.abs(z) ** np.arange(len(rep.coeffs))[::-1]) / abs(
            np.polyval(dp, z))
        assert np.min(np.abs(moved - z)) <= bound
