import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rptlab.errors import GrazingUndecidable, NotNull, StartsOutside
from rptlab.flow import (PhasePoint, classify_null_boundary, integrate_maximal, integrate_segment,
                         null_boundary_samples, scatter_batch, scattering_relation)
from rptlab.geometry import builtin_domain
from rptlab.symbols import builtin_symbol

WAVE = builtin_symbol("wave1d")
DISK = builtin_domain("disk")


def test_diagonal_chord_through_center():
    g = integrate_maximal(WAVE, DISK, PhasePoint([0, 0], [1, 1]))
    assert g.is_maximal
    # speed 2*sqrt(2), distance 1 to the circle in each direction
    assert g.tau_plus == pytest.approx(1 / (2 * np.sqrt(2)), abs=1e-9)
    assert g.tau_minus == pytest.approx(1 / (2 * np.sqrt(2)), abs=1e-9)
    np.testing.assert_allclose(g.x[-1], [-np.sqrt(0.5), np.sqrt(0.5)], atol=1e-9)
    np.testing.assert_allclose(g.xi[-1], [1, 1], atol=1e-12)
    assert g.drift <= 1e-12


def test_tricomi_segment_closed_form():
    g = integrate_segment(builtin_symbol("tricomi"), PhasePoint([2 / 3, -1], [1, 1]), (0.0, 1.8))
    t = np.linspace(0, 1.8, 50)
    y = g.dense(t)
    exact = np.column_stack([(2 / 3) * (1 - t) ** 3, -(1 - t) ** 2, np.ones_like(t), 1 - t])
    np.testing.assert_allclose(y, exact, atol=1e-9)


def test_segment_restriction_and_reversal():
    g = integrate_maximal(WAVE, DISK, PhasePoint([0.1, -0.2], [1, -1]))
    sub = g.restrict(-0.1, 0.1)
    assert not sub.is_maximal
    r = g.reversed()
    np.testing.assert_allclose(r.x[0], g.x[-1])
    np.testing.assert_allclose(r.xi[0], -g.xi[-1])
    assert r.tau_plus == pytest.approx(g.tau_minus)


def test_non_null_start_rejected():
    with pytest.raises(NotNull):
        integrate_maximal(WAVE, DISK, PhasePoint([0, 0], [1, 2]))


def test_start_outside_rejected():
    with pytest.raises(StartsOutside):
        integrate_maximal(WAVE, DISK, PhasePoint([2, 0], [1, 1]))


def test_classification_examples():
    assert classify_null_boundary(WAVE, DISK, PhasePoint([1, 0], [1, 1])) == "incoming"
    assert classify_null_boundary(WAVE, DISK, PhasePoint([-1, 0], [1, 1])) == "outgoing"
    touch = PhasePoint([np.sqrt(0.5), np.sqrt(0.5)], [1, 1])
    assert classify_null_boundary(WAVE, DISK, touch) in ("both", "neither")
    with pytest.raises(GrazingUndecidable):
        scattering_relation(WAVE, DISK, touch)


def test_scattering_of_horizontal_entry():
    # velocity (-2, 2) from (1, 0): the line x1 + x2 = 1 meets the circle again at (0, 1)
    rec = scattering_relation(WAVE, DISK, PhasePoint([1, 0], [1, 1]))
    np.testing.assert_allclose(rec.exit.x, [0, 1], atol=1e-9)
    assert rec.travel_time == pytest.approx(0.5, abs=1e-9)
    assert rec.exit_class == "outgoing"


def test_null_samples_are_null_and_on_boundary():
    for pb in null_boundary_samples(WAVE, DISK, 16, seed=2):
        assert abs(WAVE.principal(pb.x, pb.xi)) <= 1e-10
        assert abs(np.linalg.norm(pb.x) - 1) <= 1e-12


@given(st.integers(0, 10_000))
def test_scattering_is_an_involution(seed):
    recs = scatter_batch(WAVE, DISK, {"count": 3, "seed": seed})
    for r in recs:
        assert r.status == "ok"
        assert r.involution_error <= 1e-7


@given(st.integers(0, 10_000))
def test_tricomi_conserves_principal_symbol(seed):
    s = builtin_symbol("tricomi")
    dom = builtin_domain("disk", {"center": [0, -1.5], "radius": 1})
    for pb in null_boundary_samples(s, dom, 2, seed=seed):
        g = integrate_maximal(s, dom, pb)
        assert g.drift <= 1e-8
