import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rptlab.errors import ConfigError, DegenerateBoundary, EmptyTube
from rptlab.geometry import (Domain, boundary_points, box_quadrature, builtin_domain, domain_from_config,
                             inward_conormal, signed_membership, tangent_basis, tube_quadrature)

DISK = builtin_domain("disk")


@pytest.mark.parametrize("x, rho", [((0, 0), 1.0), ((1, 0), 0.0), ((2, 0), -3.0)])
def test_signed_membership_disk(x, rho):
    assert signed_membership(DISK, x) == pytest.approx(rho, abs=1e-15)


@pytest.mark.parametrize("x, nu", [((1, 0), (-1, 0)), ((0, -1), (0, 1))])
def test_inward_conormal_disk(x, nu):
    np.testing.assert_allclose(inward_conormal(DISK, x), nu, atol=1e-15)


def test_box_face_conormal_is_axis_aligned():
    # derived: grad of the soft-min rho at a face midpoint is the face normal
    # up to exp(-100 * 0.5) contributions of the other faces
    box = builtin_domain("box2d", {"lo": [0, 0], "hi": [1, 1]})
    xb = np.array([0.5, 1.0])
    r = signed_membership(box, xb)
    assert abs(r) < 1e-12
    np.testing.assert_allclose(inward_conormal(box, xb), [0, -1], atol=1e-12)


def test_conormal_off_boundary_raises():
    with pytest.raises(DegenerateBoundary):
        inward_conormal(DISK, (0.5, 0))


def test_strip_measure_matches_stadium_area():
    # oracle: area of the stadium {dist(x, segment) <= r} = 2 r L + pi r^2
    seg = np.array([[-0.5, 0.0], [0.5, 0.0]])
    q = tube_quadrature(DISK, seg, 0.1, 0.02)
    assert q.measure == pytest.approx(2 * 0.1 * 1.0 + np.pi * 0.01, rel=0.05)
    assert q.measure == pytest.approx(2 * 0.1 * 1.0, rel=0.2)


def test_tube_covering_disk_gives_pi():
    q = tube_quadrature(DISK, np.array([[0.0, 0.0]]), 2.0, 0.005)
    assert q.measure == pytest.approx(np.pi, rel=0.01)


def test_tube_outside_domain_is_empty():
    with pytest.raises(EmptyTube):
        tube_quadrature(DISK, np.array([[5.0, 5.0], [6.0, 5.0]]), 0.1, 0.02)


def test_disk_quadrature_converges():
    errs = [abs(box_quadrature([-1, -1], [1, 1], hh, DISK).measure - np.pi) for hh in (0.08, 0.04, 0.02, 0.01)]
    rate = np.polyfit(np.log([0.08, 0.04, 0.02, 0.01]), np.log(errs), 1)[0]
    assert rate >= 1.0


@pytest.mark.parametrize("name, params", [("disk", {}), ("ball", {}), ("box2d", {"lo": [0, 0], "hi": [1, 2]}),
                                          ("cylinder2d", {}), ("halfdisk", {}), ("cylinder3d", {})])
def test_builtins_validate(name, params):
    d = builtin_domain(name, params)
    d.validate()


def test_bbox_must_contain_domain():
    with pytest.raises(ConfigError) as info:
        domain_from_config({"rho": "1 - x1^2 - x2^2", "bbox": [[-0.5, 0.5], [-2, 2]]})
    assert info.value.pointer == "/domain/bbox"


def test_unknown_domain_param():
    with pytest.raises(ConfigError):
        builtin_domain("disk", {"radius": 1, "foo": 2})


@given(st.integers(0, 2**31 - 1))
def test_conormal_unit_norm_on_samples(seed):
    rng = np.random.default_rng(seed)
    for d in (DISK, builtin_domain("box2d"), builtin_domain("ball")):
        for xb in boundary_points(d, 5, rng):
            nu = inward_conormal(d, xb)
            assert abs(np.linalg.norm(nu) - 1) <= 1e-12
            assert np.max(np.abs(tangent_basis(nu) @ nu)) <= 1e-12


def test_boundary_points_lie_on_boundary():
    pts = boundary_points(builtin_domain("halfdisk"), 32)
    assert np.max(np.abs(signed_membership(builtin_domain("halfdisk"), pts))) <= 1e-12


def test_domain_rejects_bad_bbox():
    with pytest.raises(ConfigError):
        Domain("1 - x1^2", [[1, -1], [0, 1]])
