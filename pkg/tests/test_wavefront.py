import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rptlab.beams import gallery_frame
from rptlab.errors import ResolutionTooCoarse
from rptlab.wavefront import fbi_transform, frame_evaluator, gaussian_packet, scan_points, wavefront_scan

H = 0.01
X0, XI0 = np.array([0.1, -0.2]), np.array([1.0, 0.5])


def test_packet_peak_equals_pi_h():
    # the window and the packet are the same Gaussian: overlap integral pi h in 2D
    T = fbi_transform(gaussian_packet(X0, XI0), X0, XI0, H)
    assert abs(T) / (np.pi * H) == pytest.approx(1.0, abs=1e-5)


@pytest.mark.parametrize("dx, dxi", [((0.2, 0.0), (0, 0)), ((0.0, 0.0), (0.3, 0.0)), ((0.1, 0.1), (0.0, -0.2))])
def test_displaced_packet_closed_form(dx, dxi):
    # |T| = pi h exp(-(|dx|^2 + |dxi|^2) / (4h)) for Gaussian against Gaussian
    dx, dxi = np.array(dx), np.array(dxi)
    T = fbi_transform(gaussian_packet(X0, XI0), X0 + dx, XI0 + dxi, H)
    expected = np.pi * H * np.exp(-(dx @ dx + dxi @ dxi) / (4 * H))
    assert abs(T) == pytest.approx(expected, rel=1e-4)


def test_coarse_grid_rejected():
    with pytest.raises(ResolutionTooCoarse):
        fbi_transform(gaussian_packet(X0, XI0), X0, XI0, H, spacing=0.1)


def test_scan_points_geometry():
    f = gallery_frame("wave1d_chord")
    on, off_x, off_xi = scan_points(f, (0.5,), 0.2)
    (x, xi), (xs, _), (_, xr) = on[0], off_x[0], off_xi[0]
    assert np.linalg.norm(xs - x) == pytest.approx(0.2)
    assert abs(np.dot(xs - x, [-2, 2])) <= 1e-12
    assert abs(np.dot(xr, xi)) <= 1e-12 and np.linalg.norm(xr) == pytest.approx(np.linalg.norm(xi))


def test_covector_offpoints_suppressed_for_beam():
    f = gallery_frame("wave1d_chord")
    scan = wavefront_scan(frame_evaluator(f), f, {"spatial": 0.2}, [0.1, 0.05])
    rc = scan.ratios("covector")
    assert rc[1] > rc[0] > 1
    assert scan.ratios("spatial")[1] > scan.ratios("spatial")[0]
    assert len(scan.csv_rows()) == 2 * 3 * 3


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-0.3, 0.3))
def test_fbi_is_linear(a, b, shift):
    u = gaussian_packet(X0, XI0)
    v = gaussian_packet(X0 + shift, XI0 * 0.5)
    w = lambda Y, h: a * u(Y, h) + b * v(Y, h)  # noqa: E731
    lhs = fbi_transform(w, X0, XI0, 0.02)
    rhs = a * fbi_transform(u, X0, XI0, 0.02) + b * fbi_transform(v, X0, XI0, 0.02)
    assert abs(lhs - rhs) <= 1e-12 * (abs(a) + abs(b) + 1)


@given(st.floats(2.5, 5), st.floats(0, 2 * np.pi))
def test_fbi_ignores_functions_outside_window(dist, angle):
    far = X0 + dist * np.array([np.cos(angle), np.sin(angle)])
    T = fbi_transform(gaussian_packet(far, XI0), X0, XI0, 0.02)
    # the packet at distance >= 2.5 is below exp(-1.5^2/0.04) on the window support
    assert abs(T) <= 1e-20
