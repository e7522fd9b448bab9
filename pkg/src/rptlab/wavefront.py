"""Phase-space localization of quasimodes via the FBI transform

    T_h u(x, xi) = int u(y) conj(exp(i Psi(y; x, xi)/h) b(y)) dy,
    Psi = xi.(y - x) + (i/2)|y - x|^2.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .beams import BeamFrame, _chi, fit_order
from .errors import ResolutionTooCoarse

Evaluator = Callable[[np.ndarray, float], np.ndarray]


def _ball_grid(x: np.ndarray, r_w: float, spacing: float) -> tuple[np.ndarray, float]:
    n = len(x)
    k = int(np.ceil(r_w / spacing))
    axis = (np.arange(-k, k) + 0.5) * spacing
    mesh = np.stack(np.meshgrid(*([axis] * n), indexing="ij"), axis=-1).reshape(-1, n)
    mesh = mesh[np.sum(mesh * mesh, axis=1) <= r_w * r_w]
    return x[None, :] + mesh, spacing**n


def fbi_transform(u: Evaluator, x, xi, h: float, r_w: float = 1.0, spacing: float | None = None) -> complex:
    """Midpoint quadrature of the FBI integral over the ball of radius ``r_w``.

    ``u(Y, h)`` evaluates the function at rows of Y.  The window factor b is 1
    on radius r_w/2 and vanishes at r_w.  ``spacing`` defaults to sqrt(h)/4,
    the coarsest grid accepted.
    """
    if not h > 0 or not r_w > 0:
        raise ValueError("h and r_w must be positive")
    limit = np.sqrt(h) / 4
    spacing = limit if spacing is None else float(spacing)
    if spacing > limit * (1 + 1e-12):
        raise ResolutionTooCoarse(f"grid spacing {spacing:.3g} exceeds sqrt(h)/4 = {limit:.3g}")
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    Y, w = _ball_grid(x, r_w, spacing)
    d = Y - x
    r2 = np.sum(d * d, axis=1)
    window = np.exp(-1j * (d @ xi) / h - r2 / (2 * h)) * _chi(np.sqrt(r2) / r_w)
    vals = np.asarray(u(Y, h))
    return complex(np.sum(vals * window) * w)


def gaussian_packet(x0, xi0) -> Evaluator:
    """exp(i y.xi0/h - |y - x0|^2/(2h))."""
    x0 = np.asarray(x0, dtype=float)
    xi0 = np.asarray(xi0, dtype=float)

    def u(Y, h):
        Y = np.atleast_2d(Y)
        return np.exp(1j * (Y @ xi0) / h - np.sum((Y - x0) ** 2, axis=1) / (2 * h))

    return u


def frame_evaluator(frame: BeamFrame) -> Evaluator:
    return lambda Y, h: frame.evaluate(np.atleast_2d(Y), h)


@dataclass
class FbiScan:
    """Magnitudes |T_h u| at on-curve and displaced phase points."""

    hs: list
    window: float
    rows: list = field(default_factory=list)  # (tag, index, x, xi, h, magnitude)

    def magnitudes(self, tag: str) -> np.ndarray:
        """Array (len(hs), points) for one tag."""
        sel = [r for r in self.rows if r[0] == tag]
        npts = 1 + max(r[1] for r in sel)
        out = np.zeros((len(self.hs), npts))
        for r in sel:
            out[self.hs.index(r[4]), r[1]] = r[5]
        return out

    def ratios(self, tag: str) -> np.ndarray:
        """Worst on/off ratio per h for the given off tag."""
        return np.min(self.magnitudes("on") / self.magnitudes(tag), axis=1)

    def slope(self, tag: str) -> float:
        """Log-log slope of the largest magnitude for ``tag`` against h."""
        return fit_order(self.hs, np.max(self.magnitudes(tag), axis=1))

    def ratio_table(self) -> list[dict]:
        tags = sorted({r[0] for r in self.rows} - {"on"})
        out = []
        for tag in tags:
            for h, r in zip(self.hs, self.ratios(tag)):
                out.append({"offset": tag, "h": h, "ratio": float(r)})
        return out

    def csv_rows(self) -> list[dict]:
        out = []
        for tag, _, x, xi, h, mag in self.rows:
            row = {f"x{j + 1}": x[j] for j in range(len(x))}
            row.update({f"xi{j + 1}": xi[j] for j in range(len(xi))})
            row.update({"h": h, "magnitude": mag, "tag": "on" if tag == "on" else "off", "offset": tag})
            out.append(row)
        return out


def _unit_normal(v: np.ndarray) -> np.ndarray:
    """A unit vector orthogonal to v (the 90 degree rotation in 2D)."""
    if len(v) == 2:
        e = np.array([-v[1], v[0]])
    else:
        basis = np.eye(len(v))[np.argsort(np.abs(v))]
        e = basis[0] - np.dot(basis[0], v) / np.dot(v, v) * v
    return e / np.linalg.norm(e)


def scan_points(frame: BeamFrame, fractions: Sequence[float], spatial: float):
    """On-curve phase points at the given fractions of the frame interval,
    with partners displaced across the curve in x and rotated in xi."""
    ts = frame.T0 + np.asarray(fractions, dtype=float) * (frame.T1 - frame.T0)
    x, xi, _, _ = frame.state(ts)
    xd, _ = frame.s.hamilton_field(x, xi)
    on, off_x, off_xi = [], [], []
    for k in range(len(ts)):
        on.append((x[k], xi[k]))
        off_x.append((x[k] + spatial * _unit_normal(xd[k]), xi[k]))
        off_xi.append((x[k], np.linalg.norm(xi[k]) * _unit_normal(xi[k])))
    return on, off_x, off_xi


def wavefront_scan(u: Evaluator, frame: BeamFrame, offsets: dict | None = None, hs: Sequence[float] = (0.1, 0.05, 0.025),
                   fractions: Sequence[float] = (0.3, 0.5, 0.7), r_w: float = 1.0) -> FbiScan:
    """FBI magnitudes at on-curve points and at spatially displaced and
    covector-rotated partners for each h."""
    offsets = {"spatial": 0.2} if offsets is None else dict(offsets)
    on, off_x, off_xi = scan_points(frame, fractions, offsets.get("spatial", 0.2))
    scan = FbiScan([float(h) for h in hs], r_w)
    groups = [("on", on), ("spatial", off_x), ("covector", off_xi)]
    for h in scan.hs:
        for tag, pts in groups:
            for k, (x, xi) in enumerate(pts):
                mag = abs(fbi_transform(u, x, xi, h, r_w))
                scan.rows.append((tag, k, x, xi, h, mag))
    return scan


__all__ = ["fbi_transform", "gaussian_packet", "frame_evaluator", "FbiScan", "scan_points", "wavefront_scan"]
