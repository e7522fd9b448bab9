"""Integrals along bicharacteristics: ray transforms, subprincipal holonomy,
the gauge identity for exact one-forms, and the first-order transport solver."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import quad_vec, solve_ivp

from .errors import (ConfigError, EndpointNotVanishing, GrazingUndecidable, NotMaximal, PrincipalMismatch,
                     StartsOutside, Trapped)
from .exprfield import Expr, Field, compile_exprs, parse, var_names
from .flow import Bicharacteristic
from .geometry import TOL_BOUNDARY, Domain, boundary_points, signed_membership
from .symbols import SymbolModel, same_principal

RAY_ATOL = 1e-12
RAY_RTOL = 1e-12
ENDPOINT_TOL = 1e-8
GRAZE_TOL = 1e-6


# ------------------------------------------------------------------ weights

class RayWeight:
    """q(x, xi) = sum_alpha c_alpha(x) xi^alpha with complex coefficients.

    ``terms`` holds (alpha, real part, imaginary part).  Every |alpha| must be
    at most ``degree``; ``homogeneous`` tells whether all equal it.
    """

    def __init__(self, n: int, degree: int, terms: Sequence[tuple]):
        if degree < 0:
            raise ConfigError("degree must be nonnegative", "/weight/degree")
        self.n = n
        self.degree = int(degree)
        self.terms = []
        for i, t in enumerate(terms):
            alpha, re = tuple(int(a) for a in t[0]), t[1]
            im = t[2] if len(t) > 2 else parse("0", n)
            if len(alpha) != n or min(alpha) < 0:
                raise ConfigError(f"multi-index {list(alpha)} does not fit n = {n}", f"/weight/terms/{i}/alpha")
            if sum(alpha) > degree:
                raise ConfigError(f"|alpha| = {sum(alpha)} exceeds the declared degree {degree}",
                                  f"/weight/terms/{i}/alpha")
            self.terms.append((alpha, re, im))
        self._alphas = np.array([a for a, _, _ in self.terms], dtype=int).reshape(-1, n)
        exprs = [re for _, re, _ in self.terms] + [im for _, _, im in self.terms]
        self._coef = compile_exprs(exprs, var_names(n)) if exprs else None

    @property
    def homogeneous(self) -> bool:
        return all(sum(a) == self.degree for a, _, _ in self.terms)

    @classmethod
    def function(cls, expr: Expr | str, n: int) -> "RayWeight":
        """Degree-0 weight q(x, xi) = V(x)."""
        e = parse(expr, n) if isinstance(expr, str) else expr
        return cls(n, 0, [((0,) * n, e)])

    @classmethod
    def from_config(cls, cfg: dict, n: int) -> "RayWeight":
        terms = []
        for i, t in enumerate(cfg.get("terms", [])):
            c = t["coeff"]
            if isinstance(c, dict):
                re, im = str(c.get("re", "0")), str(c.get("im", "0"))
            else:
                re, im = str(c), "0"
            terms.append((t["alpha"], parse(re, n), parse(im, n)))
        return cls(n, int(cfg["degree"]), terms)

    def __call__(self, x, xi) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        if self._coef is None:
            return np.zeros(len(x), dtype=complex)
        vals = self._coef(*[x[:, j] for j in range(self.n)])
        k = len(self.terms)
        out = np.zeros(len(x), dtype=complex)
        for i, alpha in enumerate(self._alphas):
            mono = np.prod(xi ** alpha[None, :], axis=1)
            out += (np.asarray(vals[i]) + 1j * np.asarray(vals[k + i])) * mono
        return out


# ------------------------------------------------------------ curve integrals

def curve_integral(fun, gamma: Bicharacteristic, ta: float | None = None, tb: float | None = None) -> complex:
    """Integral over [ta, tb] of fun(x, xi) (vectorized over rows) on the dense output.

    The curve need not be maximal; this is the building block for splitting
    and concatenation checks.
    """
    ta = float(gamma.t[0]) if ta is None else float(ta)
    tb = float(gamma.t[-1]) if tb is None else float(tb)
    if tb == ta:
        return 0j
    n = gamma.n

    def integrand(t):
        y = gamma.dense(t)
        v = complex(np.asarray(fun(y[None, :n], y[None, n:])).ravel()[0])
        return np.array([v.real, v.imag])

    val, _ = quad_vec(integrand, ta, tb, epsabs=RAY_ATOL, epsrel=RAY_RTOL, limit=20000)
    return complex(val[0], val[1])


def _require_maximal(gamma: Bicharacteristic) -> None:
    if not gamma.is_maximal:
        raise NotMaximal(f"curve is not maximal (start: {gamma.start_flag}, end: {gamma.end_flag})")


def ray_transform(q: RayWeight, gamma: Bicharacteristic) -> complex:
    """Integral of q along a maximal null bicharacteristic."""
    _require_maximal(gamma)
    return curve_integral(q, gamma)


@dataclass
class Holonomy:
    value: complex
    exponent: complex
    angle: float
    drift: float

    def as_row(self) -> dict:
        return {"holonomy_re": self.value.real, "holonomy_im": self.value.imag, "angle": self.angle,
                "drift": self.drift}


def subprincipal_holonomy(s1: SymbolModel, s2: SymbolModel, gamma: Bicharacteristic) -> Holonomy:
    """exp(i * integral of (p_{m-1,1} - p_{m-1,2})) along ``gamma``.

    When the exponent is real the value is put back on the unit circle;
    otherwise ``drift`` records |Im exponent| and the value is left as is.
    """
    if not same_principal(s1, s2, gamma.x[0]):
        raise PrincipalMismatch(f"operators '{s1.name}' and '{s2.name}' have different principal symbols")
    I = curve_integral(lambda x, xi: s1.lower(x, xi) - s2.lower(x, xi), gamma)
    drift = abs(I.imag)
    if drift <= RAY_ATOL * max(1.0, abs(I)):
        value = complex(np.exp(1j * I.real))
    else:
        value = complex(np.exp(1j * I))
    return Holonomy(value, I, float(np.mod(I.real, 2 * np.pi)), drift)


def gauge_null_check(phi: Field | str, s: SymbolModel, gamma: Bicharacteristic) -> float:
    """|integral of d_xi p_m . grad phi| along a maximal curve; zero when phi vanishes on the boundary."""
    _require_maximal(gamma)
    if isinstance(phi, str):
        phi = Field(phi, s.n)
    ends = phi(np.vstack([gamma.x[0], gamma.x[-1]]))
    if np.max(np.abs(ends)) > ENDPOINT_TOL:
        raise EndpointNotVanishing(f"phi at the curve endpoints is {ends.tolist()}")
    grad = phi.grad()

    def integrand(x, xi):
        v, _ = s.hamilton_field(x, xi)
        g = np.stack([gj(x) for gj in grad], axis=-1)
        return np.sum(v * g, axis=-1)

    return abs(curve_integral(integrand, gamma))


# ------------------------------------------------------------ transport solver

@dataclass
class TransportSolution:
    points: np.ndarray
    values: np.ndarray
    feet: np.ndarray
    times: np.ndarray

    def rows(self) -> list[dict]:
        out = []
        for p, v, f, t in zip(self.points, self.values, self.feet, self.times):
            row = {f"x{j + 1}": p[j] for j in range(len(p))}
            row.update({f"foot{j + 1}": f[j] for j in range(len(f))})
            row.update({"time": t, "u_re": v.real, "u_im": v.imag})
            out.append(row)
        return out


def _foot(s: SymbolModel, d: Domain, x0: np.ndarray, t_max: float, rtol: float, atol: float):
    """Follow the integral curve of the principal field backwards to the boundary.

    Returns (foot, elapsed time, integral of the zeroth-order symbol from the
    foot to x0).
    """
    n = s.n
    zero = np.zeros((1, n))

    def field(x):
        v, _ = s.hamilton_field(x[None, :], zero)
        return np.asarray(v[0], dtype=float)

    def rhs(_t, y):
        x = y[:n]
        c = complex(np.asarray(s.lower(x[None, :], zero)).ravel()[0])
        return np.concatenate([field(x), [c.real, c.imag]])

    r0 = signed_membership(d, x0)
    if r0 < -TOL_BOUNDARY:
        raise StartsOutside(f"evaluation point {x0.tolist()} lies outside the domain")
    v0 = field(x0)
    if not np.linalg.norm(v0) > 0:
        raise Trapped(f"the transport field vanishes at {x0.tolist()}")
    if abs(r0) <= TOL_BOUNDARY:
        g = d.grad_rho(x0)
        if np.dot(v0, g) > GRAZE_TOL * np.linalg.norm(v0) * np.linalg.norm(g):
            return x0.copy(), 0.0, 0j

    def leave(_t, y):
        return signed_membership(d, y[:n])

    leave.terminal = True
    leave.direction = -1
    sol = solve_ivp(rhs, (0.0, -t_max), np.concatenate([x0, [0.0, 0.0]]), method="DOP853",
                    rtol=rtol, atol=atol, events=leave, max_step=0.05 * d.diameter / np.linalg.norm(v0))
    if sol.status != 1 or not len(sol.t_events[0]):
        raise Trapped(f"backward curve from {x0.tolist()} did not reach the boundary within t = {t_max}")
    y = sol.y_events[0][0]
    foot = y[:n]
    v = field(foot)
    g = d.grad_rho(foot)
    cosang = np.dot(v, g) / (np.linalg.norm(v) * np.linalg.norm(g))
    if abs(cosang) <= GRAZE_TOL:
        raise GrazingUndecidable(f"curve meets the boundary tangentially at {foot.tolist()}")
    # y[n:] integrates from 0 down to -t, so the forward integral is its negative
    return foot, float(-sol.t_events[0][0]), -complex(y[n], y[n + 1])


def transport_cauchy_solve(s: SymbolModel, d: Domain, f: Field | str, points, t_max: float = 100.0,
                           rtol: float = 1e-12, atol: float = 1e-14) -> TransportSolution:
    """Solve P u = 0 for first-order P with u = f on the inflow boundary.

    Each point is traced back to its boundary foot and
    u = f(foot) exp(-i * integral of the zeroth-order symbol).
    """
    if s.m != 1:
        raise ConfigError(f"transport solver needs a first-order operator, got order {s.m}", "/operator")
    if isinstance(f, str):
        f = Field(f, s.n)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    feet = np.empty_like(pts)
    times = np.empty(len(pts))
    phases = np.empty(len(pts), dtype=complex)
    for i, x in enumerate(pts):
        feet[i], times[i], phases[i] = _foot(s, d, x, t_max, rtol, atol)
    values = f(feet) * np.exp(-1j * phases)
    return TransportSolution(pts, values, feet, times)


def outflow_points(s: SymbolModel, d: Domain, count: int, rng: np.random.Generator | None = None) -> np.ndarray:
    """Boundary samples where the transport field points strictly outwards."""
    pts = boundary_points(d, count, rng)
    v, _ = s.hamilton_field(pts, np.zeros_like(pts))
    g = d.grad_rho(pts)
    cosang = np.sum(v * g, axis=1) / (np.linalg.norm(v, axis=1) * np.linalg.norm(g, axis=1) + 1e-300)
    return pts[cosang < -GRAZE_TOL]


def outflow_trace(s: SymbolModel, d: Domain, f: Field | str, count: int = 64,
                  rng: np.random.Generator | None = None, **kw) -> TransportSolution:
    return transport_cauchy_solve(s, d, f, outflow_points(s, d, count, rng), **kw)


__all__ = [
    "RayWeight",
    "curve_integral",
    "ray_transform",
    "Holonomy",
    "subprincipal_holonomy",
    "gauge_null_check",
    "TransportSolution",
    "transport_cauchy_solve",
    "outflow_points",
    "outflow_trace",
]
