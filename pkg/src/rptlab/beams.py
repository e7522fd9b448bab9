"""Gaussian-beam quasimodes along null bicharacteristic segments.

The quasimode is the t-integral of Gaussian packets

    u(x) = int_0^T exp(i Phi(x, t) / h) a0(t) chi(|x - x(t)| / r_supp) dt,
    Phi(x, t) = xi(t).(x - x(t)) + 1/2 H(t)(x - x(t)).(x - x(t)),

with H solving the Riccati equation  H' + HCH + BH + HB^T + D = 0  along the
curve (D, B, C the second-derivative blocks of p_m) and
a0 = exp(-i int_0^t b),  b = tr(C H)/(2i) + p_{m-1}(gamma).
The phase is exact to second order in x - x(t) and the amplitude stops at
a0, so P u is small only to a finite order in h (measured by
:func:`residual_study`).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import cumulative_simpson, simpson, solve_ivp

from .errors import IdentityViolation, ImaginaryPartLoss, QuadratureNonconvergence, ResolutionTooCoarse
from .exprfield import Field
from .fdops import apply_operator
from .flow import Bicharacteristic, FlowOptions, PhasePoint, integrate_segment
from .geometry import Domain, QuadratureSet, tube_quadrature
from .symbols import SymbolModel, adjoint_lower, builtin_symbol

# 5-point Gauss-Lobatto rule on [-1, 1]
_LOB_X = np.array([-1.0, -np.sqrt(3 / 7), 0.0, np.sqrt(3 / 7), 1.0])
_LOB_W = np.array([1 / 10, 49 / 90, 32 / 45, 49 / 90, 1 / 10])
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)

R_SUPP_WIDTHS = 12.0
ENDPOINT_GAP_WIDTHS = 8.0
PANEL_TOL = 1e-6


def _triu_index(n: int):
    return np.triu_indices(n)


def _pack(H: np.ndarray) -> np.ndarray:
    iu = _triu_index(H.shape[-1])
    v = H[iu]
    return np.concatenate([v.real, v.imag])


def _unpack(v: np.ndarray, n: int) -> np.ndarray:
    """Inverse of _pack; accepts (k,) or (k, T) and returns (n, n) or (T, n, n)."""
    iu = _triu_index(n)
    k = len(iu[0])
    c = v[:k] + 1j * v[k:]
    if c.ndim == 1:
        H = np.zeros((n, n), dtype=complex)
        H[iu] = c
        return H + np.triu(H, 1).T
    H = np.zeros((c.shape[1], n, n), dtype=complex)
    H[:, iu[0], iu[1]] = c.T
    return H + np.transpose(np.triu(H, 1), (0, 2, 1))


@dataclass
class RiccatiSolution:
    t: np.ndarray
    H: np.ndarray
    sol: object = field(repr=False)
    n: int = 2

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        v = self.sol(np.atleast_1d(t))
        H = _unpack(v, self.n)
        return H[0] if t.ndim == 0 else H


def min_eig_im(H: np.ndarray) -> np.ndarray:
    return np.linalg.eigvalsh(H.imag)[..., 0]


def solve_riccati(s: SymbolModel, gamma: Bicharacteristic, H0=None, rtol: float = 1e-10,
                  atol: float = 1e-12) -> RiccatiSolution:
    """Integrate H' = -(HCH + BH + HB^T + D) along ``gamma`` from its first sample.

    Only the upper triangle is integrated, so H is exactly symmetric.
    """
    n = s.n
    H0 = 1j * np.eye(n) if H0 is None else np.asarray(H0, dtype=complex)
    if np.max(np.abs(H0 - H0.T)) > 1e-12:
        raise ValueError("H0 must be symmetric")
    if min_eig_im(H0) <= 1e-12:
        raise ImaginaryPartLoss("Im H0 must be positive definite")
    t0, t1 = float(gamma.t[0]), float(gamma.t[-1])

    def rhs(t, v):
        y = gamma.dense(t)
        D, B, C = s.hessian_blocks_array(y[:n], y[n:])
        H = _unpack(v, n)
        dH = -(H @ C @ H + B @ H + H @ B.T + D)
        return _pack(dH)

    max_step = (t1 - t0) / 100
    sol = solve_ivp(rhs, (t0, t1), _pack(H0), method="RK45", rtol=rtol, atol=atol,
                    dense_output=True, max_step=max_step)
    if not sol.success:
        raise ImaginaryPartLoss(f"Riccati integration failed: {sol.message}")
    H = _unpack(sol.y, n)
    res = RiccatiSolution(sol.t, H, sol.sol, n)
    lam = min_eig_im(H)
    if np.min(lam) < 1e-10:
        k = int(np.argmin(lam))
        raise ImaginaryPartLoss(f"min eig Im H = {lam[k]:.3g} at t = {sol.t[k]:.6g}")
    return res


class _BFunc:
    """b(t) for a frame: tr(C H)/(2i) + lower-order symbol along the curve."""

    def __init__(self, s: SymbolModel, gamma: Bicharacteristic, ric: RiccatiSolution, adjoint: bool):
        self.s, self.gamma, self.ric, self.adjoint = s, gamma, ric, adjoint

    def __call__(self, t: np.ndarray) -> np.ndarray:
        n = self.s.n
        t = np.atleast_1d(np.asarray(t, dtype=float))
        y = self.gamma.dense(t)
        x, xi = y[:, :n], y[:, n:]
        _, B, C = self.s.hessian_blocks_array(x, xi)
        H = self.ric(t)
        tr = np.einsum("kab,kba->k", C, H)
        low = adjoint_lower(self.s, x, xi) if self.adjoint else self.s.lower(x, xi)
        return tr / 2j + low


def _lobatto_cumulative(f, t: np.ndarray) -> np.ndarray:
    a, b = t[:-1], t[1:]
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    nodes = (mid[:, None] + half[:, None] * _LOB_X[None, :]).ravel()
    vals = f(nodes).reshape(len(a), 5)
    inc = half * (vals @ _LOB_W)
    return np.concatenate([[0.0], np.cumsum(inc)])


def amplitude_phase(s: SymbolModel, gamma: Bicharacteristic, ric: RiccatiSolution, adjoint: bool = False):
    """(b samples, a0 samples, beta samples) on the Riccati sample times."""
    bf = _BFunc(s, gamma, ric, adjoint)
    b = bf(ric.t)
    beta = _lobatto_cumulative(bf, ric.t)
    return b, np.exp(-1j * beta), beta


def _chi(r: np.ndarray) -> np.ndarray:
    """1 on [0, 1/2], 0 beyond 1, quintic C^2 transition."""
    u = np.clip((r - 0.5) / 0.5, 0.0, 1.0)
    return 1.0 - u**3 * (10.0 - 15.0 * u + 6.0 * u * u)


@dataclass
class TimeRule:
    nodes: np.ndarray
    weights: np.ndarray
    panels: int


class BeamFrame:
    """Frame data plus the quasimode evaluator."""

    def __init__(self, s: SymbolModel, gamma: Bicharacteristic, ric: RiccatiSolution | None = None,
                 adjoint: bool = False, H0=None, r_supp_widths: float = R_SUPP_WIDTHS):
        self.s = s
        self.gamma = gamma
        self.adjoint = adjoint
        self.ric = ric if ric is not None else solve_riccati(s, gamma, H0)
        self.t = self.ric.t
        self.H = self.ric.H
        self.b, self.a0, self.beta = amplitude_phase(s, gamma, self.ric, adjoint)
        self._bf = _BFunc(s, gamma, self.ric, adjoint)
        self.lam_min = float(np.min(min_eig_im(self.H)))
        self.lam_max = float(np.max(np.linalg.eigvalsh(self.H.imag)[:, -1]))
        self.r_supp_widths = r_supp_widths
        n = s.n
        y = gamma.dense(self.t)
        self.x, self.xi = y[:, :n], y[:, n:]
        xd, xid = s.hamilton_field(self.x, self.xi)
        self.xdot, self.xidot = xd, xid
        rho = np.einsum("kab,kb->ka", self.H, xd) - xid
        self._K = float(np.max(np.linalg.norm(rho, axis=1)))
        self._vmax = float(np.max(np.linalg.norm(xd, axis=1)))
        self._rules: dict = {}

    @property
    def n(self) -> int:
        return self.s.n

    @property
    def T0(self) -> float:
        return float(self.t[0])

    @property
    def T1(self) -> float:
        return float(self.t[-1])

    def r_supp(self, h: float) -> float:
        return self.r_supp_widths * np.sqrt(h / self.lam_min)

    def beta_at(self, t) -> np.ndarray:
        """Integral of b from T0 to t (vectorized)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        k = np.clip(np.searchsorted(self.t, t, side="right") - 1, 0, len(self.t) - 1)
        a = self.t[k]
        mid, half = 0.5 * (a + t), 0.5 * (t - a)
        nodes = (mid[:, None] + half[:, None] * _LOB_X[None, :]).ravel()
        vals = self._bf(nodes).reshape(len(t), 5)
        return self.beta[k] + half * (vals @ _LOB_W)

    def state(self, t):
        """(x, xi, H, a0) at arbitrary times in [T0, T1]."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        y = self.gamma.dense(t)
        return y[:, : self.n], y[:, self.n :], self.ric(t), np.exp(-1j * self.beta_at(t))

    # ------------------------------------------------------------ t-quadrature
    def _rule(self, panels: int) -> TimeRule:
        edges = np.linspace(self.T0, self.T1, panels + 1)
        mid, half = 0.5 * (edges[:-1] + edges[1:]), 0.5 * np.diff(edges)
        nodes = (mid[:, None] + half[:, None] * _GL_X[None, :]).ravel()
        weights = (half[:, None] * _GL_W[None, :]).ravel()
        return TimeRule(nodes, weights, panels)

    def _probe_points(self, h: float) -> np.ndarray:
        ts = np.linspace(self.T0, self.T1, 7)[1:-1]
        x, xi, _, _ = self.state(ts)
        xd, _ = self.s.hamilton_field(x, xi)
        rng = np.random.default_rng(7)
        pts = [x]
        for k in range(len(ts)):
            v = xd[k]
            e = rng.normal(size=self.n)
            if np.linalg.norm(v) > 0:
                e -= np.dot(e, v) / np.dot(v, v) * v
            e /= np.linalg.norm(e)
            pts.append(x[k] + np.sqrt(h / self.lam_max) * e[None, :])
        return np.vstack(pts)

    def time_rule(self, h: float, cap: int = 1 << 15) -> TimeRule:
        """Composite Gauss-Legendre rule in t, doubled until probe values agree
        to PANEL_TOL relative.  Cached per h so evaluations are smooth in x."""
        key = float(h)
        if key in self._rules:
            return self._rules[key]
        span = self.T1 - self.T0
        ell = 0.5 * min(np.sqrt(h * self.lam_min) / max(self._K, 1e-12),
                        np.sqrt(h / self.lam_max) / max(self._vmax, 1e-12))
        # ell is a worst-case bound; start well below it and let the probe
        # comparison decide
        panels = max(16, int(np.ceil(span / ell / 8)))
        probes = self._probe_points(h)
        prev = self._eval_with(self._rule(panels), probes, h)
        while True:
            if 2 * panels > cap:
                raise QuadratureNonconvergence(f"t-quadrature did not converge with {panels} panels at h={h}")
            finer = self._eval_with(self._rule(2 * panels), probes, h)
            scale = max(np.max(np.abs(finer)), 1e-300)
            if np.max(np.abs(finer - prev)) <= PANEL_TOL * scale:
                break
            panels, prev = 2 * panels, finer
        rule = self._rule(panels)
        self._rules[key] = rule
        return rule

    def _eval_with(self, rule: TimeRule, X: np.ndarray, h: float, chunk: int = 256) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        xq, xiq, Hq, a0q = self.state(rule.nodes)
        cq = rule.weights * a0q
        r = self.r_supp(h)
        out = np.zeros(len(X), dtype=complex)
        for i in range(0, len(X), chunk):
            P = X[i : i + chunk]
            d2 = np.sum((P[:, None, :] - xq[None, :, :]) ** 2, axis=2)
            cols = np.flatnonzero(np.any(d2 < r * r, axis=0))
            if len(cols) == 0:
                continue
            d = P[:, None, :] - xq[None, cols, :]
            phase = np.einsum("qa,pqa->pq", xiq[cols], d) + 0.5 * np.einsum("pqa,qab,pqb->pq", d, Hq[cols], d)
            w = _chi(np.sqrt(d2[:, cols]) / r)
            vals = np.exp(1j * phase / h) * w * cq[cols][None, :]
            out[i : i + chunk] = np.sum(vals, axis=1)
        return out

    def evaluate(self, X, h: float) -> np.ndarray:
        """u_h at points X (shape (n,) or (P, n))."""
        if not 0 < h <= 1:
            raise ValueError("h must lie in (0, 1]")
        X = np.asarray(X, dtype=float)
        vals = self._eval_with(self.time_rule(h), np.atleast_2d(X), h)
        return vals[0] if X.ndim == 1 else vals

    def to_dict(self) -> dict:
        return {
            "operator": self.s.name,
            "adjoint": self.adjoint,
            "t": self.t.tolist(),
            "x": self.x.tolist(),
            "xi": self.xi.tolist(),
            "H_re": self.H.real.tolist(),
            "H_im": self.H.imag.tolist(),
            "beta_re": self.beta.real.tolist(),
            "beta_im": self.beta.imag.tolist(),
            "lam_min": self.lam_min,
        }


def build_frame(s: SymbolModel, p0: PhasePoint, T: float, t0: float = 0.0, H0=None,
                adjoint: bool = False, opts: FlowOptions | None = None) -> BeamFrame:
    gamma = integrate_segment(s, p0, (t0, t0 + T), opts)
    return BeamFrame(s, gamma, adjoint=adjoint, H0=H0)


def seeded_hessian(s: SymbolModel, gamma: Bicharacteristic, t_seed: float, H_seed=None) -> np.ndarray:
    """H at the start of ``gamma`` such that the Riccati flow passes through
    ``H_seed`` (default i Id) at ``t_seed``.

    Integrating backwards can lose positivity of Im H; that is reported as
    ImaginaryPartLoss rather than silently accepted.
    """
    n = s.n
    Hs = 1j * np.eye(n) if H_seed is None else np.asarray(H_seed, dtype=complex)

    def rhs(t, v):
        y = gamma.dense(t)
        D, B, C = s.hessian_blocks_array(y[:n], y[n:])
        H = _unpack(v, n)
        return _pack(-(H @ C @ H + B @ H + H @ B.T + D))

    sol = solve_ivp(rhs, (t_seed, float(gamma.t[0])), _pack(Hs), method="RK45", rtol=1e-12, atol=1e-14)
    H0 = _unpack(sol.y[:, -1], n)
    if not sol.success or min_eig_im(H0) <= 1e-12:
        raise ImaginaryPartLoss(f"backward Riccati from t = {t_seed} loses Im H > 0")
    return H0


def adjoint_frame(f: BeamFrame, s_tilde: SymbolModel) -> BeamFrame:
    """Frame of the adjoint of ``s_tilde`` on the same curve and the same H."""
    return BeamFrame(s_tilde, f.gamma, ric=f.ric, adjoint=True, r_supp_widths=f.r_supp_widths)


def evaluate_quasimode(f: BeamFrame, x, h: float):
    return f.evaluate(x, h)


def stationary_phase_constant(f: BeamFrame, t0: float) -> complex:
    """c_gamma(t0) = (2 pi i / (H xdot . xdot))^{1/2}, principal branch."""
    x, xi, H, _ = f.state(t0)
    xd, _ = f.s.hamilton_field(x[0], xi[0])
    return complex(np.sqrt(2j * np.pi / (xd @ H[0] @ xd)))


def on_curve_prediction(f: BeamFrame, t0: float, h: float) -> complex:
    """Leading stationary-phase value of u_h at x(t0): h^{1/2} c_gamma a0(t0).

    Stationary phase of int exp(i q s^2 / (2h)) ds gives (2 pi i h / q)^{1/2},
    so c_gamma multiplies the amplitude.
    """
    a0 = np.exp(-1j * f.beta_at(t0))[0]
    return complex(np.sqrt(h) * stationary_phase_constant(f, t0) * a0)


# ------------------------------------------------------------------ pairing

def c0_constant(f: BeamFrame) -> float:
    xd, xid = f.xdot[0], f.xidot[0]
    return 2 * np.pi ** ((f.n + 1) / 2) / np.sqrt(np.dot(xd, xd) + np.dot(xid, xid))


@dataclass
class PairingResult:
    value: complex
    reference: complex
    c0: float

    @property
    def ratio(self) -> complex:
        return self.value / self.reference if self.reference != 0 else complex("nan")


def pairing_reference(fu: BeamFrame, fv: BeamFrame, q: Field, c0: float, samples: int = 4001) -> complex:
    n = fu.n
    t = np.linspace(fu.T0, fu.T1, samples)
    y = fu.gamma.dense(t)
    x, xi = y[:, :n], y[:, n:]
    g = fu.s.lower(x, xi) - fv.s.lower(x, xi)
    g = np.asarray(g, dtype=complex)
    expo = (cumulative_simpson(g.real, x=t, initial=0.0)
            + 1j * cumulative_simpson(g.imag, x=t, initial=0.0))
    integrand = q(x) * np.exp(-1j * expo)
    return c0 * (simpson(integrand.real, x=t) + 1j * simpson(integrand.imag, x=t))


def pairing_limit(fu: BeamFrame, fv: BeamFrame, q: Field, h: float, quad: QuadratureSet,
                  c0_scale: float = 1.0) -> PairingResult:
    """h^{-(n+1)/2} sum_k w_k q(x_k) u(x_k) conj(v(x_k)) and its limit value."""
    if quad.spacing > np.sqrt(h) / 2:
        raise ResolutionTooCoarse(f"quadrature spacing {quad.spacing:.3g} exceeds sqrt(h)/2 = {np.sqrt(h) / 2:.3g}")
    c0 = c0_scale * c0_constant(fu)
    qv = q(quad.nodes)
    ref = pairing_reference(fu, fv, q, c0)
    if not np.any(qv):
        return PairingResult(0j, ref, c0)
    mask = qv != 0
    u = fu.evaluate(quad.nodes[mask], h)
    v = fv.evaluate(quad.nodes[mask], h)
    val = np.sum(quad.weights[mask] * qv[mask] * u * np.conj(v))
    return PairingResult(complex(val) * h ** (-(fu.n + 1) / 2), complex(ref), c0)


# ----------------------------------------------------------- residual study

def fit_order(hs, vals) -> float:
    """Least-squares slope of log(vals) against log(hs)."""
    lh = np.log(np.asarray(hs, float))
    lv = np.log(np.asarray(vals, float))
    return float(np.polyfit(lh, lv, 1)[0])


@dataclass
class ResidualRow:
    h: float
    ratio: float
    norm_u: float
    norm_pu: float
    nodes: int


@dataclass
class ResidualStudy:
    rows: list
    order: float
    norm_exponent: float

    def table(self) -> list[dict]:
        return [r.__dict__ for r in self.rows]


def interior_tube(f: BeamFrame, h: float, window, widths: float = 6.0,
                  d: Domain | None = None, spacing: float | None = None) -> QuadratureSet:
    ta, tb = window
    ts = np.linspace(ta, tb, 200)
    curve = f.gamma.dense(ts)[:, : f.n]
    lam_window = float(np.min(min_eig_im(f.ric(ts))))
    radius = widths * np.sqrt(h / lam_window)
    # Truncating the t-integral at an endpoint leaves a term of size
    # exp(-lam d^2 / (2h)) at distance d; keep it below 1e-13.
    lam_ends = min_eig_im(f.H[[0, -1]])
    ends = f.gamma.dense(np.array([f.T0, f.T1]))[:, : f.n]
    for e, lam in zip(ends, lam_ends):
        gap = np.min(np.linalg.norm(curve - e, axis=1)) - radius
        need = ENDPOINT_GAP_WIDTHS * np.sqrt(h / lam)
        if gap < need:
            raise ValueError(f"interior tube comes within {gap:.3g} of a frame endpoint (need {need:.3g})")
    return tube_quadrature(d, curve, radius, spacing or np.sqrt(h) / 4)


def residual_study(s: SymbolModel, f: BeamFrame, d: Domain | None, hs, window, widths: float = 6.0,
                   fd_factor: float = 1e-2) -> ResidualStudy:
    """h^m ||P u_h|| / ||u_h|| over an interior tube, and its fitted order."""
    rows = []
    for h in hs:
        quad = interior_tube(f, h, window, widths, d)
        u = f.evaluate(quad.nodes, h)
        pu = apply_operator(s, lambda X: f.evaluate(X, h), quad.nodes, fd_factor * h)
        nu = float(np.sqrt(np.sum(quad.weights * np.abs(u) ** 2)))
        npu = float(np.sqrt(np.sum(quad.weights * np.abs(pu) ** 2)))
        rows.append(ResidualRow(h, h**s.m * npu / nu, nu, npu, len(quad)))
    hs_ = [r.h for r in rows]
    return ResidualStudy(rows, fit_order(hs_, [r.ratio for r in rows]), fit_order(hs_, [r.norm_u for r in rows]))


def norm_study(f: BeamFrame, hs, window, radius: float, d: Domain | None = None) -> tuple[list, float]:
    """||u_h||_{L^2} over a fixed tube around the window; returns (norms, exponent)."""
    ts = np.linspace(window[0], window[1], 200)
    curve = f.gamma.dense(ts)[:, : f.n]
    norms = []
    for h in hs:
        quad = tube_quadrature(d, curve, radius, np.sqrt(h) / 4)
        u = f.evaluate(quad.nodes, h)
        norms.append(float(np.sqrt(np.sum(quad.weights * np.abs(u) ** 2))))
    return norms, fit_order(hs, norms)


# --------------------------------------------------------------- identities

@dataclass
class IdentityReport:
    alpha0: complex
    f0: complex
    err_det: float
    err_f: float
    err_detim: float
    worst_index: dict

    @property
    def worst(self) -> float:
        return max(self.err_det, self.err_f, self.err_detim)


def beam_identities(f: BeamFrame, tol: float = 1e-6, raise_on_fail: bool = True) -> IdentityReport:
    """Check det M(s) = alpha0 det Im H(s), constancy of f(s), and
    det Im H(t) = exp(-2 int tr(C Re H + B)) along the frame samples."""
    n = f.n
    H, xd, xid = f.H, f.xdot, f.xidot
    if np.max(np.abs(H[0] - 1j * np.eye(n))) > 1e-14:
        raise ValueError("identities require a frame started with H = i Id")
    alpha0 = 0.5j * (2j) ** n * (np.dot(xd[0], xd[0]) + np.dot(xid[0], xid[0]))
    rho = np.einsum("kab,kb->ka", H, xd) - xid
    K = len(f.t)
    M = np.zeros((K, n + 1, n + 1), dtype=complex)
    M[:, :n, :n] = 2j * H.imag
    M[:, :n, n] = -rho
    M[:, n, :n] = -rho
    M[:, n, n] = np.einsum("ka,ka->k", rho, xd)
    detM = np.linalg.det(M)
    detI = np.linalg.det(H.imag)
    e1 = np.abs(detM - alpha0 * detI) / np.abs(alpha0 * detI)
    Iinv_rho = np.linalg.solve(H.imag, rho[..., None])[..., 0]
    fs = 0.5j * np.einsum("ka,ka->k", Iinv_rho, np.conj(rho))
    e2 = np.abs(fs - fs[0]) / np.abs(fs[0])

    def g(t):
        y = f.gamma.dense(t)
        _, B, C = f.s.hessian_blocks_array(y[:, :n], y[:, n:])
        Ht = f.ric(t)
        return np.einsum("kab,kba->k", C, Ht.real) + np.trace(B, axis1=1, axis2=2)

    integ = _lobatto_cumulative(g, f.t)
    pred = np.exp(-2 * integ)
    e3 = np.abs(detI - pred) / np.abs(pred)
    rep = IdentityReport(complex(alpha0), complex(fs[0]), float(e1.max()), float(e2.max()), float(e3.max()),
                         {"det": int(e1.argmax()), "f": int(e2.argmax()), "detim": int(e3.argmax())})
    if raise_on_fail and rep.worst > tol:
        which = max(("det", rep.err_det), ("f", rep.err_f), ("detim", rep.err_detim), key=lambda p: p[1])
        raise IdentityViolation(f"identity '{which[0]}' violated: relative error {which[1]:.3g}", which[1],
                                rep.worst_index[which[0]])
    return rep


# ------------------------------------------------------------------ gallery

@lru_cache(maxsize=None)
def gallery_frame(name: str) -> BeamFrame:
    """Reference frames used by the tests and the acceptance suite."""
    if name == "wave1d_chord":
        return build_frame(builtin_symbol("wave1d"), PhasePoint([1, 0], [1, 1]), 0.5)
    if name == "wave1d_ray":
        return build_frame(builtin_symbol("wave1d"), PhasePoint([1, 0], [1, 1]), 2.0)
    if name == "wave1d_long":
        return build_frame(builtin_symbol("wave1d"), PhasePoint([0, 0], [10, 10]), 0.5)
    if name == "wave1d_var":
        s = builtin_symbol("wave1d", {"c": "1 + 0.2*sin(x1)*cos(0.5*x2)"})
        x0 = np.array([0.1, 0.0])
        c = 1 + 0.2 * np.sin(0.1)
        return build_frame(s, PhasePoint(x0, [1.0, c]), 1.0)
    if name == "wave1d_var_hf":
        # same operator at ten times the frequency: a long curve with Im H
        # bounded well away from zero
        s = builtin_symbol("wave1d", {"c": "1 + 0.2*sin(x1)*cos(0.5*x2)"})
        c = 1 + 0.2 * np.sin(0.1)
        return build_frame(s, PhasePoint([0.1, 0.0], [10.0, 10.0 * c]), 0.4)
    if name == "wave2d":
        return build_frame(builtin_symbol("wave2d"), PhasePoint([0, 0, 0], [0.6, 0.8, 1.0]), 1.0)
    if name == "tricomi_cusp":
        # passes the cusp at (0, 0) halfway through
        return build_frame(builtin_symbol("tricomi"), PhasePoint([2 / 3, -1], [1, 1]), 2.0, t0=-1.0)
    if name == "tricomi_cusp_focus":
        # Im H = Id at the cusp; the curve extends far enough that truncation
        # at either end is invisible near the cusp for h <= 1e-3
        s = builtin_symbol("tricomi")
        a = 1.25
        gamma = integrate_segment(s, PhasePoint([2 / 3 * a**3, -a * a], [1, a]), (-a, a))
        return BeamFrame(s, gamma, H0=seeded_hessian(s, gamma, 0.0))
    if name == "magneticwave":
        s = builtin_symbol("magneticwave", {"a": ["0.3*x2 + 0.1*x1^2", "sin(x1)"]})
        return build_frame(s, PhasePoint([0.2, -0.1], [1, 1]), 1.0)
    if name == "transport":
        s = builtin_symbol("transport", {"L": ["1", "0.5*sin(x1)"], "V": "x2"})
        return build_frame(s, PhasePoint([0, 0], [0.0, 1.0]), 1.0)
    raise KeyError(name)


GALLERY = ("wave1d_chord", "wave1d_ray", "wave1d_var", "wave2d", "tricomi_cusp", "magneticwave", "transport")
