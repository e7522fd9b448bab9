"""Boundary analysis: normal characteristic roots, region classification,
the "intersect nicely" check for boundary-issued bicharacteristics, and the
exponentially localized boundary quasimode in the elliptic region."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .errors import NoEllipticRoot, RootNotSimple
from .exprfield import Expr, Field
from .flow import Bicharacteristic, FlowOptions, PhasePoint, integrate_maximal
from .geometry import Domain, QuadratureSet, inward_conormal, signed_membership, tangent_basis
from .symbols import SymbolModel, normal_char_poly

CLUSTER_TOL = 1e-7

ELLIPTIC = "elliptic"
HYPERBOLIC = "hyperbolic"
MIXED = "mixed"
GLANCING = "glancing"


# ------------------------------------------------------------------ roots

@dataclass
class RootReport:
    x_b: np.ndarray
    xi_tan: np.ndarray
    nu: np.ndarray
    coeffs: np.ndarray
    roots: np.ndarray  # one entry per cluster
    multiplicity: np.ndarray
    classification: str

    @property
    def real_roots(self) -> np.ndarray:
        return self.roots[self.roots.imag == 0].real

    @property
    def simple_upper_roots(self) -> np.ndarray:
        """Simple roots with positive imaginary part (usable by the elliptic construction)."""
        sel = (self.roots.imag > 0) & (self.multiplicity == 1)
        return self.roots[sel]

    def conjugate_defect(self) -> float:
        """Largest distance from a non-real root's conjugate to the nearest root."""
        worst = 0.0
        for r in self.roots[self.roots.imag != 0]:
            worst = max(worst, float(np.min(np.abs(self.roots - np.conj(r)))))
        return worst

    def rows(self) -> list[dict]:
        out = []
        for r, k in zip(self.roots, self.multiplicity):
            row = {f"x_b{j + 1}": v for j, v in enumerate(self.x_b)}
            row.update({f"xi_tan{j + 1}": v for j, v in enumerate(self.xi_tan)})
            row.update(root_re=r.real, root_im=r.imag, multiplicity=int(k), **{"class": self.classification})
            out.append(row)
        return out


def _cluster(raw: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Merge roots closer than ``tol`` (relative to max(1, |root|)); snap
    near-real clusters onto the real axis."""
    order = np.argsort(raw.real + 1e-3 * raw.imag)
    raw = raw[order]
    groups: list[list[complex]] = []
    for r in raw:
        for g in groups:
            c = np.mean(g)
            if abs(r - c) <= tol * max(1.0, abs(c)):
                g.append(r)
                break
        else:
            groups.append([r])
    roots = np.array([np.mean(g) for g in groups], dtype=complex)
    mult = np.array([len(g) for g in groups])
    # a multiple root splits by ~tol^(1/k) under rounding; test realness at that scale
    for i, (r, k) in enumerate(zip(roots, mult)):
        if abs(r.imag) <= tol ** (1.0 / k) * max(1.0, abs(r)):
            roots[i] = complex(r.real, 0.0)
    return roots, mult


def classify_roots(roots: np.ndarray, mult: np.ndarray) -> str:
    real = roots.imag == 0
    if np.any(real & (mult > 1)):
        return GLANCING
    n_real = int(np.sum(real))
    if n_real == 0:
        return ELLIPTIC
    if n_real == len(roots):
        return HYPERBOLIC
    return MIXED


def char_roots(s: SymbolModel, d: Domain, x_b, xi_tan, tol: float = CLUSTER_TOL) -> RootReport:
    """Roots of tau -> p_m(x_b, xi_tan + tau nu) with multiplicities and region class.

    A single real simple root (first-order operators) counts as hyperbolic:
    every root is real and simple.
    """
    x_b = np.asarray(x_b, dtype=float)
    xi_tan = np.asarray(xi_tan, dtype=float)
    nu = inward_conormal(d, x_b)
    coeffs = normal_char_poly(s, x_b, xi_tan, nu)
    raw = np.roots(coeffs)
    roots, mult = _cluster(raw, tol)
    return RootReport(x_b, xi_tan, nu, coeffs, roots, mult, classify_roots(roots, mult))


# ------------------------------------------------------- intersect nicely

@dataclass
class NiceReport:
    nice: bool
    violations: list = field(default_factory=list)
    curves: tuple = ()

    def describe(self) -> str:
        return "nice" if self.nice else "; ".join(self.violations)


def velocities_independent(v1, v2, tol: float = 1e-6) -> bool:
    """True when the smallest singular value of [v1/|v1|, v2/|v2|] exceeds tol."""
    v1 = np.asarray(v1, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    n1, n2 = np.linalg.norm(v1), np.linalg.norm(v2)
    if n1 == 0 or n2 == 0:
        return False
    sv = np.linalg.svd(np.column_stack([v1 / n1, v2 / n2]), compute_uv=False)
    return bool(sv[-1] > tol)


def _param_at(g: Bicharacteristic, x) -> float:
    k = int(np.argmin(np.linalg.norm(g.x - x, axis=1)))
    return float(g.t[k])


def _crossings(g1: Bicharacteristic, g2: Bicharacteristic, exclude_t: tuple, coarse: float,
               tol: float) -> list[tuple[float, float, float]]:
    """Spatial intersections (t1, t2, distance) found by polyline proximity and
    refined on the dense outputs; pairs near ``exclude_t`` are skipped."""
    n = g1.n
    s1 = np.linspace(g1.t[0], g1.t[-1], 400)
    s2 = np.linspace(g2.t[0], g2.t[-1], 400)
    p1 = g1.dense(s1)[:, :n]
    p2 = g2.dense(s2)[:, :n]
    dist = np.linalg.norm(p1[:, None, :] - p2[None, :, :], axis=2)
    seg = np.maximum(np.max(np.linalg.norm(np.diff(p1, axis=0), axis=1)),
                     np.max(np.linalg.norm(np.diff(p2, axis=0), axis=1)))
    cand = np.argwhere(dist <= max(coarse, 2 * seg))
    found: list[tuple[float, float, float]] = []
    span1 = g1.t[-1] - g1.t[0]
    span2 = g2.t[-1] - g2.t[0]
    for i, j in cand:
        t1, t2 = s1[i], s2[j]
        if abs(t1 - exclude_t[0]) < 0.02 * span1 and abs(t2 - exclude_t[1]) < 0.02 * span2:
            continue
        if any(abs(t1 - a) < 0.02 * span1 and abs(t2 - b) < 0.02 * span2 for a, b, _ in found):
            continue
        res = least_squares(lambda v: g1.dense(v[0])[:n] - g2.dense(v[1])[:n], [t1, t2],
                            bounds=([g1.t[0], g2.t[0]], [g1.t[-1], g2.t[-1]]), xtol=1e-15, ftol=1e-15, gtol=1e-15)
        r = float(np.linalg.norm(res.fun))
        if r <= tol:
            a, b = res.x
            if abs(a - exclude_t[0]) < 1e-6 * span1 + 1e-9 and abs(b - exclude_t[1]) < 1e-6 * span2 + 1e-9:
                continue
            if not any(abs(a - fa) < 1e-6 * span1 and abs(b - fb) < 1e-6 * span2 for fa, fb, _ in found):
                found.append((float(a), float(b), r))
    return found


def check_curve_pair(g1: Bicharacteristic, g2: Bicharacteristic, x_b, tol: float = 1e-6) -> NiceReport:
    """Test two bicharacteristics through the boundary point x_b.

    (i)   spatial velocities at x_b linearly independent;
    (ii)  no other common boundary point (curve endpoints) within ``tol``;
    (iii) at interior spatial intersections the covectors differ by more than ``tol``.
    """
    x_b = np.asarray(x_b, dtype=float)
    s = g1.symbol
    t1, t2 = _param_at(g1, x_b), _param_at(g2, x_b)
    y1, y2 = g1.dense(t1), g2.dense(t2)
    n = g1.n
    v1, _ = s.hamilton_field(y1[:n], y1[n:])
    v2, _ = g2.symbol.hamilton_field(y2[:n], y2[n:])
    violations = []
    if not velocities_independent(v1, v2, tol):
        violations.append("(i) initial spatial velocities are linearly dependent")
    ends1 = [e for e in (g1.x[0], g1.x[-1]) if np.linalg.norm(e - x_b) > tol]
    ends2 = [e for e in (g2.x[0], g2.x[-1]) if np.linalg.norm(e - x_b) > tol]
    for a in ends1:
        for b in ends2:
            if np.linalg.norm(a - b) <= tol:
                violations.append(f"(ii) curves meet again at the boundary point {np.round(a, 9).tolist()}")
    diam = max(np.ptp(np.vstack([g1.x, g2.x]), axis=0).max(), 1e-12)
    shared = []
    for a, b, _ in _crossings(g1, g2, (t1, t2), 1e-2 * diam, tol):
        ya, yb = g1.dense(a), g2.dense(b)
        if np.linalg.norm(ya[:n] - x_b) <= tol:
            continue
        if any(np.linalg.norm(ya[:n] - e) <= tol for e in ends1):
            continue  # already reported as a boundary meeting
        scale = max(1.0, np.linalg.norm(ya[n:]))
        if np.linalg.norm(ya[n:] - yb[n:]) <= tol * scale:
            shared.append(ya[:n])
    if shared:
        violations.append(f"(iii) curves share {len(shared)} interior phase point(s), "
                          f"first at x = {np.round(shared[0], 9).tolist()}")
    return NiceReport(not violations, violations, (g1, g2))


def nice_intersection_check(s: SymbolModel, d: Domain, x_b, xi_tan, tau1: float, tau2: float,
                            opts: FlowOptions | None = None) -> NiceReport:
    """Integrate the maximal bicharacteristics issued from (x_b, xi_tan + tau_k nu)
    and run :func:`check_curve_pair` on them."""
    if abs(tau1 - tau2) <= CLUSTER_TOL * max(1.0, abs(tau1)):
        raise ValueError("tau1 and tau2 must be distinct roots")
    x_b = np.asarray(x_b, dtype=float)
    xi_tan = np.asarray(xi_tan, dtype=float)
    nu = inward_conormal(d, x_b)
    curves = []
    for tau in (tau1, tau2):
        p0 = PhasePoint(x_b, xi_tan + tau * nu)
        if abs(s.principal(p0.x, p0.xi)) > 1e-8 * max(1.0, np.linalg.norm(p0.xi) ** s.m):
            raise ValueError(f"tau = {tau} is not a root of the normal characteristic polynomial")
        curves.append(integrate_maximal(s, d, p0, opts))
    return check_curve_pair(curves[0], curves[1], x_b)


# --------------------------------------------------- elliptic quasimode

def _chi(r: np.ndarray) -> np.ndarray:
    u = np.clip((r - 0.5) / 0.5, 0.0, 1.0)
    return 1.0 - u**3 * (10.0 - 15.0 * u + 6.0 * u * u)


@dataclass
class BoundaryQuasimode:
    """u = exp(i Phi / h) a chi(y_n / depth) in the affine frame y = R^T (x - x_b),
    R = [tangent basis | inward normal].

    Phi = y'.xi' + z(y') y_n + w(y') y_n^2 / 2 and a = eta + y_n a1(y').
    """

    s: SymbolModel
    d: Domain
    x_b: np.ndarray
    xi_tan: np.ndarray
    nu: np.ndarray
    T: np.ndarray  # (n-1, n) tangent rows
    z0: complex
    eta: Field
    depth: float
    report: RootReport
    newton_tol: float = 1e-13

    @property
    def n(self) -> int:
        return self.s.n

    @property
    def xi_prime(self) -> np.ndarray:
        return self.T @ self.xi_tan

    def to_local(self, X) -> tuple[np.ndarray, np.ndarray]:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        dx = X - self.x_b
        return dx @ self.T.T, dx @ self.nu

    def foot(self, yp: np.ndarray) -> np.ndarray:
        return self.x_b + yp @ self.T

    def root(self, yp: np.ndarray) -> np.ndarray:
        """z(y'): root of p_m(foot, xi_tan + z nu) continued from z0 by Newton."""
        xf = self.foot(yp)
        z = np.full(len(yp), self.z0, dtype=complex)
        for _ in range(60):
            xi = self.xi_tan[None, :] + z[:, None] * self.nu[None, :]
            p = self.s.principal(xf, xi)
            _, dxi = self.s.gradients(xf, xi)
            step = p / (dxi @ self.nu)
            z = z - step
            if np.max(np.abs(step)) <= self.newton_tol * max(1.0, abs(self.z0)):
                break
        return z

    def profile(self, yp: np.ndarray):
        """(z, grad' z, w, eta, a1) at the boundary feet of ``yp``."""
        n = self.n
        xf = self.foot(yp)
        z = self.root(yp)
        xi = self.xi_tan[None, :] + z[:, None] * self.nu[None, :]
        dx, dxi = self.s.gradients(xf, xi)
        pn = dxi @ self.nu
        dz = -(dx @ self.T.T) / pn[:, None]
        ptan = dxi @ self.T.T
        w = -(dx @ self.nu + np.sum(ptan * dz, axis=1)) / pn
        # Hessian of Phi at y_n = 0 in the local frame, then in x
        Hy = np.zeros((len(yp), n, n), dtype=complex)
        Hy[:, : n - 1, n - 1] = dz
        Hy[:, n - 1, : n - 1] = dz
        Hy[:, n - 1, n - 1] = w
        R = np.vstack([self.T, self.nu]).T  # columns: tangents, normal
        Hx = np.einsum("ia,kab,jb->kij", R, Hy, R)
        _, _, C = self.s.hessian_blocks_array(xf, xi)
        b = np.einsum("kij,kji->k", C, Hx) / 2j + self.s.lower(xf, xi)
        eta = self.eta(xf)
        grad_eta = np.stack([g(xf) for g in self.eta.grad()], axis=-1)
        deta = grad_eta @ self.T.T
        a1 = -(1j / pn) * ((1 / 1j) * np.sum(ptan * deta, axis=1) + b * eta)
        return z, dz, w, eta, a1

    def evaluate(self, X, h: float) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        yp, yn = self.to_local(X)
        z, _, w, eta, a1 = self.profile(yp)
        phi = yp @ self.xi_prime + z * yn + 0.5 * w * yn**2
        amp = (eta + yn * a1) * _chi(np.abs(yn) / self.depth)
        out = np.exp(1j * phi / h) * amp
        return out[0] if X.ndim == 1 else out

    def __call__(self, X, h: float) -> np.ndarray:
        return self.evaluate(X, h)

    def collar_quadrature(self, h: float, half_width: float, depth: float | None = None,
                          tangential: int | None = None, per_h: int = 8) -> QuadratureSet:
        """Midpoint nodes on [-half_width, half_width]^(n-1) x [0, depth] in the
        local frame, normal spacing h/per_h, clipped to the domain.

        ``depth`` defaults to 40 h / Im z0, beyond which |u|^2 < e^{-80}.
        """
        n = self.n
        if tangential is None:
            tangential = 201 if n == 2 else 41
        if depth is None:
            depth = min(self.depth, 40 * h / self.z0.imag)
        dn = h / per_h
        nn = max(int(np.ceil(depth / dn)), 1)
        ys = (np.arange(nn) + 0.5) * (depth / nn)
        ts = np.linspace(-half_width, half_width, tangential + 1)
        tc = 0.5 * (ts[1:] + ts[:-1])
        axes = [tc] * (n - 1) + [ys]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
        X = self.x_b + grid[:, : n - 1] @ self.T + grid[:, n - 1 :] * self.nu
        keep = signed_membership(self.d, X) >= 0
        w = (2 * half_width / tangential) ** (n - 1) * (depth / nn)
        return QuadratureSet(X[keep], np.full(int(keep.sum()), w), float(max(2 * half_width / tangential, depth / nn)))


def elliptic_quasimode(s: SymbolModel, d: Domain, x_b, xi_tan, eta: Expr | str, depth: float = 0.5,
                       root_index: int = 0) -> BoundaryQuasimode:
    """Boundary quasimode exponentially decaying into M, built on a simple root
    z of the normal characteristic polynomial with Im z > 0."""
    rep = char_roots(s, d, x_b, xi_tan)
    upper = rep.roots[rep.roots.imag > 1e-8]
    if len(upper) == 0:
        raise NoEllipticRoot(f"no root with positive imaginary part at {rep.x_b.tolist()} (class {rep.classification})")
    upper_mult = rep.multiplicity[rep.roots.imag > 1e-8]
    order = np.argsort(-upper.imag)
    z0, k = upper[order[root_index]], upper_mult[order[root_index]]
    if k > 1:
        raise RootNotSimple(f"root {z0} has multiplicity {k}")
    T = tangent_basis(rep.nu)
    f = eta if isinstance(eta, Field) else Field(eta, s.n)
    return BoundaryQuasimode(s, d, rep.x_b, rep.xi_tan, rep.nu, T, complex(z0), f, depth, rep)


@dataclass
class CollarStudy:
    hs: list
    l2: list
    h1: list
    residual: list
    l2_exponent: float
    h1_ratio_exponent: float
    residual_order: float


def _fd_gradient(fun, X: np.ndarray, step: float) -> np.ndarray:
    n = X.shape[1]
    grads = np.empty(X.shape, dtype=complex)
    for j in range(n):
        e = np.zeros(n)
        e[j] = step
        d1 = (fun(X + e) - fun(X - e)) / (2 * step)
        d2 = (fun(X + 2 * e) - fun(X - 2 * e)) / (4 * step)
        grads[:, j] = (4 * d1 - d2) / 3
    return grads


def collar_study(qm: BoundaryQuasimode, hs, half_width: float, residual: bool = True,
                 fd_factor: float = 1e-2) -> CollarStudy:
    """L2(M) and H1(M) norms over the boundary collar, and the h^m-normalized
    residual h^m ||P u|| / ||u||, across ``hs``."""
    from .beams import fit_order
    from .fdops import apply_operator

    l2, h1, res = [], [], []
    for h in hs:
        quad = qm.collar_quadrature(h, half_width)
        fun = lambda X, h=h: qm.evaluate(X, h)  # noqa: E731
        u = fun(quad.nodes)
        g = _fd_gradient(fun, quad.nodes, fd_factor * h)
        nu2 = float(np.sum(quad.weights * np.abs(u) ** 2))
        ng2 = float(np.sum(quad.weights * np.sum(np.abs(g) ** 2, axis=1)))
        l2.append(np.sqrt(nu2))
        h1.append(np.sqrt(nu2 + ng2))
        if residual:
            pu = apply_operator(qm.s, fun, quad.nodes, fd_factor * h)
            res.append(h**qm.s.m * float(np.sqrt(np.sum(quad.weights * np.abs(pu) ** 2))) / np.sqrt(nu2))
    ratio = np.array(h1) / np.array(l2)
    return CollarStudy(list(hs), l2, h1, res, fit_order(hs, l2), fit_order(hs, ratio),
                       fit_order(hs, res) if residual else float("nan"))


__all__ = [
    "RootReport",
    "char_roots",
    "classify_roots",
    "NiceReport",
    "check_curve_pair",
    "nice_intersection_check",
    "velocities_independent",
    "BoundaryQuasimode",
    "elliptic_quasimode",
    "CollarStudy",
    "collar_study",
]
