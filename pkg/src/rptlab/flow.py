"""Null bicharacteristics: maximal integration in M, boundary classification,
and the scattering relation."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import RK45

from .errors import GrazingUndecidable, NotNull, StartsOutside, Trapped
from .geometry import TOL_BOUNDARY, Domain, boundary_points, inward_conormal, signed_membership, tangent_basis
from .symbols import CharacteristicBoundary, SymbolModel, normal_char_poly

BOUNDARY_EXIT = "boundary-exit"
TRAPPED = "trapped-cutoff"
BLOWUP = "fiber-blowup"
SEGMENT = "segment-end"


@dataclass(frozen=True)
class PhasePoint:
    x: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "xi", np.asarray(self.xi, dtype=float))
        if not np.linalg.norm(self.xi) > 0:
            raise ValueError("covector must be nonzero")

    @property
    def y(self) -> np.ndarray:
        return np.concatenate([self.x, self.xi])

    def scaled(self, lam: float) -> "PhasePoint":
        return PhasePoint(self.x, lam * self.xi)


@dataclass
class FlowOptions:
    rtol: float = 1e-10
    atol: float = 1e-12
    t_max: float = 100.0
    xi_cap: float = 1e6
    eps_time: float = 1e-4
    eps_exit_frac: float = 1e-6
    tol_boundary: float = 1e-10
    tol_null: float = 1e-8
    max_step: float | None = None
    # probe span for incoming/outgoing classification, as a fraction of the
    # bbox diameter travelled at the initial speed
    probe_frac: float = 1e-4


class DenseCurve:
    """Piecewise dense output over ascending, abutting time intervals."""

    def __init__(self, pieces):
        pieces = sorted(((min(a, b), max(a, b), f) for a, b, f in pieces), key=lambda p: p[0])
        self.lo = np.array([p[0] for p in pieces])
        self.hi = np.array([p[1] for p in pieces])
        self.funcs = [p[2] for p in pieces]

    @property
    def t_min(self) -> float:
        return float(self.lo[0])

    @property
    def t_max(self) -> float:
        return float(self.hi[-1])

    def __call__(self, t):
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        idx = np.clip(np.searchsorted(self.hi, t_arr, side="left"), 0, len(self.funcs) - 1)
        out = None
        for k in np.unique(idx):
            sel = idx == k
            vals = np.asarray(self.funcs[k](t_arr[sel]))
            if vals.ndim == 1:
                vals = vals[:, None]
            if out is None:
                out = np.empty((len(t_arr), vals.shape[0]), dtype=vals.dtype)
            out[sel] = vals.T
        return out[0] if np.ndim(t) == 0 else out

    def restrict(self, ta: float, tb: float) -> "DenseCurve":
        keep = [(max(a, ta), min(b, tb), f) for a, b, f in zip(self.lo, self.hi, self.funcs) if b > ta and a < tb]
        return DenseCurve(keep)


@dataclass
class Bicharacteristic:
    symbol: SymbolModel
    t: np.ndarray
    y: np.ndarray
    dense: DenseCurve
    start_flag: str
    end_flag: str
    drift: float
    tangencies: int = 0
    domain: Domain | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.symbol.n

    @property
    def x(self) -> np.ndarray:
        return self.y[:, : self.n]

    @property
    def xi(self) -> np.ndarray:
        return self.y[:, self.n :]

    @property
    def tau_minus(self) -> float:
        return float(-self.t[0])

    @property
    def tau_plus(self) -> float:
        return float(self.t[-1])

    @property
    def start(self) -> PhasePoint:
        return PhasePoint(self.x[0], self.xi[0])

    @property
    def end(self) -> PhasePoint:
        return PhasePoint(self.x[-1], self.xi[-1])

    @property
    def is_maximal(self) -> bool:
        return self.start_flag == BOUNDARY_EXIT and self.end_flag == BOUNDARY_EXIT

    def __call__(self, t):
        return self.dense(t)

    def restrict(self, ta: float, tb: float) -> "Bicharacteristic":
        """Sub-curve on [ta, tb]; endpoints become interior cut points."""
        ta = max(ta, float(self.t[0]))
        tb = min(tb, float(self.t[-1]))
        inner = (self.t > ta) & (self.t < tb)
        t = np.concatenate([[ta], self.t[inner], [tb]])
        y = np.vstack([self.dense(ta), self.y[inner], self.dense(tb)])
        sf = self.start_flag if ta == self.t[0] else SEGMENT
        ef = self.end_flag if tb == self.t[-1] else SEGMENT
        return Bicharacteristic(self.symbol, t, y, self.dense.restrict(ta, tb), sf, ef, self.drift,
                                self.tangencies, self.domain, dict(self.meta))

    def reversed(self) -> "Bicharacteristic":
        """The same trace traversed backwards with covector -xi (a bicharacteristic
        of p_m when p_m is even in xi)."""
        n = self.n
        flip = np.concatenate([np.ones(n), -np.ones(n)])
        t = -self.t[::-1]
        y = self.y[::-1] * flip
        dense = self.dense

        class _Rev:
            def __call__(_, s):
                v = dense(-np.asarray(s))
                return (v * flip).T if np.ndim(s) else v * flip

        return Bicharacteristic(self.symbol, t, y, DenseCurve([(t[0], t[-1], _Rev())]), self.end_flag,
                                self.start_flag, self.drift, self.tangencies, self.domain)


def _bisect(f, a: float, b: float, fa: float, fb: float, tol: float) -> float:
    if abs(fa) <= tol:
        return a
    if abs(fb) <= tol:
        return b
    for _ in range(200):
        m = 0.5 * (a + b)
        fm = f(m)
        if abs(fm) <= tol or abs(b - a) < 1e-16 * max(1.0, abs(m)):
            return m
        if (fm > 0) == (fa > 0):
            a, fa = m, fm
        else:
            b, fb = m, fm
    return 0.5 * (a + b)


def _speed_scale(s: SymbolModel, y0: np.ndarray, diam: float) -> float:
    n = s.n
    v = s.rhs(y0)
    xi_n = max(np.linalg.norm(y0[n:]), 1e-300)
    return float(np.sqrt(np.sum(v[:n] ** 2) + (diam * np.linalg.norm(v[n:]) / xi_n) ** 2))


def _default_max_step(s: SymbolModel, y0: np.ndarray, diam: float) -> float:
    sp = _speed_scale(s, y0, diam)
    return 0.01 * diam / sp if sp > 0 else np.inf


def _integrate_direction(s: SymbolModel, d: Domain, y0: np.ndarray, direction: int, opts: FlowOptions):
    n = s.n
    diam = d.diameter
    eps_exit = opts.eps_exit_frac * diam
    max_step = opts.max_step or _default_max_step(s, y0, diam)
    xi0 = np.linalg.norm(y0[n:])
    solver = RK45(lambda t, y: s.rhs(y), 0.0, y0, direction * opts.t_max,
                  rtol=opts.rtol, atol=opts.atol, max_step=max_step)
    rho = lambda y: float(signed_membership(d, y[:n]))
    ts, ys, pieces = [0.0], [y0.copy()], []
    r_prev = rho(y0)
    inside = r_prev >= -TOL_BOUNDARY
    exit_time = None
    exit_piece = None
    tangencies = 0
    flag = TRAPPED
    while True:
        if solver.status != "running":
            flag = TRAPPED
            break
        t_old = solver.t
        msg = solver.step()
        if solver.status == "failed":
            raise Trapped(f"integrator failed: {msg}")
        t_new, y_new = solver.t, solver.y.copy()
        interp = solver.dense_output()
        r_new = rho(y_new)
        if inside and r_new < 0:
            f = lambda tt: rho(interp(tt))
            exit_time = _bisect(f, t_old, t_new, r_prev, r_new, opts.tol_boundary)
            exit_piece = len(pieces)
            inside = False
        elif not inside and r_new >= 0:
            tangencies += 1
            inside = True
            exit_time = None
        elif inside and r_new >= 0:
            # a dip below zero between the step endpoints is a grazing contact
            probe = np.linspace(t_old, t_new, 9)[1:-1]
            rp = signed_membership(d, interp(probe)[:n].T)
            if np.min(rp) < TOL_BOUNDARY:
                tangencies += 1
        pieces.append((t_old, t_new, interp))
        ts.append(t_new)
        ys.append(y_new)
        r_prev = r_new
        if not inside and (r_new < -eps_exit or abs(t_new - exit_time) >= opts.eps_time):
            flag = BOUNDARY_EXIT
            break
        xin = np.linalg.norm(y_new[n:])
        if xin > opts.xi_cap * xi0 or xin < xi0 / opts.xi_cap:
            flag = BLOWUP
            break
        if abs(t_new) >= opts.t_max:
            flag = TRAPPED
            break
    if flag == BOUNDARY_EXIT:
        keep = [i for i, t in enumerate(ts) if direction * t < direction * exit_time]
        ts = [ts[i] for i in keep] + [exit_time]
        y_exit = pieces[exit_piece][2](exit_time)
        ys = [ys[i] for i in keep] + [y_exit]
        a, _, fn = pieces[exit_piece]
        pieces = pieces[:exit_piece] + ([(a, exit_time, fn)] if exit_time != a else [])
    return np.array(ts), np.array(ys), pieces, flag, tangencies


def _check_null(s: SymbolModel, p0: PhasePoint, tol: float) -> None:
    val = s.principal(p0.x, p0.xi)
    if abs(val) > tol * np.linalg.norm(p0.xi) ** s.m:
        raise NotNull(f"|p_m| = {abs(val):.3g} at the initial point exceeds the null tolerance")


def _drift(s: SymbolModel, y: np.ndarray) -> float:
    p = s.principal(y[:, : s.n], y[:, s.n :])
    return float(np.max(np.abs(p - p[0]))) if len(p) else 0.0


def integrate_maximal(s: SymbolModel, d: Domain, p0: PhasePoint, opts: FlowOptions | None = None) -> Bicharacteristic:
    """Maximal null bicharacteristic through ``p0`` inside M, both directions."""
    opts = opts or FlowOptions()
    _check_null(s, p0, opts.tol_null)
    if signed_membership(d, p0.x) < -TOL_BOUNDARY:
        raise StartsOutside(f"start point {p0.x.tolist()} lies outside the domain")
    y0 = p0.y
    tf, yf, pf, ff, gf = _integrate_direction(s, d, y0, +1, opts)
    tb, yb, pb, fb, gb = _integrate_direction(s, d, y0, -1, opts)
    t = np.concatenate([tb[::-1], tf[1:]])
    y = np.vstack([yb[::-1], yf[1:]])
    if len(t) > 1 and t[0] == t[1]:
        t, y = t[1:], y[1:]
    if len(t) > 1 and t[-1] == t[-2]:
        t, y = t[:-1], y[:-1]
    pieces = pb + pf
    if not pieces:
        # zero-length curve: both directions leave M at once
        pieces = [(0.0, 0.0, lambda tt, y0=y0: np.repeat(y0[:, None], np.size(tt), 1) if np.ndim(tt) else y0)]
    curve = Bicharacteristic(s, t, y, DenseCurve(pieces), fb, ff, _drift(s, y), gf + gb, d)
    return curve


def integrate_segment(s: SymbolModel, p0: PhasePoint, t_span, opts: FlowOptions | None = None,
                      diam: float = 1.0) -> Bicharacteristic:
    """Integrate on a fixed time interval without any domain (used by beams)."""
    opts = opts or FlowOptions()
    t0, t1 = float(t_span[0]), float(t_span[1])
    y0 = p0.y
    max_step = opts.max_step or _default_max_step(s, y0, diam)
    ts, ys, pieces = [t0], [y0.copy()], []
    solver = RK45(lambda t, y: s.rhs(y), t0, y0, t1, rtol=opts.rtol, atol=opts.atol, max_step=max_step)
    while solver.status == "running":
        t_old = solver.t
        solver.step()
        if solver.status == "failed":
            raise Trapped("integrator failed on a fixed segment")
        pieces.append((t_old, solver.t, solver.dense_output()))
        ts.append(solver.t)
        ys.append(solver.y.copy())
    y = np.array(ys)
    return Bicharacteristic(s, np.array(ts), y, DenseCurve(pieces), SEGMENT, SEGMENT, _drift(s, y), 0, None)


# ------------------------------------------------------------ classification

def _probe(s: SymbolModel, y0: np.ndarray, dt: float, opts: FlowOptions) -> np.ndarray:
    solver = RK45(lambda t, y: s.rhs(y), 0.0, y0, dt, rtol=opts.rtol, atol=opts.atol)
    while solver.status == "running":
        solver.step()
    return solver.y


def classify_null_boundary(s: SymbolModel, d: Domain, pb: PhasePoint, opts: FlowOptions | None = None) -> str:
    """'incoming', 'outgoing', 'both' (touches from outside) or 'neither'
    (grazes from inside)."""
    opts = opts or FlowOptions()
    _check_null(s, pb, opts.tol_null)
    if abs(signed_membership(d, pb.x)) > 1e3 * TOL_BOUNDARY:
        raise StartsOutside(f"point {pb.x.tolist()} is not on the boundary")
    y0 = pb.y
    speed = np.linalg.norm(s.rhs(y0)[: s.n])
    if speed <= 1e-12 * np.linalg.norm(pb.xi) ** (s.m - 1):
        raise GrazingUndecidable("spatial velocity vanishes on the boundary (cusp)")
    dt = opts.probe_frac * d.diameter / speed
    tol = TOL_BOUNDARY
    for scale in (1.0, 10.0):
        rf = signed_membership(d, _probe(s, y0, scale * dt, opts)[: s.n])
        rb = signed_membership(d, _probe(s, y0, -scale * dt, opts)[: s.n])
        if abs(rf) > tol and abs(rb) > tol:
            if rf > 0 > rb:
                return "incoming"
            if rb > 0 > rf:
                return "outgoing"
            return "both" if rf < 0 else "neither"
    raise GrazingUndecidable(f"probes at the boundary point {pb.x.tolist()} stay within tolerance of the boundary")


@dataclass
class ScatterRecord:
    entry: PhasePoint | None
    exit: PhasePoint | None
    travel_time: float
    tangencies: int
    entry_class: str
    exit_class: str
    status: str = "ok"
    involution_error: float = float("nan")

    @property
    def tangency_flag(self) -> bool:
        # endpoints count as two contacts
        return self.tangencies + 2 > 2


def scattering_relation(s: SymbolModel, d: Domain, pb: PhasePoint, opts: FlowOptions | None = None) -> ScatterRecord:
    """alpha_P(pb): the opposite boundary endpoint of the maximal curve through pb."""
    opts = opts or FlowOptions()
    cls = classify_null_boundary(s, d, pb, opts)
    if cls not in ("incoming", "outgoing"):
        raise GrazingUndecidable(f"boundary point is '{cls}', not incoming or outgoing")
    curve = integrate_maximal(s, d, pb, opts)
    if cls == "incoming":
        if curve.end_flag != BOUNDARY_EXIT:
            raise Trapped(f"forward curve ended with '{curve.end_flag}' before leaving M")
        out, tt = curve.end, curve.tau_plus
    else:
        if curve.start_flag != BOUNDARY_EXIT:
            raise Trapped(f"backward curve ended with '{curve.start_flag}' before leaving M")
        out, tt = curve.start, curve.tau_minus
    try:
        exit_cls = classify_null_boundary(s, d, out, opts)
    except GrazingUndecidable:
        exit_cls = "undecided"
    expected = "outgoing" if cls == "incoming" else "incoming"
    status = "ok" if exit_cls == expected else f"exit-class-{exit_cls}"
    return ScatterRecord(pb, out, tt, curve.tangencies, cls, exit_cls, status)


# ------------------------------------------------------------------ sampling

def directional_poly(s: SymbolModel, x, base, direction) -> np.ndarray:
    """Coefficients (highest first) of tau -> p_m(x, base + tau*direction)."""
    x = np.asarray(x, float)
    cvals = s._coef(*x)
    coeffs = np.zeros(s.m + 1)
    for i, (alpha, _) in enumerate(s.principal_terms):
        poly = np.array([1.0])
        for j, k in enumerate(alpha):
            for _ in range(k):
                poly = np.polymul(poly, [direction[j], base[j]])
        coeffs[-len(poly) :] += float(cvals[i]) * poly
    return coeffs


def _real_roots(coeffs: np.ndarray) -> list[float]:
    c = np.trim_zeros(np.asarray(coeffs, float), "f")
    if len(c) < 2:
        return []
    r = np.roots(c)
    real = sorted(float(z.real) for z in r if abs(z.imag) <= 1e-9 * max(1.0, abs(z)))
    out = []
    for v in real:
        if not out or abs(v - out[-1]) > 1e-7 * max(1.0, abs(v)):
            out.append(v)
    return out


def null_boundary_samples(s: SymbolModel, d: Domain, count: int, seed: int | None = 0,
                          covector_scale: float = 1.0, transversal: float = 0.05,
                          max_passes: int = 16) -> list[PhasePoint]:
    """Null covectors over boundary points, built from real roots of the
    normal characteristic polynomial.  Samples whose spatial velocity makes
    an angle with the boundary whose sine is below ``transversal`` are skipped.
    """
    rng = np.random.default_rng(seed)
    out: list[PhasePoint] = []
    for p in range(max_passes):
        if len(out) >= count:
            break
        pts = boundary_points(d, count, rng)
        for i, xb in enumerate(pts):
            if len(out) >= count:
                break
            try:
                nu = inward_conormal(d, xb)
            except Exception:
                continue
            tb = tangent_basis(nu)
            w = rng.normal(size=len(tb)) if len(tb) > 1 else np.array([1.0 if (i + p) % 2 == 0 else -1.0])
            xi_tan = covector_scale * (w @ tb) / np.linalg.norm(w)
            try:
                roots = _real_roots(normal_char_poly(s, xb, xi_tan, nu))
            except CharacteristicBoundary:
                continue
            if not roots:
                continue
            order = roots[(i + p) % len(roots) :] + roots[: (i + p) % len(roots)]
            for tau in order:
                xi = xi_tan + tau * nu
                v = s.rhs(np.concatenate([xb, xi]))[: s.n]
                sp = np.linalg.norm(v)
                if sp == 0 or abs(np.dot(v, nu)) < transversal * sp:
                    continue
                out.append(PhasePoint(xb, xi))
                break
    return out[:count]


def random_null_points(s: SymbolModel, d: Domain, count: int, rng: np.random.Generator,
                       margin: float = 0.05) -> list[PhasePoint]:
    """Interior null phase points with unit covectors."""
    out: list[PhasePoint] = []
    tries = 0
    while len(out) < count:
        tries += 1
        if tries > 200 * count:
            break
        x = rng.uniform(d.bbox[:, 0], d.bbox[:, 1])
        if signed_membership(d, x) < margin * d.diameter * 0.1:
            continue
        base = rng.normal(size=s.n)
        e = rng.normal(size=s.n)
        roots = _real_roots(directional_poly(s, x, base, e))
        if not roots:
            continue
        xi = base + roots[rng.integers(len(roots))] * e
        nrm = np.linalg.norm(xi)
        if nrm < 1e-6:
            continue
        out.append(PhasePoint(x, xi / nrm))
    return out


def scatter_batch(s: SymbolModel, d: Domain, sampling: dict | None = None,
                  opts: FlowOptions | None = None) -> list[ScatterRecord]:
    """One record per null boundary sample; failures are recorded, not raised.

    sampling keys: count (64), seed (0), covector_scale (1.0), transversal (0.05),
    check_involution (True).
    """
    sampling = dict(sampling or {})
    opts = opts or FlowOptions()
    samples = null_boundary_samples(
        s, d, int(sampling.get("count", 64)), sampling.get("seed", 0),
        float(sampling.get("covector_scale", 1.0)), float(sampling.get("transversal", 0.05)),
    )
    records = []
    for pb in samples:
        try:
            rec = scattering_relation(s, d, pb, opts)
            if sampling.get("check_involution", True) and rec.status == "ok":
                back = scattering_relation(s, d, rec.exit, opts)
                scale = max(1.0, np.linalg.norm(pb.xi))
                rec.involution_error = float(max(np.linalg.norm(back.exit.x - pb.x),
                                                 np.linalg.norm(back.exit.xi - pb.xi) / scale))
        except Trapped as exc:
            rec = ScatterRecord(pb, None, float("nan"), 0, "", "", f"Trapped: {exc}")
        except GrazingUndecidable as exc:
            rec = ScatterRecord(pb, None, float("nan"), 0, "", "", f"GrazingUndecidable: {exc}")
        records.append(rec)
    return records


__all__ = [
    "PhasePoint",
    "FlowOptions",
    "Bicharacteristic",
    "ScatterRecord",
    "integrate_maximal",
    "integrate_segment",
    "classify_null_boundary",
    "scattering_relation",
    "scatter_batch",
    "null_boundary_samples",
    "random_null_points",
    "replace",
]
