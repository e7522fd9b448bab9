"""The acceptance suite.  Each check returns a ``Check`` with the measured
values, the pass/fail verdict and the wall time; the test suite and the
``verify`` command share these functions."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .beams import (GALLERY, adjoint_frame, beam_identities, gallery_frame, min_eig_im, norm_study,
                    on_curve_prediction, pairing_limit, residual_study)
from .boundary import char_roots, collar_study, elliptic_quasimode
from .exprfield import Field
from .flow import PhasePoint, integrate_maximal, integrate_segment, random_null_points, scatter_batch
from .geometry import builtin_domain, tube_quadrature
from .symbols import builtin_symbol
from .transforms import RayWeight, curve_integral, gauge_null_check, subprincipal_holonomy, transport_cauchy_solve
from .wavefront import frame_evaluator, wavefront_scan


@dataclass
class Check:
    number: int
    name: str
    passed: bool
    measured: dict
    budget: float
    seconds: float = 0.0
    fits: list = field(default_factory=list)

    @property
    def within_budget(self) -> bool:
        return self.seconds <= self.budget

    def line(self) -> str:
        parts = ", ".join(f"{k}={_fmt(v)}" for k, v in self.measured.items())
        verdict = "PASS" if self.passed else "FAIL"
        return f"[{verdict}] {self.number:2d} {self.name}: {parts} ({self.seconds:.1f}s / {self.budget:.0f}s)"

    def to_dict(self) -> dict:
        return {"criterion": self.number, "name": self.name, "passed": self.passed,
                "measured": {k: _jsonable(v) for k, v in self.measured.items()},
                "seconds": self.seconds, "budget_seconds": self.budget, "fits": self.fits}


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (float, np.floating)):
        return f"{v:.4g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    if isinstance(v, complex):
        return [v.real, v.imag]
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


# -------------------------------------------------------------- criteria

def conservation(count: int = 100, seed: int = 0) -> Check:
    """|p_m| drift per unit time along random maximal null curves."""
    rng = np.random.default_rng(seed)
    cases = [
        (builtin_symbol("wave1d"), builtin_domain("disk")),
        (builtin_symbol("tricomi"), builtin_domain("disk", {"center": [0.0, -1.5], "radius": 1.0})),
        (builtin_symbol("transport", {"L": ["1", "0.5*sin(x1)"]}), builtin_domain("box2d")),
    ]
    worst, curves = 0.0, 0
    per = [count // 3 + (1 if k < count % 3 else 0) for k in range(3)]
    for (s, d), k in zip(cases, per):
        for p0 in random_null_points(s, d, k, rng):
            g = integrate_maximal(s, d, p0)
            span = max(g.t[-1] - g.t[0], 1e-12)
            worst = max(worst, g.drift / max(span, 1.0))
            curves += 1
    return Check(1, "conservation", curves == count and worst <= 1e-8,
                 {"curves": curves, "max_drift_per_time": worst}, 10)


def scattering_involution(count: int = 64) -> Check:
    cases = {
        "wave1d/disk": (builtin_symbol("wave1d"), builtin_domain("disk")),
        "tricomi/disk": (builtin_symbol("tricomi"), builtin_domain("disk", {"center": [0.0, -1.5], "radius": 1.0})),
        "transport/box": (builtin_symbol("transport", {"L": ["1", "0.5*sin(x1)"]}),
                          builtin_domain("box2d", {"lo": [0, 0], "hi": [1, 1]})),
    }
    measured, ok = {}, True
    for name, (s, d) in cases.items():
        recs = scatter_batch(s, d, {"count": count, "seed": 1})
        good = [r for r in recs if r.status == "ok"]
        err = max((r.involution_error for r in good), default=float("inf"))
        measured[f"{name} samples"] = len(good)
        measured[f"{name} error"] = err
        ok &= len(good) == count and err <= 1e-7
    return Check(2, "scattering involution", ok, measured, 30)


def tricomi_oracle() -> Check:
    s = builtin_symbol("tricomi")
    # start at the closed-form point for t = -1 so the segment crosses the cusp at t = 0
    g = integrate_segment(s, PhasePoint([2 / 3, -1], [1, 1]), (-1.0, 1.0))
    t = np.linspace(-1, 1, 401)
    y = g.dense(t)
    exact = np.column_stack([-(2 / 3) * t**3, -t * t, np.ones_like(t), -t])
    err = float(np.max(np.abs(y - exact)))
    return Check(3, "tricomi closed form through the cusp", err <= 1e-9, {"max_error": err}, 5)


def riccati_closed_form() -> Check:
    f = gallery_frame("wave1d_ray")
    t = np.linspace(0, 1, 201)
    H = f.ric(t)
    exact = np.zeros_like(H)
    exact[:, 0, 0] = 1j / (1 - 2j * t)
    exact[:, 1, 1] = 1j / (1 + 2j * t)
    err = float(np.max(np.abs(H - exact)))
    lam = {name: float(np.min(min_eig_im(gallery_frame(name).H))) for name in GALLERY}
    ok = err <= 1e-8 and min(lam.values()) > 0
    return Check(4, "Riccati closed form", ok, {"max_error": err, "min_eig_im_H": min(lam.values())}, 5)


def determinant_identities() -> Check:
    worst = {name: beam_identities(gallery_frame(name), raise_on_fail=False).worst for name in GALLERY}
    w = max(worst.values())
    return Check(5, "determinant identities", w <= 1e-6, {"worst_relative_error": w,
                                                         "frames": len(worst)}, 10)


CONCENTRATION_WEIGHT = "(1-(x2-x1)^2)^4"


def concentration(h: float = 0.01, c0_scale: float = 1.0) -> Check:
    """Pairing h^{-(n+1)/2} <q u, v> over c0 * int q; ``c0_scale`` is the mutation hook."""
    f = gallery_frame("wave1d_chord")
    fv = adjoint_frame(f, f.s)
    curve = f.gamma.dense(np.linspace(f.T0, f.T1, 200))[:, : f.n]
    quad = tube_quadrature(None, curve, 6 * np.sqrt(h / f.lam_min), np.sqrt(h) / 4)
    res = pairing_limit(f, fv, Field(CONCENTRATION_WEIGHT, 2), h, quad, c0_scale)
    ratio = res.ratio.real
    c0_expected = np.pi**1.5 / np.sqrt(2)
    ok = 0.95 <= ratio <= 1.05 and abs(res.c0 / c0_scale - c0_expected) <= 1e-12 * c0_expected
    return Check(6, "concentration limit", ok, {"ratio": ratio, "c0": res.c0, "h": h}, 300)


NORM_HS = [0.1, 0.05, 0.025, 0.0125]


def norm_scaling() -> Check:
    f = gallery_frame("wave1d_long")
    norms, expo = norm_study(f, NORM_HS, (0.0, 0.5), 2.5)
    target = (f.n + 1) / 4
    return Check(7, "beam norm scaling", abs(expo - target) <= 0.05, {"exponent": expo, "target": target},
                 120, fits=[{"h": NORM_HS, "norm": norms}])


def on_curve_values(h: float = 1e-3) -> Check:
    """|u_h(x(1))| against h^{1/2} 0.4472/1.9817 (as stated) and against the
    stationary-phase value h^{1/2} c_gamma a0 (reported only)."""
    f = gallery_frame("wave1d_ray")
    x1 = f.state(1.0)[0][0]
    u = abs(f.evaluate(x1, h))
    stated = np.sqrt(h) * 0.4472 / 1.9817
    ratio = u / stated
    stationary = u / abs(on_curve_prediction(f, 1.0, h))
    return Check(8, "on-curve values", 0.9 <= ratio <= 1.1,
                 {"ratio_to_stated": ratio, "ratio_to_stationary_phase": stationary}, 60)


def _laplace_collar():
    box = builtin_domain("box2d", {"lo": [-2, 0], "hi": [2, 1]})
    qm = elliptic_quasimode(builtin_symbol("laplace"), box, [0, 0], [1, 0], "exp(-x1^2/0.3)")
    return collar_study(qm, NORM_HS, 1.8)


_COLLAR_CACHE: dict = {}


def laplace_collar():
    if "laplace" not in _COLLAR_CACHE:
        _COLLAR_CACHE["laplace"] = _laplace_collar()
    return _COLLAR_CACHE["laplace"]


def residual_orders() -> Check:
    fw = gallery_frame("wave1d_var_hf")
    rw = residual_study(fw.s, fw, None, [0.02, 0.01, 0.005], (0.17, 0.23), widths=5)
    ft = gallery_frame("tricomi_cusp_focus")
    rt = residual_study(ft.s, ft, None, [1e-3, 5e-4, 2.5e-4], (-0.15, 0.15), widths=5)
    rc = laplace_collar()
    ok = rw.order >= 1.2 and rt.order >= 1.0 and rc.residual_order >= 1.0
    fits = [{"study": "wave1d", **{k: [r[k] for r in rw.table()] for k in ("h", "ratio")}},
            {"study": "tricomi", **{k: [r[k] for r in rt.table()] for k in ("h", "ratio")}},
            {"study": "collar", "h": rc.hs, "ratio": rc.residual}]
    return Check(9, "residual orders", ok, {"wave1d": rw.order, "tricomi_cusp": rt.order,
                                            "elliptic_collar": rc.residual_order}, 600, fits=fits)


def boundary_roots() -> Check:
    disk = builtin_domain("disk")
    expect = {"wave1d": ([-1, 1], "hyperbolic"), "laplace": ([-1j, 1j], "elliptic"),
              "quartic": ([-1, -1j, 1j, 1], "mixed")}
    ok, measured = True, {}
    for name, (roots, cls) in expect.items():
        rep = char_roots(builtin_symbol(name), disk, [1, 0], [0, 1])
        got = sorted(rep.roots, key=lambda z: (z.real, z.imag))
        want = sorted(np.asarray(roots, dtype=complex), key=lambda z: (z.real, z.imag))
        err = float(np.max(np.abs(np.array(got) - np.array(want)))) if len(got) == len(want) else np.inf
        good = err <= 1e-10 and rep.classification == cls and rep.conjugate_defect() <= 1e-7
        measured[name] = rep.classification
        measured[f"{name} root_error"] = err
        ok &= good
    return Check(10, "boundary roots", ok, measured, 5)


def elliptic_norms() -> Check:
    st = laplace_collar()
    ok = abs(st.l2_exponent - 0.5) <= 0.05 and abs(st.h1_ratio_exponent + 1) <= 0.05
    return Check(11, "elliptic quasimode norms", ok,
                 {"l2_exponent": st.l2_exponent, "h1_over_l2_exponent": st.h1_ratio_exponent}, 120,
                 fits=[{"h": st.hs, "l2": st.l2, "h1": st.h1}])


PSI = "x1*x2 + 0.5*sin(x1) + x2^2"
A_OF_PSI = ["x2 + 0.5*cos(x1)", "x1 + 2*x2"]


def gauge_holonomy(count: int = 20, seed: int = 3) -> Check:
    rng = np.random.default_rng(seed)
    disk = builtin_domain("disk")
    wave = builtin_symbol("wave1d")
    starts = [PhasePoint(p.x, p.xi) for p in random_null_points(wave, disk, count, rng)]
    worst_gauge = 0.0
    for p0 in starts:
        a, b, c, e = (float(v) for v in rng.uniform(-2, 2, 4))
        phi = f"(1 - x1^2 - x2^2)*({a!r}*sin({b!r}*x1 + {c!r}*x2) + {e!r}*x1*x2 + 1)"
        g = integrate_maximal(wave, disk, p0)
        worst_gauge = max(worst_gauge, gauge_null_check(phi, wave, g))
    sm = builtin_symbol("magneticwave", {"a": A_OF_PSI})
    s0 = builtin_symbol("magneticwave", {"a": ["0", "0"]})
    psi = Field(PSI, 2)
    worst_hol = 0.0
    for p0 in starts[:8]:
        g = integrate_maximal(sm, disk, p0)
        hol = subprincipal_holonomy(sm, s0, g)
        dpsi = float(psi(g.x[-1]) - psi(g.x[0]))
        worst_hol = max(worst_hol, abs(hol.value - np.exp(1j * dpsi)))
    ok = worst_gauge <= 1e-7 and worst_hol <= 1e-8
    return Check(12, "gauge and holonomy", ok, {"gauge_max": worst_gauge, "holonomy_error": worst_hol}, 30)


def transport_and_additivity(seed: int = 5) -> Check:
    s = builtin_symbol("transport", {"L": ["1", "0"], "V": "1"})
    box = builtin_domain("box2d", {"lo": [0, 0], "hi": [1, 1]})
    # the outflow face away from the rounded corners
    pts = np.column_stack([np.ones(21), np.linspace(0.25, 0.75, 21)])
    sol = transport_cauchy_solve(s, box, "1", pts)
    trace_err = float(np.max(np.abs(sol.values - np.exp(-1j))))
    rng = np.random.default_rng(seed)
    wave = builtin_symbol("wave1d")
    disk = builtin_domain("disk")
    q = RayWeight.from_config({"degree": 1, "terms": [{"alpha": [1, 0], "coeff": "x2 + 1"},
                                                       {"alpha": [0, 1], "coeff": "sin(x1)"}]}, 2)
    worst = 0.0
    for p0 in random_null_points(wave, disk, 5, rng):
        g = integrate_maximal(wave, disk, p0)
        ts = g.t[0] + rng.uniform(0.1, 0.9) * (g.t[-1] - g.t[0])
        whole = curve_integral(q, g)
        parts = curve_integral(q, g, None, ts) + curve_integral(q, g, ts, None)
        worst = max(worst, abs(whole - parts))
    ok = trace_err <= 1e-10 and worst <= 1e-10
    return Check(13, "transport solver and additivity", ok, {"trace_error": trace_err, "split_error": worst}, 10)


FBI_HS = [0.1, 0.05, 0.025]


def wavefront_localization() -> Check:
    f = gallery_frame("wave1d_chord")
    scan = wavefront_scan(frame_evaluator(f), f, {"spatial": 0.2}, FBI_HS)
    rs, rc = scan.ratios("spatial"), scan.ratios("covector")
    slope_s, slope_c = scan.slope("spatial"), scan.slope("covector")
    monotone = bool(np.all(np.diff(rs) > 0) and np.all(np.diff(rc) > 0))
    ok = monotone and rs[-1] > 1e3 and rc[-1] > 1e2 and min(slope_s, slope_c) > 3
    return Check(14, "wavefront localization", ok,
                 {"monotone": monotone, "spatial_ratio": float(rs[-1]), "covector_ratio": float(rc[-1]),
                  "spatial_slope": slope_s, "covector_slope": slope_c, "on_exponent": scan.slope("on")}, 600,
                 fits=[{"h": FBI_HS, "spatial_ratio": rs.tolist(), "covector_ratio": rc.tolist()}])


CRITERIA: dict[int, Callable[[], Check]] = {
    1: conservation,
    2: scattering_involution,
    3: tricomi_oracle,
    4: riccati_closed_form,
    5: determinant_identities,
    6: concentration,
    7: norm_scaling,
    8: on_curve_values,
    9: residual_orders,
    10: boundary_roots,
    11: elliptic_norms,
    12: gauge_holonomy,
    13: transport_and_additivity,
    14: wavefront_localization,
}


def run_check(number: int, **kw) -> Check:
    t0 = time.perf_counter()
    chk = CRITERIA[number](**kw)
    chk.seconds = time.perf_counter() - t0
    return chk


def ball_collar_study():
    """Extra study for the full suite: wave2d elliptic quasimode on the unit ball."""
    qm = elliptic_quasimode(builtin_symbol("wave2d"), builtin_domain("ball"), [1, 0, 0], [0, 1, 0],
                            "exp(-(x2^2+x3^2)/0.1)")
    return collar_study(qm, [0.1, 0.05, 0.025], 0.6)


def run_suite(suite: str = "fast", only=None, log: Callable[[str], None] | None = None) -> list[Check]:
    if suite not in ("fast", "full"):
        raise ValueError(f"unknown suite '{suite}'")
    out = []
    for k in sorted(only or CRITERIA):
        chk = run_check(k)
        if log:
            log(chk.line())
        out.append(chk)
    if suite == "full" and not only:
        t0 = time.perf_counter()
        st = ball_collar_study()
        chk = Check(15, "supplementary: wave2d ball collar residual", st.residual_order >= 1.0,
                    {"residual_order": st.residual_order, "l2_exponent": st.l2_exponent}, 600,
                    fits=[{"h": st.hs, "residual": st.residual, "l2": st.l2}])
        chk.seconds = time.perf_counter() - t0
        if log:
            log(chk.line())
        out.append(chk)
    return out
