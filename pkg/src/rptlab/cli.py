"""Command line: ``rptlab <task> --config FILE [--out DIR] [--seed N]``.

Exit codes: 0 ok, 1 verification failure, 2 configuration error,
3 numerical failure (Trapped, ImaginaryPartLoss, ...).
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np
from jsonschema import Draft202012Validator

from . import __version__
from .errors import ConfigError, RptError, VerificationFailure

log = logging.getLogger("rptlab")

TASKS = ("flow", "scatter", "beam", "raytransform", "holonomy", "boundary-roots", "elliptic-beam", "wavefront",
         "verify")

# ------------------------------------------------------------------ schema

_VEC = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 3}
_EXPR = {"type": "string", "minLength": 1}
_CEXPR = {"oneOf": [_EXPR, {"type": "object", "properties": {"re": _EXPR, "im": _EXPR},
                            "additionalProperties": False}]}
_TERM = {"type": "object", "required": ["alpha", "coeff"], "additionalProperties": False,
         "properties": {"alpha": {"type": "array", "items": {"type": "integer", "minimum": 0}}, "coeff": _CEXPR}}
_OPERATOR = {
    "oneOf": [
        {"type": "object", "required": ["name"], "additionalProperties": False,
         "properties": {"name": {"type": "string"}, "params": {"type": "object"}}},
        {"type": "object", "required": ["order", "principal"], "additionalProperties": False,
         "properties": {"name": {"type": "string"}, "n": {"type": "integer"},
                        "order": {"type": "integer", "minimum": 1},
                        "principal": {"type": "array", "items": _TERM, "minItems": 1},
                        "p_m_minus_1": {"type": "array", "items": _TERM}, "V": _CEXPR}},
    ]
}
_DOMAIN = {
    "oneOf": [
        {"type": "object", "required": ["name"], "additionalProperties": False,
         "properties": {"name": {"type": "string"}, "params": {"type": "object"}}},
        {"type": "object", "required": ["rho", "bbox"], "additionalProperties": False,
         "properties": {"rho": _EXPR, "bbox": {"type": "array", "items": {
             "type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}}}},
    ]
}
_PHASE = {"type": "object", "required": ["x", "xi"], "additionalProperties": False,
          "properties": {"x": _VEC, "xi": _VEC}}
_HS = {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0, "maximum": 1}, "minItems": 1}
_POS = {"type": "number", "exclusiveMinimum": 0}
_COUNT = {"type": "integer", "minimum": 1}
_WEIGHT = {"type": "object", "required": ["degree"], "additionalProperties": False,
           "properties": {"degree": {"type": "integer", "minimum": 0}, "terms": {"type": "array", "items": _TERM}}}
_CURVES = {"type": "array", "items": _PHASE, "minItems": 1}

TASK_PARAMS = {
    "flow": {"start": _PHASE, "samples": _COUNT, "t_max": _POS, "rtol": _POS},
    "scatter": {"count": _COUNT, "seed": {"type": "integer"}, "covector_scale": _POS, "transversal": _POS,
                "check_involution": {"type": "boolean"}},
    "beam": {"start": _PHASE, "T": _POS, "t0": {"type": "number"}, "hs": _HS,
             "window": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
             "radius": _POS, "residual": {"type": "boolean"}, "widths": _POS, "samples": _COUNT},
    "raytransform": {"weight": _WEIGHT, "curves": _CURVES, "count": _COUNT, "seed": {"type": "integer"},
                     "reference_operator": _OPERATOR},
    "holonomy": {"reference_operator": _OPERATOR, "curves": _CURVES, "count": _COUNT, "seed": {"type": "integer"}},
    "boundary-roots": {"points": {"type": "array", "minItems": 1, "items": {
        "type": "object", "required": ["x_b", "xi_tan"], "additionalProperties": False,
        "properties": {"x_b": _VEC, "xi_tan": _VEC}}}, "count": _COUNT, "seed": {"type": "integer"}},
    "elliptic-beam": {"x_b": _VEC, "xi_tan": _VEC, "eta": _EXPR, "hs": _HS, "half_width": _POS,
                      "depth": _POS, "root_index": {"type": "integer", "minimum": 0},
                      "residual": {"type": "boolean"}},
    "wavefront": {"start": _PHASE, "T": _POS, "t0": {"type": "number"}, "hs": _HS, "spatial_offset": _POS,
                  "window_radius": _POS,
                  "fractions": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0,
                                                           "exclusiveMaximum": 1}, "minItems": 1}},
    "verify": {"suite": {"enum": ["fast", "full"]},
               "criteria": {"type": "array", "items": {"type": "integer", "minimum": 1, "maximum": 14}}},
}
TASK_REQUIRED = {
    "flow": ["start"], "beam": ["start", "T"], "raytransform": ["weight"], "holonomy": ["reference_operator"],
    "elliptic-beam": ["x_b", "xi_tan", "eta"], "wavefront": ["start", "T"],
}
NEEDS_OPERATOR = set(TASKS) - {"verify"}
NEEDS_DOMAIN = {"flow", "scatter", "raytransform", "holonomy", "boundary-roots", "elliptic-beam"}


def config_schema(task: str) -> dict:
    params = {"type": "object", "additionalProperties": False, "properties": TASK_PARAMS[task],
              "required": TASK_REQUIRED.get(task, [])}
    required = (["operator"] if task in NEEDS_OPERATOR else []) + (["domain"] if task in NEEDS_DOMAIN else [])
    if TASK_REQUIRED.get(task):
        required.append("params")
    return {
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "type": "object",
        "additionalProperties": False,
        "required": required,
        "properties": {"task": {"enum": list(TASKS)}, "operator": _OPERATOR, "domain": _DOMAIN,
                       "params": params, "output": {"type": "string"}},
    }


def _pointer(path) -> str:
    return "".join(f"/{p}" for p in path)


def validate_config(cfg, task: str) -> dict:
    if not isinstance(cfg, dict):
        raise ConfigError("configuration must be a JSON object", "")
    errors = sorted(Draft202012Validator(config_schema(task)).iter_errors(cfg),
                    key=lambda e: (len(e.absolute_path), list(map(str, e.absolute_path))))
    if errors:
        # report the deepest error; for oneOf failures dig into the closest branch
        err = max(errors, key=lambda e: len(e.absolute_path))
        while err.context:
            err = max(err.context, key=lambda e: len(e.absolute_path))
        raise ConfigError(err.message, _pointer(err.absolute_path))
    if "task" in cfg and cfg["task"] != task:
        raise ConfigError(f"config declares task '{cfg['task']}' but '{task}' was requested", "/task")
    return cfg


def load_config(path: Path, task: str) -> tuple[dict, bytes]:
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", "") from None
    try:
        cfg = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}", "") from None
    return validate_config(cfg, task), raw


# ------------------------------------------------------------------ output

def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".15g")
    return str(v)


def write_csv(path: Path, rows: list[dict]) -> None:
    fields: list[str] = []
    for r in rows:
        for k in r:
            if k not in fields:
                fields.append(k)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _cell(v) for k, v in r.items()})


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_default) + "\n", encoding="utf-8")


def _default(o):
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(type(o).__name__)


def _vec(prefix: str, v) -> dict:
    return {f"{prefix}{j + 1}": float(x) for j, x in enumerate(v)}


# ------------------------------------------------------------------ tasks

def _model(cfg):
    from .geometry import domain_from_config
    from .symbols import symbol_from_config

    s = symbol_from_config(cfg["operator"]) if "operator" in cfg else None
    d = domain_from_config(cfg["domain"]) if "domain" in cfg else None
    if s is not None and d is not None and s.n != d.n:
        raise ConfigError(f"operator dimension {s.n} differs from domain dimension {d.n}", "/domain")
    return s, d


def _curves(s, d, p: dict, seed: int):
    from .flow import PhasePoint, integrate_maximal, null_boundary_samples

    if "curves" in p:
        starts = [PhasePoint(c["x"], c["xi"]) for c in p["curves"]]
    else:
        starts = null_boundary_samples(s, d, int(p.get("count", 16)), seed)
    return [integrate_maximal(s, d, p0) for p0 in starts]


def _curve_row(k: int, g) -> dict:
    row = {"curve": k}
    row.update(_vec("entry_x", g.x[0]))
    row.update(_vec("entry_xi", g.xi[0]))
    row.update(_vec("exit_x", g.x[-1]))
    row.update(_vec("exit_xi", g.xi[-1]))
    row["travel_time"] = float(g.t[-1] - g.t[0])
    return row


def task_flow(cfg, out: Path, seed: int) -> dict:
    from .flow import FlowOptions, PhasePoint, integrate_maximal

    s, d = _model(cfg)
    p = cfg.get("params", {})
    opts = FlowOptions(t_max=p.get("t_max", 100.0), rtol=p.get("rtol", 1e-10))
    g = integrate_maximal(s, d, PhasePoint(p["start"]["x"], p["start"]["xi"]), opts)
    t = np.linspace(g.t[0], g.t[-1], int(p.get("samples", 201)))
    y = g.dense(t)
    pm = s.principal(y[:, : s.n], y[:, s.n :])
    rows = [{"t": ti, **_vec("x", yi[: s.n]), **_vec("xi", yi[s.n :]), "p": pv} for ti, yi, pv in zip(t, y, pm)]
    write_csv(out / "curve.csv", rows)
    summary = {"tau_minus": g.tau_minus, "tau_plus": g.tau_plus, "start_flag": g.start_flag,
               "end_flag": g.end_flag, "drift": g.drift, "tangencies": g.tangencies, "maximal": g.is_maximal}
    write_json(out / "summary.json", summary)
    return {"files": ["curve.csv", "summary.json"], **summary}


def task_scatter(cfg, out: Path, seed: int) -> dict:
    from .flow import scatter_batch

    s, d = _model(cfg)
    p = dict(cfg.get("params", {}))
    p["seed"] = seed if seed is not None else p.get("seed", 0)
    recs = scatter_batch(s, d, p)
    rows = []
    for r in recs:
        row = {**_vec("entry_x", r.entry.x), **_vec("entry_xi", r.entry.xi)}
        ex = r.exit
        row.update(_vec("exit_x", ex.x if ex else [np.nan] * s.n))
        row.update(_vec("exit_xi", ex.xi if ex else [np.nan] * s.n))
        row.update(travel_time=r.travel_time, tangency=r.tangency_flag, entry_class=r.entry_class,
                   exit_class=r.exit_class, involution_error=r.involution_error, status=r.status)
        rows.append(row)
    write_csv(out / "scatter.csv", rows)
    ok = [r for r in recs if r.status == "ok"]
    return {"files": ["scatter.csv"], "records": len(recs), "ok": len(ok),
            "max_involution_error": max((r.involution_error for r in ok), default=float("nan"))}


def task_beam(cfg, out: Path, seed: int) -> dict:
    from .beams import build_frame, min_eig_im, norm_study, residual_study
    from .flow import PhasePoint

    s, d = _model(cfg)
    p = cfg.get("params", {})
    f = build_frame(s, PhasePoint(p["start"]["x"], p["start"]["xi"]), p["T"], p.get("t0", 0.0))
    t = np.linspace(f.T0, f.T1, int(p.get("samples", 101)))
    x, xi, H, a0 = f.state(t)
    lam = min_eig_im(H)
    rows = [{"t": ti, **_vec("x", xk), **_vec("xi", kk), "min_eig_im_H": lk, "a0_re": ak.real, "a0_im": ak.imag}
            for ti, xk, kk, lk, ak in zip(t, x, xi, lam, a0)]
    write_csv(out / "frame.csv", rows)
    files = ["frame.csv"]
    result: dict = {"lam_min": f.lam_min}
    hs = p.get("hs")
    if hs:
        window = p.get("window", [f.T0, f.T1])
        norms, expo = norm_study(f, hs, window, p.get("radius", 1.0), d)
        write_csv(out / "norms.csv", [{"h": h, "norm": nv} for h, nv in zip(hs, norms)])
        files.append("norms.csv")
        result["norm_exponent"] = expo
        if p.get("residual", False):
            rs = residual_study(s, f, d, hs, window, p.get("widths", 6.0))
            write_csv(out / "residual.csv", rs.table())
            files.append("residual.csv")
            result["residual_order"] = rs.order
    return {"files": files, **result}


def task_raytransform(cfg, out: Path, seed: int) -> dict:
    from .symbols import symbol_from_config
    from .transforms import RayWeight, ray_transform, subprincipal_holonomy

    s, d = _model(cfg)
    p = cfg.get("params", {})
    q = RayWeight.from_config(p["weight"], s.n)
    ref = symbol_from_config(p["reference_operator"]) if "reference_operator" in p else None
    rows = []
    for k, g in enumerate(_curves(s, d, p, seed if seed is not None else p.get("seed", 0))):
        v = ray_transform(q, g)
        row = {**_curve_row(k, g), "value_re": v.real, "value_im": v.imag}
        if ref is not None:
            row["holonomy_angle"] = subprincipal_holonomy(s, ref, g).angle
        rows.append(row)
    write_csv(out / "raytransform.csv", rows)
    return {"files": ["raytransform.csv"], "curves": len(rows)}


def task_holonomy(cfg, out: Path, seed: int) -> dict:
    from .symbols import symbol_from_config
    from .transforms import subprincipal_holonomy

    s, d = _model(cfg)
    p = cfg.get("params", {})
    ref = symbol_from_config(p["reference_operator"])
    rows = []
    for k, g in enumerate(_curves(s, d, p, seed if seed is not None else p.get("seed", 0))):
        hol = subprincipal_holonomy(s, ref, g)
        rows.append({**_curve_row(k, g), **hol.as_row()})
    write_csv(out / "holonomy.csv", rows)
    return {"files": ["holonomy.csv"], "curves": len(rows)}


def task_boundary_roots(cfg, out: Path, seed: int) -> dict:
    from .boundary import char_roots
    from .geometry import boundary_points, inward_conormal, tangent_basis

    s, d = _model(cfg)
    p = cfg.get("params", {})
    if "points" in p:
        pts = [(np.asarray(q["x_b"], float), np.asarray(q["xi_tan"], float)) for q in p["points"]]
    else:
        rng = np.random.default_rng(seed if seed is not None else p.get("seed", 0))
        pts = []
        for xb in boundary_points(d, int(p.get("count", 16)), rng):
            tb = tangent_basis(inward_conormal(d, xb))
            w = rng.normal(size=len(tb))
            pts.append((xb, (w @ tb) / np.linalg.norm(w)))
    rows, classes = [], {}
    for xb, xt in pts:
        rep = char_roots(s, d, xb, xt)
        rows.extend(rep.rows())
        classes[rep.classification] = classes.get(rep.classification, 0) + 1
    write_csv(out / "roots.csv", rows)
    return {"files": ["roots.csv"], "classes": classes}


def task_elliptic_beam(cfg, out: Path, seed: int) -> dict:
    from .boundary import collar_study, elliptic_quasimode

    s, d = _model(cfg)
    p = cfg.get("params", {})
    qm = elliptic_quasimode(s, d, p["x_b"], p["xi_tan"], p["eta"], p.get("depth", 0.5), p.get("root_index", 0))
    hs = p.get("hs", [0.1, 0.05, 0.025])
    st = collar_study(qm, hs, p.get("half_width", 0.5), p.get("residual", True))
    rows = [{"h": h, "l2": a, "h1": b, **({"residual": r} if st.residual else {})}
            for h, a, b, r in zip(st.hs, st.l2, st.h1, st.residual or [None] * len(hs))]
    write_csv(out / "collar.csv", rows)
    summary = {"root_re": qm.z0.real, "root_im": qm.z0.imag, "l2_exponent": st.l2_exponent,
               "h1_ratio_exponent": st.h1_ratio_exponent, "residual_order": st.residual_order}
    write_json(out / "elliptic.json", summary)
    return {"files": ["collar.csv", "elliptic.json"], **summary}


def task_wavefront(cfg, out: Path, seed: int) -> dict:
    from .beams import build_frame
    from .flow import PhasePoint
    from .wavefront import frame_evaluator, wavefront_scan

    s, _ = _model(cfg)
    p = cfg.get("params", {})
    f = build_frame(s, PhasePoint(p["start"]["x"], p["start"]["xi"]), p["T"], p.get("t0", 0.0))
    scan = wavefront_scan(frame_evaluator(f), f, {"spatial": p.get("spatial_offset", 0.2)},
                          p.get("hs", [0.1, 0.05, 0.025]), p.get("fractions", [0.3, 0.5, 0.7]),
                          p.get("window_radius", 1.0))
    write_csv(out / "fbi.csv", scan.csv_rows())
    write_csv(out / "ratios.csv", scan.ratio_table())
    return {"files": ["fbi.csv", "ratios.csv"], "spatial_slope": scan.slope("spatial"),
            "covector_slope": scan.slope("covector"), "on_exponent": scan.slope("on")}


def task_verify(cfg, out: Path, seed: int, figures: bool = False, suite: str | None = None) -> dict:
    from .acceptance import run_suite

    p = cfg.get("params", {})
    suite = suite or p.get("suite", "fast")
    checks = run_suite(suite, p.get("criteria"), log=print)
    report = {"suite": suite, "passed": all(c.passed for c in checks), "criteria": [c.to_dict() for c in checks]}
    write_json(out / "report.json", report)
    write_csv(out / "report.csv", [{"criterion": c.number, "name": c.name, "passed": c.passed,
                                    "seconds": c.seconds, "budget_seconds": c.budget} for c in checks])
    files = ["report.csv", "report.json"]
    if figures:
        files += render_figures(checks, out)
    failed = [c.number for c in checks if not c.passed]
    result = {"files": files, "failed": failed}
    if failed:
        exc = VerificationFailure(f"criteria {failed} failed")
        exc.result = result
        raise exc
    return result


def render_figures(checks, out: Path) -> list[str]:
    """Log-log plots of every fit series; needs the optional matplotlib extra."""
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        raise ConfigError("--figures needs matplotlib (pip install 'rptlab[plots]')", "") from None
    names = []
    for c in checks:
        for k, fit in enumerate(c.fits):
            hs = fit.get("h")
            series = {key: v for key, v in fit.items() if key not in ("h", "study") and isinstance(v, list)}
            if not hs or not series:
                continue
            fig, ax = plt.subplots(figsize=(4.5, 3.5))
            for key, vals in series.items():
                ax.loglog(hs, np.abs(np.asarray(vals, dtype=float)), "o-", label=key)
            ax.set_xlabel("h")
            ax.set_title(f"{c.number}: {c.name}" + (f" ({fit['study']})" if "study" in fit else ""), fontsize=9)
            ax.legend(fontsize=8)
            fig.tight_layout()
            name = f"criterion{c.number:02d}_{k}.png"
            fig.savefig(out / name, dpi=120)
            plt.close(fig)
            names.append(name)
    return names


HANDLERS = {
    "flow": task_flow,
    "scatter": task_scatter,
    "beam": task_beam,
    "raytransform": task_raytransform,
    "holonomy": task_holonomy,
    "boundary-roots": task_boundary_roots,
    "elliptic-beam": task_elliptic_beam,
    "wavefront": task_wavefront,
}


# ------------------------------------------------------------------ driver

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rptlab", description=__doc__.splitlines()[0])
    ap.add_argument("task", choices=TASKS)
    ap.add_argument("--config", type=Path, help="JSON scenario file (optional for verify)")
    ap.add_argument("--out", type=Path, help="output directory (default: config 'output' or ./rptlab-out)")
    ap.add_argument("--seed", type=int, default=None, help="sampling layout seed")
    ap.add_argument("--suite", choices=("fast", "full"), help="verify only: acceptance suite")
    ap.add_argument("--figures", action="store_true", help="verify only: render log-log figures (needs matplotlib)")
    ap.add_argument("-v", "--verbose", action="store_true")
    ap.add_argument("--version", action="version", version=f"rptlab {__version__}")
    return ap


def run(args: argparse.Namespace) -> int:
    t0 = time.perf_counter()
    if args.config is None:
        if args.task != "verify":
            raise ConfigError("--config is required for this task", "")
        cfg, raw = {}, b"{}"
    else:
        cfg, raw = load_config(args.config, args.task)
    out = args.out or Path(cfg.get("output", "rptlab-out"))
    out.mkdir(parents=True, exist_ok=True)
    status, error = 0, None
    try:
        if args.task == "verify":
            result = task_verify(cfg, out, args.seed, args.figures, args.suite)
        else:
            result = HANDLERS[args.task](cfg, out, args.seed)
    except VerificationFailure as exc:
        error, result, status = str(exc), getattr(exc, "result", {}), 1
    manifest = {
        "task": args.task,
        "tool": "rptlab",
        "version": __version__,
        "config_sha256": hashlib.sha256(raw).hexdigest(),
        "seed": args.seed,
        "status": status,
        "error": error,
        "result": result,
        "wall_time_seconds": round(time.perf_counter() - t0, 3),
    }
    write_json(out / "manifest.json", manifest)
    log.info("wrote %s", ", ".join(result.get("files", [])))
    return status


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        code = run(args)
    except RptError as exc:
        print(f"rptlab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    if code == 1:
        print("rptlab: verification failed", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
