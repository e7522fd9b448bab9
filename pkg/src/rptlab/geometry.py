"""Compact domains M = {rho >= 0} in a single Euclidean chart, plus quadrature."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, DegenerateBoundary, EmptyTube
from .exprfield import Field, parse, to_str

TOL_BOUNDARY = 1e-9
COLLAR_FRACTION = 0.05
# sharpness of the soft-min used by the box-like builtins; faces are exact
# up to exp(-SHARPNESS * distance to the nearest other face)
SHARPNESS = 100.0


@dataclass
class QuadratureSet:
    nodes: np.ndarray
    weights: np.ndarray
    spacing: float = float("nan")

    @property
    def measure(self) -> float:
        return float(np.sum(self.weights))

    def integrate(self, values) -> complex | float:
        """Weighted sum; numpy's pairwise summation fixes the reduction order."""
        return np.sum(self.weights * np.asarray(values))

    def __len__(self) -> int:
        return len(self.weights)


@dataclass
class Domain:
    rho_src: str
    bbox: np.ndarray
    name: str = "custom"
    rho: Field = field(init=False, repr=False)
    _grad: list = field(init=False, repr=False)

    def __post_init__(self):
        self.bbox = np.asarray(self.bbox, dtype=float)
        if self.bbox.ndim != 2 or self.bbox.shape[1] != 2 or self.bbox.shape[0] not in (2, 3):
            raise ConfigError("bbox must be a list of n=2 or 3 [lo, hi] pairs", "/domain/bbox")
        if np.any(self.bbox[:, 1] <= self.bbox[:, 0]):
            raise ConfigError("bbox intervals must have lo < hi", "/domain/bbox")
        self.rho = Field(self.rho_src, self.n)
        self._grad = self.rho.grad()

    @property
    def n(self) -> int:
        return self.bbox.shape[0]

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.bbox[:, 1] - self.bbox[:, 0]))

    @property
    def center(self) -> np.ndarray:
        return self.bbox.mean(axis=1)

    def default_spacing(self) -> float:
        return self.diameter / 200.0

    def grad_rho(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.stack([g(x) for g in self._grad], axis=-1)

    def validate(self, samples_per_axis: int = 0) -> None:
        """Check the bbox and collar invariants by sampling; raise ConfigError."""
        k = samples_per_axis or (120 if self.n == 2 else 40)
        axes = [np.linspace(lo, hi, k) for lo, hi in self.bbox]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.n)
        on_face = np.zeros(len(grid), dtype=bool)
        for j, (lo, hi) in enumerate(self.bbox):
            on_face |= (grid[:, j] == lo) | (grid[:, j] == hi)
        r = self.rho(grid)
        if np.any(r[on_face] >= 0):
            raise ConfigError("bounding box does not strictly contain {rho >= 0}", "/domain/bbox")
        if not np.any(r > 0):
            raise ConfigError("domain {rho >= 0} has no sampled interior point", "/domain/rho")
        collar = np.abs(r) <= COLLAR_FRACTION * self.diameter
        if np.any(collar):
            g = np.linalg.norm(self.grad_rho(grid[collar]), axis=-1)
            if np.min(g) <= 1e-8:
                raise ConfigError("|grad rho| vanishes on the boundary collar", "/domain/rho")

    def to_dict(self) -> dict:
        return {"rho": to_str(self.rho.expr), "bbox": self.bbox.tolist()}


def signed_membership(d: Domain, x) -> np.ndarray | float:
    """rho(x): positive inside, zero on the boundary, negative outside."""
    v = d.rho(np.asarray(x, dtype=float))
    return float(v) if np.ndim(v) == 0 else v


def inward_conormal(d: Domain, x_b, tol: float = 1e-6) -> np.ndarray:
    """Unit inward conormal grad(rho)/|grad(rho)| at a boundary point."""
    x_b = np.asarray(x_b, dtype=float)
    if abs(signed_membership(d, x_b)) > tol:
        raise DegenerateBoundary(f"point {x_b.tolist()} is not on the boundary")
    g = d.grad_rho(x_b)
    nrm = np.linalg.norm(g)
    if nrm < 1e-8:
        raise DegenerateBoundary(f"|grad rho| = {nrm:.3g} at {x_b.tolist()}")
    return g / nrm


def tangent_basis(nu: np.ndarray) -> np.ndarray:
    """Orthonormal basis (rows) of the complement of ``nu``, right-handed in 2D."""
    nu = np.asarray(nu, dtype=float)
    if len(nu) == 2:
        return np.array([[-nu[1], nu[0]]])
    q, _ = np.linalg.qr(np.column_stack([nu, np.eye(len(nu))]))
    basis = q[:, 1 : len(nu)].T
    if np.dot(basis[0], nu) ** 2 > 1e-20:
        raise DegenerateBoundary("tangent basis construction failed")
    return basis


def project_to_boundary(d: Domain, inside, outside, tol: float = 1e-13) -> np.ndarray:
    """Bisect along the segment from an inside point to an outside point."""
    a = np.asarray(inside, dtype=float)
    b = np.asarray(outside, dtype=float)
    ra = signed_membership(d, a)
    for _ in range(200):
        m = 0.5 * (a + b)
        rm = signed_membership(d, m)
        if abs(rm) <= tol:
            return m
        if (rm > 0) == (ra > 0):
            a, ra = m, rm
        else:
            b = m
        if np.linalg.norm(b - a) < 1e-15:
            break
    return 0.5 * (a + b)


def boundary_points(d: Domain, count: int, rng: np.random.Generator | None = None,
                    center: Sequence[float] | None = None) -> np.ndarray:
    """Sample the boundary along rays from ``center`` (domain assumed star-shaped).

    Directions are equispaced (2D) or a Fibonacci lattice (3D); ``rng`` only
    rotates the layout.
    """
    c = np.asarray(center if center is not None else d.center, dtype=float)
    if signed_membership(d, c) <= 0:
        raise ConfigError("boundary sampling centre must lie inside the domain", "/domain")
    shift = rng.uniform(0, 1) if rng is not None else 0.0
    if d.n == 2:
        th = 2 * np.pi * (np.arange(count) + 0.5 + shift) / count
        dirs = np.column_stack([np.cos(th), np.sin(th)])
    else:
        k = np.arange(count) + 0.5
        z = 1 - 2 * k / count
        phi = np.pi * (1 + 5**0.5) * k + 2 * np.pi * shift
        r = np.sqrt(1 - z * z)
        dirs = np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    out = np.empty((count, d.n))
    span = d.diameter
    for i, u in enumerate(dirs):
        # march outwards to the first sign change, then bisect
        steps = np.linspace(0, span, 2001)[1:]
        pts = c + steps[:, None] * u
        inbox = np.all((pts >= d.bbox[:, 0]) & (pts <= d.bbox[:, 1]), axis=1)
        pts = pts[inbox]
        r = signed_membership(d, pts)
        j = int(np.argmax(r < 0))
        if r[j] >= 0:
            raise ConfigError("ray from centre never leaves the domain inside the bbox", "/domain")
        prev = c if j == 0 else pts[j - 1]
        out[i] = project_to_boundary(d, prev, pts[j])
    return out


def _segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance from points p (P, n) to segments [a_k, b_k] (S, n); returns (P,)."""
    ab = b - a
    L2 = np.maximum(np.sum(ab * ab, axis=1), 1e-300)
    best = np.full(len(p), np.inf)
    for chunk in range(0, len(p), 2048):
        q = p[chunk : chunk + 2048]
        ap = q[:, None, :] - a[None, :, :]
        s = np.clip(np.sum(ap * ab[None], axis=2) / L2[None], 0.0, 1.0)
        dv = ap - s[..., None] * ab[None]
        best[chunk : chunk + 2048] = np.sqrt(np.min(np.sum(dv * dv, axis=2), axis=1))
    return best


def tube_quadrature(d: Domain | None, curve, radius: float, spacing: float) -> QuadratureSet:
    """Midpoint nodes of a tensor grid covering the tube around a polyline.

    With ``d`` given, nodes outside {rho >= 0} are dropped.  Weights are the
    cell volumes ``spacing**n``.
    """
    if radius <= 0 or spacing <= 0:
        raise ValueError("radius and spacing must be positive")
    curve = np.atleast_2d(np.asarray(curve, dtype=float))
    n = curve.shape[1]
    lo = curve.min(axis=0) - radius
    hi = curve.max(axis=0) + radius
    if d is not None:
        lo = np.maximum(lo, d.bbox[:, 0])
        hi = np.minimum(hi, d.bbox[:, 1])
        if np.any(hi <= lo):
            raise EmptyTube("tube does not meet the bounding box")
    # anchor the lattice at the origin so overlapping tubes share nodes
    axes = []
    for j in range(n):
        k0 = np.floor(lo[j] / spacing)
        k1 = np.ceil(hi[j] / spacing)
        axes.append((np.arange(k0, k1) + 0.5) * spacing)
    if np.prod([len(a) for a in axes]) > 5e7:
        raise EmptyTube("tube grid too large; increase spacing")
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    if len(curve) == 1:
        dist = np.linalg.norm(grid - curve[0], axis=1)
    else:
        dist = _segment_distance(grid, curve[:-1], curve[1:])
    keep = dist <= radius
    if d is not None and np.any(keep):
        idx = np.flatnonzero(keep)
        keep[idx] = signed_membership(d, grid[idx]) >= 0
    if not np.any(keep):
        raise EmptyTube("no quadrature node inside the tube and the domain")
    nodes = grid[keep]
    return QuadratureSet(nodes, np.full(len(nodes), spacing**n), spacing)


def box_quadrature(lo, hi, spacing: float, d: Domain | None = None) -> QuadratureSet:
    """Midpoint rule on an axis-aligned box, optionally clipped to a domain."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    counts = np.maximum(np.ceil((hi - lo) / spacing).astype(int), 1)
    steps = (hi - lo) / counts
    axes = [lo[j] + (np.arange(counts[j]) + 0.5) * steps[j] for j in range(len(lo))]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(lo))
    if d is not None:
        grid = grid[signed_membership(d, grid) >= 0]
    if len(grid) == 0:
        raise EmptyTube("box does not meet the domain")
    return QuadratureSet(grid, np.full(len(grid), float(np.prod(steps))), float(steps.max()))


# ------------------------------------------------------------------ builtins

def _softmin(terms: Sequence[str], k: float = SHARPNESS) -> str:
    inner = " + ".join(f"exp(-{k!r}*({t}))" for t in terms)
    return f"-log({inner})/{k!r}"


def _box_terms(lo: Sequence[float], hi: Sequence[float]) -> list[str]:
    terms = []
    for j, (a, b) in enumerate(zip(lo, hi)):
        terms.append(f"x{j + 1} - ({a!r})")
        terms.append(f"({b!r}) - x{j + 1}")
    return terms


def _margin_bbox(lo, hi, frac: float = 0.05) -> list[list[float]]:
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    m = frac * np.max(hi - lo)
    return np.column_stack([lo - m, hi + m]).tolist()


def builtin_domain(name: str, params: dict | None = None) -> Domain:
    """Expand a named domain.

    disk / ball:   rho = r^2 - |x - c|^2 (params: center, radius; n from center)
    box2d / box3d: soft-min of the face distances, rounded corners
                   (params: lo, hi)
    cylinder2d:    spacetime rectangle [-r, r] x [0, T] as a box2d
                   (params: radius r, height T)
    cylinder3d:    {x1^2 + x2^2 <= r^2} x [0, T], soft-min of the lateral and
                   cap distances (params: radius, height)
    halfdisk:      {|x| <= r, x2 >= 0} by soft-min (params: radius)
    """
    p = dict(params or {})
    if name in ("disk", "ball"):
        n = 2 if name == "disk" else 3
        c = [float(v) for v in p.pop("center", [0.0] * n)]
        r = float(p.pop("radius", 1.0))
        _no_extra(p, name)
        if len(c) != n:
            raise ConfigError(f"{name} centre must have {n} coordinates", "/domain/params/center")
        rho = f"{r * r!r} - " + " - ".join(f"(x{j + 1} - ({cj!r}))^2" for j, cj in enumerate(c))
        bbox = [[cj - 1.1 * r, cj + 1.1 * r] for cj in c]
        return Domain(rho, bbox, name)
    if name in ("box2d", "box3d"):
        n = 2 if name == "box2d" else 3
        lo = [float(v) for v in p.pop("lo", [0.0] * n)]
        hi = [float(v) for v in p.pop("hi", [1.0] * n)]
        _no_extra(p, name)
        if len(lo) != n or len(hi) != n:
            raise ConfigError(f"{name} needs {n} lower and upper bounds", "/domain/params")
        return Domain(_softmin(_box_terms(lo, hi)), _margin_bbox(lo, hi), name)
    if name == "cylinder2d":
        r = float(p.pop("radius", 1.0))
        T = float(p.pop("height", 2.0))
        _no_extra(p, name)
        return Domain(_softmin(_box_terms([-r, 0.0], [r, T])), _margin_bbox([-r, 0.0], [r, T]), name)
    if name == "cylinder3d":
        r = float(p.pop("radius", 1.0))
        T = float(p.pop("height", 2.0))
        _no_extra(p, name)
        lateral = f"({r!r} - sqrt(x1^2 + x2^2 + 1e-12))"
        terms = [lateral, "x3", f"({T!r}) - x3"]
        return Domain(_softmin(terms), _margin_bbox([-r, -r, 0.0], [r, r, T]), name)
    if name == "halfdisk":
        r = float(p.pop("radius", 1.0))
        _no_extra(p, name)
        terms = [f"({r!r} - sqrt(x1^2 + x2^2 + 1e-12))", "x2"]
        return Domain(_softmin(terms), _margin_bbox([-r, 0.0], [r, r]), name)
    raise ConfigError(f"unknown builtin domain '{name}'", "/domain/name")


def _no_extra(p: dict, name: str) -> None:
    if p:
        raise ConfigError(f"unknown parameter(s) {sorted(p)} for domain '{name}'", "/domain/params")


def domain_from_config(cfg: dict) -> Domain:
    if "name" in cfg:
        d = builtin_domain(cfg["name"], cfg.get("params"))
    else:
        try:
            d = Domain(cfg["rho"], cfg["bbox"])
        except KeyError as exc:
            raise ConfigError(f"missing key {exc}", "/domain") from None
    d.validate()
    return d


__all__ = [
    "Domain",
    "QuadratureSet",
    "signed_membership",
    "inward_conormal",
    "tangent_basis",
    "boundary_points",
    "tube_quadrature",
    "box_quadrature",
    "builtin_domain",
    "domain_from_config",
    "parse",
]
