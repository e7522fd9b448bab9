"""Operators through their symbols.

An operator of order m is stored as

    P = sum_{|a|=m} c_a(x) D^a + sum_{|a|=m-1} d_a(x) D^a + V(x),   D = -i d/dx,

so its principal symbol is p_m(x, xi) = sum c_a(x) xi^a (real coefficients),
p_{m-1}(x, xi) = sum d_a(x) xi^a (complex coefficients) and V is complex.
For m = 1 the order m-1 part and V are both of order zero and ``lower``
returns their sum.

All derivatives are symbolic: the symbol is assembled as one expression in
the 2n variables x1..xn, xi1..xin, differentiated, folded and compiled.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import CharacteristicBoundary, ConfigError, PrincipalMismatch
from .exprfield import (
    Expr,
    Num,
    Var,
    compile_exprs,
    diff,
    fold,
    parse,
    to_str,
    var_names,
)

Term = tuple  # (alpha, re Expr, im Expr)


def _names(n: int) -> list[str]:
    return var_names(n) + var_names(n, "xi")


def _monomial(alpha: Sequence[int]) -> Expr:
    e: Expr = Num(1.0)
    for j, k in enumerate(alpha):
        if k:
            e = e * (Var(f"xi{j + 1}") ** k)
    return fold(e)


@dataclass(frozen=True)
class HessianBlocks:
    D: np.ndarray
    B: np.ndarray
    C: np.ndarray


@dataclass
class SymbolModel:
    name: str
    n: int
    m: int
    principal_terms: list  # [(alpha, Expr)]
    lower_terms: list = field(default_factory=list)  # [(alpha, Expr re, Expr im)]
    V: tuple = (Num(0.0), Num(0.0))
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.m < 1:
            raise ConfigError("operator order must be at least 1", "/operator/order")
        for alpha, _ in self.principal_terms:
            if len(alpha) != self.n or sum(alpha) != self.m or min(alpha) < 0:
                raise ConfigError(f"principal multi-index {list(alpha)} inconsistent with n={self.n}, m={self.m}",
                                  "/operator/principal")
        for alpha, _, _ in self.lower_terms:
            if len(alpha) != self.n or sum(alpha) != self.m - 1 or min(alpha) < 0:
                raise ConfigError(f"lower-order multi-index {list(alpha)} must have |alpha| = m-1",
                                  "/operator/p_m_minus_1")
        names = _names(self.n)
        xs, ks = names[: self.n], names[self.n :]
        p = Num(0.0)
        for alpha, c in self.principal_terms:
            p = p + c * _monomial(alpha)
        self.p_expr = fold(p)
        lo_re: Expr = Num(0.0)
        lo_im: Expr = Num(0.0)
        for alpha, cr, ci in self.lower_terms:
            mono = _monomial(alpha)
            lo_re = lo_re + cr * mono
            lo_im = lo_im + ci * mono
        if self.m == 1:
            lo_re = lo_re + self.V[0]
            lo_im = lo_im + self.V[1]
        self.lower_re, self.lower_im = fold(lo_re), fold(lo_im)

        dxi = [diff(self.p_expr, k) for k in ks]
        dx = [diff(self.p_expr, x) for x in xs]
        self._p = compile_exprs([self.p_expr], names)
        self._ham = compile_exprs(dxi + [fold(-e) for e in dx], names)
        self._grad = compile_exprs(dx + dxi, names)
        n = self.n
        hD = [diff(dx[j], xs[k]) for j in range(n) for k in range(n)]
        hB = [diff(dx[j], ks[a]) for j in range(n) for a in range(n)]
        hC = [diff(dxi[a], ks[b]) for a in range(n) for b in range(n)]
        self._hess = compile_exprs(hD + hB + hC, names)
        self._lower = compile_exprs([self.lower_re, self.lower_im], names)
        self._V = compile_exprs([fold(self.V[0]), fold(self.V[1])], names[:n])
        # coefficient evaluators used when applying P by finite differences
        self._coef_alphas = [a for a, _ in self.principal_terms] + [a for a, _, _ in self.lower_terms]
        self._coef = compile_exprs(
            [c for _, c in self.principal_terms] + [cr for _, cr, _ in self.lower_terms]
            + [ci for _, _, ci in self.lower_terms],
            names[:n],
        )

    # ------------------------------------------------------------ evaluation
    def _args(self, x, xi):
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi)
        if not np.iscomplexobj(xi):
            xi = xi.astype(float)
        return [x[..., j] for j in range(self.n)] + [xi[..., j] for j in range(self.n)]

    def _stack(self, outs, shape):
        dt = np.result_type(*[np.asarray(o).dtype for o in outs], float)
        res = np.empty(shape + (len(outs),), dtype=dt)
        for j, o in enumerate(outs):
            res[..., j] = o
        return res

    def _shape(self, x, xi):
        return np.broadcast_shapes(np.shape(x)[:-1], np.shape(xi)[:-1])

    def principal(self, x, xi):
        v = self._p(*self._args(x, xi))[0]
        shape = self._shape(x, xi)
        return np.broadcast_to(v, shape).copy() if shape else v

    def hamilton_field(self, x, xi) -> tuple[np.ndarray, np.ndarray]:
        """(d_xi p_m, -d_x p_m)."""
        out = self._stack(self._ham(*self._args(x, xi)), self._shape(x, xi))
        return out[..., : self.n], out[..., self.n :]

    def gradients(self, x, xi) -> tuple[np.ndarray, np.ndarray]:
        """(d_x p_m, d_xi p_m); accepts complex xi."""
        out = self._stack(self._grad(*self._args(x, xi)), self._shape(x, xi))
        return out[..., : self.n], out[..., self.n :]

    def rhs(self, y: np.ndarray) -> np.ndarray:
        """Hamilton vector field on the stacked state y = (x, xi)."""
        return np.array(self._ham(*y), dtype=float)

    def hessian_blocks_array(self, x, xi) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Vectorized (D, B, C) with trailing (n, n) axes.  B[j, a] = d_{x_j xi_a} p_m."""
        n = self.n
        out = self._stack(self._hess(*self._args(x, xi)), self._shape(x, xi))
        shp = out.shape[:-1] + (n, n)
        D = out[..., : n * n].reshape(shp)
        B = out[..., n * n : 2 * n * n].reshape(shp)
        C = out[..., 2 * n * n :].reshape(shp)
        return D, B, C

    def hessian_blocks(self, x, xi) -> HessianBlocks:
        D, B, C = self.hessian_blocks_array(x, xi)
        return HessianBlocks(D, B, C)

    def lower(self, x, xi):
        """p_{m-1}(x, xi) as a complex number (includes V when m = 1)."""
        re, im = self._lower(*self._args(x, xi))
        shape = self._shape(x, xi)
        return np.broadcast_to(re + 1j * np.asarray(im), shape) if shape else re + 1j * im

    def potential(self, x):
        x = np.asarray(x, dtype=float)
        re, im = self._V(*[x[..., j] for j in range(self.n)])
        return np.broadcast_to(re + 1j * np.asarray(im), x.shape[:-1])

    def coefficients(self, x) -> list[tuple[tuple, np.ndarray]]:
        """[(alpha, complex coefficient at x)] for every derivative term of P."""
        x = np.asarray(x, dtype=float)
        vals = self._coef(*[x[..., j] for j in range(self.n)])
        npr = len(self.principal_terms)
        nlo = len(self.lower_terms)
        out = []
        for i, alpha in enumerate(self._coef_alphas):
            if i < npr:
                c = np.broadcast_to(np.asarray(vals[i], dtype=complex), x.shape[:-1])
            else:
                k = i - npr
                c = np.broadcast_to(np.asarray(vals[npr + k]) + 1j * np.asarray(vals[npr + nlo + k]), x.shape[:-1])
            out.append((tuple(alpha), c))
        out.append(((0,) * self.n, self.potential(x)))
        return out

    def describe(self) -> dict:
        return {
            "name": self.name,
            "n": self.n,
            "order": self.m,
            "principal": [{"alpha": list(a), "coeff": to_str(c)} for a, c in self.principal_terms],
            "p_m_minus_1": [
                {"alpha": list(a), "coeff": {"re": to_str(r), "im": to_str(i)}} for a, r, i in self.lower_terms
            ],
            "V": {"re": to_str(self.V[0]), "im": to_str(self.V[1])},
            "sigma_sub_note": "single-operator subprincipal values are chart-dependent diagnostics",
        }


def principal(s: SymbolModel, x, xi):
    return s.principal(x, xi)


def hamilton_field(s: SymbolModel, x, xi):
    return s.hamilton_field(x, xi)


def hessian_blocks(s: SymbolModel, x, xi) -> HessianBlocks:
    return s.hessian_blocks(x, xi)


def same_principal(s1: SymbolModel, s2: SymbolModel, x0=None, samples: int = 16, tol: float = 1e-10) -> bool:
    if s1.n != s2.n or s1.m != s2.m:
        return False
    rng = np.random.default_rng(12345)
    base = np.zeros(s1.n) if x0 is None else np.asarray(x0, float)
    xs = base + rng.uniform(-0.5, 0.5, (samples, s1.n))
    ks = rng.normal(size=(samples, s1.n))
    a = np.asarray(s1.principal(xs, ks), dtype=float)
    b = np.asarray(s2.principal(xs, ks), dtype=float)
    scale = 1.0 + np.abs(a)
    return bool(np.all(np.abs(a - b) <= tol * scale))


def subprincipal_diff(s1: SymbolModel, s2: SymbolModel, x, xi):
    """p_{m-1,1} - p_{m-1,2}; both operators must share the principal symbol."""
    if not same_principal(s1, s2, x):
        raise PrincipalMismatch(f"operators '{s1.name}' and '{s2.name}' have different principal symbols")
    return s1.lower(x, xi) - s2.lower(x, xi)


def normal_char_poly(s: SymbolModel, x_b, xi_tan, nu) -> np.ndarray:
    """Coefficients, highest degree first, of tau -> p_m(x_b, xi_tan + tau nu)."""
    x_b = np.asarray(x_b, float)
    xi_tan = np.asarray(xi_tan, float)
    nu = np.asarray(nu, float)
    if abs(np.dot(xi_tan, nu)) > 1e-10 * max(1.0, np.linalg.norm(xi_tan)):
        raise ValueError("xi_tan must be orthogonal to nu")
    coeffs = np.zeros(s.m + 1)
    cvals = s._coef(*x_b)
    for i, (alpha, _) in enumerate(s.principal_terms):
        poly = np.array([1.0])
        for j, k in enumerate(alpha):
            for _ in range(k):
                poly = np.polymul(poly, [nu[j], xi_tan[j]])
        coeffs[-len(poly) :] += float(cvals[i]) * poly
    if abs(coeffs[0]) <= 1e-12:
        raise CharacteristicBoundary(f"boundary is characteristic at {x_b.tolist()}: p_m(x, nu) = {coeffs[0]:.3g}")
    return coeffs


# ------------------------------------------------------------------ builtins

def _cx(v, n: int, ptr: str) -> tuple[Expr, Expr]:
    """A complex coefficient given as "<expr>" or {"re": ..., "im": ...}."""
    if isinstance(v, (int, float)):
        return Num(float(v)), Num(0.0)
    if isinstance(v, str):
        return parse(v, n), Num(0.0)
    if isinstance(v, dict):
        extra = set(v) - {"re", "im"}
        if extra:
            raise ConfigError(f"unknown keys {sorted(extra)}", ptr)
        return parse(str(v.get("re", "0")), n), parse(str(v.get("im", "0")), n)
    raise ConfigError("expected an expression string or {re, im}", ptr)


def _unit(n: int, j: int, k: int = 1) -> tuple:
    a = [0] * n
    a[j] += k
    return tuple(a)


def _check_params(params: dict, allowed: set, name: str) -> None:
    extra = set(params) - allowed
    if extra:
        raise ConfigError(f"unknown parameter(s) {sorted(extra)} for operator '{name}'", "/operator/params")


def builtin_symbol(name: str, params: dict | None = None) -> SymbolModel:
    """Named operators.  Signs follow sigma(D_j) = xi_j.

    wave1d        n=2, p = xi2^2 - c(x)^2 xi1^2 (param c, default "1")
    wave2d        n=3, p = xi3^2 - c(x)^2 (xi1^2 + xi2^2)
    tricomi       n=2, p = x2 xi1^2 + xi2^2
    laplace       p = |xi|^2 (param n, default 2)
    quartic       n=2, p = (xi2^2 - xi1^2)(xi2^2 + xi1^2) = xi2^4 - xi1^4
    transport     m=1, p = sum L_j(x) xi_j, potential V (params L, V)
    magneticwave  (d + i a)^*(d + i a) for the flat metric diag(-1, .., -1, +1)
                  (params a: list of n expressions): p_1 = 2<a, xi>_g,
                  V = <a, a>_g - i sum_j g^{jj} d_j a_j
    Any builtin accepts "V" (zeroth-order potential) in params.
    """
    p = dict(params or {})
    V = p.pop("V", "0")
    if name in ("wave1d", "wave2d"):
        _check_params(p, {"c"}, name)
        n = 2 if name == "wave1d" else 3
        c = parse(str(p.get("c", "1")), n)
        terms = [(_unit(n, n - 1, 2), Num(1.0))]
        c2 = fold(-(c * c))
        terms += [(_unit(n, j, 2), c2) for j in range(n - 1)]
        return SymbolModel(name, n, 2, terms, [], _cx(V, n, "/operator/params/V"), {"c": to_str(c)})
    if name == "tricomi":
        _check_params(p, set(), name)
        terms = [((2, 0), Var("x2")), ((0, 2), Num(1.0))]
        return SymbolModel(name, 2, 2, terms, [], _cx(V, 2, "/operator/params/V"))
    if name == "laplace":
        _check_params(p, {"n"}, name)
        n = int(p.get("n", 2))
        terms = [(_unit(n, j, 2), Num(1.0)) for j in range(n)]
        return SymbolModel(name, n, 2, terms, [], _cx(V, n, "/operator/params/V"))
    if name == "quartic":
        _check_params(p, set(), name)
        terms = [((0, 4), Num(1.0)), ((4, 0), Num(-1.0))]
        return SymbolModel(name, 2, 4, terms, [], _cx(V, 2, "/operator/params/V"))
    if name == "transport":
        _check_params(p, {"L"}, name)
        L = p.get("L", ["1", "0"])
        if not isinstance(L, list) or len(L) not in (2, 3):
            raise ConfigError("transport needs L as a list of 2 or 3 expressions", "/operator/params/L")
        n = len(L)
        terms = [(_unit(n, j), parse(str(Lj), n)) for j, Lj in enumerate(L)]
        terms = [(a, c) for a, c in terms if not (isinstance(fold(c), Num) and fold(c).value == 0.0)]
        return SymbolModel(name, n, 1, terms, [], _cx(V, n, "/operator/params/V"), {"L": [str(v) for v in L]})
    if name == "magneticwave":
        _check_params(p, {"a"}, name)
        a_src = p.get("a", ["0", "0"])
        if not isinstance(a_src, list) or len(a_src) not in (2, 3):
            raise ConfigError("magneticwave needs a as a list of 2 or 3 expressions", "/operator/params/a")
        n = len(a_src)
        a = [parse(str(v), n) for v in a_src]
        g = [-1.0] * (n - 1) + [1.0]
        terms = [(_unit(n, j, 2), Num(g[j])) for j in range(n)]
        lower = [(_unit(n, j), fold(Num(2.0 * g[j]) * a[j]), Num(0.0)) for j in range(n)]
        aa: Expr = Num(0.0)
        div: Expr = Num(0.0)
        for j in range(n):
            aa = aa + Num(g[j]) * a[j] * a[j]
            div = div + Num(g[j]) * diff(a[j], j + 1)
        Vr, Vi = _cx(V, n, "/operator/params/V")
        pot = (fold(aa + Vr), fold(Vi - div))
        return SymbolModel(name, n, 2, terms, lower, pot, {"a": [to_str(e) for e in a]})
    raise ConfigError(f"unknown builtin operator '{name}'", "/operator/name")


def symbol_from_config(cfg: dict) -> SymbolModel:
    if "name" in cfg and "principal" not in cfg:
        extra = set(cfg) - {"name", "params"}
        if extra:
            raise ConfigError(f"unknown keys {sorted(extra)}", "/operator")
        return builtin_symbol(cfg["name"], cfg.get("params"))
    try:
        m = int(cfg["order"])
        prin = cfg["principal"]
    except KeyError as exc:
        raise ConfigError(f"missing key {exc}", "/operator") from None
    if not prin:
        raise ConfigError("principal part is empty", "/operator/principal")
    n = len(prin[0]["alpha"])
    terms = []
    for i, t in enumerate(prin):
        c = t["coeff"]
        if isinstance(c, dict):
            if str(c.get("im", "0")).strip() not in ("0", "0.0"):
                raise ConfigError("principal coefficients must be real", f"/operator/principal/{i}/coeff")
            c = c.get("re", "0")
        terms.append((tuple(int(v) for v in t["alpha"]), parse(str(c), n)))
    lower = []
    for i, t in enumerate(cfg.get("p_m_minus_1", [])):
        cr, ci = _cx(t["coeff"], n, f"/operator/p_m_minus_1/{i}/coeff")
        lower.append((tuple(int(v) for v in t["alpha"]), cr, ci))
    V = _cx(cfg.get("V", "0"), n, "/operator/V")
    return SymbolModel(str(cfg.get("name", "explicit")), n, m, terms, lower, V)


def adjoint_lower(s: SymbolModel, x, xi):
    """Order m-1 part of the full symbol of the formal adjoint P^*:
    conj(p_{m-1}) + (1/i) sum_j d_{x_j} d_{xi_j} p_m (real xi)."""
    _, B, _ = s.hessian_blocks_array(x, xi)
    return np.conj(s.lower(x, xi)) - 1j * np.trace(B, axis1=-2, axis2=-1)


def random_phase_points(s: SymbolModel, rng: np.random.Generator, count: int, box) -> tuple[np.ndarray, np.ndarray]:
    box = np.asarray(box, float)
    x = rng.uniform(box[:, 0], box[:, 1], (count, s.n))
    xi = rng.normal(size=(count, s.n))
    return x, xi


__all__ = [
    "SymbolModel",
    "HessianBlocks",
    "principal",
    "hamilton_field",
    "hessian_blocks",
    "subprincipal_diff",
    "normal_char_poly",
    "builtin_symbol",
    "symbol_from_config",
    "adjoint_lower",
    "same_principal",
]
