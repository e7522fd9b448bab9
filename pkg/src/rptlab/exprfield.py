"""Scalar coefficient expressions: parsing, differentiation, evaluation.

Grammar (whitespace ignored)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('-' | '+') unary | power
    power  := atom ['^' exponent]
    exponent := ['-'] INT | '(' ['-'] INT ')'
    atom   := NUMBER | 'pi' | VAR | FUNC '(' expr ')' | '(' expr ')'

Variables are named ``x1`` .. ``xn``.  Functions: sin, cos, exp, log, sqrt,
tanh.  Exponents are integers only, which keeps differentiation closed over
the grammar.  ``^`` binds tighter than unary minus, so ``-x1^2 == -(x1^2)``.

Trees are immutable.  :func:`compile_expr` turns a tree into a vectorized
numpy callable, which is what the numerical modules use on hot paths.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ArityError, EvalDomainError, ExprSyntaxError, UnknownIdentifier

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt", "tanh")


class Expr:
    """Base class of expression nodes.  Supports arithmetic operators."""

    __slots__ = ()

    def __add__(self, other):
        return Add(self, as_expr(other))

    def __radd__(self, other):
        return Add(as_expr(other), self)

    def __sub__(self, other):
        return Sub(self, as_expr(other))

    def __rsub__(self, other):
        return Sub(as_expr(other), self)

    def __mul__(self, other):
        return Mul(self, as_expr(other))

    def __rmul__(self, other):
        return Mul(as_expr(other), self)

    def __truediv__(self, other):
        return Div(self, as_expr(other))

    def __rtruediv__(self, other):
        return Div(as_expr(other), self)

    def __neg__(self):
        return Neg(self)

    def __pow__(self, k: int):
        return Pow(self, int(k))

    def __str__(self) -> str:
        return to_str(self)


@dataclass(frozen=True, eq=True, repr=True)
class Num(Expr):
    value: float


@dataclass(frozen=True, eq=True, repr=True)
class Var(Expr):
    name: str


@dataclass(frozen=True, eq=True, repr=True)
class Add(Expr):
    a: Expr
    b: Expr


@dataclass(frozen=True, eq=True, repr=True)
class Sub(Expr):
    a: Expr
    b: Expr


@dataclass(frozen=True, eq=True, repr=True)
class Mul(Expr):
    a: Expr
    b: Expr


@dataclass(frozen=True, eq=True, repr=True)
class Div(Expr):
    a: Expr
    b: Expr


@dataclass(frozen=True, eq=True, repr=True)
class Pow(Expr):
    base: Expr
    k: int


@dataclass(frozen=True, eq=True, repr=True)
class Neg(Expr):
    a: Expr


@dataclass(frozen=True, eq=True, repr=True)
class Call(Expr):
    fn: str
    arg: Expr


def as_expr(v) -> Expr:
    if isinstance(v, Expr):
        return v
    if isinstance(v, (int, float, np.floating, np.integer)):
        return Num(float(v))
    raise TypeError(f"cannot convert {type(v).__name__} to Expr")


def var_names(n: int, prefix: str = "x") -> list[str]:
    return [f"{prefix}{j + 1}" for j in range(n)]


# ---------------------------------------------------------------- parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


@dataclass
class _Tok:
    kind: str
    text: str
    offset: int


def _tokenize(src: str) -> list[_Tok]:
    toks = []
    pos = 0
    raw = src.encode("utf-8")
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if m is None or m.end() == pos:
            off = len(src[:pos].encode("utf-8"))
            # skip leading whitespace for the reported offset
            while off < len(raw) and raw[off : off + 1].isspace():
                off += 1
            raise ExprSyntaxError(f"unexpected character at byte {off}", off)
        kind = m.lastgroup
        start = m.start(kind)
        toks.append(_Tok(kind, m.group(kind), len(src[:start].encode("utf-8"))))
        pos = m.end()
    toks.append(_Tok("end", "", len(raw)))
    return toks


class _Parser:
    def __init__(self, src: str, names: Sequence[str]):
        self.toks = _tokenize(src)
        self.i = 0
        self.names = set(names)

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def take(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> _Tok:
        t = self.take()
        if t.text != text:
            raise ExprSyntaxError(f"expected '{text}' at byte {t.offset}", t.offset)
        return t

    def parse(self) -> Expr:
        e = self.expr()
        t = self.peek()
        if t.kind != "end":
            raise ExprSyntaxError(f"unexpected '{t.text}' at byte {t.offset}", t.offset)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek().text in ("+", "-"):
            op = self.take().text
            r = self.term()
            e = Add(e, r) if op == "+" else Sub(e, r)
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.peek().text in ("*", "/"):
            op = self.take().text
            r = self.unary()
            e = Mul(e, r) if op == "*" else Div(e, r)
        return e

    def unary(self) -> Expr:
        t = self.peek()
        if t.text == "-":
            self.take()
            return Neg(self.unary())
        if t.text == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek().text == "^":
            self.take()
            k = self.exponent()
            if self.peek().text == "^":
                t = self.peek()
                raise ExprSyntaxError(f"chained '^' at byte {t.offset}; use parentheses", t.offset)
            return Pow(base, k)
        return base

    def exponent(self) -> int:
        paren = False
        if self.peek().text == "(":
            self.take()
            paren = True
        sign = 1
        if self.peek().text == "-":
            self.take()
            sign = -1
        t = self.take()
        if t.kind != "num" or not t.text.isdigit():
            raise ExprSyntaxError(f"integer exponent expected at byte {t.offset}", t.offset)
        if paren:
            self.expect(")")
        return sign * int(t.text)

    def atom(self) -> Expr:
        t = self.take()
        if t.kind == "num":
            return Num(float(t.text))
        if t.kind == "name":
            if t.text in FUNCTIONS:
                if self.peek().text != "(":
                    raise ArityError(f"function '{t.text}' at byte {t.offset} needs one argument")
                self.take()
                if self.peek().text == ")":
                    raise ArityError(f"function '{t.text}' at byte {t.offset} takes 1 argument, got 0")
                arg = self.expr()
                if self.peek().text == ",":
                    raise ArityError(f"function '{t.text}' at byte {t.offset} takes 1 argument")
                self.expect(")")
                return Call(t.text, arg)
            if t.text == "pi":
                return Num(math.pi)
            if t.text in self.names:
                return Var(t.text)
            raise UnknownIdentifier(f"unknown identifier '{t.text}' at byte {t.offset}")
        if t.text == "(":
            e = self.expr()
            self.expect(")")
            return e
        what = "end of input" if t.kind == "end" else f"'{t.text}'"
        raise ExprSyntaxError(f"unexpected {what} at byte {t.offset}", t.offset)


def parse(src: str, n_vars: int, names: Sequence[str] | None = None) -> Expr:
    """Parse ``src`` into an expression over ``x1..x{n_vars}``."""
    if not isinstance(src, str) or not src.strip():
        raise ExprSyntaxError("empty expression", 0)
    return _Parser(src, names if names is not None else var_names(n_vars)).parse()


# ---------------------------------------------------------- differentiation

def _d(e: Expr, v: str) -> Expr:
    if isinstance(e, Num):
        return Num(0.0)
    if isinstance(e, Var):
        return Num(1.0 if e.name == v else 0.0)
    if isinstance(e, Add):
        return Add(_d(e.a, v), _d(e.b, v))
    if isinstance(e, Sub):
        return Sub(_d(e.a, v), _d(e.b, v))
    if isinstance(e, Neg):
        return Neg(_d(e.a, v))
    if isinstance(e, Mul):
        return Add(Mul(_d(e.a, v), e.b), Mul(e.a, _d(e.b, v)))
    if isinstance(e, Div):
        return Div(Sub(Mul(_d(e.a, v), e.b), Mul(e.a, _d(e.b, v))), Pow(e.b, 2))
    if isinstance(e, Pow):
        if e.k == 0:
            return Num(0.0)
        return Mul(Mul(Num(float(e.k)), Pow(e.base, e.k - 1)), _d(e.base, v))
    if isinstance(e, Call):
        da = _d(e.arg, v)
        u = e.arg
        outer = {
            "sin": lambda: Call("cos", u),
            "cos": lambda: Neg(Call("sin", u)),
            "exp": lambda: Call("exp", u),
            "log": lambda: Div(Num(1.0), u),
            "sqrt": lambda: Div(Num(0.5), Call("sqrt", u)),
            "tanh": lambda: Sub(Num(1.0), Pow(Call("tanh", u), 2)),
        }[e.fn]()
        return Mul(outer, da)
    raise TypeError(type(e))


def diff(e: Expr, var: int | str) -> Expr:
    """Exact partial derivative, constant-folded.  ``var`` is 1-based or a name."""
    name = f"x{var}" if isinstance(var, (int, np.integer)) else var
    if isinstance(var, (int, np.integer)) and var < 1:
        raise ValueError("var_index is 1-based")
    return fold(_d(e, name))


def _is(e: Expr, value: float) -> bool:
    return isinstance(e, Num) and e.value == value


def fold(e: Expr) -> Expr:
    """Constant folding plus the identities x+0, x*1, x*0, x^0, x^1."""
    if isinstance(e, (Num, Var)):
        return e
    if isinstance(e, Neg):
        a = fold(e.a)
        if isinstance(a, Num):
            return Num(-a.value)
        if isinstance(a, Neg):
            return a.a
        return Neg(a)
    if isinstance(e, Call):
        a = fold(e.arg)
        if isinstance(a, Num):
            try:
                return Num(_scalar_fn(e.fn, a.value))
            except EvalDomainError:
                return Call(e.fn, a)
        return Call(e.fn, a)
    if isinstance(e, Pow):
        b = fold(e.base)
        if e.k == 0:
            return Num(1.0)
        if e.k == 1:
            return b
        if isinstance(b, Num) and not (b.value == 0 and e.k < 0):
            return Num(b.value ** e.k)
        return Pow(b, e.k)
    a, b = fold(e.a), fold(e.b)
    if isinstance(a, Num) and isinstance(b, Num):
        if isinstance(e, Add):
            return Num(a.value + b.value)
        if isinstance(e, Sub):
            return Num(a.value - b.value)
        if isinstance(e, Mul):
            return Num(a.value * b.value)
        if isinstance(e, Div) and b.value != 0:
            return Num(a.value / b.value)
    if isinstance(e, Add):
        if _is(a, 0):
            return b
        if _is(b, 0):
            return a
        return Add(a, b)
    if isinstance(e, Sub):
        if _is(b, 0):
            return a
        if _is(a, 0):
            return fold(Neg(b))
        return Sub(a, b)
    if isinstance(e, Mul):
        if _is(a, 0) or _is(b, 0):
            return Num(0.0)
        if _is(a, 1):
            return b
        if _is(b, 1):
            return a
        if _is(a, -1):
            return fold(Neg(b))
        if _is(b, -1):
            return fold(Neg(a))
        return Mul(a, b)
    if isinstance(e, Div):
        if _is(a, 0) and not _is(b, 0):
            return Num(0.0)
        if _is(b, 1):
            return a
        return Div(a, b)
    raise TypeError(type(e))


def is_constant(e: Expr) -> bool:
    return isinstance(fold(e), Num)


def free_vars(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Num):
        return set()
    if isinstance(e, (Neg, Call)):
        return free_vars(e.a if isinstance(e, Neg) else e.arg)
    if isinstance(e, Pow):
        return free_vars(e.base)
    return free_vars(e.a) | free_vars(e.b)


def substitute(e: Expr, mapping: dict[str, Expr]) -> Expr:
    """Replace variables by expressions (used for coordinate changes)."""
    if isinstance(e, Var):
        return mapping.get(e.name, e)
    if isinstance(e, Num):
        return e
    if isinstance(e, Neg):
        return Neg(substitute(e.a, mapping))
    if isinstance(e, Call):
        return Call(e.fn, substitute(e.arg, mapping))
    if isinstance(e, Pow):
        return Pow(substitute(e.base, mapping), e.k)
    return type(e)(substitute(e.a, mapping), substitute(e.b, mapping))


# ---------------------------------------------------------------- printing

_PREC = {Add: 1, Sub: 1, Mul: 2, Div: 2, Neg: 3, Pow: 4}


def _fmt_num(v: float) -> str:
    if v == math.pi:
        return "pi"
    s = repr(float(v))
    if "inf" in s or "nan" in s:
        raise ValueError(f"cannot print non-finite literal {s}")
    return f"({s})" if v < 0 else s


def to_str(e: Expr) -> str:
    """Print in the parse grammar; ``parse(to_str(e))`` evaluates identically."""
    if isinstance(e, Num):
        return _fmt_num(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Call):
        return f"{e.fn}({to_str(e.arg)})"
    if isinstance(e, Neg):
        inner = to_str(e.a)
        if _PREC.get(type(e.a), 5) < 4:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(e, Pow):
        b = to_str(e.base)
        if not isinstance(e.base, (Var, Call)) or (isinstance(e.base, Num) and e.base.value < 0):
            b = f"({b})"
        k = f"({e.k})" if e.k < 0 else str(e.k)
        return f"{b}^{k}"
    p = _PREC[type(e)]
    left = to_str(e.a)
    right = to_str(e.b)
    if _PREC.get(type(e.a), 5) < p:
        left = f"({left})"
    # right operand of - and / needs parentheses at equal precedence
    rp = _PREC.get(type(e.b), 5)
    if rp < p or (rp == p and isinstance(e, (Sub, Div))):
        right = f"({right})"
    op = {Add: " + ", Sub: " - ", Mul: "*", Div: "/"}[type(e)]
    return f"{left}{op}{right}"


# -------------------------------------------------------------- evaluation

def _scalar_fn(fn: str, a):
    if fn in ("log", "sqrt"):
        if np.iscomplexobj(a):
            raise EvalDomainError(f"{fn} of a complex argument")
        bad = (np.asarray(a) <= 0) if fn == "log" else (np.asarray(a) < 0)
        if np.any(bad):
            raise EvalDomainError(f"{fn} of a non-positive argument" if fn == "log" else "sqrt of a negative argument")
    with np.errstate(over="ignore"):
        return {
            "sin": np.sin,
            "cos": np.cos,
            "exp": np.exp,
            "log": np.log,
            "sqrt": np.sqrt,
            "tanh": np.tanh,
        }[fn](a)


def evaluate(e: Expr, x, names: Sequence[str] | None = None):
    """Evaluate by tree walk.  ``x`` is a point (n,) or an array (..., n)."""
    x = np.asarray(x, dtype=float)
    names = list(names) if names is not None else var_names(x.shape[-1])
    env = {nm: x[..., j] for j, nm in enumerate(names)}
    return _walk(e, env)


def _walk(e: Expr, env):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        try:
            return env[e.name]
        except KeyError:
            raise UnknownIdentifier(f"variable '{e.name}' not bound") from None
    if isinstance(e, Neg):
        return -_walk(e.a, env)
    if isinstance(e, Call):
        return _scalar_fn(e.fn, _walk(e.arg, env))
    if isinstance(e, Pow):
        b = _walk(e.base, env)
        if e.k < 0 and np.any(np.asarray(b) == 0):
            raise EvalDomainError("negative power of zero")
        return b ** e.k if e.k >= 0 else 1.0 / b ** (-e.k)
    a, b = _walk(e.a, env), _walk(e.b, env)
    if isinstance(e, Add):
        return a + b
    if isinstance(e, Sub):
        return a - b
    if isinstance(e, Mul):
        return a * b
    if np.any(np.asarray(b) == 0):
        raise EvalDomainError("division by zero")
    return a / b


def _py_src(e: Expr) -> str:
    if isinstance(e, Num):
        return repr(float(e.value))
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return f"(-{_py_src(e.a)})"
    if isinstance(e, Call):
        return f"_f_{e.fn}({_py_src(e.arg)})"
    if isinstance(e, Pow):
        if e.k >= 0:
            return f"({_py_src(e.base)}**{e.k})"
        return f"_inv({_py_src(e.base)}**{-e.k})"
    op = {Add: "+", Sub: "-", Mul: "*", Div: "/"}[type(e)]
    if isinstance(e, Div):
        return f"({_py_src(e.a)}*_inv({_py_src(e.b)}))"
    return f"({_py_src(e.a)}{op}{_py_src(e.b)})"


def _inv(b):
    if np.any(np.asarray(b) == 0):
        raise EvalDomainError("division by zero")
    return 1.0 / b


_NS = {f"_f_{fn}": (lambda fn: (lambda a: _scalar_fn(fn, a)))(fn) for fn in FUNCTIONS}
_NS["_inv"] = _inv


def compile_exprs(exprs: Sequence[Expr], names: Sequence[str]) -> Callable:
    """Compile several expressions into one callable ``f(*vars) -> tuple``.

    Entries are returned as produced by numpy broadcasting, so constant
    entries come back as Python floats; use :func:`broadcast_eval` when a
    uniform array is needed.
    """
    body = ", ".join(_py_src(fold(e)) for e in exprs)
    src = f"lambda {', '.join(names)}: ({body},)"
    return eval(compile(src, "<rptlab-expr>", "eval"), dict(_NS))


def compile_expr(e: Expr, names: Sequence[str]) -> Callable:
    f = compile_exprs([e], names)
    return lambda *args: f(*args)[0]


def broadcast_eval(f: Callable, args: Sequence[np.ndarray], dtype=float) -> np.ndarray:
    """Call a compiled multi-output function and stack outputs on the last axis."""
    outs = f(*args)
    shape = np.broadcast_shapes(*[np.shape(a) for a in args]) if args else ()
    res = np.empty(shape + (len(outs),), dtype=np.result_type(dtype, *[np.asarray(o).dtype for o in outs]))
    for j, o in enumerate(outs):
        res[..., j] = o
    return res


class Field:
    """A parsed expression bundled with its compiled evaluator over ``x1..xn``."""

    def __init__(self, expr: Expr | str, n: int):
        self.n = n
        self.expr = parse(expr, n) if isinstance(expr, str) else fold(expr)
        self._f = compile_expr(self.expr, var_names(n))

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        val = self._f(*[x[..., j] for j in range(self.n)])
        return np.broadcast_to(np.asarray(val, dtype=float), x.shape[:-1]).copy() if np.ndim(val) == 0 else np.asarray(val)

    def grad(self) -> "list[Field]":
        return [Field(diff(self.expr, j + 1), self.n) for j in range(self.n)]

    def __str__(self) -> str:
        return to_str(self.expr)
