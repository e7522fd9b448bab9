"""Apply a differential operator to a black-box function by finite differences."""
from __future__ import annotations

from math import comb
from typing import Callable

import numpy as np

from .symbols import SymbolModel


def _stencil(alpha: tuple) -> list[tuple[np.ndarray, float]]:
    """Tensor-product central stencil for d^alpha with unit step.

    Offsets are in units of half steps; each axis of order k uses nodes
    (k - 2i)/2, i = 0..k, weights (-1)^i C(k, i).
    """
    pts = [(np.zeros(len(alpha), dtype=int), 1.0)]
    for j, k in enumerate(alpha):
        if k == 0:
            continue
        nxt = []
        for off, w in pts:
            for i in range(k + 1):
                o = off.copy()
                o[j] += k - 2 * i
                nxt.append((o, w * (-1) ** i * comb(k, i)))
        pts = nxt
    return pts


def apply_operator(s: SymbolModel, u: Callable[[np.ndarray], np.ndarray], X: np.ndarray,
                   step: float) -> np.ndarray:
    """(P u)(X) with nested central differences of spacing ``step``,
    Richardson-extrapolated once (steps ``step`` and ``2*step``)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = X.shape[1]
    coeffs = s.coefficients(X)
    alphas = sorted({a for a, _ in coeffs})
    # collect every offset (in half steps of the small spacing)
    offsets: dict[tuple, int] = {}
    plans = {}
    for a in alphas:
        plan = []
        for scale in (1, 2):
            for off, w in _stencil(a):
                key = tuple(int(v) for v in off * scale)
                if key not in offsets:
                    offsets[key] = len(offsets)
                plan.append((scale, offsets[key], w))
        plans[a] = plan
    off_arr = np.array(list(offsets.keys()), dtype=float) * (0.5 * step)
    pts = (X[:, None, :] + off_arr[None, :, :]).reshape(-1, n)
    vals = np.asarray(u(pts)).reshape(len(X), len(off_arr))
    out = np.zeros(len(X), dtype=complex)
    for a, c in coeffs:
        k = sum(a)
        if k == 0:
            out += c * vals[:, offsets[(0,) * n]]
            continue
        acc = {1: np.zeros(len(X), dtype=complex), 2: np.zeros(len(X), dtype=complex)}
        for scale, idx, w in plans[a]:
            acc[scale] += w * vals[:, idx]
        d1 = acc[1] / step**k
        d2 = acc[2] / (2 * step) ** k
        deriv = (4.0 * d1 - d2) / 3.0
        out += c * (-1j) ** k * deriv
    return out
