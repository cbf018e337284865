"""Principal-branch Lambert W and the exponential integral Ei.

Only real arguments are supported.  Both are written out directly rather
than pulled from scipy so the package runs on numpy alone and the closed
forms keep a known error budget.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = ["SpecFnTolerance", "DEFAULT_TOL", "lambert_w0", "expi", "ei_segment"]

EULER_GAMMA = 0.57721566490153286060651209008240243
_BRANCH_POINT = -1.0 / math.e
_EI_SERIES_LIMIT = 40.0


@dataclass(frozen=True)
class SpecFnTolerance:
    abs_tol: float = 1e-12
    max_iter: int = 100

    def __post_init__(self) -> None:
        if not self.abs_tol > 0:
            raise ValueError("abs_tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


DEFAULT_TOL = SpecFnTolerance()


def _w0_initial(x: float) -> float:
    if x < -0.25:
        # branch-point expansion in p = sqrt(2(ex + 1))
        p = math.sqrt(max(2.0 * (math.e * x + 1.0), 0.0))
        return -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p**3
    if x < 3.0:
        return math.log1p(x) if x >= 0 else x * (1.0 - x)
    lx = math.log(x)
    return lx - math.log(lx)


def lambert_w0(x: float, tol: SpecFnTolerance = DEFAULT_TOL) -> float:
    """Solve ``w * exp(w) = x`` on the principal branch ``w >= -1``.

    Halley iteration from a branch-point series (near ``-1/e``), ``log1p``
    (moderate ``x``) or the two-term asymptotic guess (large ``x``).
    """
    x = float(x)
    if math.isnan(x) or x < _BRANCH_POINT - 1e-15:
        raise ValueError(f"lambert_w0 is undefined for x < -1/e (got {x!r})")
    if x == 0.0:
        return 0.0
    if x <= _BRANCH_POINT:
        return -1.0
    if math.isinf(x):
        return math.inf

    w = _w0_initial(x)
    for _ in range(tol.max_iter):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        if wp1 <= 0.0:
            w = -1.0 + 1e-12
            continue
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        step = f / denom
        w_next = w - step
        if w_next < -1.0:
            w_next = 0.5 * (w - 1.0)
        if abs(w_next - w) <= 1e-15 * max(1.0, abs(w_next)):
            w = w_next
            break
        w = w_next
    return w


def _expi_series(x: float) -> float:
    total = 0.0
    term = 1.0
    n = 0
    while True:
        n += 1
        term *= x / n
        contrib = term / n
        total += contrib
        if abs(contrib) <= 1e-17 * abs(total):
            break
        if n > 500:
            break
    return EULER_GAMMA + math.log(abs(x)) + total


def _expi_asymptotic(x: float) -> float:
    # e^x/x * sum k!/x^k, truncated at the smallest term
    total = 1.0
    term = 1.0
    k = 0
    while True:
        k += 1
        nxt = term * k / x
        if nxt >= term or nxt < 1e-18:
            if nxt < term:
                total += nxt
            break
        term = nxt
        total += term
    return math.exp(x) / x * total


def expi(x: float) -> float:
    """Exponential integral ``Ei(x)`` for ``x > 0``."""
    x = float(x)
    if not x > 0:
        raise ValueError(f"expi is only defined here for x > 0 (got {x!r})")
    if x <= _EI_SERIES_LIMIT:
        return _expi_series(x)
    return _expi_asymptotic(x)


def ei_segment(y1: float, y2: float) -> float:
    """``∫_{y1}^{y2} e^t / t dt`` for ``0 < y1 <= y2``.

    Short intervals are integrated directly instead of differencing two
    nearly equal Ei values.
    """
    if not 0 < y1 <= y2:
        raise ValueError(f"ei_segment needs 0 < y1 <= y2 (got {y1!r}, {y2!r})")
    if y1 == y2:
        return 0.0
    if (y2 - y1) <= 1e-3 * y1:
        return _gauss_legendre_ei(y1, y2)
    return expi(y2) - expi(y1)


_GL_NODES = (
    (-0.9602898564975363, 0.1012285362903763),
    (-0.7966664774136267, 0.2223810344533745),
    (-0.5255324099163290, 0.3137066458778873),
    (-0.1834346424956498, 0.3626837833783620),
    (0.1834346424956498, 0.3626837833783620),
    (0.5255324099163290, 0.3137066458778873),
    (0.7966664774136267, 0.2223810344533745),
    (0.9602898564975363, 0.1012285362903763),
)


def _gauss_legendre_ei(a: float, b: float) -> float:
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    total = 0.0
    for node, weight in _GL_NODES:
        t = mid + half * node
        total += weight * math.exp(t) / t
    return half * total
