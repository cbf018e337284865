"""Seller calculus: refund cost, realised and expected utility, and risk.

The number of local users ``n_l`` is uniform on ``{0, ..., M}``.  Selling
``A`` of the ``V`` VMs displaces local users once ``n_l`` exceeds ``V - A``;
each displaced user is refunded ``r_l``.
"""
from __future__ import annotations

import logging
import math
from fractions import Fraction
from dataclasses import dataclass

from .core import ContractTerm, SellerParams, ValidationError

__all__ = [
    "SellerRiskInputs",
    "refund_cost",
    "seller_utility",
    "expected_refund",
    "seller_expected_utility",
    "risk_threshold",
    "local_surplus",
    "seller_risk_at",
    "seller_risk",
]

log = logging.getLogger(__name__)

_TIE_RTOL = 1e-12


@dataclass(frozen=True)
class SellerRiskInputs:
    """Threshold ``c1`` on the surplus ``S = n_l p_l - C^s`` for term ``(a, p)``."""

    c1: float
    a: int
    p: float


def _check_amount(a: int, params: SellerParams) -> None:
    if not 1 <= a <= params.V:
        raise ValidationError(f"amount must lie in 1..{params.V} (got {a})")


def refund_cost(n_l: int, a: int, params: SellerParams) -> float:
    if not 0 <= n_l <= params.M:
        raise ValidationError(f"n_l must lie in 0..{params.M} (got {n_l})")
    _check_amount(a, params)
    free = params.V - a
    if n_l <= free:
        return 0.0
    if n_l <= params.V:
        return params.r_l * (n_l - free)
    return params.r_l * a


def seller_utility(n_l: int, term: ContractTerm, params: SellerParams) -> float:
    return n_l * params.p_l + term.amount * term.price - refund_cost(n_l, term.amount, params)


def _refund_linear_coef(params: SellerParams) -> float:
    r, M, V = params.r_l, params.M, params.V
    return (r + 2 * M * r - 2 * V * r) / (2 * (M + 1))


def expected_refund(a: int, params: SellerParams) -> float:
    _check_amount(a, params)
    return params.r_l * a * a / (2 * (params.M + 1)) + _refund_linear_coef(params) * a


def seller_expected_utility(term: ContractTerm, params: SellerParams) -> float:
    a, p = term.amount, term.price
    _check_amount(a, params)
    return (
        -params.r_l * a * a / (2 * (params.M + 1))
        + (p - _refund_linear_coef(params)) * a
        + params.p_l * params.M / 2
    )


def risk_threshold(term: ContractTerm, params: SellerParams) -> SellerRiskInputs:
    """``c1 = λ1·E[U^s] - A·P``: the surplus level at or below which trading is risky."""
    c1 = params.lambda1_s * seller_expected_utility(term, params) - term.amount * term.price
    return SellerRiskInputs(c1=c1, a=term.amount, p=term.price)


def _surplus(n_l, a, p, r, V):
    # generic in the number type so the exact tie check can pass Fractions
    if n_l <= V - a:
        return n_l * p
    if n_l <= V:
        return n_l * p - n_l * r + r * (V - a)
    return n_l * p - r * a


def local_surplus(n_l: int, a: int, params: SellerParams) -> float:
    """``S(n_l) = n_l p_l - C^s``; non-decreasing in ``n_l``."""
    return _surplus(n_l, a, params.p_l, params.r_l, params.V)


def _exact_threshold(term: ContractTerm, params: SellerParams) -> Fraction:
    p_l, r, lam, price = (Fraction(v) for v in (params.p_l, params.r_l, params.lambda1_s, term.price))
    a, V, M = term.amount, params.V, params.M
    coef = (r + 2 * M * r - 2 * V * r) / (2 * (M + 1))
    mean = -r * a * a / (2 * (M + 1)) + (price - coef) * a + p_l * M / 2
    return lam * mean - a * price


def _closed_form_count(c1: float, a: int, params: SellerParams) -> int:
    """Number of ``n_l`` in ``0..M`` with ``S(n_l) <= c1``, from the piecewise CDF."""
    p, r, V, M = params.p_l, params.r_l, params.V, params.M
    free = V - a
    if c1 < 0:
        return 0
    if c1 > M * p - r * a:
        return M + 1
    if c1 < free * p + p - r:
        return min(math.floor(c1 / p) + 1, free + 1)
    if c1 < (V + 1) * p - r * a:
        return free + 1 + min(math.floor((c1 - free * p) / (p - r)), a)
    return math.floor((c1 + r * a) / p) + 1


def seller_risk_at(c1: float, a: int, params: SellerParams) -> float:
    """``Pr{S <= c1}`` for amount ``a``.

    Evaluates the piecewise closed form, then nudges the count across any
    floor boundary where rounding disagrees with the direct comparison
    ``S(n_l) <= c1`` (the comparison wins).
    """
    _check_amount(a, params)
    M = params.M
    if params.p_l == params.r_l:
        # degenerate slope on the middle segment; count directly
        count = sum(1 for n in range(M + 1) if local_surplus(n, a, params) <= c1)
        return count / (M + 1)

    count = _closed_form_count(c1, a, params)
    fixed = count
    while fixed <= M and local_surplus(fixed, a, params) <= c1:
        fixed += 1
    while fixed > 0 and local_surplus(fixed - 1, a, params) > c1:
        fixed -= 1
    if fixed != count:
        log.debug("seller risk boundary tie at c1=%r a=%d: %d -> %d", c1, a, count, fixed)
    return fixed / (M + 1)


def seller_risk(term: ContractTerm, params: SellerParams) -> float:
    """``Pr{U^s <= λ1 E[U^s]}``.

    Outcomes whose surplus lies within rounding distance of the threshold are
    re-decided in exact rational arithmetic on the (binary) inputs, so exact
    ties always count as risky.
    """
    inputs = risk_threshold(term, params)
    count = round(seller_risk_at(inputs.c1, inputs.a, params) * (params.M + 1))
    tol = _TIE_RTOL * (abs(inputs.c1) + params.M * params.p_l + term.amount * term.price)

    def near(n):
        return abs(local_surplus(n, term.amount, params) - inputs.c1) <= tol

    lo, hi = count, count
    while lo > 0 and near(lo - 1):
        lo -= 1
    while hi <= params.M and near(hi):
        hi += 1
    nearby = list(range(lo, hi))
    if nearby:
        c1 = _exact_threshold(term, params)
        p_l, r = Fraction(params.p_l), Fraction(params.r_l)
        below = [n for n in nearby if _surplus(n, term.amount, p_l, r, params.V) <= c1]
        # surplus is non-decreasing, so the risky outcomes form a prefix
        exact = (max(below) + 1) if below else nearby[0]
        if exact != count:
            log.debug("seller risk exact tie at a=%d p=%r: %d -> %d", term.amount, term.price, count, exact)
        count = exact
    return count / (params.M + 1)
