"""Buyer calculus: realised utility, expected utility and risk.

Randomness on the buyer side comes from the task count ``n_b`` (uniform on
``{1..N}``) and the per-watt SNR coefficient ``gamma`` (uniform on
``[eps1, eps2]``).  The expected utility factorises through
``X = min(A, n_b)`` and ``Y = 1/log2(1 + q gamma)``, which are independent.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import BuyerParams, ContractTerm, TradingEnvironment, ValidationError, log2_1p
from .specfn import ei_segment

__all__ = [
    "BuyerDerived",
    "derived",
    "offload_count",
    "buyer_utility",
    "x_expectation",
    "y_expectation",
    "expected_gain_per_task",
    "buyer_expected_utility",
    "risk_threshold",
    "z_cdf",
    "buyer_risk",
    "buyer_risk_amounts",
]

LN2 = math.log(2.0)


@dataclass(frozen=True)
class BuyerDerived:
    """Constants that depend on the transmit power ``q`` only.

    ``c2`` is the expected per-task gain ``tau_b - k E[Y]`` with
    ``k = (D + omega2 q D)/W``; ``[c4, c4p]`` is the support of
    ``Z = tau_b - k Y``; ``y1, y2`` are the log-SNR integration bounds.
    ``c3p`` is filled in only when a contract term is supplied.
    """

    q: float
    k: float
    c2: float
    c4: float
    c4p: float
    y1: float
    y2: float
    c3p: float | None = None


def _check_power(q: float) -> None:
    if not q > 0:
        raise ValidationError(f"transmit power must be positive (got {q!r})")


def _delay_weight(q: float, params: BuyerParams) -> float:
    return (params.D + params.omega2 * q * params.D) / params.W


def derived(q: float, params: BuyerParams, term: ContractTerm | None = None) -> BuyerDerived:
    _check_power(q)
    k = _delay_weight(q, params)
    c3p = None if term is None else risk_threshold(term, params)
    return BuyerDerived(
        q=q,
        k=k,
        c2=params.tau_b - k * y_expectation(q, params),
        c4=params.tau_b - k / log2_1p(q * params.eps1),
        c4p=params.tau_b - k / log2_1p(q * params.eps2),
        y1=math.log1p(q * params.eps1),
        y2=math.log1p(q * params.eps2),
        c3p=c3p,
    )


def offload_count(a: int, n_b: int) -> int:
    return min(a, n_b)


def buyer_utility(
    q: float, env: TradingEnvironment, term: ContractTerm, params: BuyerParams
) -> float:
    """Saved completion time minus weighted payment and transmit energy."""
    _check_power(q)
    x = offload_count(term.amount, env.n_b)
    rate = params.W * log2_1p(q * env.gamma)
    tx_time = x * params.D / rate
    saved = x * params.tau_b - (params.tau_s + tx_time)
    energy = q * tx_time + params.ell
    return saved - params.omega1 * term.amount * term.price - params.omega2 * energy


def x_expectation(a: int, params: BuyerParams) -> float:
    if not 1 <= a <= params.N:
        raise ValidationError(f"amount must lie in 1..{params.N} (got {a})")
    N = params.N
    return (-a * a + (2 * N + 1) * a) / (2 * N)


def y_expectation(q: float, params: BuyerParams) -> float:
    """``E[1/log2(1 + q gamma)]`` for uniform ``gamma``."""
    _check_power(q)
    y1 = math.log1p(q * params.eps1)
    y2 = math.log1p(q * params.eps2)
    return LN2 * ei_segment(y1, y2) / (q * (params.eps2 - params.eps1))


def expected_gain_per_task(q: float, params: BuyerParams) -> float:
    return params.tau_b - _delay_weight(q, params) * y_expectation(q, params)


def buyer_expected_utility(q: float, term: ContractTerm, params: BuyerParams) -> float:
    c2 = expected_gain_per_task(q, params)
    a, N = term.amount, params.N
    x_expectation(a, params)  # range check
    return (
        -c2 * a * a / (2 * N)
        + (c2 + c2 / (2 * N) - params.omega1 * term.price) * a
        - params.tau_s
        - params.omega2 * params.ell
    )


def risk_threshold(term: ContractTerm, params: BuyerParams) -> float:
    """Right-hand side ``(λ1+1)U_min + tau_s + ω1 A P + ω2 ℓ`` of the risk event."""
    return (
        (params.lambda1_b + 1) * params.U_min
        + params.tau_s
        + params.omega1 * term.amount * term.price
        + params.omega2 * params.ell
    )


def z_cdf(z, q: float, params: BuyerParams):
    """CDF of ``Z = tau_b - (D + ω2 q D) / (W log2(1 + q gamma))``.

    Accepts a scalar or an array of evaluation points.
    """
    _check_power(q)
    k = _delay_weight(q, params)
    lo = params.tau_b - k / log2_1p(q * params.eps1)
    hi = params.tau_b - k / log2_1p(q * params.eps2)
    assert hi < params.tau_b
    zz = np.asarray(z, dtype=float)
    inside = (zz >= lo) & (zz <= hi)
    # only evaluate the exponent where tau_b - z > 0 is guaranteed
    safe = np.where(inside, zz, lo)
    mid = (np.exp2(k / (params.tau_b - safe)) - q * params.eps1 - 1.0) / (
        q * params.eps2 - q * params.eps1
    )
    out = np.where(zz < lo, 0.0, np.where(zz > hi, 1.0, np.clip(mid, 0.0, 1.0)))
    if out.ndim == 0:
        return float(out)
    return out


def buyer_risk(q: float, term: ContractTerm, params: BuyerParams) -> float:
    """``Pr{U^b <= (λ1+1) U_min}`` via the mixture over ``X = min(A, n_b)``."""
    a, N = term.amount, params.N
    if not 1 <= a <= N:
        raise ValidationError(f"amount must lie in 1..{N} (got {a})")
    c3p = risk_threshold(term, params)
    if a == 1:
        return z_cdf(c3p, q, params)
    head = z_cdf(c3p / np.arange(1, a), q, params)
    tail = z_cdf(c3p / a, q, params)
    return float(np.sum(head) / N + (N - a + 1) / N * tail)


def buyer_risk_amounts(q: float, price: float, amounts: np.ndarray, params: BuyerParams) -> np.ndarray:
    """:func:`buyer_risk` for every amount in ``amounts`` at one price."""
    amounts = np.asarray(amounts, dtype=int)
    N = params.N
    base = (params.lambda1_b + 1) * params.U_min + params.tau_s + params.omega2 * params.ell
    c3p = base + params.omega1 * amounts * price
    x = np.arange(1, int(amounts.max()) + 1)
    cdf = z_cdf(c3p[:, None] / x[None, :], q, params)
    below = x[None, :] < amounts[:, None]
    at = x[None, :] == amounts[:, None]
    weights = np.where(below, 1.0 / N, 0.0) + np.where(at, (N - amounts[:, None] + 1) / N, 0.0)
    return np.sum(weights * cdf, axis=1)
