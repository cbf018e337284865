"""Independent reference computations used by the tests and ``selftest``.

Nothing here reuses the closed forms it checks.  Seller quantities are
enumerated over every ``n_l``, buyer quantities are Monte Carlo estimates,
special functions use bisection or quadrature, power optima a dense grid,
and the onsite sweep is a plain scalar loop.
"""
from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from .core import BuyerParams, ContractTerm, MarketParams, SellerParams, TradingEnvironment
from .negotiation import NegotiationOutcome, StopReason, buyer_acceptable_set, seller_acceptable_set

__all__ = [
    "seller_enumeration",
    "buyer_monte_carlo",
    "z_cdf_monte_carlo",
    "lambert_w0_bisect",
    "ei_segment_simpson",
    "power_grid_min",
    "continuation_candidates",
    "onsite_reference",
]


def _refund(n_l: int, a: int, V: int, r_l):
    free = V - a
    if n_l <= free:
        return 0
    return r_l * min(n_l - free, a)


def seller_enumeration(term: ContractTerm, params: SellerParams) -> tuple[float, float]:
    """``(E[U^s], Pr{U^s <= λ1 E[U^s]})`` by summing over ``n_l = 0..M``.

    Comparisons within rounding distance of the threshold are redone in
    exact rationals on the binary inputs, so true ties count as risky.
    """
    a, p, M = term.amount, term.price, params.M
    utilities = [n * params.p_l + a * p - _refund(n, a, params.V, params.r_l) for n in range(M + 1)]
    mean = math.fsum(utilities) / (M + 1)
    threshold = params.lambda1_s * mean
    tol = 1e-9 * (abs(threshold) + 1.0)
    exact_threshold = None
    count = 0
    for n, u in enumerate(utilities):
        if abs(u - threshold) > tol:
            count += u <= threshold
            continue
        if exact_threshold is None:
            fp, fp_l, fr_l, lam = (Fraction(v) for v in (p, params.p_l, params.r_l, params.lambda1_s))
            exact = [k * fp_l + a * fp - _refund(k, a, params.V, fr_l) for k in range(M + 1)]
            exact_threshold = lam * sum(exact) / (M + 1)
        count += exact[n] <= exact_threshold
    return mean, count / (M + 1)


def _realised(q, n_b, gamma, term: ContractTerm, params: BuyerParams) -> np.ndarray:
    x = np.minimum(term.amount, n_b)
    rate = params.W * np.log2(1.0 + q * gamma)
    tx = x * params.D / rate
    saved = x * params.tau_b - (params.tau_s + tx)
    energy = q * tx + params.ell
    return saved - params.omega1 * term.amount * term.price - params.omega2 * energy


def buyer_monte_carlo(
    q: float, term: ContractTerm, params: BuyerParams, rng: np.random.Generator, size: int
) -> tuple[float, float, float, float]:
    """Sample mean and risk of the realised buyer utility, with standard errors.

    Returns ``(mean, mean_se, risk, risk_se)``.
    """
    n_b = rng.integers(1, params.N, size=size, endpoint=True)
    gamma = rng.uniform(params.eps1, params.eps2, size=size)
    u = _realised(q, n_b, gamma, term, params)
    floor = (params.lambda1_b + 1) * params.U_min
    hits = (u <= floor).astype(float)
    mean = float(u.mean())
    risk = float(hits.mean())
    return mean, float(u.std(ddof=1) / math.sqrt(size)), risk, float(hits.std(ddof=1) / math.sqrt(size))


def z_cdf_monte_carlo(
    z: float, q: float, params: BuyerParams, rng: np.random.Generator, size: int
) -> tuple[float, float]:
    gamma = rng.uniform(params.eps1, params.eps2, size=size)
    sample = params.tau_b - (params.D + params.omega2 * q * params.D) / (
        params.W * np.log2(1.0 + q * gamma)
    )
    hits = (sample <= z).astype(float)
    return float(hits.mean()), float(hits.std(ddof=1) / math.sqrt(size))


def lambert_w0_bisect(x: float, iters: int = 200) -> float:
    """Principal branch of ``w e^w = x`` by bisection on ``[-1, max(1, ln(1+x))+1]``."""
    lo, hi = -1.0, max(1.0, math.log1p(max(x, 0.0))) + 1.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid * math.exp(mid) < x:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * max(1.0, abs(mid)):
            break
    return 0.5 * (lo + hi)


def ei_segment_simpson(y1: float, y2: float, panels: int = 20000) -> float:
    """``∫ e^t/t`` over ``[y1, y2]`` by composite Simpson, error O(h^4)."""
    if panels % 2:
        panels += 1
    t = np.linspace(y1, y2, panels + 1)
    f = np.exp(t) / t
    h = (y2 - y1) / panels
    return float(h / 3.0 * (f[0] + f[-1] + 4.0 * f[1:-1:2].sum() + 2.0 * f[2:-1:2].sum()))


def power_grid_min(gamma: float, omega2: float, q_max: float, points: int = 100_000) -> float:
    """Smallest ``(1 + ω2 q)/log2(1 + qγ)`` over a log-spaced grid on ``[1e-6 q_max, q_max]``."""
    q = np.geomspace(q_max * 1e-6, q_max, points)
    return float(np.min((1.0 + omega2 * q) / np.log2(1.0 + q * gamma)))


def continuation_candidates(
    outcome: NegotiationOutcome, seller: SellerParams, buyer: BuyerParams, market: MarketParams
) -> list[tuple[int, float]]:
    """Prices after an early stop at which both acceptable sets still overlap.

    Returns ``(smallest common amount, price)`` for each such round.
    """
    if outcome.stop_reason is StopReason.EXHAUSTED:
        return []
    extra = []
    for n in range(outcome.rounds + 1, market.n_prices + 1):
        price = market.price(n)
        s_set = seller_acceptable_set(price, seller)
        if not s_set:
            continue
        both = s_set & buyer_acceptable_set(price, buyer, seller.V)
        if both:
            extra.append((min(both), price))
    return extra


def onsite_reference(
    env: TradingEnvironment,
    q: float,
    seller: SellerParams,
    buyer: BuyerParams,
    market: MarketParams,
    final: str,
) -> tuple[ContractTerm | None, int]:
    """Round-by-round scalar version of the onsite quotation sweep."""
    rate = buyer.W * math.log2(1.0 + q * env.gamma)

    def s_util(a, p):
        return env.n_l * seller.p_l + a * p - _refund(env.n_l, a, seller.V, seller.r_l)

    def b_util(a, p):
        x = min(a, env.n_b)
        tx = x * buyer.D / rate
        return x * buyer.tau_b - (buyer.tau_s + tx) - buyer.omega2 * (q * tx + buyer.ell) - (
            buyer.omega1 * a * p
        )

    propose, decide = (s_util, b_util) if final == "buyer" else (b_util, s_util)
    candidates = []
    rounds = 0
    for n in range(1, market.n_prices + 1):
        rounds = n
        price = market.price(n)
        s_set = [a for a in range(1, seller.V + 1)
                 if a * price - _refund(env.n_l, a, seller.V, seller.r_l) >= 0]
        if not s_set:
            continue
        both = [a for a in s_set if b_util(a, price) > 0]
        if not both:
            break
        best = max(both, key=lambda a: (propose(a, price), -a))
        candidates.append((best, price))
    if not candidates:
        return None, rounds
    amount, price = max(candidates, key=lambda c: (decide(*c), -c[0], -c[1]))
    return ContractTerm(amount, price), rounds
