"""Monte Carlo engine for futures and onsite trading.

A run draws one scenario (seller, buyer and market constants) and then
``T`` tradings of ``(n_l, n_b, gamma)``.  Futures runs negotiate once from
the distributions and fulfil the contract every trading.  Onsite runs
negotiate each trading on realised values.  The scenario and the
environment sequence come from separate child streams of the run seed, so
runs that differ only in mode, ``dp`` or ``tau_b`` see the same tradings.
"""
from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import buyer as _buyer
from . import seller as _seller
from .core import (
    BuyerParams,
    ContractTerm,
    MarketParams,
    SellerParams,
    TradingEnvironment,
    ValidationError,
    log2_1p,
    make_rng,
    sample_environments,
    validate,
)
from .negotiation import FinalDecider, NegotiationOutcome, negotiate, pick_best
from .power import optimal_power

__all__ = [
    "INTEGER_KEYS",
    "ScenarioRanges",
    "Scenario",
    "SimulationConfig",
    "TradingRecord",
    "RunSummary",
    "RunResult",
    "draw_scenario",
    "completion_time",
    "onsite_negotiate",
    "run_futures",
    "run_onsite",
    "summarize",
]

INTEGER_KEYS = frozenset({"V", "M", "N"})


@dataclass(frozen=True)
class ScenarioRanges:
    """Closed ranges ``(lo, hi)`` per constant, in SI units.

    Defaults are the standard simulation ranges.  ``M`` and
    ``N`` are drawn above the drawn ``V``, and ``r_l`` at or below the drawn
    ``p_l``.  The price grid itself is fixed, not drawn.
    """

    r_l: tuple[float, float] = (0.2, 0.4)
    p_l: tuple[float, float] = (0.3, 0.5)
    V: tuple[int, int] = (30, 35)
    M: tuple[int, int] = (31, 40)
    N: tuple[int, int] = (31, 40)
    lambda1_s: tuple[float, float] = (0.95, 1.0)
    lambda2_s: tuple[float, float] = (0.3, 0.4)
    tau_s: tuple[float, float] = (0.08, 0.08)
    tau_b: tuple[float, float] = (0.35, 1.6)
    D_bits: tuple[float, float] = (3e6, 4e6)
    W_hz: tuple[float, float] = (6e6, 8e6)
    q_max_w: tuple[float, float] = (0.5, 1.0)
    eps1: tuple[float, float] = (5.0, 100.0)
    eps2: tuple[float, float] = (300.0, 400.0)
    ell: tuple[float, float] = (1e-5, 1e-5)
    omega1: tuple[float, float] = (0.3, 0.5)
    omega2: tuple[float, float] = (0.3, 0.5)
    lambda1_b: tuple[float, float] = (0.3, 0.4)
    lambda2_b: tuple[float, float] = (0.2, 0.3)
    u_min: tuple[float, float] = (1e-3, 1e-3)
    t_nl: tuple[float, float] = (0.005, 0.030)
    p_min: tuple[float, float] = (0.3, 0.3)
    p_max: tuple[float, float] = (5.0, 5.0)
    dp: tuple[float, float] = (0.005, 0.005)

    def with_values(self, **values) -> "ScenarioRanges":
        """Pin keys to a scalar or replace them with a ``(lo, hi)`` pair."""
        updates = {}
        for key, value in values.items():
            if key not in _RANGE_KEYS:
                raise ValidationError(f"unknown parameter {key!r}")
            updates[key] = tuple(value) if isinstance(value, (tuple, list)) else (value, value)
        return replace(self, **updates)


_RANGE_KEYS = tuple(f.name for f in fields(ScenarioRanges))


@dataclass(frozen=True)
class Scenario:
    seller: SellerParams
    buyer: BuyerParams
    market: MarketParams


@dataclass(frozen=True)
class SimulationConfig:
    ranges: ScenarioRanges = field(default_factory=ScenarioRanges)
    # draw each constant from its range (True) or use range midpoints (False)
    sample_scenario: bool = False
    # charge the one-off futures negotiation latency to the first trading
    fold_negotiation_latency: bool = False
    ufair_include_failed: bool = False


@dataclass(frozen=True)
class TradingRecord:
    index: int
    env: TradingEnvironment
    amount: int
    price: float
    q: float
    seller_utility: float
    buyer_utility: float
    buyer_net_utility: float
    nc: int
    nl: float
    t_comp: float
    failed: bool


@dataclass(frozen=True)
class RunSummary:
    tradings: int
    sum_seller_utility: float
    sum_buyer_utility: float
    sum_buyer_net_utility: float
    sum_t_comp: float
    ufair: float
    tfail: int
    sum_nc: int
    sum_nl: float


@dataclass(frozen=True)
class RunResult:
    summary: RunSummary
    records: list[TradingRecord]
    scenario: Scenario
    negotiation: NegotiationOutcome | None = None


def _midpoint(key: str, lo, hi):
    if key in INTEGER_KEYS:
        return (int(lo) + int(hi)) // 2
    return 0.5 * (lo + hi)


def draw_scenario(config: SimulationConfig, rng: np.random.Generator | None = None) -> Scenario:
    """Fix one scenario: midpoints, or one draw per range from ``rng``.

    The same number of variates is consumed whatever the ranges are, so
    pinning a key never shifts the draws of the others.
    """
    r = config.ranges
    if config.sample_scenario and rng is None:
        raise ValueError("sample_scenario requires an rng")

    def real(key):
        lo, hi = getattr(r, key)
        if not config.sample_scenario:
            return _midpoint(key, lo, hi)
        return float(rng.uniform(lo, hi))

    def integer(key, floor=None):
        lo, hi = (int(v) for v in getattr(r, key))
        if floor is not None:
            lo = max(lo, floor)
        if lo > hi:
            raise ValidationError(f"{key} must exceed V")
        if not config.sample_scenario:
            return _midpoint(key, lo, hi)
        return int(rng.integers(lo, hi, endpoint=True))

    p_l = real("p_l")
    lo, hi = r.r_l
    if config.sample_scenario:
        u = float(rng.uniform())
        hi = min(hi, p_l)
        r_l = lo + u * (hi - lo) if hi >= lo else lo
    else:
        r_l = _midpoint("r_l", lo, hi)
    V = integer("V")
    M = integer("M", floor=V + 1)
    N = integer("N", floor=V + 1)
    values = {key: real(key) for key in (
        "lambda1_s", "lambda2_s", "tau_s", "tau_b", "D_bits", "W_hz", "q_max_w",
        "eps1", "eps2", "ell", "omega1", "omega2", "lambda1_b", "lambda2_b",
        "u_min", "t_nl",
    )}
    seller = SellerParams(
        r_l=r_l, p_l=p_l, V=V, M=M,
        lambda1_s=values["lambda1_s"], lambda2_s=values["lambda2_s"],
    )
    buyer = BuyerParams(
        N=N, tau_s=values["tau_s"], tau_b=values["tau_b"], D=values["D_bits"],
        W=values["W_hz"], q_max=values["q_max_w"], eps1=values["eps1"],
        eps2=values["eps2"], ell=values["ell"], omega1=values["omega1"],
        omega2=values["omega2"], lambda1_b=values["lambda1_b"],
        lambda2_b=values["lambda2_b"], U_min=values["u_min"],
    )
    # price grid is pinned to the lower end of its range
    market = MarketParams(p_min=r.p_min[0], p_max=r.p_max[0], dp=r.dp[0], t_nl=values["t_nl"])
    validate(seller, buyer, market)
    return Scenario(seller, buyer, market)


def completion_time(
    n_b: int, amount: int, q: float, gamma: float, nl: float, params: BuyerParams
) -> float:
    """Later of local and edge completion, plus negotiation latency.

    A failed trading (``amount == 0``) runs every task on board.
    """
    x = min(amount, n_b)
    if x == 0:
        return params.tau_b * n_b + nl
    edge = params.tau_s + params.D * x / (params.W * log2_1p(gamma * q))
    return max(params.tau_b * (n_b - x), edge) + nl


def _streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    scenario_seq, env_seq = np.random.SeedSequence(seed).spawn(2)
    return make_rng(scenario_seq), make_rng(env_seq)


def _failed_record(i, env, seller, buyer, nc, nl) -> TradingRecord:
    return TradingRecord(
        index=i, env=env, amount=0, price=0.0, q=0.0,
        seller_utility=env.n_l * seller.p_l, buyer_utility=0.0,
        buyer_net_utility=-nl, nc=nc, nl=nl,
        t_comp=completion_time(env.n_b, 0, 0.0, env.gamma, nl, buyer),
        failed=True,
    )


def _record(i, env, term, q, seller, buyer, nc, nl) -> TradingRecord:
    bu = _buyer.buyer_utility(q, env, term, buyer)
    return TradingRecord(
        index=i, env=env, amount=term.amount, price=term.price, q=q,
        seller_utility=_seller.seller_utility(env.n_l, term, seller),
        buyer_utility=bu, buyer_net_utility=bu - nl, nc=nc, nl=nl,
        t_comp=completion_time(env.n_b, term.amount, q, env.gamma, nl, buyer),
        failed=False,
    )


def summarize(
    records: list[TradingRecord],
    *,
    negotiation_rounds: int = 0,
    negotiation_latency: float = 0.0,
    include_failed_prices: bool = False,
) -> RunSummary:
    """Aggregate per-trading records into the run indicators.

    ``negotiation_rounds``/``negotiation_latency`` carry run-level costs
    that no single record owns (the one-off futures negotiation).
    """
    if not records:
        raise ValueError("cannot summarize an empty record list")
    prices = [r.price for r in records if include_failed_prices or not r.failed]
    ufair = statistics.pstdev(prices) if prices else 0.0
    return RunSummary(
        tradings=len(records),
        sum_seller_utility=math.fsum(r.seller_utility for r in records),
        sum_buyer_utility=math.fsum(r.buyer_utility for r in records),
        sum_buyer_net_utility=math.fsum(r.buyer_net_utility for r in records),
        sum_t_comp=math.fsum(r.t_comp for r in records),
        ufair=ufair,
        tfail=sum(1 for r in records if r.failed),
        sum_nc=sum(r.nc for r in records) + negotiation_rounds,
        sum_nl=math.fsum(r.nl for r in records) + negotiation_latency,
    )


def _check_tradings(T: int) -> None:
    if int(T) != T or T < 1:
        raise ValidationError(f"number of tradings must be a positive integer (got {T!r})")


def run_futures(
    config: SimulationConfig, seed: int, T: int, final: FinalDecider | str
) -> RunResult:
    _check_tradings(T)
    scenario_rng, env_rng = _streams(seed)
    sc = draw_scenario(config, scenario_rng)
    seller, buyer, market = sc.seller, sc.buyer, sc.market
    outcome = negotiate(final, seller, buyer, market)
    total_nl = outcome.rounds * market.t_nl

    n_l, n_b, gamma = sample_environments(env_rng, seller, buyer, T)
    records = []
    for i in range(T):
        env = TradingEnvironment(int(n_l[i]), int(n_b[i]), float(gamma[i]))
        if config.fold_negotiation_latency and i == 0:
            nc, nl = outcome.rounds, total_nl
        else:
            nc, nl = 0, 0.0
        if outcome.contract is None:
            records.append(_failed_record(i + 1, env, seller, buyer, nc, nl))
        else:
            q = optimal_power(env.gamma, buyer).q_star
            records.append(_record(i + 1, env, outcome.contract, q, seller, buyer, nc, nl))

    folded = config.fold_negotiation_latency
    summary = summarize(
        records,
        negotiation_rounds=0 if folded else outcome.rounds,
        negotiation_latency=0.0 if folded else total_nl,
        include_failed_prices=config.ufair_include_failed,
    )
    return RunResult(summary, records, sc, outcome)


_CHUNK = 256


def onsite_negotiate(
    env: TradingEnvironment,
    q: float,
    seller: SellerParams,
    buyer: BuyerParams,
    market: MarketParams,
    final: FinalDecider | str,
) -> tuple[ContractTerm | None, int]:
    """Quotation sweep on realised values; returns ``(term or None, rounds)``.

    Same round structure as the forward negotiation.  The seller accepts
    ``a`` when its trading income covers the refunds it causes
    (``aP - C^s >= 0``), and the buyer when its realised utility at power
    ``q`` is positive.  Prices are processed in vectorised blocks.
    """
    final = FinalDecider(final)
    V = seller.V
    a = np.arange(1, V + 1)
    free = V - a
    refund = np.where(
        env.n_l <= free, 0.0,
        np.where(env.n_l <= V, seller.r_l * (env.n_l - free), seller.r_l * a),
    )
    x = np.minimum(a, env.n_b)
    rate = buyer.W * log2_1p(q * env.gamma)
    tx = x * buyer.D / rate
    base = x * buyer.tau_b - (buyer.tau_s + tx) - buyer.omega2 * (q * tx + buyer.ell)
    local = env.n_l * seller.p_l

    cand_amounts: list[int] = []
    cand_prices: list[float] = []
    cand_seller: list[float] = []
    cand_buyer: list[float] = []
    rounds = market.n_prices
    for start in range(0, market.n_prices, _CHUNK):
        n = np.arange(start, min(start + _CHUNK, market.n_prices))
        price = market.p_min + n * market.dp
        income = a[None, :] * price[:, None]
        s_ok = income - refund[None, :] >= 0
        bu = base[None, :] - buyer.omega1 * income
        b_ok = bu > 0
        both = s_ok & b_ok
        s_any = s_ok.any(axis=1)
        stop = s_any & ~(both.any(axis=1))
        hit = np.flatnonzero(stop)
        end = hit[0] if hit.size else len(n)
        rows = np.flatnonzero(s_any[:end])
        if rows.size:
            su = local + income[rows] - refund[None, :]
            ub = bu[rows]
            inter = both[rows]
            chooser = su if final is FinalDecider.BUYER else ub
            pick = np.argmax(np.where(inter, chooser, -np.inf), axis=1)
            idx = np.arange(rows.size)
            cand_amounts.extend((pick + 1).tolist())
            cand_prices.extend(price[rows].tolist())
            cand_seller.extend(su[idx, pick].tolist())
            cand_buyer.extend(ub[idx, pick].tolist())
        if hit.size:
            rounds = int(n[end]) + 1
            break

    if not cand_amounts:
        return None, rounds
    decide = dict(zip(zip(cand_amounts, cand_prices),
                      cand_buyer if final is FinalDecider.BUYER else cand_seller))
    amount, price = pick_best(zip(cand_amounts, cand_prices), lambda am, pr: decide[(am, pr)])
    return ContractTerm(int(amount), float(price)), rounds


def run_onsite(
    config: SimulationConfig, seed: int, T: int, final: FinalDecider | str
) -> RunResult:
    _check_tradings(T)
    scenario_rng, env_rng = _streams(seed)
    sc = draw_scenario(config, scenario_rng)
    seller, buyer, market = sc.seller, sc.buyer, sc.market

    n_l, n_b, gamma = sample_environments(env_rng, seller, buyer, T)
    records = []
    for i in range(T):
        env = TradingEnvironment(int(n_l[i]), int(n_b[i]), float(gamma[i]))
        q = optimal_power(env.gamma, buyer).q_star
        term, rounds = onsite_negotiate(env, q, seller, buyer, market, final)
        nl = rounds * market.t_nl
        if term is None:
            records.append(_failed_record(i + 1, env, seller, buyer, rounds, nl))
        else:
            records.append(_record(i + 1, env, term, q, seller, buyer, rounds, nl))
    summary = summarize(records, include_failed_prices=config.ufair_include_failed)
    return RunResult(summary, records, sc)
