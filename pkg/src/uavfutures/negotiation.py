"""Forward-contract design by bilateral quotation.

The seller quotes ascending prices ``p_min, p_min + dp, ...``.  In each
round both sides report the amounts they accept under their risk caps.
Overlapping rounds yield a candidate term, and the final term is picked
from the candidates.  Quoting stops early once the buyer accepts nothing
or the two acceptable sets are non-empty but disjoint.

With ``final="buyer"`` the seller proposes each round's candidate and the
buyer picks the final term.  ``final="seller"`` swaps the roles.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import buyer as _buyer
from . import seller as _seller
from .core import BuyerParams, ContractTerm, MarketParams, SellerParams

__all__ = [
    "FinalDecider",
    "StopReason",
    "QuotationRound",
    "NegotiationOutcome",
    "seller_acceptable_set",
    "buyer_acceptable_set",
    "pick_best",
    "negotiate",
]


class FinalDecider(str, enum.Enum):
    BUYER = "buyer"
    SELLER = "seller"


class StopReason(str, enum.Enum):
    BUYER_EMPTY = "buyer_empty"
    DISJOINT = "disjoint"
    EXHAUSTED = "exhausted"


@dataclass(frozen=True)
class QuotationRound:
    index: int
    price: float
    seller_set: frozenset[int]
    # None when the seller accepted nothing and the buyer was not asked
    buyer_set: frozenset[int] | None
    candidate: tuple[int, float] | None = None


@dataclass(frozen=True)
class NegotiationOutcome:
    contract: ContractTerm | None
    rounds: int
    candidates: list[tuple[int, float]]
    transcript: list[QuotationRound] = field(repr=False)
    stop_reason: StopReason = StopReason.EXHAUSTED

    @property
    def failed(self) -> bool:
        return self.contract is None


def seller_acceptable_set(p: float, seller: SellerParams) -> frozenset[int]:
    return frozenset(
        a
        for a in range(1, seller.V + 1)
        if _seller.seller_risk(ContractTerm(a, p), seller) <= seller.lambda2_s
    )


def buyer_acceptable_set(p: float, buyer: BuyerParams, V: int) -> frozenset[int]:
    """Amounts in ``1..V`` whose risk at full power ``q_max`` is within the cap."""
    amounts = np.arange(1, V + 1)
    risk = _buyer.buyer_risk_amounts(buyer.q_max, p, amounts, buyer)
    return frozenset(int(a) for a in amounts[risk <= buyer.lambda2_b])


def pick_best(options, utility) -> tuple[int, float]:
    """Argmax of ``utility(amount, price)``; ties go to smaller amount, then price."""
    best = None
    best_key = None
    for amount, price in options:
        key = (utility(amount, price), -amount, -price)
        if best_key is None or key > best_key:
            best, best_key = (amount, price), key
    assert best is not None
    return best


def negotiate(
    final: FinalDecider | str,
    seller: SellerParams,
    buyer: BuyerParams,
    market: MarketParams,
) -> NegotiationOutcome:
    final = FinalDecider(final)

    def seller_eu(a: int, p: float) -> float:
        return _seller.seller_expected_utility(ContractTerm(a, p), seller)

    def buyer_eu(a: int, p: float) -> float:
        return _buyer.buyer_expected_utility(buyer.q_max, ContractTerm(a, p), buyer)

    propose, decide = (seller_eu, buyer_eu) if final is FinalDecider.BUYER else (buyer_eu, seller_eu)

    transcript: list[QuotationRound] = []
    candidates: list[tuple[int, float]] = []
    stop = StopReason.EXHAUSTED
    for n in range(1, market.n_prices + 1):
        price = market.price(n)
        s_set = seller_acceptable_set(price, seller)
        if not s_set:
            transcript.append(QuotationRound(n, price, s_set, None))
            continue
        b_set = buyer_acceptable_set(price, buyer, seller.V)
        if not b_set:
            transcript.append(QuotationRound(n, price, s_set, b_set))
            stop = StopReason.BUYER_EMPTY
            break
        both = s_set & b_set
        if not both:
            transcript.append(QuotationRound(n, price, s_set, b_set))
            stop = StopReason.DISJOINT
            break
        amount, _ = pick_best(((a, price) for a in sorted(both)), propose)
        candidates.append((amount, price))
        transcript.append(QuotationRound(n, price, s_set, b_set, (amount, price)))

    contract = None
    if candidates:
        amount, price = pick_best(candidates, decide)
        contract = ContractTerm(amount, price)
    return NegotiationOutcome(
        contract=contract,
        rounds=len(transcript),
        candidates=candidates,
        transcript=transcript,
        stop_reason=stop,
    )
