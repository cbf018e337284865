from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest

from uavfutures.buyer import buyer_expected_utility, buyer_risk
from uavfutures.core import ContractTerm, MarketParams
from uavfutures.negotiation import (
    FinalDecider,
    StopReason,
    buyer_acceptable_set,
    negotiate,
    pick_best,
    seller_acceptable_set,
)
from uavfutures.oracles import buyer_monte_carlo, seller_enumeration
from uavfutures.seller import seller_expected_utility
from uavfutures.core import make_rng


def test_full_sets_at_unit_caps(seller, buyer):
    assert seller_acceptable_set(0.5, replace(seller, lambda2_s=1.0)) == frozenset(range(1, seller.V + 1))
    assert buyer_acceptable_set(0.5, replace(buyer, lambda2_b=1.0), seller.V) == frozenset(
        range(1, seller.V + 1)
    )


def test_zero_cap_excludes_risky_amounts(seller):
    s = replace(seller, lambda2_s=0.0)
    for a in seller_acceptable_set(0.6, s):
        assert seller_enumeration(ContractTerm(a, 0.6), s)[1] == 0


def test_prohibitive_price_empties_buyer_set(buyer, seller):
    assert buyer_acceptable_set(50.0, buyer, seller.V) == frozenset()


def test_seller_set_matches_enumeration_filter(seller):
    for price in (0.3, 0.5, 0.9):
        brute = {
            a for a in range(1, seller.V + 1)
            if seller_enumeration(ContractTerm(a, price), seller)[1] <= seller.lambda2_s
        }
        assert seller_acceptable_set(price, seller) == brute


def test_buyer_set_matches_monte_carlo_filter(seller, buyer):
    rng = make_rng(4)
    price = 0.45
    got = buyer_acceptable_set(price, buyer, seller.V)
    for a in range(1, seller.V + 1):
        _, _, risk, se = buyer_monte_carlo(buyer.q_max, ContractTerm(a, price), buyer, rng, 200_000)
        margin = 3 * max(se, 1e-6)
        if risk < buyer.lambda2_b - margin:
            assert a in got
        elif risk > buyer.lambda2_b + margin:
            assert a not in got


def test_pick_best_ties():
    options = [(3, 0.5), (2, 0.5), (2, 0.4)]
    assert pick_best(options, lambda a, p: 1.0) == (2, 0.4)
    assert pick_best(options, lambda a, p: a) == (3, 0.5)


def test_single_feasible_price(seller, buyer):
    # one-price grid with a forced singleton overlap
    s = replace(seller, lambda2_s=1.0)
    price = 0.45
    feasible = sorted(buyer_acceptable_set(price, buyer, s.V))
    b = buyer
    market = MarketParams(price, price, 0.005)
    out = negotiate("buyer", s, b, market)
    assert out.rounds == 1
    assert out.contract.price == price
    assert out.contract.amount in feasible


def test_midpoint_negotiation_is_cheap(seller, buyer, market):
    out = negotiate("buyer", seller, buyer, market)
    assert out.contract is not None
    assert 10 <= out.rounds <= 500
    assert out.stop_reason in (StopReason.BUYER_EMPTY, StopReason.DISJOINT)
    # transcript is consistent with the protocol
    for rnd in out.transcript[:-1]:
        if rnd.seller_set:
            assert rnd.candidate is not None
    last = out.transcript[-1]
    assert last.candidate is None


def test_candidates_satisfy_both_caps(seller, buyer, market):
    for final in FinalDecider:
        out = negotiate(final, seller, buyer, market)
        for a, p in out.candidates:
            assert seller_enumeration(ContractTerm(a, p), seller)[1] <= seller.lambda2_s
            assert buyer_risk(buyer.q_max, ContractTerm(a, p), buyer) <= buyer.lambda2_b


def test_final_pick_uses_the_deciders_utility(seller, buyer, market):
    out_b = negotiate("buyer", seller, buyer, market)
    best_b = max(
        buyer_expected_utility(buyer.q_max, ContractTerm(a, p), buyer) for a, p in out_b.candidates
    )
    assert buyer_expected_utility(buyer.q_max, out_b.contract, buyer) == best_b
    out_s = negotiate("seller", seller, buyer, market)
    best_s = max(seller_expected_utility(ContractTerm(a, p), seller) for a, p in out_s.candidates)
    assert seller_expected_utility(out_s.contract, seller) == best_s
    # both decide over the same price rounds
    assert [p for _, p in out_b.candidates] == [p for _, p in out_s.candidates]


def test_smaller_step_costs_more_rounds(seller, buyer):
    rounds = [
        negotiate("buyer", seller, buyer, MarketParams(0.3, 5.0, dp)).rounds
        for dp in (0.001, 0.005, 0.01)
    ]
    assert rounds[0] > rounds[1] > rounds[2]


def test_unit_weight_makes_seller_set_price_independent(seller, buyer):
    s = replace(seller, lambda1_s=1.0)
    sets = {seller_acceptable_set(p, s) for p in np.arange(0.3, 2.0, 0.05)}
    assert len(sets) == 1


def test_failed_negotiation_when_nothing_acceptable(seller, buyer, market):
    out = negotiate("seller", replace(seller, lambda2_s=0.0, lambda1_s=1.0), buyer, market)
    assert out.failed
    assert out.contract is None
