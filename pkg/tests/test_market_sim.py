from __future__ import annotations

import math
import statistics
from dataclasses import replace

import numpy as np
import pytest

from uavfutures.core import ContractTerm, TradingEnvironment, ValidationError, make_rng
from uavfutures.market_sim import (
    ScenarioRanges,
    SimulationConfig,
    TradingRecord,
    completion_time,
    draw_scenario,
    onsite_negotiate,
    run_futures,
    run_onsite,
    summarize,
)
from uavfutures.oracles import onsite_reference, power_grid_min
from uavfutures.power import f_metric, optimal_power

MID = SimulationConfig()


def test_completion_time_all_offloaded(buyer):
    q, gamma = 0.5, 120.0
    expected = buyer.tau_s + buyer.D * 7 / (buyer.W * math.log2(1 + gamma * q)) + 0.3
    assert completion_time(7, 9, q, gamma, 0.3, buyer) == pytest.approx(expected)


def test_completion_time_failed(buyer):
    assert completion_time(11, 0, 0.0, 200.0, 0.25, buyer) == pytest.approx(buyer.tau_b * 11 + 0.25)


def test_completion_time_reevaluation(buyer):
    n_b, a, q, gamma = 30, 12, 0.61, 260.0
    local = buyer.tau_b * (n_b - a)
    edge = buyer.tau_s + buyer.D * a / (buyer.W * math.log2(1 + gamma * q))
    assert completion_time(n_b, a, q, gamma, 0.0, buyer) == pytest.approx(max(local, edge))


def test_futures_contract_run():
    result = run_futures(MID, 1, 200, "buyer")
    s = result.summary
    assert result.negotiation.contract is not None
    assert s.ufair == 0 and s.tfail == 0
    assert all(r.nc == 0 and r.nl == 0 for r in result.records)
    assert s.sum_nc == result.negotiation.rounds
    assert s.sum_nl == pytest.approx(result.negotiation.rounds * result.scenario.market.t_nl)
    assert all(r.t_comp >= 0 for r in result.records)


def test_futures_fold_latency():
    folded = run_futures(replace(MID, fold_negotiation_latency=True), 1, 20, "buyer")
    plain = run_futures(MID, 1, 20, "buyer")
    first = folded.records[0]
    assert first.nc == plain.negotiation.rounds
    assert first.buyer_net_utility == pytest.approx(plain.records[0].buyer_utility - first.nl)
    assert folded.summary.sum_nc == plain.summary.sum_nc
    assert folded.summary.sum_nl == pytest.approx(plain.summary.sum_nl)


def test_futures_power_is_optimal_on_sampled_tradings():
    result = run_futures(MID, 5, 500, "seller")
    b = result.scenario.buyer
    for r in result.records[::100]:
        grid = power_grid_min(r.env.gamma, b.omega2, b.q_max, points=2000)
        assert f_metric(r.q, r.env.gamma, b.omega2) <= grid + 1e-9


def test_failed_negotiation_marks_every_trading():
    ranges = ScenarioRanges().with_values(lambda2_s=0.0, lambda1_s=1.0)
    result = run_futures(SimulationConfig(ranges=ranges), 2, 30, "buyer")
    assert result.summary.tfail == 30
    for r in result.records:
        assert r.failed and r.amount == 0 and r.price == 0 and r.q == 0 and r.buyer_utility == 0
        assert r.seller_utility == pytest.approx(r.env.n_l * result.scenario.seller.p_l)


def test_tradings_must_be_positive():
    with pytest.raises(ValidationError):
        run_futures(MID, 1, 0, "buyer")
    with pytest.raises(ValidationError):
        run_onsite(MID, 1, 0, "buyer")


def test_runs_are_deterministic():
    assert run_futures(MID, 3, 40, "buyer").records == run_futures(MID, 3, 40, "buyer").records
    assert run_onsite(MID, 3, 10, "seller").records == run_onsite(MID, 3, 10, "seller").records


@pytest.mark.parametrize("final", ["buyer", "seller"])
def test_onsite_matches_scalar_reference(final):
    sc = draw_scenario(MID)
    market = replace(sc.market, dp=0.01, p_max=5.0)
    rng = make_rng(8)
    for _ in range(60):
        env = TradingEnvironment(
            int(rng.integers(0, sc.seller.M, endpoint=True)),
            int(rng.integers(1, sc.buyer.N, endpoint=True)),
            float(rng.uniform(sc.buyer.eps1, sc.buyer.eps2)),
        )
        q = optimal_power(env.gamma, sc.buyer).q_star
        assert onsite_negotiate(env, q, sc.seller, sc.buyer, market, final) == onsite_reference(
            env, q, sc.seller, sc.buyer, market, final
        )


def test_onsite_modes_share_rounds_and_failures():
    b = run_onsite(MID, 4, 30, "buyer")
    s = run_onsite(MID, 4, 30, "seller")
    assert [r.nc for r in b.records] == [r.nc for r in s.records]
    assert [r.failed for r in b.records] == [r.failed for r in s.records]


def test_seller_final_price_not_below_buyer_final():
    for seed in (1, 2):
        b = run_onsite(MID, seed, 30, "buyer")
        s = run_onsite(MID, seed, 30, "seller")
        for rb, rs in zip(b.records, s.records):
            assert rb.env == rs.env
            if not rb.failed:
                assert rs.price >= rb.price


def _fake(index, price, failed=False, seller=1.0, buyer=0.5, nc=2, nl=0.1):
    env = TradingEnvironment(3, 4, 100.0)
    return TradingRecord(index, env, 0 if failed else 5, 0.0 if failed else price, 0.0 if failed else 0.5,
                         seller, 0.0 if failed else buyer, (0.0 if failed else buyer) - nl, nc, nl, 1.5, failed)


def test_summarize_examples():
    with pytest.raises(ValueError):
        summarize([])
    assert summarize([_fake(i, 0.7) for i in range(5)]).ufair == 0.0
    failed = summarize([_fake(i, 0.0, failed=True, seller=1.2) for i in range(4)])
    assert failed.tfail == 4
    assert failed.sum_seller_utility == pytest.approx(4.8)
    assert failed.sum_buyer_utility == 0.0


def test_summarize_mixed_list():
    records = [_fake(1, 0.4, seller=2.0), _fake(2, 0.0, failed=True, seller=1.0),
               _fake(3, 0.9, seller=3.5, buyer=1.25, nc=7, nl=0.35)]
    s = summarize(records, negotiation_rounds=3, negotiation_latency=0.05)
    assert s.sum_seller_utility == pytest.approx(6.5)
    assert s.sum_buyer_utility == pytest.approx(1.75)
    assert s.sum_buyer_net_utility == pytest.approx(0.4 + -0.1 + 0.9)
    assert s.ufair == pytest.approx(statistics.pstdev([0.4, 0.9]))
    assert s.tfail == 1
    assert s.sum_nc == 2 + 2 + 7 + 3
    assert s.sum_nl == pytest.approx(0.55 + 0.05)
    with_failed = summarize(records, include_failed_prices=True)
    assert with_failed.ufair == pytest.approx(np.std([0.4, 0.0, 0.9]))


def test_sampled_scenarios_are_valid():
    config = SimulationConfig(sample_scenario=True)
    for seed in range(200):
        sc = draw_scenario(config, make_rng(seed))
        assert sc.seller.M > sc.seller.V and sc.buyer.N > sc.seller.V
        assert sc.seller.r_l <= sc.seller.p_l


def test_pinning_one_key_keeps_other_draws():
    base = SimulationConfig(sample_scenario=True)
    pinned = SimulationConfig(ranges=ScenarioRanges().with_values(tau_b=0.8, dp=0.01), sample_scenario=True)
    a = draw_scenario(base, make_rng(6))
    b = draw_scenario(pinned, make_rng(6))
    assert a.seller == b.seller
    assert replace(a.buyer, tau_b=0.8) == b.buyer


def test_midpoint_requires_no_rng_and_sampling_does():
    draw_scenario(MID)
    with pytest.raises(ValueError):
        draw_scenario(SimulationConfig(sample_scenario=True))


def test_unknown_range_key():
    with pytest.raises(ValidationError):
        ScenarioRanges().with_values(bogus=1.0)
