"""Compact oracle battery behind ``uavfutures selftest``.

Each check prints one ``PASS``/``FAIL`` line.  The exit status is 1 if
any check fails, including the known stop-rule counterexample (see the
README), so the result is not hidden.
"""
from __future__ import annotations

import math
import time
from dataclasses import replace

import numpy as np

from . import buyer as _buyer
from . import oracles
from .core import ContractTerm, make_rng
from .market_sim import ScenarioRanges, SimulationConfig, draw_scenario, run_futures
from .negotiation import negotiate
from .power import f_metric, h_derivative, optimal_power
from .seller import seller_expected_utility, seller_risk
from .specfn import ei_segment, lambert_w0


def _check_seller(sc, quick):
    s, m = sc.seller, sc.market
    step = 20 if quick else 1
    worst_eu, mismatches = 0.0, 0
    for n in range(1, m.n_prices + 1, step):
        for a in range(1, s.V + 1):
            term = ContractTerm(a, m.price(n))
            mean, risk = oracles.seller_enumeration(term, s)
            worst_eu = max(worst_eu, abs(seller_expected_utility(term, s) - mean))
            mismatches += seller_risk(term, s) != risk
    return worst_eu <= 1e-9 and mismatches == 0, f"max |dE|={worst_eu:.2e}, risk mismatches={mismatches}"


def _check_buyer(sc, quick):
    b = sc.buyer
    rng = make_rng(11)
    size = 200_000 if quick else 1_000_000
    worst = 0.0
    for a, p in ((5, 0.3), (18, 0.45), (30, 0.8)):
        term = ContractTerm(a, p)
        mean, mean_se, risk, risk_se = oracles.buyer_monte_carlo(b.q_max, term, b, rng, size)
        d_mean = abs(_buyer.buyer_expected_utility(b.q_max, term, b) - mean) / mean_se
        d_risk = abs(_buyer.buyer_risk(b.q_max, term, b) - risk) / max(risk_se, 1e-300)
        worst = max(worst, d_mean, d_risk if risk_se > 0 else 0.0)
    return worst <= 4.0, f"worst deviation {worst:.2f} sigma"


def _check_specfn(quick):
    xs = np.linspace(-1 / math.e + 1e-9, 50.0, 200 if quick else 1000)
    resid = max(abs(w * math.exp(w) - x) for x in xs for w in (lambert_w0(x),))
    # bisection agreement away from the branch point, where W is well conditioned
    gap = max(abs(lambert_w0(x) - oracles.lambert_w0_bisect(x)) for x in xs[5:])
    rel = 0.0
    for y1, y2 in ((0.5, 3.0), (1.0, 2.0), (2.0, 6.5), (4.0, 4.001)):
        ref = oracles.ei_segment_simpson(y1, y2)
        rel = max(rel, abs(ei_segment(y1, y2) - ref) / abs(ref))
    ok = resid <= 1e-12 and gap <= 1e-10 and rel <= 1e-10
    return ok, f"W residual {resid:.1e}, W vs bisection {gap:.1e}, Ei rel error {rel:.1e}"


def _check_power(quick):
    rng = make_rng(5)
    ranges = ScenarioRanges()
    buyer = draw_scenario(SimulationConfig()).buyer
    worst, worst_grad = -math.inf, 0.0
    for _ in range(50 if quick else 1000):
        gamma = float(rng.uniform(5.0, 400.0))
        omega2 = float(rng.uniform(*ranges.omega2))
        q_max = float(rng.uniform(*ranges.q_max_w))
        params = replace(buyer, omega2=omega2, q_max=q_max)
        sol = optimal_power(gamma, params)
        grid = oracles.power_grid_min(gamma, omega2, q_max)
        worst = max(worst, f_metric(sol.q_star, gamma, omega2) - grid)
        if not sol.clipped:
            worst_grad = max(worst_grad, abs(h_derivative(sol.beta_star, gamma, omega2)))
    return worst <= 1e-9 and worst_grad <= 1e-8, f"f - grid min {worst:.1e}, |dh| {worst_grad:.1e}"


def _check_stop_rule(quick):
    extra_total = 0
    configs = 5 if quick else 20
    config = SimulationConfig(sample_scenario=True)
    for seed in range(configs):
        sc = draw_scenario(config, make_rng(seed))
        outcome = negotiate("buyer", sc.seller, sc.buyer, sc.market)
        extra_total += len(oracles.continuation_candidates(outcome, sc.seller, sc.buyer, sc.market))
    return extra_total == 0, f"{extra_total} candidates past a stop over {configs} configs"


def _check_determinism():
    config = SimulationConfig()
    a = run_futures(config, 7, 50, "buyer")
    b = run_futures(config, 7, 50, "buyer")
    return a.records == b.records and a.summary == b.summary, "two identical runs"


def run_selftest(quick: bool = False) -> int:
    sc = draw_scenario(SimulationConfig())
    checks = [
        ("seller closed forms vs enumeration", lambda: _check_seller(sc, quick)),
        ("buyer closed forms vs Monte Carlo", lambda: _check_buyer(sc, quick)),
        ("special functions", lambda: _check_specfn(quick)),
        ("power control vs grid", lambda: _check_power(quick)),
        ("no candidates after a stop", lambda: _check_stop_rule(quick)),
        ("determinism", _check_determinism),
    ]
    failed = 0
    for name, fn in checks:
        start = time.perf_counter()
        ok, detail = fn()
        failed += not ok
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail} ({time.perf_counter() - start:.1f}s)")
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return 1 if failed else 0
