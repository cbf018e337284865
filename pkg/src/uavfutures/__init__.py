"""Futures-based resource trading between an edge server and a UAV.

The seller (an edge server with ``V`` virtual machines) and the buyer (a
UAV offloading tasks) agree on a forward contract ``(A, P)`` before any
trading happens.  Each side screens terms by expected utility and by the
probability of a bad outcome, and the buyer tunes its transmit power per
trading once the channel is observed.
"""
from __future__ import annotations

from .core import (
    BuyerParams,
    ContractTerm,
    MarketParams,
    SellerParams,
    TradingEnvironment,
    ValidationError,
    make_rng,
    sample_environment,
    validate,
)
from .buyer import buyer_expected_utility, buyer_risk, buyer_utility, z_cdf
from .market_sim import (
    RunResult,
    RunSummary,
    ScenarioRanges,
    SimulationConfig,
    TradingRecord,
    draw_scenario,
    run_futures,
    run_onsite,
    summarize,
)
from .negotiation import FinalDecider, NegotiationOutcome, negotiate
from .power import PowerSolution, f_metric, optimal_power
from .seller import refund_cost, seller_expected_utility, seller_risk, seller_utility
from .specfn import ei_segment, expi, lambert_w0

__version__ = "0.1.0"

__all__ = [
    "BuyerParams",
    "ContractTerm",
    "FinalDecider",
    "MarketParams",
    "NegotiationOutcome",
    "PowerSolution",
    "RunResult",
    "RunSummary",
    "ScenarioRanges",
    "SellerParams",
    "SimulationConfig",
    "TradingEnvironment",
    "TradingRecord",
    "ValidationError",
    "buyer_expected_utility",
    "buyer_risk",
    "buyer_utility",
    "draw_scenario",
    "ei_segment",
    "expi",
    "f_metric",
    "lambert_w0",
    "make_rng",
    "negotiate",
    "optimal_power",
    "refund_cost",
    "run_futures",
    "run_onsite",
    "sample_environment",
    "seller_expected_utility",
    "seller_risk",
    "seller_utility",
    "summarize",
    "validate",
    "z_cdf",
]
