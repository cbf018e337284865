from __future__ import annotations

import pytest

from uavfutures.core import BuyerParams, MarketParams, SellerParams
from uavfutures.market_sim import SimulationConfig, draw_scenario


@pytest.fixture(scope="session")
def midpoint():
    return draw_scenario(SimulationConfig())


@pytest.fixture
def seller(midpoint) -> SellerParams:
    return midpoint.seller


@pytest.fixture
def buyer(midpoint) -> BuyerParams:
    return midpoint.buyer


@pytest.fixture
def market(midpoint) -> MarketParams:
    return midpoint.market


_VERDICTS: list[str] = []


@pytest.fixture
def verdict():
    """Record one acceptance line, then assert it."""

    def record(number: int, ok: bool, detail: str) -> None:
        _VERDICTS.append(f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}")
        assert ok, detail

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_VERDICTS, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
