"""Shared domain types, validation and environment sampling.

All parameter containers are frozen dataclasses so a scenario can be shared
between the negotiation, the per-trading power control and the simulator
without defensive copies.  Quantities are SI: watts, bits, hertz, seconds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ValidationError",
    "SellerParams",
    "BuyerParams",
    "MarketParams",
    "ContractTerm",
    "TradingEnvironment",
    "validate",
    "make_rng",
    "sample_environment",
    "sample_environments",
    "to_watts",
    "to_bits",
]


class ValidationError(ValueError):
    """Raised when a parameter violates one of the model invariants."""


@dataclass(frozen=True)
class SellerParams:
    """MEC server constants.

    ``r_l`` is the refund owed to a local user displaced by trading, ``p_l``
    the revenue per local user, ``V`` the number of VMs and ``M`` the largest
    possible number of local users.  ``lambda1_s`` scales the expected utility
    in the risk event and ``lambda2_s`` caps the tolerated risk.
    """

    r_l: float
    p_l: float
    V: int
    M: int
    lambda1_s: float
    lambda2_s: float


@dataclass(frozen=True)
class BuyerParams:
    """UAV constants.

    ``tau_s``/``tau_b`` are per-task execution times at the edge and on board,
    ``D`` the task size in bits, ``W`` the bandwidth in hertz and ``q_max`` the
    power budget in watts.  The per-watt SNR coefficient is uniform on
    ``[eps1, eps2]``.
    """

    N: int
    tau_s: float
    tau_b: float
    D: float
    W: float
    q_max: float
    eps1: float
    eps2: float
    ell: float
    omega1: float
    omega2: float
    lambda1_b: float
    lambda2_b: float
    U_min: float = 1e-3


@dataclass(frozen=True)
class MarketParams:
    """Quotation grid ``p_min, p_min + dp, ..., p_max`` and per-round latency."""

    p_min: float
    p_max: float
    dp: float
    t_nl: float = 0.0

    @property
    def kappa(self) -> int:
        return int(round((self.p_max - self.p_min) / self.dp))

    @property
    def n_prices(self) -> int:
        return self.kappa + 1

    def price(self, n: int) -> float:
        """Price quoted in round ``n`` (1-based)."""
        return self.p_min + (n - 1) * self.dp


@dataclass(frozen=True)
class ContractTerm:
    amount: int
    price: float


@dataclass(frozen=True)
class TradingEnvironment:
    n_l: int
    n_b: int
    gamma: float


def _check(cond: bool, message: str) -> None:
    if not cond:
        raise ValidationError(message)


def _check_seller(s: SellerParams) -> None:
    _check(s.r_l > 0, "r_l must be positive")
    _check(s.r_l <= s.p_l, "r_l ≤ p_l required")
    _check(int(s.V) == s.V and s.V >= 1, "V must be an integer ≥ 1")
    _check(int(s.M) == s.M, "M must be an integer")
    _check(s.M > s.V, "M must exceed V")
    _check(0 < s.lambda1_s <= 1, "lambda1_s must lie in (0, 1]")
    _check(0 <= s.lambda2_s <= 1, "lambda2_s must lie in [0, 1]")


def _check_buyer(b: BuyerParams) -> None:
    _check(int(b.N) == b.N and b.N >= 1, "N must be an integer ≥ 1")
    _check(b.tau_s > 0, "tau_s must be positive")
    _check(b.tau_b > b.tau_s, "tau_b must exceed tau_s")
    _check(b.D > 0, "D must be positive")
    _check(b.W > 0, "W must be positive")
    _check(b.q_max > 0, "q_max must be positive")
    _check(b.eps1 > 0, "eps1 must be positive")
    _check(b.eps1 < b.eps2, "eps1 < eps2 required")
    _check(b.ell >= 0, "ell must be nonnegative")
    _check(b.omega1 > 0, "omega1 must be positive")
    _check(b.omega2 > 0, "omega2 must be positive")
    _check(b.lambda1_b >= 0, "lambda1_b must be nonnegative")
    _check(0 <= b.lambda2_b <= 1, "lambda2_b must lie in [0, 1]")
    _check(b.U_min > 0, "U_min must be positive")


def _check_market(m: MarketParams) -> None:
    _check(m.dp > 0, "dp must be positive")
    _check(m.p_min > 0, "p_min must be positive")
    _check(m.p_max >= m.p_min, "p_max must be at least p_min")
    kappa = (m.p_max - m.p_min) / m.dp
    _check(
        abs(kappa - round(kappa)) <= 1e-9 * max(1.0, kappa),
        "p_max - p_min must be an integer multiple of dp",
    )
    _check(m.t_nl >= 0, "t_nl must be nonnegative")


def validate(
    seller: SellerParams, buyer: BuyerParams, market: MarketParams
) -> tuple[SellerParams, BuyerParams, MarketParams]:
    """Return the configuration unchanged if every invariant holds.

    Raises :class:`ValidationError` naming the first violated invariant.
    """
    _check_seller(seller)
    _check_buyer(buyer)
    _check(buyer.N > seller.V, "N must exceed V")
    _check_market(market)
    return seller, buyer, market


def make_rng(seed: int | np.random.SeedSequence) -> np.random.Generator:
    """PCG64 stream; integer draws use numpy's unbiased bounded sampler."""
    return np.random.Generator(np.random.PCG64(seed))


def sample_environment(
    rng: np.random.Generator, seller: SellerParams, buyer: BuyerParams
) -> TradingEnvironment:
    n_l = int(rng.integers(0, seller.M, endpoint=True))
    n_b = int(rng.integers(1, buyer.N, endpoint=True))
    gamma = float(rng.uniform(buyer.eps1, buyer.eps2))
    return TradingEnvironment(n_l, n_b, gamma)


def sample_environments(
    rng: np.random.Generator, seller: SellerParams, buyer: BuyerParams, size: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised draws of ``size`` environments as ``(n_l, n_b, gamma)`` arrays."""
    n_l = rng.integers(0, seller.M, size=size, endpoint=True)
    n_b = rng.integers(1, buyer.N, size=size, endpoint=True)
    gamma = rng.uniform(buyer.eps1, buyer.eps2, size=size)
    return n_l, n_b, gamma


def to_watts(value: float, unit: str = "W") -> float:
    scale = {"w": 1.0, "mw": 1e-3}
    try:
        return value * scale[unit.lower()]
    except KeyError:
        raise ValidationError(f"unknown power unit {unit!r}") from None


def to_bits(value: float, unit: str = "b") -> float:
    scale = {"b": 1.0, "kb": 1e3, "mb": 1e6}
    try:
        return value * scale[unit.lower()]
    except KeyError:
        raise ValidationError(f"unknown data unit {unit!r}") from None


def log2_1p(x: float) -> float:
    """``log2(1 + x)`` without cancellation for small ``x``."""
    return math.log1p(x) / math.log(2.0)
