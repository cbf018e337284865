"""Per-trading transmit power control.

Given the contract, maximising the buyer's realised utility over ``q`` is
the same as minimising ``f(q) = (1 + ω2 q) / log2(1 + q γ)``, which is not
convex in ``q``.  Substituting ``β = 1/log2(1 + q γ)`` gives the convex
``h(β) = β + ω2 β (2^(1/β) - 1)/γ`` on ``β >= 1/log2(1 + γ q_max)``, whose
stationary point has a Lambert-W closed form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .core import BuyerParams, ValidationError, log2_1p
from .specfn import lambert_w0

__all__ = [
    "PowerSolution",
    "f_metric",
    "h_metric",
    "h_derivative",
    "unconstrained_beta",
    "optimal_power",
]

LN2 = math.log(2.0)


@dataclass(frozen=True)
class PowerSolution:
    q_star: float
    beta_star: float
    clipped: bool


def f_metric(q: float, gamma: float, omega2: float) -> float:
    if not (q > 0 and gamma > 0):
        raise ValidationError("f_metric needs q > 0 and gamma > 0")
    return (1 + omega2 * q) / log2_1p(q * gamma)


def h_metric(beta: float, gamma: float, omega2: float) -> float:
    if not (beta > 0 and gamma > 0):
        raise ValidationError("h_metric needs beta > 0 and gamma > 0")
    return beta + omega2 * beta * math.expm1(LN2 / beta) / gamma


def h_derivative(beta: float, gamma: float, omega2: float) -> float:
    """``∂h/∂β = 1 + ω2 (β 2^(1/β) - β - ln2 · 2^(1/β)) / (γ β)``."""
    two = 2.0 ** (1.0 / beta)
    return 1.0 + omega2 * (beta * two - beta - LN2 * two) / (gamma * beta)


def unconstrained_beta(gamma: float, omega2: float) -> float:
    arg = (gamma - omega2) / (math.e * omega2)
    if arg < -1.0 / math.e:
        raise ValidationError(f"Lambert argument {arg!r} below -1/e")
    return LN2 / (lambert_w0(arg) + 1.0)


def optimal_power(gamma: float, params: BuyerParams) -> PowerSolution:
    """Minimiser of ``f`` over ``0 < q <= q_max`` for channel coefficient ``gamma``."""
    if not gamma > 0:
        raise ValidationError(f"gamma must be positive (got {gamma!r})")
    q_max, omega2 = params.q_max, params.omega2
    beta_floor = 1.0 / log2_1p(gamma * q_max)
    beta = unconstrained_beta(gamma, omega2)
    if beta > beta_floor:
        # 2^(1/β) = e^(W + 1)
        q = math.expm1(LN2 / beta) / gamma
        if q < q_max:
            assert q > 0
            return PowerSolution(q_star=q, beta_star=beta, clipped=False)
    return PowerSolution(q_star=q_max, beta_star=beta_floor, clipped=True)
