"""Expected utility under volatility ambiguity and indifference prices.

Every expectation here is the lower (maxmin) one: the agent evaluates a
position by its worst prior.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import CylinderPayoff, UncertaintySet, validate_times
from .errors import ConfigError
from .expectation import (
    EPS_GRID,
    ConditionalResult,
    Numerics,
    batch_expectation,
    expectation,
)
from .utility import Utility

Endowment = float | CylinderPayoff


@dataclass(frozen=True)
class PricingContext:
    """Agent description: utility, ambiguity set, endowment and numerics.

    ``endowment`` is a number or a payoff measurable at the conditioning
    time used with it.
    """

    utility: Utility
    theta: UncertaintySet
    endowment: Endowment = 0.0
    numerics: Numerics = field(default_factory=Numerics)

    def __post_init__(self):
        if not isinstance(self.endowment, CylinderPayoff):
            y = float(self.endowment)
            if not np.isfinite(y):
                raise ConfigError(f"endowment must be finite, got {y}")
            object.__setattr__(self, "endowment", y)

    def with_endowment(self, y: Endowment) -> "PricingContext":
        return PricingContext(self.utility, self.theta, y, self.numerics)

    def with_theta(self, theta: UncertaintySet) -> "PricingContext":
        return PricingContext(self.utility, theta, self.endowment, self.numerics)

    def with_utility(self, utility: Utility) -> "PricingContext":
        return PricingContext(utility, self.theta, self.endowment, self.numerics)


def _at_time(payoff: CylinderPayoff, t: float) -> CylinderPayoff:
    """Embed ``t`` among the monitoring times so conditioning at ``t`` is defined."""
    if t == 0.0 or any(abs(s - t) <= 1e-12 for s in payoff.times):
        return payoff
    return payoff.embed(validate_times(sorted(set(payoff.times) | {t})))


def _check_endowment(y: Endowment, t: float) -> None:
    if isinstance(y, CylinderPayoff) and y.horizon > t + 1e-12:
        raise ConfigError(f"endowment depends on B after the conditioning time t={t}")


def _endowment_on(result: ConditionalResult, y: Endowment):
    """Endowment values on the nodes of ``result`` (a float when scalar)."""
    if not isinstance(y, CylinderPayoff):
        return y
    if result.is_scalar:
        return float(np.asarray(y(*([0.0] * y.arity))))
    return y.embed(result.times).sample(result.grid)


def dynamic_utility(payoff: CylinderPayoff, t: float, ctx: PricingContext) -> ConditionalResult:
    """``U_t(X)``: lower conditional expectation of ``u(X)``."""
    up = _at_time(payoff, t).compose(ctx.utility, name=f"u({payoff.name})")
    return expectation(up, ctx.theta, t, "lower", ctx.numerics)


def certainty_equivalent(payoff: CylinderPayoff, t: float,
                         ctx: PricingContext) -> ConditionalResult:
    """Sure amount at ``t`` with the same utility as ``X``: ``u^-1(U_t(X))``."""
    return dynamic_utility(payoff, t, ctx).map(ctx.utility.inverse)


def _indifference_level(payoff: CylinderPayoff, t: float, ctx: PricingContext,
                        sign: float):
    """``(u^-1(E_t[u(Y + sign*X)]), Y on the result nodes)``.

    Bid and ask share this single path, which makes ``a(X) = -b(-X)`` hold
    bit for bit.
    """
    y = ctx.endowment
    _check_endowment(y, t)
    x = payoff if sign > 0 else -payoff
    position = x + y
    res = dynamic_utility(position, t, ctx)
    level = res.map(ctx.utility.inverse)
    return level, _endowment_on(level, y)


def bid_price(payoff: CylinderPayoff, t: float, ctx: PricingContext) -> ConditionalResult:
    """Indifference bid ``b_t(X) = Y - u^-1(E_t[u(Y - X)])``.

    Parameters
    ----------
    payoff
        The claim ``X``.
    t
        Conditioning time; 0 gives a scalar result.
    ctx
        Agent and numerics; ``ctx.endowment`` is ``Y``.

    Returns
    -------
    ConditionalResult
        Scalar at ``t = 0``, otherwise a grid function of ``B`` up to ``t``.
    """
    level, y = _indifference_level(payoff, t, ctx, -1.0)
    return level.map(lambda v: np.subtract(y, v))


def ask_price(payoff: CylinderPayoff, t: float, ctx: PricingContext) -> ConditionalResult:
    """Indifference ask ``a_t(X) = u^-1(E_t[u(Y + X)]) - Y``; equals ``-b_t(-X)``."""
    level, y = _indifference_level(payoff, t, ctx, 1.0)
    return level.map(lambda v: np.subtract(v, y))


def ambiguity_premium_exact(x: float, payoff: CylinderPayoff, ctx: PricingContext) -> float:
    """``pi = x + E[X] - u^-1(E[u(x + X)])`` with lower expectations."""
    wealth = (payoff + float(x)).compose(ctx.utility)
    mean, eu = batch_expectation([payoff, wealth], ctx.theta, 0.0, "lower", ctx.numerics)
    return float(x) + mean.scalar - float(ctx.utility.inverse(eu.scalar))


def ambiguity_premium_pratt(x: float, utility: Utility, theta: UncertaintySet) -> float:
    """Second-order approximation ``r(x) * upper_variance / 2``."""
    return 0.5 * float(utility.risk_aversion(x)) * theta.upper_variance


def _extreme(a, b, sign):
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    return float(np.max(sign * d))


@dataclass(frozen=True)
class ComparisonReport:
    """Bids and asks of a payoff suite under two contexts.

    ``bid_excess`` is ``max(b1 - b2)`` over suite and nodes (positive means
    some ``b1 > b2``), ``bid_shortfall`` is ``max(b2 - b1)``; the ask fields
    are analogous.
    """

    names: tuple[str, ...]
    bids1: tuple
    bids2: tuple
    asks1: tuple
    asks2: tuple
    tolerance: float = EPS_GRID

    def _pairs(self, a, b, sign):
        return max((_extreme(x, y, sign) for x, y in zip(a, b)), default=0.0)

    @property
    def bid_excess(self) -> float:
        return self._pairs(self.bids1, self.bids2, 1.0)

    @property
    def bid_shortfall(self) -> float:
        return self._pairs(self.bids1, self.bids2, -1.0)

    @property
    def ask_excess(self) -> float:
        return self._pairs(self.asks1, self.asks2, 1.0)

    @property
    def ask_shortfall(self) -> float:
        return self._pairs(self.asks1, self.asks2, -1.0)

    @property
    def bid_le(self) -> bool:
        """``b1 <= b2 + tol`` on the whole suite."""
        return self.bid_excess <= self.tolerance

    @property
    def ask_ge(self) -> bool:
        """``a1 >= a2 - tol`` on the whole suite."""
        return self.ask_shortfall <= self.tolerance

    def violation(self, bid: str, ask: str) -> tuple[float, float]:
        """Worst violations of the requested orderings (``'le'`` or ``'ge'`` for side 1)."""
        pick = {"le": ("excess",), "ge": ("shortfall",)}
        for o in (bid, ask):
            if o not in pick:
                raise ConfigError(f"ordering must be 'le' or 'ge', got {o!r}")
        bv = self.bid_excess if bid == "le" else self.bid_shortfall
        av = self.ask_excess if ask == "le" else self.ask_shortfall
        return max(bv, 0.0), max(av, 0.0)


def compare_uncertainty_aversion(ctx1: PricingContext, ctx2: PricingContext,
                                 payoff_suite: Sequence[CylinderPayoff],
                                 t: float = 0.0,
                                 tolerance: float = EPS_GRID) -> ComparisonReport:
    """Bid and ask of every suite payoff under both contexts."""
    b1, b2, a1, a2 = [], [], [], []
    for p in payoff_suite:
        b1.append(bid_price(p, t, ctx1).values)
        b2.append(bid_price(p, t, ctx2).values)
        a1.append(ask_price(p, t, ctx1).values)
        a2.append(ask_price(p, t, ctx2).values)
    names = tuple(p.name or f"payoff{i}" for i, p in enumerate(payoff_suite))
    return ComparisonReport(names, tuple(b1), tuple(b2), tuple(a1), tuple(a2), tolerance)
