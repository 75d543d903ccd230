"""Property battery behind ``gprice verify``.

Each check returns ``(max_violation, tolerance)``; it passes when the
violation does not exceed the tolerance. The battery is deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import CylinderPayoff, UncertaintySet, brownian, g_lower, g_upper
from .expectation import EPS_GRID, Numerics, batch_expectation, expectation, tower_compose
from .lattice import LatticeSpec, enumerate_adapted_strategies, lattice_dpp_expectation, \
    monte_carlo_prior_bound
from .oracles import bachelier_call, classical_expectation
from .payoff_expr import parse_expression, to_source
from .pde import march
from .pricing import (
    PricingContext,
    ambiguity_premium_exact,
    ambiguity_premium_pratt,
    ask_price,
    bid_price,
    certainty_equivalent,
    compare_uncertainty_aversion,
    dynamic_utility,
)
from .utility import ExponentialUtility, LinearUtility, LogUtility, PowerUtility, \
    is_more_risk_averse

THETA = UncertaintySet.interval(0.04, 0.09)


@dataclass(frozen=True)
class PropertyResult:
    property_id: str
    status: str
    max_violation: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.status == "pass"


def _payoff(times, f, name):
    return CylinderPayoff(tuple(times), f, name=name)


def _suite_one_time():
    return [
        _payoff((1.0,), lambda x: x * x, "x^2"),
        _payoff((1.0,), lambda x: np.maximum(x - 0.1, 0.0), "call"),
        _payoff((1.0,), lambda x: -np.maximum(x, 0.0), "-pos"),
        _payoff((1.0,), lambda x: np.sin(3 * x), "sin"),
        _payoff((1.0,), lambda x: np.abs(x), "abs"),
        _payoff((1.0,), lambda x: x ** 3 - x, "cubic"),
    ]


def _suite_two_time():
    return [
        _payoff((0.5, 1.0), lambda a, b: (b - a) ** 2, "incr^2"),
        _payoff((0.5, 1.0), lambda a, b: np.maximum(b, a), "max"),
        _payoff((0.5, 1.0), lambda a, b: np.sin(a) * b, "sin*b"),
        _payoff((0.5, 1.0), lambda a, b: -np.abs(b - 0.5 * a), "-abs"),
    ]


def check_g_duality():
    a = np.linspace(-5, 5, 1001)
    return float(np.max(np.abs(g_lower(a, THETA) + g_upper(-a, THETA)))), 0.0


def check_pde_comparison():
    x = np.linspace(-3, 3, 301)
    lo = np.sin(2 * x)
    hi = lo + 0.1 * np.exp(-x * x)
    a, _ = march(np.stack([lo, hi]), x[1] - x[0], 1.0, THETA)
    return float(max(0.0, np.max(a[0] - a[1]))), 0.0


def check_moments():
    sq = _payoff((1.0,), lambda x: x * x, "x^2")
    up = expectation(sq, THETA).scalar
    lo = expectation(sq, THETA, mode="lower").scalar
    b = brownian(1.0)
    m1, m2 = (r.scalar for r in batch_expectation([b, -b], THETA))
    return max(abs(up - 0.09), abs(lo - 0.04), abs(m1), abs(m2)), EPS_GRID


def check_sublinear():
    xs = _suite_one_time()
    pairs = [(xs[i], xs[j]) for i in range(len(xs)) for j in range(i + 1, len(xs))]
    sums = [a + b for a, b in pairs]
    vals = batch_expectation(xs + sums, THETA)
    single = {id(p): v.scalar for p, v in zip(xs, vals)}
    worst = 0.0
    for (a, b), r in zip(pairs, vals[len(xs):]):
        worst = max(worst, r.scalar - single[id(a)] - single[id(b)])
    return max(worst, 0.0), EPS_GRID


def check_homogeneity_translation():
    xs = _suite_one_time()
    scaled = [2.5 * p for p in xs] + [p + 0.7 for p in xs]
    vals = [v.scalar for v in batch_expectation(xs + scaled, THETA)]
    n = len(xs)
    worst = 0.0
    for i in range(n):
        worst = max(worst, abs(vals[n + i] - 2.5 * vals[i]),
                    abs(vals[2 * n + i] - vals[i] - 0.7))
    return worst, EPS_GRID


def check_lower_duality():
    xs = _suite_one_time()
    up = batch_expectation([-p for p in xs], THETA)
    lo = batch_expectation(xs, THETA, mode="lower")
    return max(abs(a.scalar + b.scalar) for a, b in zip(up, lo)), 1e-12


def check_tower():
    worst = 0.0
    # one-time payoffs get a genuinely new intermediate time
    for p in _suite_one_time() + _suite_two_time():
        direct, composed = tower_compose(p, 0.0, 0.5, THETA)
        worst = max(worst, abs(direct.scalar - composed.scalar))
    return worst, 2 * EPS_GRID


def check_classical():
    theta = UncertaintySet.singleton(0.09)
    smooth = [
        _payoff((1.0,), lambda x: x * x, "x^2"),
        _payoff((1.0,), lambda x: np.cos(2 * x), "cos"),
        _payoff((1.0,), lambda x: np.exp(0.5 * x), "exp"),
        _payoff((1.0,), lambda x: x ** 4, "x^4"),
        _payoff((1.0,), lambda x: 1.0 / (1.0 + x * x), "lorentz"),
    ]
    vals = batch_expectation(smooth, theta)
    worst = 0.0
    for p, v in zip(smooth, vals):
        ref = classical_expectation(p, 0.09)
        worst = max(worst, abs(v.scalar - ref) / abs(ref))
    return worst, 5e-3


def check_linearization():
    worst = 0.0
    for k in (0.0, 0.1):
        call = _payoff((1.0,), lambda x, k=k: np.maximum(x - k, 0.0), "call")
        up, neg = (r.scalar for r in batch_expectation([call, -call], THETA))
        ref_up = bachelier_call(THETA.sigma_upper, k)
        ref_neg = -bachelier_call(THETA.sigma_lower, k)
        worst = max(worst, abs(up - ref_up) / ref_up, abs(neg - ref_neg) / abs(ref_neg))
    return worst, 5e-3


def check_dpp_enumeration():
    rng = np.random.default_rng(11)
    worst = 0.0
    for n in (1, 2, 3, 4):
        spec = LatticeSpec.from_theta(THETA, 1.0, n)
        for _ in range(5):
            c = rng.normal(size=4)
            p = _payoff((1.0,), lambda x, c=c: c[0] * np.sin(c[1] * x) + c[2] * x * x
                        + c[3] * np.abs(x), "rand")
            worst = max(worst, abs(lattice_dpp_expectation(p, spec)
                                   - enumerate_adapted_strategies(p, spec)))
    return worst, 1e-12


def check_cross_method():
    xs = _suite_one_time()
    pde = [v.scalar for v in batch_expectation(xs, THETA)]
    spec = LatticeSpec.from_theta(THETA, 1.0, 64)
    return max(abs(lattice_dpp_expectation(p, spec) - v) for p, v in zip(xs, pde)), 1e-2


def check_mc_bound():
    xs = _suite_one_time()
    pde = [v.scalar for v in batch_expectation(xs, THETA)]
    worst = 0.0
    for p, v in zip(xs, pde):
        mc = monte_carlo_prior_bound(p, THETA, 4000, 6, seed=5)
        worst = max(worst, mc.estimate - v - 3 * mc.std_error)
    return worst, 0.0


def _exp_ctx(y=0.0, theta=THETA, alpha=1.0):
    return PricingContext(ExponentialUtility(alpha), theta, y)


def check_exponential_closed_forms():
    ctx = _exp_ctx()
    x = brownian(1.0)
    got = [
        bid_price(x, 0.0, ctx).scalar - 0.045,
        ask_price(x, 0.0, ctx).scalar + 0.045,
        certainty_equivalent(x, 0.0, ctx).scalar + 0.045,
        ambiguity_premium_exact(0.0, x, ctx) - 0.045,
        ambiguity_premium_pratt(0.0, ctx.utility, THETA) - 0.045,
    ]
    return max(abs(g) for g in got), EPS_GRID


def check_endowment_invariance():
    x = brownian(1.0)
    bids = [bid_price(x, 0.0, _exp_ctx(y)).scalar for y in (-1.0, 0.0, 2.0)]
    return max(bids) - min(bids), 1e-10


def check_ask_bid_identity():
    ctx = PricingContext(PowerUtility(0.5, 3.0), THETA, 0.5)
    worst = 0.0
    for p in _suite_one_time()[:4]:
        worst = max(worst, abs(ask_price(p, 0.0, ctx).scalar + bid_price(-p, 0.0, ctx).scalar))
    return worst, 1e-12


def check_risk_aversion_jensen():
    worst = 0.0
    for u in (ExponentialUtility(1.0), LogUtility(3.0), PowerUtility(0.5, 3.0)):
        ctx = PricingContext(u, THETA)
        for p in _suite_one_time()[:3]:
            lhs = dynamic_utility(p, 0.0, ctx).scalar
            rhs = float(u(expectation(p, THETA, mode="lower").scalar))
            worst = max(worst, lhs - rhs)
    return max(worst, 0.0), EPS_GRID


def check_time_consistency():
    ctx = _exp_ctx()
    worst = 0.0
    for p in _suite_one_time()[:3] + _suite_two_time():
        b0 = bid_price(p, 0.0, ctx).scalar
        b_half = bid_price(p, 0.5, ctx).as_payoff()
        c0 = certainty_equivalent(p, 0.0, ctx).scalar
        c_half = certainty_equivalent(p, 0.5, ctx).as_payoff()
        worst = max(worst, abs(b0 - bid_price(b_half, 0.0, ctx).scalar),
                    abs(c0 - certainty_equivalent(c_half, 0.0, ctx).scalar))
    return worst, 2 * EPS_GRID


def check_pratt_order():
    u = LogUtility(1.0)
    x = brownian(1.0)
    ratios = []
    for s in (0.3, 0.15, 0.075):
        theta = UncertaintySet.interval((s * 2 / 3) ** 2, s * s)
        ctx = PricingContext(u, theta)
        gap = ambiguity_premium_exact(1.0, x, ctx) - ambiguity_premium_pratt(1.0, u, theta)
        ratios.append(abs(gap) / theta.upper_variance)
    return max(0.0, max(b - a for a, b in zip(ratios, ratios[1:]))), 0.0


def check_theta_ordering():
    small = UncertaintySet.interval(0.06, 0.07)
    num = Numerics()
    rep = compare_uncertainty_aversion(
        PricingContext(ExponentialUtility(1.0), small, 0.0, num),
        PricingContext(ExponentialUtility(1.0), THETA, 0.0, num),
        _suite_one_time()[:4])
    return max(rep.violation("le", "ge")), EPS_GRID


def check_utility_ordering():
    # more risk averse u1: higher bid, lower ask
    rep = compare_uncertainty_aversion(_exp_ctx(alpha=2.0), _exp_ctx(alpha=1.0),
                                       _suite_one_time()[:4])
    return max(rep.violation("ge", "le")), EPS_GRID


def check_risk_aversion_relation():
    e1, e2, lin = ExponentialUtility(1.0), ExponentialUtility(2.0), LinearUtility()
    ok = [is_more_risk_averse(e1, e1), is_more_risk_averse(e1, e2),
          is_more_risk_averse(lin, e1), not is_more_risk_averse(e1, lin)]
    return float(sum(not bool(v) for v in ok)), 0.0


def check_expression_roundtrip():
    exprs = ["pos(B1 - 0.1)", "B2 - B1", "exp(-B1)", "-2^2*B1", "max(B1, B2, 1e-3)/2",
             "log(1 + abs(B1)) - min(B1, pow(B2, 2))"]
    bad = 0
    for e in exprs:
        tree = parse_expression(e)
        bad += parse_expression(to_source(tree)) != tree
    return float(bad), 0.0


PROPERTIES: dict[str, Callable[[], tuple[float, float]]] = {
    "core.g_duality": check_g_duality,
    "pde.comparison": check_pde_comparison,
    "expect.moments": check_moments,
    "expect.subadditive": check_sublinear,
    "expect.homogeneous_translation": check_homogeneity_translation,
    "expect.lower_duality": check_lower_duality,
    "expect.tower": check_tower,
    "expect.classical": check_classical,
    "expect.linearization": check_linearization,
    "lattice.dpp_enumeration": check_dpp_enumeration,
    "lattice.cross_method": check_cross_method,
    "lattice.mc_bound": check_mc_bound,
    "pricing.exponential_closed_forms": check_exponential_closed_forms,
    "pricing.endowment_invariance": check_endowment_invariance,
    "pricing.ask_bid_identity": check_ask_bid_identity,
    "pricing.jensen": check_risk_aversion_jensen,
    "pricing.time_consistency": check_time_consistency,
    "pricing.pratt_order": check_pratt_order,
    "pricing.theta_ordering": check_theta_ordering,
    "pricing.utility_ordering": check_utility_ordering,
    "utility.risk_aversion_relation": check_risk_aversion_relation,
    "cli.expression_roundtrip": check_expression_roundtrip,
}


def run_all() -> list[PropertyResult]:
    out = []
    for pid, check in PROPERTIES.items():
        viol, tol = check()
        viol = float(viol)
        status = "pass" if math.isfinite(viol) and viol <= tol else "fail"
        out.append(PropertyResult(pid, status, viol, tol))
    return out
