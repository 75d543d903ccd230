"""G-expectations and conditional G-expectations of cylinder payoffs.

The payoff ``phi(x_1, ..., x_m)`` is sampled on the tensor grid ``grid**m``.
Variables are eliminated from the last one backwards: for every node of the
prefix ``(x_1, ..., x_{j-1})`` the G-heat equation is solved in ``x_j`` over
``t_j - t_{j-1}`` and the result is read off at ``x_j = x_{j-1}`` (the
increment of B starts from its previous value). After ``x_1`` is gone the
value is read at the origin. Stopping early yields the conditional
expectation at ``t_j`` as a function on ``grid**j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Literal, Sequence

import numpy as np

from .core import (
    MAX_ARITY,
    CylinderPayoff,
    GridFunction,
    SpatialGrid,
    UncertaintySet,
    _time_index,
    constant_payoff,
)
from .errors import ConfigError, DomainError
from .pde import march, plan_steps

Mode = Literal["upper", "lower"]

DEFAULT_POINTS = 401
# 401**3 doubles do not fit comfortably in memory
DEFAULT_POINTS_ARITY3 = 101
DEFAULT_SPAN = 6.0
DEFAULT_CFL = 0.9
EPS_GRID = 1e-3


@dataclass(frozen=True)
class Numerics:
    """Template from which a spatial grid and solver settings are derived.

    Unset fields take defaults when resolved; the applied defaults are
    reported in result metadata.
    """

    n_points: int | None = None
    cfl_fraction: float | None = None
    span_sigmas: float | None = None
    grid: SpatialGrid | None = None

    def with_grid(self, grid: SpatialGrid) -> "Numerics":
        return replace(self, grid=grid)

    @property
    def cfl(self) -> float:
        return DEFAULT_CFL if self.cfl_fraction is None else self.cfl_fraction

    def resolve(self, theta: UncertaintySet, payoff: CylinderPayoff):
        """Return ``(grid, applied_defaults)`` for a payoff."""
        defaults = []
        if self.cfl_fraction is None:
            defaults.append(f"cfl_fraction={DEFAULT_CFL}")
        if self.grid is not None:
            return self.grid, defaults
        if payoff.grid_hint is not None and self.n_points is None and self.span_sigmas is None:
            defaults.append("grid=inherited")
            return payoff.grid_hint, defaults
        return default_grid(theta, payoff.horizon, payoff.arity,
                            self.n_points, self.span_sigmas, defaults), defaults


def default_grid(theta: UncertaintySet, horizon: float, arity: int = 1,
                 n_points: int | None = None, span_sigmas: float | None = None,
                 defaults: list | None = None) -> SpatialGrid:
    """Grid spanning ``+-span * sigma_upper * sqrt(horizon)``."""
    defaults = [] if defaults is None else defaults
    if n_points is None:
        n_points = DEFAULT_POINTS if arity < 3 else DEFAULT_POINTS_ARITY3
        defaults.append(f"n_points={n_points}")
    if span_sigmas is None:
        span_sigmas = DEFAULT_SPAN
        defaults.append(f"span_sigmas={DEFAULT_SPAN}")
    half = span_sigmas * theta.sigma_upper * math.sqrt(horizon)
    if half <= 0.0:
        half = 1.0
        defaults.append("half_width=1 (degenerate volatility)")
    return SpatialGrid.symmetric(half, n_points)


@dataclass(frozen=True)
class ExpectationRequest:
    payoff: CylinderPayoff
    theta: UncertaintySet
    conditioning_time: float = 0.0
    mode: Mode = "upper"
    numerics: Numerics = field(default_factory=Numerics)

    def __post_init__(self):
        if self.mode not in ("upper", "lower"):
            raise ConfigError(f"mode must be 'upper' or 'lower', got {self.mode!r}")
        if self.payoff.arity > MAX_ARITY:
            raise ConfigError(f"payoff arity {self.payoff.arity} exceeds {MAX_ARITY}")
        conditioning_index(self.payoff.times, self.conditioning_time)


def conditioning_index(times: Sequence[float], t: float) -> int:
    """Number of variables kept when conditioning at ``t`` (0 for t = 0)."""
    if t == 0.0:
        return 0
    return _time_index(times, t) + 1


@dataclass(frozen=True, eq=False)
class ConditionalResult:
    """Scalar (conditioning at 0) or grid function of ``B_{t_1}..B_{t_j}``."""

    times: tuple[float, ...]
    value: float | None = None
    function: GridFunction | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def is_scalar(self) -> bool:
        return self.function is None

    @property
    def scalar(self) -> float:
        if self.function is not None:
            raise ConfigError("conditional result is grid-valued, not scalar")
        return self.value

    @property
    def values(self):
        return self.value if self.function is None else self.function.values

    @property
    def grid(self) -> SpatialGrid | None:
        return None if self.function is None else self.function.grid

    def map(self, f: Callable[[np.ndarray], np.ndarray], **meta) -> "ConditionalResult":
        """Apply ``f`` nodewise."""
        md = {**self.metadata, **meta}
        if self.function is None:
            return ConditionalResult(self.times, float(f(np.float64(self.value))), None, md)
        vals = np.asarray(f(self.function.values), dtype=float)
        return ConditionalResult(self.times, None,
                                 GridFunction(self.function.grid, vals, self.function.ndim), md)

    def combine(self, other, f, **meta) -> "ConditionalResult":
        """Nodewise ``f(self, other)`` for a result on the same grid or a scalar."""
        md = {**self.metadata, **meta}
        if isinstance(other, ConditionalResult):
            if other.times != self.times or other.grid != self.grid:
                raise ConfigError("results live on different grids or times")
            ov = other.values
        else:
            ov = other
        if self.function is None:
            return ConditionalResult(self.times, float(f(np.float64(self.value), ov)), None, md)
        vals = np.asarray(f(self.function.values, ov), dtype=float)
        return ConditionalResult(self.times, None,
                                 GridFunction(self.function.grid, vals, self.function.ndim), md)

    def __neg__(self):
        return self.map(np.negative)

    def __sub__(self, other):
        return self.combine(other, np.subtract)

    def __add__(self, other):
        return self.combine(other, np.add)

    def as_payoff(self, name: str = "") -> CylinderPayoff:
        """Re-ingest as a payoff, interpolating piecewise linearly.

        The source grid is kept as a hint so later solves reuse it.
        """
        if self.function is None:
            return constant_payoff(self.value, (0.0,))
        fn = self.function
        return CylinderPayoff(self.times, lambda *xs: fn(*xs),
                              self.metadata.get("growth_degree", 1),
                              self.metadata.get("lipschitz", 1.0),
                              name or "conditional", fn.grid)


def _evaluate_origin(values: np.ndarray, grid: SpatialGrid) -> np.ndarray:
    """Linear interpolation at x=0 along the last axis (batched)."""
    pts = grid.points
    n = grid.n_points
    if not grid.contains(0.0):
        raise DomainError("grid must contain the origin")
    i = int(np.clip(np.searchsorted(pts, 0.0, side="right") - 1, 0, n - 2))
    w = (0.0 - pts[i]) / (pts[i + 1] - pts[i])
    return (1.0 - w) * values[..., i] + w * values[..., i + 1]


def induct(values: np.ndarray, times: Sequence[float], grid: SpatialGrid,
           theta: UncertaintySet, mode: Mode, cfl_fraction: float, keep: int):
    """Backward induction on sampled payoff values.

    ``values`` has shape ``batch + (n,)*m``. Variables ``x_m..x_{keep+1}`` are
    eliminated; with ``keep == 0`` the result is read at the origin and has
    shape ``batch``. Returns ``(values, steps_per_stage)``.
    """
    m = len(times)
    steps = []
    h = grid.h
    for j in range(m, keep, -1):
        start = times[j - 2] if j >= 2 else 0.0
        w, n = march(values, h, times[j - 1] - start, theta, cfl_fraction, mode)
        steps.append(n)
        if j >= 2:
            values = np.diagonal(w, axis1=-2, axis2=-1).copy()
        else:
            values = _evaluate_origin(w, grid)
    return values, steps[::-1]


def _metadata(grid, steps, mode, cfl, theta, defaults, payoff):
    h = grid.h
    plan_dt = plan_steps(h, 1.0, theta, cfl).dt
    return {
        "grid": grid.describe(),
        "steps": "+".join(str(s) for s in steps) if steps else "0",
        "mode": mode,
        "cfl_fraction": cfl,
        "dt": plan_dt,
        "defaults": ";".join(defaults),
        "growth_degree": payoff.growth_degree,
        "lipschitz": payoff.lipschitz,
    }


def batch_expectation(payoffs: Sequence[CylinderPayoff], theta: UncertaintySet,
                      t: float = 0.0, mode: Mode = "upper",
                      numerics: Numerics | None = None) -> list[ConditionalResult]:
    """Conditional expectations of several payoffs sharing one grid.

    Payoffs are embedded into the union of their monitoring times and solved
    together, which is much cheaper than one call per payoff.
    """
    if not payoffs:
        return []
    numerics = numerics or Numerics()
    times = tuple(sorted(set().union(*(p.times for p in payoffs))))
    if len(times) > MAX_ARITY:
        raise ConfigError(f"combined arity {len(times)} exceeds {MAX_ARITY}")
    embedded = [p.embed(times) for p in payoffs]
    keep = conditioning_index(times, t)
    grid, defaults = numerics.resolve(theta, embedded[0])
    stacked = np.stack([_sample_checked(p, grid) for p in embedded])
    out, steps = induct(stacked, times, grid, theta, mode, numerics.cfl, keep)
    results = []
    for p, v in zip(embedded, out):
        md = _metadata(grid, steps, mode, numerics.cfl, theta, defaults, p)
        if keep == 0:
            results.append(ConditionalResult((), float(v), None, md))
        else:
            results.append(ConditionalResult(times[:keep], None,
                                             GridFunction(grid, v, keep), md))
    return results


def _sample_checked(payoff: CylinderPayoff, grid: SpatialGrid) -> np.ndarray:
    with np.errstate(all="ignore"):
        vals = payoff.sample(grid)
    if not np.all(np.isfinite(vals)):
        bad = np.argwhere(~np.isfinite(vals))[0]
        where = tuple(float(grid.points[i]) for i in bad)
        raise DomainError(f"payoff {payoff.name or ''} is not finite at grid point {where}")
    return vals


def expectation(payoff: CylinderPayoff, theta: UncertaintySet, t: float = 0.0,
                mode: Mode = "upper", numerics: Numerics | None = None) -> ConditionalResult:
    return batch_expectation([payoff], theta, t, mode, numerics)[0]


def g_expectation(request: ExpectationRequest) -> float:
    """Unconditional upper (or lower) G-expectation of the request's payoff."""
    if request.conditioning_time != 0.0:
        raise ConfigError("g_expectation needs conditioning_time = 0; "
                          "use conditional_g_expectation")
    return expectation(request.payoff, request.theta, 0.0, request.mode,
                       request.numerics).scalar


def conditional_g_expectation(request: ExpectationRequest) -> ConditionalResult:
    return expectation(request.payoff, request.theta, request.conditioning_time,
                       request.mode, request.numerics)


def upper_expectation(payoff, theta, t=0.0, numerics=None) -> ConditionalResult:
    return expectation(payoff, theta, t, "upper", numerics)


def lower_expectation(payoff, theta, t=0.0, numerics=None) -> ConditionalResult:
    return expectation(payoff, theta, t, "lower", numerics)


def tower_compose(payoff: CylinderPayoff, s: float, t: float, theta: UncertaintySet,
                  mode: Mode = "upper", numerics: Numerics | None = None):
    """``E_s[X]`` computed directly and as ``E_s[E_t[X]]``.

    ``t`` is added to the payoff's monitoring times for the inner step when
    missing; the direct branch keeps the original times. Both branches use
    the grid resolved for the original payoff.
    """
    if not 0.0 <= s < t:
        raise ConfigError(f"need 0 <= s < t, got s={s}, t={t}")
    if t > payoff.horizon:
        raise ConfigError(f"t={t} beyond the payoff horizon {payoff.horizon}")
    numerics = numerics or Numerics()
    times = tuple(sorted(set(payoff.times) | {t}))
    if s != 0.0:
        _time_index(payoff.times, s)
    grid, _ = numerics.resolve(theta, payoff)
    num = numerics.with_grid(grid)
    direct = expectation(payoff, theta, s, mode, num)
    inner = expectation(payoff.embed(times), theta, t, mode, num)
    composed = expectation(inner.as_payoff(), theta, s, mode, num)
    return direct, composed
