"""Uncertainty sets, grids, cylinder payoffs and the generators G and G_.

Everything here is immutable after construction. The variance set ``Theta``
enters the G-heat equation only through

    G(a)  = 1/2 sup_{gamma in Theta} gamma * a
    G_(a) = 1/2 inf_{gamma in Theta} gamma * a

and both are linear in ``gamma``, so only the extreme variances matter even
when ``Theta`` is a finite list.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, DomainError

MAX_ARITY = 3


@dataclass(frozen=True)
class UncertaintySet:
    """Set of admissible variances per unit time.

    Either the interval ``[lower_variance, upper_variance]`` or, when
    ``variances`` is given, that finite list (whose extremes must equal the
    two bounds).
    """

    lower_variance: float
    upper_variance: float
    variances: tuple[float, ...] | None = None

    def __post_init__(self):
        lo, up = float(self.lower_variance), float(self.upper_variance)
        if not (math.isfinite(lo) and math.isfinite(up)):
            raise ConfigError("variance bounds must be finite")
        if not 0.0 <= lo <= up:
            raise ConfigError(
                f"need 0 <= lower_variance <= upper_variance, got {lo}, {up}"
            )
        object.__setattr__(self, "lower_variance", lo)
        object.__setattr__(self, "upper_variance", up)
        if self.variances is not None:
            vs = tuple(float(v) for v in self.variances)
            if not vs:
                raise ConfigError("finite variance list must be nonempty")
            if any(b < a for a, b in zip(vs, vs[1:])):
                raise ConfigError("finite variance list must be sorted")
            if vs[0] != lo or vs[-1] != up:
                raise ConfigError("variance list extremes must match the bounds")
            object.__setattr__(self, "variances", vs)

    @classmethod
    def interval(cls, lower: float, upper: float) -> "UncertaintySet":
        return cls(lower, upper)

    @classmethod
    def singleton(cls, variance: float) -> "UncertaintySet":
        return cls(variance, variance)

    @classmethod
    def from_list(cls, variances: Sequence[float]) -> "UncertaintySet":
        vs = sorted(float(v) for v in variances)
        if not vs:
            raise ConfigError("finite variance list must be nonempty")
        return cls(vs[0], vs[-1], tuple(vs))

    @property
    def sigma_lower(self) -> float:
        return math.sqrt(self.lower_variance)

    @property
    def sigma_upper(self) -> float:
        return math.sqrt(self.upper_variance)

    @property
    def is_singleton(self) -> bool:
        return self.lower_variance == self.upper_variance

    def contains(self, variance: float, tol: float = 1e-12) -> bool:
        if self.variances is not None:
            return any(abs(variance - v) <= tol for v in self.variances)
        return self.lower_variance - tol <= variance <= self.upper_variance + tol

    def issubset(self, other: "UncertaintySet") -> bool:
        if self.variances is not None:
            return all(other.contains(v, tol=0.0) for v in self.variances)
        if other.variances is not None:
            return self.is_singleton and other.contains(self.lower_variance, 0.0)
        return (other.lower_variance <= self.lower_variance
                and self.upper_variance <= other.upper_variance)

    def scaled(self, factor: float) -> "UncertaintySet":
        """Variance set of ``sqrt(factor) * B``."""
        vs = None if self.variances is None else tuple(factor * v for v in self.variances)
        return UncertaintySet(factor * self.lower_variance,
                              factor * self.upper_variance, vs)


def _check_finite(a):
    arr = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"generator argument must be finite, got {a!r}")
    return arr


def g_upper(a, theta: UncertaintySet):
    """Upper generator ``G(a) = 1/2 max_gamma gamma * a``; vectorized."""
    arr = _check_finite(a)
    out = 0.5 * np.maximum(theta.lower_variance * arr, theta.upper_variance * arr)
    return float(out) if out.ndim == 0 else out


def g_lower(a, theta: UncertaintySet):
    """Lower generator ``G_(a) = 1/2 min_gamma gamma * a = -G(-a)``."""
    arr = _check_finite(a)
    out = 0.5 * np.minimum(theta.lower_variance * arr, theta.upper_variance * arr)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform grid ``x_min + i*h``, ``i = 0..n_points-1``."""

    x_min: float
    x_max: float
    n_points: int

    def __post_init__(self):
        if not (math.isfinite(self.x_min) and math.isfinite(self.x_max)):
            raise ConfigError("grid bounds must be finite")
        if not self.x_min < self.x_max:
            raise ConfigError(f"need x_min < x_max, got {self.x_min}, {self.x_max}")
        if int(self.n_points) != self.n_points or self.n_points < 3:
            raise ConfigError(f"n_points must be an integer >= 3, got {self.n_points}")
        object.__setattr__(self, "x_min", float(self.x_min))
        object.__setattr__(self, "x_max", float(self.x_max))
        object.__setattr__(self, "n_points", int(self.n_points))

    @classmethod
    def symmetric(cls, half_width: float, n_points: int) -> "SpatialGrid":
        return cls(-half_width, half_width, n_points)

    @property
    def h(self) -> float:
        return (self.x_max - self.x_min) / (self.n_points - 1)

    @property
    def points(self) -> np.ndarray:
        return self.x_min + self.h * np.arange(self.n_points)

    def contains(self, x: float) -> bool:
        return self.x_min <= x <= self.x_max

    def describe(self) -> str:
        return f"[{self.x_min:.6g},{self.x_max:.6g}]x{self.n_points}"


@dataclass(frozen=True)
class TimeGrid:
    """Monitoring times with a number of sub-steps per interval."""

    monitoring_times: tuple[float, ...]
    steps_per_interval: tuple[int, ...] | None = None

    def __post_init__(self):
        ts = validate_times(self.monitoring_times)
        object.__setattr__(self, "monitoring_times", ts)
        if self.steps_per_interval is not None:
            sp = tuple(int(s) for s in self.steps_per_interval)
            if len(sp) != len(ts) or any(s < 1 for s in sp):
                raise ConfigError("need one positive step count per interval")
            object.__setattr__(self, "steps_per_interval", sp)

    @property
    def horizon(self) -> float:
        return self.monitoring_times[-1]

    @property
    def intervals(self) -> tuple[float, ...]:
        ts = (0.0,) + self.monitoring_times
        return tuple(b - a for a, b in zip(ts, ts[1:]))


def validate_times(times: Sequence[float]) -> tuple[float, ...]:
    ts = tuple(float(t) for t in times)
    if not ts:
        raise ConfigError("at least one monitoring time is required")
    if not all(math.isfinite(t) for t in ts):
        raise ConfigError("monitoring times must be finite")
    if ts[0] < 0:
        raise ConfigError("monitoring times must be nonnegative")
    if any(b <= a for a, b in zip(ts, ts[1:])):
        raise ConfigError(f"monitoring times must be strictly increasing: {ts}")
    return ts


def _time_index(times: Sequence[float], t: float, tol: float = 1e-12) -> int:
    for i, s in enumerate(times):
        if abs(s - t) <= tol:
            return i
    raise ConfigError(f"time {t} is not one of the monitoring times {tuple(times)}")


@dataclass(frozen=True, eq=False)
class CylinderPayoff:
    """``phi(B_{t_1}, ..., B_{t_m})`` for ``m <= 3``.

    ``phi`` takes ``m`` array arguments and must broadcast like a numpy ufunc.
    ``growth_degree`` and ``lipschitz`` are the declared constants ``n`` and
    ``C`` of ``|phi(x)-phi(y)| <= C (1+|x|^n+|y|^n) |x-y|``; they are checked
    by sampling, never symbolically.
    """

    times: tuple[float, ...]
    phi: Callable[..., np.ndarray]
    growth_degree: int = 1
    lipschitz: float = 1.0
    name: str = ""
    grid_hint: SpatialGrid | None = None

    def __post_init__(self):
        ts = validate_times(self.times)
        if len(ts) > MAX_ARITY:
            raise ConfigError(f"payoff arity {len(ts)} exceeds {MAX_ARITY}")
        object.__setattr__(self, "times", ts)

    @property
    def arity(self) -> int:
        return len(self.times)

    @property
    def horizon(self) -> float:
        return self.times[-1]

    def __call__(self, *xs) -> np.ndarray:
        return self.phi(*xs)

    def sample(self, grid: SpatialGrid) -> np.ndarray:
        """Values on the tensor grid ``grid ** arity`` (ij indexing)."""
        pts = grid.points
        mesh = np.meshgrid(*([pts] * self.arity), indexing="ij", sparse=True)
        vals = np.asarray(self.phi(*mesh), dtype=float)
        shape = (grid.n_points,) * self.arity
        return np.array(np.broadcast_to(vals, shape), dtype=float)

    def spot_check_growth(self, n_pairs: int = 200, radius: float = 3.0,
                          seed: int = 0) -> float:
        """Largest ratio of observed increment to the declared bound (<= 1 is ok)."""
        rng = np.random.default_rng(seed)
        x = rng.uniform(-radius, radius, size=(n_pairs, self.arity))
        y = rng.uniform(-radius, radius, size=(n_pairs, self.arity))
        fx = np.broadcast_to(np.asarray(self.phi(*x.T), dtype=float), (n_pairs,))
        fy = np.broadcast_to(np.asarray(self.phi(*y.T), dtype=float), (n_pairs,))
        nx = np.linalg.norm(x, axis=1)
        ny = np.linalg.norm(y, axis=1)
        bound = self.lipschitz * (1 + nx**self.growth_degree + ny**self.growth_degree)
        bound = bound * np.linalg.norm(x - y, axis=1)
        return float(np.max(np.abs(fx - fy) / bound))

    # ----- algebra -------------------------------------------------------

    def embed(self, times: Sequence[float]) -> "CylinderPayoff":
        """Same random variable written over a superset of monitoring times."""
        new = validate_times(times)
        idx = [_time_index(new, t) for t in self.times]
        if len(new) > MAX_ARITY:
            raise ConfigError(f"payoff arity {len(new)} exceeds {MAX_ARITY}")
        if new == self.times:
            return self
        phi = self.phi

        def embedded(*xs):
            return phi(*(xs[i] for i in idx))

        return CylinderPayoff(new, embedded, self.growth_degree, self.lipschitz,
                              self.name, self.grid_hint)

    def compose(self, f: Callable[[np.ndarray], np.ndarray], name: str = "",
                growth_degree: int | None = None,
                lipschitz: float | None = None) -> "CylinderPayoff":
        """``f(X)`` for a scalar function ``f``."""
        phi = self.phi
        return CylinderPayoff(
            self.times, lambda *xs: f(phi(*xs)),
            self.growth_degree if growth_degree is None else growth_degree,
            self.lipschitz if lipschitz is None else lipschitz,
            name or (f"f({self.name})" if self.name else ""),
            self.grid_hint,
        )

    def _combine(self, other, op, sym):
        if isinstance(other, CylinderPayoff):
            times = tuple(sorted(set(self.times) | set(other.times)))
            a, b = self.embed(times), other.embed(times)
            pa, pb = a.phi, b.phi
            return CylinderPayoff(
                times, lambda *xs: op(pa(*xs), pb(*xs)),
                max(self.growth_degree, other.growth_degree),
                self.lipschitz + other.lipschitz,
                f"({self.name}{sym}{other.name})",
                self.grid_hint or other.grid_hint,
            )
        c = float(other)
        pa = self.phi
        return CylinderPayoff(self.times, lambda *xs: op(pa(*xs), c),
                              self.growth_degree, self.lipschitz,
                              f"({self.name}{sym}{c:g})", self.grid_hint)

    def __add__(self, other):
        return self._combine(other, np.add, "+")

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, np.subtract, "-")

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        phi = self.phi
        return CylinderPayoff(self.times, lambda *xs: -np.asarray(phi(*xs), dtype=float),
                              self.growth_degree, self.lipschitz, f"-{self.name}",
                              self.grid_hint)

    def __mul__(self, other):
        if isinstance(other, CylinderPayoff):
            return self._combine(other, np.multiply, "*")
        c = float(other)
        phi = self.phi
        return CylinderPayoff(self.times, lambda *xs: c * np.asarray(phi(*xs), dtype=float),
                              self.growth_degree, abs(c) * self.lipschitz,
                              f"{c:g}*{self.name}", self.grid_hint)

    __rmul__ = __mul__


def constant_payoff(c: float, times: Sequence[float] = (1.0,)) -> CylinderPayoff:
    return CylinderPayoff(tuple(times), lambda *xs: np.full(np.broadcast(*xs).shape, float(c)),
                          0, 1.0, f"{c:g}")


def brownian(t: float = 1.0) -> CylinderPayoff:
    """The payoff ``B_t``."""
    return CylinderPayoff((t,), lambda x: np.asarray(x, dtype=float), 0, 1.0, f"B({t:g})")


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Samples of a function on a tensor product of identical spatial grids."""

    grid: SpatialGrid
    values: np.ndarray
    ndim: int = field(default=1)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != self.ndim or any(s != self.grid.n_points for s in vals.shape):
            raise ConfigError(
                f"values of shape {vals.shape} do not match a {self.ndim}-d grid "
                f"with {self.grid.n_points} points per axis"
            )
        if not np.all(np.isfinite(vals)):
            raise DomainError("grid function values must be finite")
        vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_callable(cls, grid: SpatialGrid, f: Callable, ndim: int = 1) -> "GridFunction":
        pts = grid.points
        mesh = np.meshgrid(*([pts] * ndim), indexing="ij", sparse=True)
        vals = np.broadcast_to(np.asarray(f(*mesh), dtype=float), (grid.n_points,) * ndim)
        return cls(grid, vals, ndim)

    def __call__(self, *xs) -> np.ndarray:
        """Multilinear interpolation; linear extrapolation beyond the grid."""
        return interpolate(self, *xs)


def interpolate(u: GridFunction, *xs) -> np.ndarray:
    if len(xs) != u.ndim:
        raise ConfigError(f"expected {u.ndim} coordinates, got {len(xs)}")
    pts = u.grid.points
    n = u.grid.n_points
    arrays = np.broadcast_arrays(*[np.asarray(x, dtype=float) for x in xs])
    out = np.zeros(arrays[0].shape)
    idx, wts = [], []
    for x in arrays:
        # searchsorted on the stored nodes makes node evaluation exact
        i = np.clip(np.searchsorted(pts, x, side="right") - 1, 0, n - 2)
        w = (x - pts[i]) / (pts[i + 1] - pts[i])
        idx.append(i)
        wts.append(w)
    d = u.ndim
    for corner in range(1 << d):
        weight = np.ones(out.shape)
        ii = []
        for k in range(d):
            bit = (corner >> k) & 1
            weight = weight * (wts[k] if bit else 1.0 - wts[k])
            ii.append(idx[k] + bit)
        out = out + weight * u.values[tuple(ii)]
    return out
