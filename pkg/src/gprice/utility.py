"""Strictly increasing concave utilities with derivatives and inverses."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, DomainError, InversionError

FD_STEP = 1e-5
INVERSE_TOL = 1e-12


class Utility:
    """Base class; subclasses provide ``_u``, ``_du``, ``_d2u`` and ``_inv``.

    Calls are vectorized. Evaluating outside the domain raises
    :class:`DomainError` naming the first offending value.
    """

    name = "utility"
    lower_bound = -math.inf  # domain is (lower_bound, inf)

    def __call__(self, x):
        x = self._check(x)
        return self._ret(self._u(x))

    def derivative(self, x):
        return self._ret(self._du(self._check(x)))

    def second_derivative(self, x):
        return self._ret(self._d2u(self._check(x)))

    def risk_aversion(self, x):
        """Pratt's absolute risk aversion ``-u''/u'``."""
        x = self._check(x)
        du = self._du(x)
        if np.any(du <= 0):
            raise DomainError("u' must be positive for risk aversion")
        return self._ret(-self._d2u(x) / du)

    def inverse(self, y):
        y = np.asarray(y, dtype=float)
        if not np.all(np.isfinite(y)):
            raise DomainError("cannot invert a non-finite utility level")
        return self._ret(self._inv(y))

    def _inv(self, y):
        return bisect_inverse(self, y)

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        bad = ~(np.isfinite(x) & (x > self.lower_bound))
        if np.any(bad):
            v = x[bad].flat[0] if x.ndim else float(x)
            raise DomainError(f"{self.name} is undefined at x={v!r} "
                              f"(domain x > {self.lower_bound})")
        return x

    @staticmethod
    def _ret(v):
        v = np.asarray(v, dtype=float)
        return float(v) if v.ndim == 0 else v

    def probe_points(self, n: int = 101) -> np.ndarray:
        lo = -2.0 if math.isinf(self.lower_bound) else self.lower_bound + 0.05
        return np.linspace(lo, lo + 4.0, n)

    def validate(self, probes=None) -> None:
        """Check ``u' > 0``, ``u'' <= 0`` and ``u^-1(u(x)) = x`` on probes."""
        x = self.probe_points() if probes is None else np.asarray(probes, dtype=float)
        if np.any(np.asarray(self._du(x)) <= 0):
            raise ConfigError(f"{self.name} is not strictly increasing on the probes")
        if np.any(np.asarray(self._d2u(x)) > 1e-9):
            raise ConfigError(f"{self.name} is not concave on the probes")
        back = self._inv(np.asarray(self._u(x)))
        if np.max(np.abs(back - x)) > 1e-10 * max(1.0, float(np.max(np.abs(x)))):
            raise ConfigError(f"{self.name} inverse does not round-trip")

    def __repr__(self):
        return self.name


class LinearUtility(Utility):
    name = "linear"

    def _u(self, x):
        return x

    def _du(self, x):
        return np.ones_like(x)

    def _d2u(self, x):
        return np.zeros_like(x)

    def _inv(self, y):
        return y


class ExponentialUtility(Utility):
    """``u(x) = -exp(-alpha x)``; constant risk aversion ``alpha``."""

    def __init__(self, alpha: float = 1.0):
        if not (math.isfinite(alpha) and alpha > 0):
            raise ConfigError(f"alpha must be positive, got {alpha}")
        self.alpha = float(alpha)
        self.name = f"exponential(alpha={alpha:g})"

    def _u(self, x):
        return -np.exp(-self.alpha * x)

    def _du(self, x):
        return self.alpha * np.exp(-self.alpha * x)

    def _d2u(self, x):
        return -self.alpha ** 2 * np.exp(-self.alpha * x)

    def _inv(self, y):
        if np.any(y >= 0):
            raise InversionError(f"{self.name} takes only negative values")
        return -np.log(-y) / self.alpha


class PowerUtility(Utility):
    """``u(x) = ((x+c)**eta - c**eta) / eta`` on ``x > -c``, ``0 < eta < 1``."""

    def __init__(self, eta: float, shift: float = 1.0):
        if not 0.0 < eta < 1.0:
            raise ConfigError(f"eta must lie in (0, 1), got {eta}")
        if not (math.isfinite(shift) and shift > 0):
            raise ConfigError(f"shift must be positive, got {shift}")
        self.eta, self.shift = float(eta), float(shift)
        self.lower_bound = -self.shift
        self.name = f"power(eta={eta:g},shift={shift:g})"

    def _u(self, x):
        return ((x + self.shift) ** self.eta - self.shift ** self.eta) / self.eta

    def _du(self, x):
        return (x + self.shift) ** (self.eta - 1.0)

    def _d2u(self, x):
        return (self.eta - 1.0) * (x + self.shift) ** (self.eta - 2.0)

    def _inv(self, y):
        base = self.eta * y + self.shift ** self.eta
        if np.any(base <= 0):
            raise InversionError(f"{self.name}: level below the range of u")
        return base ** (1.0 / self.eta) - self.shift


class LogUtility(Utility):
    """``u(x) = log(x + c)`` on ``x > -c``."""

    def __init__(self, shift: float = 1.0):
        if not (math.isfinite(shift) and shift > 0):
            raise ConfigError(f"shift must be positive, got {shift}")
        self.shift = float(shift)
        self.lower_bound = -self.shift
        self.name = f"log(shift={shift:g})"

    def _u(self, x):
        return np.log(x + self.shift)

    def _du(self, x):
        return 1.0 / (x + self.shift)

    def _d2u(self, x):
        return -1.0 / (x + self.shift) ** 2

    def _inv(self, y):
        return np.exp(y) - self.shift


class TabulatedUtility(Utility):
    """Piecewise-linear utility through sorted breakpoints.

    Beyond the table it continues with the end slopes. Derivatives are
    central finite differences with step ``FD_STEP``; the inverse is found by
    bisection.
    """

    def __init__(self, breakpoints: Sequence[float], values: Sequence[float]):
        x = np.asarray(breakpoints, dtype=float)
        y = np.asarray(values, dtype=float)
        if x.ndim != 1 or len(x) < 2 or len(x) != len(y):
            raise ConfigError("need at least two breakpoints with matching values")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ConfigError("breakpoints and values must be finite")
        if np.any(np.diff(x) <= 0):
            raise ConfigError("breakpoints must be strictly increasing")
        slopes = np.diff(y) / np.diff(x)
        if np.any(slopes <= 0):
            raise ConfigError("tabulated utility must be strictly increasing")
        if np.any(np.diff(slopes) > 1e-12 * np.abs(slopes[:-1])):
            raise ConfigError("tabulated utility must be concave")
        self.x, self.y, self.slopes = x, y, slopes
        self.name = f"tabulated({len(x)} points)"

    def _u(self, x):
        out = np.interp(x, self.x, self.y)
        out = np.where(x < self.x[0], self.y[0] + self.slopes[0] * (x - self.x[0]), out)
        return np.where(x > self.x[-1], self.y[-1] + self.slopes[-1] * (x - self.x[-1]), out)

    def _du(self, x):
        return (self._u(x + FD_STEP) - self._u(x - FD_STEP)) / (2 * FD_STEP)

    def _d2u(self, x):
        u0 = self._u(x)
        d2 = (self._u(x + FD_STEP) - 2 * u0 + self._u(x - FD_STEP)) / FD_STEP ** 2
        # on a linear piece the difference is pure cancellation error
        floor = 8 * np.finfo(float).eps * np.maximum(np.abs(u0), 1.0) / FD_STEP ** 2
        return np.where(np.abs(d2) <= floor, 0.0, d2)

    def probe_points(self, n: int = 101) -> np.ndarray:
        return np.linspace(self.x[0] - 1.0, self.x[-1] + 1.0, n)


def bisect_inverse(u: Utility, y, tol: float = INVERSE_TOL, max_iter: int = 400):
    """Vectorized bisection for ``u(x) = y`` with bracket expansion."""
    y = np.asarray(y, dtype=float)
    lb = u.lower_bound
    lo = np.full(y.shape, -1.0 if math.isinf(lb) else lb + 1e-300)
    hi = np.full(y.shape, 1.0)
    if not math.isinf(lb):
        lo = np.full(y.shape, lb + max(1e-12, 1e-12 * abs(lb)))
    for _ in range(200):
        need = u._u(hi) < y
        if not np.any(need):
            break
        hi = np.where(need, hi + 2.0 * (np.abs(hi) + 1.0), hi)
    else:
        raise InversionError(f"{u.name}: could not bracket level from above")
    if math.isinf(lb):
        for _ in range(200):
            need = u._u(lo) > y
            if not np.any(need):
                break
            lo = np.where(need, lo - 2.0 * (np.abs(lo) + 1.0), lo)
        else:
            raise InversionError(f"{u.name}: could not bracket level from below")
    elif np.any(u._u(lo) > y):
        raise InversionError(f"{u.name}: level below the range of u")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        up = u._u(mid) < y
        lo = np.where(up, mid, lo)
        hi = np.where(up, hi, mid)
        if np.all(hi - lo <= tol * np.maximum(1.0, np.abs(mid))):
            break
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class RiskAversionCheck:
    """Outcome of :func:`is_more_risk_averse`; truthy when the criterion holds."""

    result: bool
    violations: tuple[tuple[float, str], ...]
    max_second_difference: float

    def __bool__(self):
        return self.result


def is_more_risk_averse(u1: Utility, u2: Utility, probe_grid=None,
                        tol: float = 1e-8) -> RiskAversionCheck:
    """Whether ``u2(u1^-1(.))`` is increasing and concave on a probe range.

    ``probe_grid`` holds wealth levels in both domains (default 101 points);
    ``h = u2 o u1^-1`` is sampled on a uniform grid of utility levels spanning
    ``u1`` of that range, and its first and second differences are checked.
    """
    x = u1.probe_points() if probe_grid is None else np.asarray(probe_grid, dtype=float)
    if x.ndim != 1 or len(x) < 3:
        raise ConfigError("probe grid needs at least 3 points")
    a, b = float(np.min(x)), float(np.max(x))
    u2._check(np.array([a, b]))
    levels = np.linspace(u1(a), u1(b), len(x))
    hv = np.asarray(u2(u1.inverse(levels)), dtype=float)
    d1 = np.diff(hv)
    d2 = hv[2:] - 2 * hv[1:-1] + hv[:-2]
    violations = []
    for i in np.flatnonzero(d1 <= 0):
        violations.append((float(levels[i]), "not increasing"))
    for i in np.flatnonzero(d2 > tol):
        violations.append((float(levels[i + 1]), "not concave"))
    return RiskAversionCheck(not violations, tuple(violations),
                             float(np.max(d2)) if len(d2) else 0.0)


def make_utility(kind: str, **params) -> Utility:
    """Factory used by the CLI: ``exponential``, ``power``, ``log``, ``linear``, ``tabulated``."""
    kind = kind.lower()
    if kind == "exponential":
        u = ExponentialUtility(params.get("alpha", 1.0))
    elif kind == "power":
        u = PowerUtility(params["eta"], params.get("shift", 1.0))
    elif kind == "log":
        u = LogUtility(params.get("shift", 1.0))
    elif kind == "linear":
        u = LinearUtility()
    elif kind == "tabulated":
        u = TabulatedUtility(params["breakpoints"], params["values"])
    else:
        raise ConfigError(f"unknown utility kind {kind!r}")
    u.validate()
    return u
