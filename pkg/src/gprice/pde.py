"""Explicit monotone finite differences for the G-heat equation.

Solves ``u_t = G(u_xx)`` (upper mode) or ``u_t = G_(u_xx)`` (lower mode) on a
truncated uniform grid. Boundary nodes keep a zero second difference, i.e.
the solution is continued linearly beyond the grid. Under the time-step bound
``dt * upper_variance / h**2 <= 1`` every step is a monotone map, so the
scheme converges to the viscosity solution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numba
import numpy as np

from .core import GridFunction, SpatialGrid, UncertaintySet
from .errors import ConfigError, DomainError, NumericalError, RangeError

Direction = Literal["upper", "lower"]


@dataclass(frozen=True)
class SolverConfig:
    grid: SpatialGrid
    duration: float
    cfl_fraction: float = 0.9
    direction: Direction = "upper"

    def __post_init__(self):
        if not (math.isfinite(self.duration) and self.duration >= 0):
            raise ConfigError(f"duration must be finite and >= 0, got {self.duration}")
        if not 0.0 < self.cfl_fraction <= 1.0:
            raise ConfigError(
                f"cfl_fraction must lie in (0, 1], got {self.cfl_fraction}; "
                "larger steps break monotonicity"
            )
        if self.direction not in ("upper", "lower"):
            raise ConfigError(f"direction must be 'upper' or 'lower', got {self.direction!r}")


@dataclass(frozen=True)
class StepPlan:
    dt: float
    n_steps: int
    last_dt: float


def plan_steps(h: float, duration: float, theta: UncertaintySet,
               cfl_fraction: float) -> StepPlan:
    """Full steps of ``cfl * h**2 / upper_variance``; the last one is shortened."""
    if duration == 0.0 or theta.upper_variance == 0.0:
        return StepPlan(0.0, 0, 0.0)
    dt = cfl_fraction * h * h / theta.upper_variance
    if dt * theta.upper_variance / (h * h) > 1.0:
        raise ConfigError("time step violates the monotonicity bound")
    n = max(1, math.ceil(duration / dt - 1e-9))
    last = duration - (n - 1) * dt
    if last <= 0.0:
        n -= 1
        last = duration - (n - 1) * dt
    # rounding can leave the remainder a few ulps above dt
    return StepPlan(dt, n, min(last, dt))


@numba.njit(cache=True)
def _march_rows(u, c_lo, c_up, last_lo, last_up, n_steps, upper):
    """Step every row of ``u`` in place; returns the first blow-up step or -1.

    Each row is advanced through all time steps while it sits in cache, with
    two buffers so a step reads only the previous step's values.
    """
    rows, n = u.shape
    cur = np.empty(n)
    nxt = np.empty(n)
    first_bad = -1
    for r in range(rows):
        for i in range(n):
            cur[i] = u[r, i]
        nxt[0] = cur[0]
        nxt[n - 1] = cur[n - 1]
        for k in range(n_steps):
            if first_bad >= 0 and k >= first_bad:
                break
            a_lo = c_lo
            a_up = c_up
            if k == n_steps - 1:
                a_lo = last_lo
                a_up = last_up
            bad = False
            for i in range(1, n - 1):
                lap = (cur[i + 1] + cur[i - 1]) - cur[i] - cur[i]
                p = a_lo * lap
                q = a_up * lap
                if upper:
                    m = p if p > q else q
                else:
                    m = p if p < q else q
                v = cur[i] + m
                nxt[i] = v
                if not (v - v == 0.0):
                    bad = True
            if bad:
                if first_bad < 0 or k < first_bad:
                    first_bad = k
                break
            tmp = cur
            cur = nxt
            nxt = tmp
        for i in range(n):
            u[r, i] = cur[i]
    return first_bad


def march(values: np.ndarray, h: float, duration: float, theta: UncertaintySet,
          cfl_fraction: float = 0.9, direction: Direction = "upper"):
    """Advance samples along their last axis; returns ``(values, n_steps)``.

    Leading axes are independent problems (batch or prefix variables).
    """
    u = np.array(values, dtype=float, copy=True)
    if u.ndim == 0 or u.shape[-1] < 3:
        raise ConfigError("need at least 3 nodes along the last axis")
    if not np.all(np.isfinite(u)):
        raise DomainError("initial data must be finite")
    plan = plan_steps(h, duration, theta, cfl_fraction)
    if plan.n_steps == 0:
        return u, 0
    lo, up = theta.lower_variance, theta.upper_variance
    r, r_last = plan.dt / (h * h), plan.last_dt / (h * h)
    rows = np.ascontiguousarray(u.reshape(-1, u.shape[-1]))
    bad = _march_rows(rows, 0.5 * lo * r, 0.5 * up * r,
                      0.5 * lo * r_last, 0.5 * up * r_last,
                      plan.n_steps, direction == "upper")
    if bad >= 0:
        raise NumericalError(f"non-finite values at time step {bad}")
    return rows.reshape(u.shape), plan.n_steps


def solve_g_heat(initial: GridFunction, config: SolverConfig,
                 theta: UncertaintySet) -> GridFunction:
    """Sampled ``u(duration, .)`` for initial data ``initial``.

    For a tensor-grid function the equation is solved in the last variable,
    independently for every node of the leading variables.
    """
    if initial.grid != config.grid:
        raise ConfigError("initial data and solver config use different grids")
    out, _ = march(initial.values, config.grid.h, config.duration, theta,
                   config.cfl_fraction, config.direction)
    return GridFunction(config.grid, out, initial.ndim)


def evaluate_at(u: GridFunction, x: float) -> float:
    """Linear interpolation of a 1-d grid function; exact at nodes."""
    if u.ndim != 1:
        raise ConfigError("evaluate_at expects a one-dimensional grid function")
    if not (math.isfinite(x) and u.grid.contains(x)):
        raise RangeError(f"x={x} outside [{u.grid.x_min}, {u.grid.x_max}]")
    return float(u(x))
