"""Discrete-time oracles for the G-expectation.

Each step the controller picks a volatility ``sigma`` from a finite menu and
the path moves by ``+-sigma*sqrt(dt)`` with equal weight. Three routes are
offered:

* ``lattice_dpp_expectation`` - backward induction, max over sigma per node;
* ``enumerate_adapted_strategies`` - brute force over every map from sign
  history to sigma, the finite analogue of the sup over priors;
* ``monte_carlo_prior_bound`` - simulated open-loop volatility paths, a
  statistical lower bound for the continuous-time value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .core import CylinderPayoff, UncertaintySet
from .errors import AlignmentError, CapacityError, ConfigError

ENUMERATION_MAX_STEPS = 6
# d ** (2**n - 1) strategies; 2**16 keeps the brute force to a few seconds
ENUMERATION_MAX_STRATEGIES = 1 << 16
MC_STEPS_PER_UNIT = 256
MC_PIECES_PER_UNIT = 16


@dataclass(frozen=True)
class LatticeSpec:
    n_steps: int
    dt: float
    volatility_choices: tuple[float, ...]

    def __post_init__(self):
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ConfigError(f"n_steps must be a positive integer, got {self.n_steps}")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ConfigError(f"dt must be positive, got {self.dt}")
        choices = tuple(float(s) for s in self.volatility_choices)
        if not choices or any(not math.isfinite(s) or s < 0 for s in choices):
            raise ConfigError("volatility choices must be nonnegative and finite")
        object.__setattr__(self, "volatility_choices", tuple(sorted(set(choices))))
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @classmethod
    def from_theta(cls, theta: UncertaintySet, horizon: float, n_steps: int) -> "LatticeSpec":
        """Menu of extreme volatilities ``{sigma_lower, sigma_upper}``."""
        return cls(n_steps, horizon / n_steps, (theta.sigma_lower, theta.sigma_upper))

    @property
    def horizon(self) -> float:
        return self.n_steps * self.dt

    def check_controls(self, theta: UncertaintySet) -> None:
        for s in self.volatility_choices:
            if not theta.contains(s * s, tol=1e-12):
                raise ConfigError(f"sigma={s} has variance outside the uncertainty set")


def monitoring_steps(payoff: CylinderPayoff, spec: LatticeSpec) -> tuple[int, ...]:
    steps = []
    for t in payoff.times:
        k = round(t / spec.dt)
        if abs(k * spec.dt - t) > 1e-9 * max(1.0, t):
            raise AlignmentError(f"monitoring time {t} is not a multiple of dt={spec.dt}")
        if k > spec.n_steps:
            raise AlignmentError(f"monitoring time {t} lies beyond the lattice horizon")
        steps.append(k)
    return tuple(steps)


@lru_cache(maxsize=32)
def _state_graph(n_choices: int, monitor: tuple[int, ...]):
    """Recombined states ``(frozen counts at past monitors, current counts)``.

    Counts are net signed moves per volatility choice, so a state determines
    every monitored position exactly. Returns per-layer state lists and child
    index arrays of shape ``(n_states, n_choices, 2)``.
    """
    last = monitor[-1]
    layers = [[((), (0,) * n_choices)]]
    children = []
    for k in range(last):
        index: dict = {}
        nxt = []
        kids = np.empty((len(layers[-1]), n_choices, 2), dtype=np.int64)
        for si, (frozen, cur) in enumerate(layers[-1]):
            for c in range(n_choices):
                for b, sign in enumerate((1, -1)):
                    new = list(cur)
                    new[c] += sign
                    new = tuple(new)
                    fz = frozen + (new,) * monitor.count(k + 1)
                    key = (fz, new)
                    j = index.get(key)
                    if j is None:
                        j = index[key] = len(nxt)
                        nxt.append(key)
                    kids[si, c, b] = j
        layers.append(nxt)
        children.append(kids)
    # payoffs monitored at step 0 see the origin
    return layers, children


def lattice_dpp_expectation(payoff: CylinderPayoff, spec: LatticeSpec) -> float:
    """Root value of max-over-sigma backward induction on the +-sigma*sqrt(dt) tree.

    Nodes are merged when they share all monitored positions, which leaves
    the value unchanged and keeps the cost polynomial in ``n_steps``.
    """
    monitor = monitoring_steps(payoff, spec)
    sig = np.asarray(spec.volatility_choices) * math.sqrt(spec.dt)
    d = len(sig)
    if monitor[-1] == 0:
        return float(payoff(*([0.0] * payoff.arity)))
    layers, children = _state_graph(d, monitor)
    terminal = layers[-1]
    n0 = monitor.count(0)
    coords = []
    for i in range(payoff.arity):
        if i < n0:
            coords.append(np.zeros(len(terminal)))
        else:
            cnt = np.array([st[0][i - n0] for st in terminal], dtype=float)
            coords.append(cnt @ sig)
    v = np.broadcast_to(np.asarray(payoff(*coords), dtype=float), (len(terminal),)).copy()
    for kids in reversed(children):
        v = (0.5 * (v[kids[..., 0]] + v[kids[..., 1]])).max(axis=1)
    return float(v[0])


def enumerate_adapted_strategies(payoff: CylinderPayoff, spec: LatticeSpec) -> float:
    """Brute-force sup over adapted volatility strategies.

    A strategy assigns a volatility index to every sign history of length
    ``0..n-1``; its value is the plain average of the payoff over all ``2**n``
    sign paths. Positions are accumulated path by path, independently of the
    recombined states used by the DPP.
    """
    n = spec.n_steps
    d = len(spec.volatility_choices)
    n_nodes = (1 << n) - 1
    if n > ENUMERATION_MAX_STEPS or d ** n_nodes > ENUMERATION_MAX_STRATEGIES:
        raise CapacityError(
            f"{d}**{n_nodes} strategies exceed the enumeration cap "
            f"({ENUMERATION_MAX_STRATEGIES}, n_steps <= {ENUMERATION_MAX_STEPS})"
        )
    monitor = monitoring_steps(payoff, spec)
    positions = _strategy_positions(n, spec.volatility_choices, spec.dt, monitor)
    vals = np.asarray(payoff(*positions), dtype=float)
    vals = np.broadcast_to(vals, positions[0].shape)
    return float(vals.mean(axis=1).max())


@lru_cache(maxsize=8)
def _strategy_positions(n, choices, dt, monitor):
    """Monitored positions for every (strategy, sign path): arrays ``(S, 2**n)``."""
    d = len(choices)
    n_nodes = (1 << n) - 1
    sig = np.asarray(choices)
    sq = math.sqrt(dt)
    n_paths = 1 << n
    bits = (np.arange(n_paths)[:, None] >> np.arange(n - 1, -1, -1)) & 1
    signs = 1.0 - 2.0 * bits
    # decision node for step k on path p: index of history p[:k] in BFS order
    nodes = np.empty((n_paths, n), dtype=np.int64)
    for k in range(n):
        prefix = np.arange(n_paths) >> (n - k)
        nodes[:, k] = (1 << k) - 1 + prefix
    ids = np.arange(d ** n_nodes)
    digits = (ids[:, None] // d ** np.arange(n_nodes)) % d
    moves = sig[digits[:, nodes]] * signs * sq
    pos = np.concatenate([np.zeros(moves.shape[:2] + (1,)), np.cumsum(moves, axis=2)], axis=2)
    out = tuple(np.ascontiguousarray(pos[:, :, k]) for k in monitor)
    for arr in out:
        arr.flags.writeable = False
    return out


@dataclass(frozen=True)
class MonteCarloEstimate:
    """Best simulated prior: ``estimate, std_error = result`` unpacks."""

    estimate: float
    std_error: float
    control_index: int
    n_paths: int
    n_controls: int
    steps_per_unit: int = MC_STEPS_PER_UNIT

    def __iter__(self):
        yield self.estimate
        yield self.std_error


def _fine_mesh(times: Sequence[float]):
    """Mesh containing every monitoring time, ~MC_STEPS_PER_UNIT steps per unit."""
    edges = [0.0]
    monitor = []
    for t in times:
        span = t - edges[-1]
        k = max(1, math.ceil(span * MC_STEPS_PER_UNIT - 1e-9)) if span > 0 else 0
        edges.extend(edges[-1] + span * np.arange(1, k + 1) / k)
        monitor.append(len(edges) - 1)
    return np.asarray(edges), monitor


def monte_carlo_prior_bound(payoff: CylinderPayoff, theta: UncertaintySet,
                            n_paths: int, n_controls: int, seed: int) -> MonteCarloEstimate:
    """Max over sampled volatility controls of the simulated ``E_P[payoff]``.

    Control 0 is constant ``sigma_upper``, control 1 constant ``sigma_lower``;
    the rest are piecewise constant on pieces of length 1/16 with each piece's
    variance drawn from the extremes of ``theta`` (or its finite list). All
    controls share the same Brownian increments. Because only a subfamily of
    priors is searched, the estimate is a lower bound for the G-expectation
    up to sampling error.
    """
    if n_paths < 100:
        raise ConfigError(f"n_paths must be >= 100, got {n_paths}")
    if n_controls < 1:
        raise ConfigError(f"n_controls must be >= 1, got {n_controls}")
    rng = np.random.default_rng(seed)
    edges, monitor = _fine_mesh(payoff.times)
    dts = np.diff(edges)
    dw = rng.standard_normal((n_paths, len(dts))) * np.sqrt(dts)
    menu = np.asarray(theta.variances if theta.variances is not None
                      else (theta.lower_variance, theta.upper_variance))
    mids = 0.5 * (edges[:-1] + edges[1:])
    piece = np.floor(mids * MC_PIECES_PER_UNIT).astype(np.int64)
    n_pieces = int(piece.max()) + 1 if len(piece) else 1
    best = None
    for c in range(n_controls):
        if c == 0:
            var = np.full(len(dts), theta.upper_variance)
        elif c == 1:
            var = np.full(len(dts), theta.lower_variance)
        else:
            var = rng.choice(menu, size=n_pieces)[piece]
        incr = dw * np.sqrt(var)
        path = np.concatenate([np.zeros((n_paths, 1)), np.cumsum(incr, axis=1)], axis=1)
        vals = np.asarray(payoff(*(path[:, k] for k in monitor)), dtype=float)
        vals = np.broadcast_to(vals, (n_paths,))
        est = float(vals.mean())
        se = float(vals.std(ddof=1) / math.sqrt(n_paths))
        if best is None or est > best[0]:
            best = (est, se, c)
    return MonteCarloEstimate(best[0], best[1], best[2], n_paths, n_controls)
