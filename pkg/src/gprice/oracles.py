"""Independent reference values: quadrature and closed forms under one prior."""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Callable

import numpy as np
from numpy.polynomial.hermite_e import hermegauss

from .core import CylinderPayoff


@lru_cache(maxsize=8)
def _nodes(order: int):
    x, w = hermegauss(order)
    return x, w / math.sqrt(2.0 * math.pi)


def gauss_hermite(f: Callable[[np.ndarray], np.ndarray], sigma: float,
                  order: int = 80) -> float:
    """``E[f(sigma * Z)]`` for standard normal ``Z``."""
    x, w = _nodes(order)
    return float(np.dot(w, np.asarray(f(sigma * x), dtype=float)))


def classical_expectation(payoff: CylinderPayoff, variance: float,
                          order: int = 40) -> float:
    """``E[phi(B_{t_1}, ..., B_{t_m})]`` for ``B`` a Brownian motion with the given variance.

    Tensor Gauss-Hermite over the independent increments; ``order ** m`` nodes.
    """
    x, w = _nodes(order)
    m = payoff.arity
    gaps = np.diff((0.0,) + payoff.times)
    sds = np.sqrt(variance * gaps)
    mesh = np.meshgrid(*([x] * m), indexing="ij", sparse=True)
    incr = [s * z for s, z in zip(sds, mesh)]
    pos = list(np.cumsum(np.broadcast_arrays(*incr), axis=0)) if m > 1 else incr
    vals = np.broadcast_to(np.asarray(payoff(*pos), dtype=float), (order,) * m)
    weight = w
    for _ in range(m - 1):
        weight = np.multiply.outer(weight, w)
    return float(np.sum(weight * vals))


def bachelier_call(sigma: float, strike: float) -> float:
    """``E[(sigma Z - K)^+]`` in closed form."""
    if sigma == 0.0:
        return max(-strike, 0.0)
    d = strike / sigma
    return sigma * math.exp(-0.5 * d * d) / math.sqrt(2 * math.pi) - strike * 0.5 * math.erfc(d / math.sqrt(2.0))


def exponential_bid(alpha: float, variance: float) -> float:
    """Bid for ``X = B_1`` under exponential utility: ``alpha * variance / 2``."""
    return 0.5 * alpha * variance

