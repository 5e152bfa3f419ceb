"""Mixing distributions for random coefficients.

Normal and lognormal coefficients are driven by standard-normal draws;
uniform, triangular and Weibull coefficients consume uniform(0, 1) draws
directly.  ``location`` and ``scale`` enter each family as follows::

    normal       mu + sigma * z
    lognormal    sign * exp(mu + sigma * z)
    uniform      mu + sigma * (2u - 1)                 support [mu - sigma, mu + sigma]
    triangular   mu + sigma * T(u)                     symmetric on [mu - sigma, mu + sigma]
    weibull      mu + sigma * (-log(1 - u)) ** (1/c)   shape c fixed at 1
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

__all__ = [
    "KINDS",
    "NORMAL_PATHWAY",
    "WEIBULL_SHAPE",
    "DegenerateShareWarning",
    "MixingDistribution",
    "draw_space",
    "realize",
    "realize_with_derivatives",
    "share_above_zero",
    "distribution_mean",
]

KINDS = ("normal", "lognormal", "triangular", "uniform", "weibull")
NORMAL_PATHWAY = frozenset({"normal", "lognormal"})
WEIBULL_SHAPE = 1.0


class DegenerateShareWarning(UserWarning):
    """Sign share requested for a coefficient with zero scale."""


@dataclass(frozen=True)
class MixingDistribution:
    kind: str
    location: float
    scale: float
    negative: bool = False  # lognormal only: coefficient is -exp(...)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown mixing distribution {self.kind!r}")
        if self.scale < 0:
            raise ValueError("scale must be >= 0")

    @property
    def sign(self) -> float:
        return -1.0 if self.negative else 1.0


def draw_space(kind: str) -> str:
    """Space of the standard draws that ``kind`` consumes."""
    if kind not in KINDS:
        raise ValueError(f"unknown mixing distribution {kind!r}")
    return "standard_normal" if kind in NORMAL_PATHWAY else "uniform01"


def _triangular(u):
    u = np.asarray(u, dtype=np.float64)
    lower = np.sqrt(2.0 * np.minimum(u, 0.5)) - 1.0
    upper = 1.0 - np.sqrt(2.0 * (1.0 - np.maximum(u, 0.5)))
    return np.where(u < 0.5, lower, upper)


def _check_space(kind, d, space):
    if space is not None and space != draw_space(kind):
        raise ValueError(f"{kind} coefficients need {draw_space(kind)} draws, got {space}")
    if kind not in NORMAL_PATHWAY:
        arr = np.asarray(d)
        if np.any((arr <= 0.0) | (arr >= 1.0)):
            raise ValueError(f"{kind} coefficients need uniform draws in (0, 1)")


def _standard_variate(kind, d):
    """Zero-location, unit-scale variate for the bounded/uniform pathway."""
    if kind == "uniform":
        return 2.0 * np.asarray(d, dtype=np.float64) - 1.0
    if kind == "triangular":
        return _triangular(d)
    if kind == "weibull":
        return (-np.log1p(-np.asarray(d, dtype=np.float64))) ** (1.0 / WEIBULL_SHAPE)
    raise ValueError(kind)


def realize_with_derivatives(kind, location, scale, d, negative=False):
    """Coefficient values plus their derivatives w.r.t. location and scale.

    All arguments broadcast.  Returns ``(beta, dbeta_dlocation, dbeta_dscale)``.
    """
    d = np.asarray(d, dtype=np.float64)
    if kind == "normal":
        beta = location + scale * d
        return beta, np.ones_like(beta), np.broadcast_to(d, beta.shape)
    if kind == "lognormal":
        beta = (-1.0 if negative else 1.0) * np.exp(location + scale * d)
        return beta, beta, beta * d
    t = _standard_variate(kind, d)
    beta = location + scale * t
    return beta, np.ones_like(beta), np.broadcast_to(t, beta.shape)


def realize(dist: MixingDistribution, d, space: str | None = None):
    """Map standard draw(s) ``d`` to coefficient realizations of ``dist``."""
    _check_space(dist.kind, d, space)
    beta, _, _ = realize_with_derivatives(
        dist.kind, dist.location, dist.scale, d, dist.negative
    )
    return float(beta) if np.ndim(beta) == 0 else beta


def share_above_zero(dist: MixingDistribution) -> float:
    """Exact probability that the coefficient is positive."""
    mu, sigma = float(dist.location), float(dist.scale)
    if dist.kind == "lognormal":
        return 0.0 if dist.negative else 1.0
    if sigma == 0.0:
        if mu == 0.0:
            warnings.warn("zero-scale coefficient at zero", DegenerateShareWarning)
            return 0.5
        return 1.0 if mu > 0 else 0.0
    if dist.kind == "normal":
        # 1 - p is exact for p in [0.5, 1], so shares of +mu and -mu sum to 1 exactly
        p = float(ndtr(abs(mu) / sigma))
        return p if mu >= 0 else 1.0 - p
    # remaining kinds: P(T > t) with T the unit variate
    t = -mu / sigma
    if dist.kind == "uniform":
        return float(np.clip((1.0 - t) / 2.0, 0.0, 1.0))
    if dist.kind == "triangular":
        if t <= -1.0:
            return 1.0
        if t >= 1.0:
            return 0.0
        return 1.0 - (1.0 + t) ** 2 / 2.0 if t < 0 else (1.0 - t) ** 2 / 2.0
    if dist.kind == "weibull":
        if t < 0:
            return 1.0
        return math.exp(-(t**WEIBULL_SHAPE))
    raise ValueError(dist.kind)


def distribution_mean(dist: MixingDistribution) -> float:
    mu, sigma = float(dist.location), float(dist.scale)
    if dist.kind == "lognormal":
        return dist.sign * math.exp(mu + sigma**2 / 2.0)
    if dist.kind == "weibull":
        return mu + sigma * math.gamma(1.0 + 1.0 / WEIBULL_SHAPE)
    return mu
