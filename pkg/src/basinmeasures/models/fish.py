"""Stage-structured consumer-resource model: juveniles J, adults A, resource R.

Juveniles grow and mature at rate ``v(w_J)``; adults reproduce with net
production ``w_A``. Both stages are harvested at their own rates.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import optimize

from ..core import ConfigurationError, SystemModel
from .equilibrium import EquilibriumError


@dataclass(frozen=True)
class FishParams:
    H: float = 1.0
    T: float = 1.0
    r: float = 1.0
    I_max: float = 10.0
    d_J: float = 0.1
    d_A: float = 0.1
    q: float = 0.85
    sigma: float = 0.5
    R_max: float = 2.0
    z: float = 0.01
    h_J: float = 0.0
    h_A: float = 0.0

    def __post_init__(self):
        if not 0 < self.z < 1:
            raise ConfigurationError("z = s_born/s_max must lie in (0, 1)")
        if self.h_J < 0 or self.h_A < 0:
            raise ConfigurationError("harvest rates must be nonnegative")


def maturation(x, mu: float, z: float):
    """Maturation rate ``v(x)`` for juvenile mortality ``mu = d_J + h_J``.

    ``v(x) = (x - mu) / (1 - z^(1 - mu/x))`` with the removable singularity at
    ``x = mu`` filled by a first-order series; ``v(0) = 0``.
    """
    x = np.asarray(x, dtype=float)
    L = math.log(z)
    u = x - mu
    with np.errstate(all="ignore"):
        e = u / x
        v = u / -np.expm1(e * L)
        near = np.abs(u) < 1e-8
        if np.any(near):
            v = np.where(near, -x / (L * (1.0 + 0.5 * e * L)), v)
        v = np.where(x <= 0, 0.0, v)
    return v


class FishRHS:
    def __init__(self, params: FishParams):
        self.params = params

    def __call__(self, s, t):
        p = self.params
        J, A, R = s[:, 0], s[:, 1], s[:, 2]
        ing = p.I_max * R / (p.H + R)
        wJ = np.maximum(0.0, p.sigma * ing - p.T)
        wA = np.maximum(0.0, p.sigma * p.q * ing - p.T)
        v = maturation(wJ, p.d_J + p.h_J, p.z)
        dJ = (wJ - v - p.d_J - p.h_J) * J + wA * A
        dA = v * J - (p.d_A + p.h_A) * A
        dR = p.r * (p.R_max - R) - ing * (J + p.q * A)
        return np.stack([dJ, dA, dR], axis=1)


class FishDomain:
    def __call__(self, s):
        return np.all(s >= 0, axis=1)


def net_production(p: FishParams, R):
    ing = p.I_max * R / (p.H + R)
    return max(0.0, p.sigma * ing - p.T), max(0.0, p.sigma * p.q * ing - p.T)


def _stage_balance(p: FishParams, R: float) -> float:
    """Growth rate of a small consumer population at fixed resource R.

    Zero at a positive equilibrium: with A = v J / (d_A + h_A) substituted
    into dJ/dt = 0.
    """
    wJ, wA = net_production(p, R)
    v = float(maturation(wJ, p.d_J + p.h_J, p.z))
    return wJ - v - p.d_J - p.h_J + wA * v / (p.d_A + p.h_A)


def _state_from_resource(p: FishParams, R: float) -> np.ndarray:
    wJ, _ = net_production(p, R)
    v = float(maturation(wJ, p.d_J + p.h_J, p.z))
    ing = p.I_max * R / (p.H + R)
    ratio = v / (p.d_A + p.h_A)
    J = p.r * (p.R_max - R) / (ing * (1.0 + p.q * ratio))
    return np.array([J, ratio * J, R])


def positive_equilibrium(p: FishParams, grid: int = 4001) -> np.ndarray | None:
    """Positive equilibrium via the resource-level reduction, or None if extinct."""
    Rs = np.linspace(p.R_max, 0.0, grid)[:-1]
    G = np.array([_stage_balance(p, R) for R in Rs])
    if not G[0] > 0:
        return None
    # first sign change coming down from R_max: the consumer-resource balance point
    flips = np.flatnonzero((G[:-1] > 0) & (G[1:] <= 0))
    if flips.size == 0:
        return None
    i = flips[0]
    R = optimize.brentq(lambda r: _stage_balance(p, r), Rs[i + 1], Rs[i], xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return _state_from_resource(p, R)


class _FishLocate:
    def __init__(self, params: FishParams):
        self.params = params

    def __call__(self, guess):
        x = positive_equilibrium(self.params)
        if x is None:
            return np.array([0.0, 0.0, self.params.R_max]), True
        return x, False


def build(params: FishParams | None = None, **overrides) -> SystemModel:
    params = params or FishParams(**overrides)
    return SystemModel(
        name="fish",
        dim=3,
        rhs=FishRHS(params),
        domain=FishDomain(),
        params=asdict(params),
        locate=_FishLocate(params),
        nonnegative=(0, 1, 2),
    )


def yield_(h_J: float, h_A: float, J_eq: float, A_eq: float) -> float:
    """Harvest yield ``h_J J_eq + h_A A_eq``."""
    if min(h_J, h_A, J_eq, A_eq) < 0:
        raise ValueError("yield inputs must be nonnegative")
    return h_J * J_eq + h_A * A_eq


STRATEGIES = {
    "equal": lambda t: (t, t),
    "adult": lambda t: (0.0, t),
}


def extinction_threshold(strategy: str = "equal", base: FishParams | None = None, hi: float = 10.0,
                         tol: float = 1e-10) -> float:
    """Smallest harvest intensity along ``strategy`` with no positive equilibrium."""
    base = base or FishParams()
    curve = STRATEGIES[strategy]

    def alive(t):
        hJ, hA = curve(t)
        return positive_equilibrium(FishParams(**{**asdict(base), "h_J": hJ, "h_A": hA})) is not None

    lo = 0.0
    if not alive(lo):
        raise EquilibriumError("population extinct without harvesting")
    while alive(hi):
        hi *= 2.0
        if hi > 1e6:
            raise EquilibriumError("no extinction threshold found")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if alive(mid):
            lo = mid
        else:
            hi = mid
    return hi
