"""Spring-damper wagon pulled toward a magnet at ``x = a``.

State is ``(x, y)`` with ``y = dx/dt``. If a speed limit is set, the spring
breaks the first time ``y >= y_limit`` and stays broken for the rest of the
trajectory.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import optimize

from ..core import ConfigurationError, EnergyParams, Switch, SystemModel
from .equilibrium import EquilibriumError


@dataclass(frozen=True)
class WagonParams:
    m: float = 1.0
    c: float = 1.0
    k: float = 0.7
    k_m: float = 1.0
    a: float = 5.0
    y_limit: float = math.inf
    # states with x > a - crash_margin have hit the magnet
    crash_margin: float = 0.01

    def __post_init__(self):
        if not self.m > 0:
            raise ConfigurationError("mass must be positive")
        if self.k < 0 or self.c < 0 or self.k_m < 0:
            raise ConfigurationError("k, c, k_m must be nonnegative")
        if not self.y_limit > 0:
            raise ConfigurationError("y_limit must be positive (use inf for no limit)")

    @property
    def energy(self) -> EnergyParams:
        return EnergyParams(m=self.m, k=self.k, k_m=self.k_m, a=self.a)


class WagonRHS:
    def __init__(self, params: WagonParams, k: float | None = None):
        self.params = params
        self.k = params.k if k is None else k

    def __call__(self, s, t):
        p = self.params
        x, y = s[:, 0], s[:, 1]
        acc = -(self.k / p.m) * x - (p.c / p.m) * y + p.k_m / (p.m * (x - p.a) ** 2)
        return np.stack([y, acc], axis=1)


class WagonDomain:
    def __init__(self, a: float):
        self.a = a

    def __call__(self, s):
        return s[:, 0] < self.a


class SpeedIndicator:
    def __init__(self, y_limit: float):
        self.y_limit = y_limit

    def __call__(self, s):
        return s[:, 1] - self.y_limit


class CrashPredicate:
    def __init__(self, params: WagonParams):
        self.threshold = params.a - params.crash_margin

    def __call__(self, s):
        return s[:, 0] > self.threshold


def fold_stiffness(params: WagonParams) -> float:
    """Stiffness at which the two equilibria merge: k = 27 k_m / (4 a^3)."""
    return 27.0 * params.k_m / (4.0 * params.a**3)


def stable_position(params: WagonParams) -> float:
    """Position of the stable equilibrium, by bisection on k x (x-a)^2 - k_m.

    On ``x < a/3`` that cubic is increasing, and its root there is the
    equilibrium where the spring outweighs the magnet's pull gradient.
    """
    p = params
    if p.k_m == 0:
        return 0.0
    if p.k == 0:
        raise EquilibriumError("no spring, no equilibrium")

    def g(x):
        return p.k * x * (x - p.a) ** 2 - p.k_m

    top = p.a / 3.0
    if g(top) <= 0:
        raise EquilibriumError(f"no equilibrium for k={p.k} (fold at k={fold_stiffness(p):.6g})", float(-g(top)))
    lo = -1.0
    while g(lo) > 0:
        lo *= 2.0
    return float(optimize.brentq(g, lo, top, xtol=1e-15, rtol=4 * np.finfo(float).eps))


class _WagonLocate:
    def __init__(self, params: WagonParams):
        self.params = params

    def __call__(self, guess):
        return np.array([stable_position(self.params), 0.0]), False


def build(params: WagonParams | None = None, **overrides) -> SystemModel:
    params = params or WagonParams(**overrides)
    switch = None
    if math.isfinite(params.y_limit):
        # without the spring the net force points at the magnet everywhere, so x
        # increases monotonically until the crash
        switch = Switch(indicator=SpeedIndicator(params.y_limit), rhs=WagonRHS(params, k=0.0),
                        disables_capture=True, unsafe_after=params.k_m > 0)
    return SystemModel(
        name="wagon",
        dim=2,
        rhs=WagonRHS(params),
        domain=WagonDomain(params.a),
        params=asdict(params),
        switch=switch,
        locate=_WagonLocate(params),
    )
