"""Bundled case-study systems."""

from . import fish, solow, wagon
from .equilibrium import Equilibrium, EquilibriumError, damped_newton, find_equilibrium, jacobian
from .fish import FishParams, maturation, yield_
from .solow import SolowParams
from .wagon import WagonParams

FAMILIES = {
    "solow": (solow, SolowParams),
    "wagon": (wagon, WagonParams),
    "fish": (fish, FishParams),
}


def build_model(name: str, **params):
    """Build a bundled model by name with parameter overrides."""
    try:
        module, cls = FAMILIES[name]
    except KeyError:
        raise KeyError(f"unknown model {name!r}; choose from {sorted(FAMILIES)}") from None
    return module.build(cls(**params))


__all__ = [
    "FAMILIES", "build_model", "fish", "solow", "wagon",
    "Equilibrium", "EquilibriumError", "damped_newton", "find_equilibrium", "jacobian",
    "FishParams", "SolowParams", "WagonParams", "maturation", "yield_",
]
