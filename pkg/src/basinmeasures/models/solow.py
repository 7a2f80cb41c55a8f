"""One-dimensional capital accumulation ``dx/dt = F(x) - C x`` and its stressed variants.

The base production is the saturating Hill curve ``F(x) = s x^p / (h^p + x^p)``.
The variants are all written as modifications of the net growth
``g(x) = F(x) - C x`` that are exactly inactive on a neighbourhood of the
interior equilibrium ``E``:

* ``fa``: ``g`` scaled by a constant, so the slope at ``E`` changes.
* ``fb``: ``g`` damped by a smooth dip supported left of ``E``; same equilibria.
* ``fc``/``fd``: left of a transition band, ``F`` is replaced by an S-shaped
  Hill curve (exponent 2) that falls below ``C x`` near the origin. This
  creates a stable ``E0 = 0`` and an unstable ``E1``, far from ``E`` for
  ``fc`` and close to it for ``fd``.

Because the modifications multiply or add exact zeros near ``E``, the right
hand sides of base, ``fb``, ``fc`` and ``fd`` are bitwise identical there.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy import optimize

from ..core import ConfigurationError, SystemModel

VARIANTS = ("base", "fa", "fb", "fc", "fd")


def smooth_step(u):
    """C-infinity step: 0 for u <= 0, 1 for u >= 1."""
    u = np.asarray(u, dtype=float)
    out = np.where(u >= 1.0, 1.0, 0.0)
    mid = (u > 0) & (u < 1)
    if np.any(mid):
        um = u[mid]
        a = np.exp(-1.0 / um)
        b = np.exp(-1.0 / (1.0 - um))
        out = out.copy()
        out[mid] = a / (a + b)
    return out


def smooth_bump(x, lo, hi):
    """C-infinity bump with support (lo, hi) and peak value 1 at the midpoint."""
    x = np.asarray(x, dtype=float)
    u = (2.0 * x - (lo + hi)) / (hi - lo)
    out = np.zeros_like(x)
    mid = np.abs(u) < 1
    out[mid] = np.exp(1.0 - 1.0 / (1.0 - u[mid] ** 2))
    return out


@dataclass(frozen=True)
class SolowParams:
    C: float = 0.25
    variant: str = "base"
    s: float = 1.0
    p: float = 1.0
    h: float = 1.0
    # fa: net growth scaled by this factor
    fa_scale: float = 0.5
    # fb: dip of relative depth fb_depth on (fb_lo, fb_hi)
    fb_depth: float = 0.95
    fb_lo: float = 0.2
    fb_hi: float = 2.8
    # fc/fd: S-shaped Hill curve (exponent 2) with half-saturation *_h,
    # blended into F across (*_lo, *_hi)
    fc_h: float = 1.6
    fc_lo: float = 1.0
    fc_hi: float = 2.8
    fd_h: float = 1.99
    fd_lo: float = 1.85
    fd_hi: float = 2.8
    # E0 counts as reached below this capital level
    unsafe_level: float = 0.01

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"unknown Solow variant {self.variant!r}")
        if not self.C > 0:
            raise ConfigurationError("C must be positive")


def _hill(x, s, h, p):
    xp = np.power(np.maximum(x, 0.0), p)
    return s * xp / (h**p + xp)


class SolowRHS:
    def __init__(self, params: SolowParams):
        self.params = params

    def net(self, x):
        """Net growth F_variant(x) - C x for an array of capital values."""
        p = self.params
        with np.errstate(all="ignore"):
            F = _hill(x, p.s, p.h, p.p)
            g = F - p.C * x
            if p.variant == "fa":
                return g * p.fa_scale
            if p.variant == "fb":
                return g * (1.0 - p.fb_depth * smooth_bump(x, p.fb_lo, p.fb_hi))
            if p.variant in ("fc", "fd"):
                hh, lo, hi = (p.fc_h, p.fc_lo, p.fc_hi) if p.variant == "fc" else (p.fd_h, p.fd_lo, p.fd_hi)
                weight = 1.0 - smooth_step((x - lo) / (hi - lo))
                return g + weight * (_hill(x, p.s, hh, 2.0) - F)
            return g

    def __call__(self, x, t):
        return self.net(x[:, 0])[:, None]


def production(params: SolowParams, x):
    """Saved output per worker ``F_variant(x)``."""
    x = np.asarray(x, dtype=float)
    return SolowRHS(params).net(x) + params.C * x


class SolowDomain:
    def __call__(self, x):
        return x[:, 0] >= 0


class SolowUnsafe:
    """Capital has collapsed toward the origin and is still falling."""

    def __init__(self, params: SolowParams):
        self.rhs = SolowRHS(params)
        self.level = params.unsafe_level

    def __call__(self, x):
        return (x[:, 0] < self.level) & (self.rhs.net(x[:, 0]) < 0)


def equilibria(params: SolowParams, x_max: float | None = None, grid: int = 20001) -> dict:
    """Interior equilibria from a sign scan of the net growth plus Brent refinement.

    Returns a dict with ``E`` (the largest stable root) and, for bistable
    variants, ``E1`` (the unstable root below it).
    """
    rhs = SolowRHS(params)
    x_max = x_max or 4.0 * params.s / params.C
    xs = np.linspace(0.0, x_max, grid)[1:]
    g = rhs.net(xs)
    roots = []
    roots.extend(float(v) for v in xs[g == 0])
    for i in np.flatnonzero(g[:-1] * g[1:] < 0):
        roots.append(float(optimize.brentq(lambda v: float(rhs.net(np.array([v]))[0]), xs[i], xs[i + 1], xtol=1e-14)))
    stable = [r for r in roots if rhs.net(np.array([r * (1 + 1e-6)]))[0] < 0]
    unstable = [r for r in roots if r not in stable]
    out = {"roots": roots, "E0_stable": bool(g[0] < 0)}
    if stable:
        out["E"] = max(stable)
    if unstable:
        out["E1"] = max(u for u in unstable if "E" not in out or u < out["E"])
    return out


def check_structure(params: SolowParams) -> dict:
    """Verify the sign structure of ``F - C x`` expected for the variant."""
    eq = equilibria(params)
    if params.variant in ("fc", "fd"):
        if len(eq["roots"]) != 2 or not eq["E0_stable"]:
            raise ConfigurationError(f"variant {params.variant} needs E0 stable, E1 unstable, E stable; roots {eq['roots']}")
        if not 0 < eq["E1"] < eq["E"]:
            raise ConfigurationError("expected 0 < E1 < E")
    else:
        if len(eq["roots"]) != 1 or eq["E0_stable"] or "E" not in eq:
            raise ConfigurationError(f"variant {params.variant} needs a unique positive stable equilibrium; roots {eq['roots']}")
    return eq


class _SolowLocate:
    def __init__(self, params: SolowParams):
        self.params = params

    def __call__(self, guess):
        return np.array([equilibria(self.params)["E"]]), False


def build(params: SolowParams | None = None, **overrides) -> SystemModel:
    params = params or SolowParams(**overrides)
    check_structure(params)
    return SystemModel(
        name="solow",
        dim=1,
        rhs=SolowRHS(params),
        domain=SolowDomain(),
        params=asdict(params),
        locate=_SolowLocate(params),
    )


def identical_neighbourhood(params: SolowParams) -> tuple[float, float]:
    """An interval around E on which base, fb, fc and fd coincide exactly."""
    lo = max(params.fb_hi, params.fc_hi, params.fd_hi)
    E = equilibria(SolowParams(**{**asdict(params), "variant": "base"}))["E"]
    return lo, E + (E - lo)
