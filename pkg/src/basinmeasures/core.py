"""Shared domain types and the distance functions used by the D-family measures."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

import numpy as np


class ConfigurationError(ValueError):
    """Raised when a model, plan or distance is set up inconsistently."""


class UsageError(ValueError):
    """Raised when an operation is called outside its preconditions."""


RHS = Callable[[np.ndarray, np.ndarray], np.ndarray]
Predicate = Callable[[np.ndarray], np.ndarray]


def _always(x: np.ndarray) -> np.ndarray:
    return np.ones(np.shape(x)[:-1], dtype=bool)


@dataclass(frozen=True)
class Switch:
    """An irreversible change of the vector field.

    Once ``indicator(x) >= 0`` along a trajectory, the remainder of that
    trajectory is integrated with ``rhs``. When ``disables_capture`` is set the
    switched system is known to have no attractor at the original center, so
    capture is no longer checked. When ``unsafe_after`` is set the switched
    system is known to reach the unsafe set from every state, and the
    trajectory is classified as unsafe at the switching time.
    """

    indicator: Callable[[np.ndarray], np.ndarray]
    rhs: RHS
    disables_capture: bool = True
    unsafe_after: bool = False


@dataclass(frozen=True)
class SystemModel:
    """An autonomous or nonautonomous ODE ``dx/dt = rhs(x, t)``.

    ``rhs`` is vectorised: it maps states of shape ``(n, dim)`` and times of
    shape ``(n,)`` to derivatives of shape ``(n, dim)``. ``domain`` returns a
    boolean array of shape ``(n,)``.
    """

    name: str
    dim: int
    rhs: RHS
    domain: Predicate = _always
    params: Mapping[str, float] = field(default_factory=dict)
    switch: Optional[Switch] = None
    # optional hook: guess -> (approximate equilibrium, extinct flag)
    locate: Optional[Callable] = None
    # components that are invariant-nonnegative; the integrator keeps them >= 0
    nonnegative: tuple = ()

    def __post_init__(self):
        if self.dim < 1:
            raise ConfigurationError(f"dim must be >= 1, got {self.dim}")
        object.__setattr__(self, "nonnegative", tuple(int(i) for i in self.nonnegative))
        if any(not 0 <= i < self.dim for i in self.nonnegative):
            raise ConfigurationError("nonnegative component index out of range")

    def f(self, x, t=0.0) -> np.ndarray:
        """Evaluate the right-hand side at a single state."""
        x = np.asarray(x, dtype=float)
        out = self.rhs(x.reshape(1, self.dim), np.array([float(t)]))
        return out.reshape(self.dim)

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float).reshape(1, self.dim)
        return bool(self.domain(x)[0])


class CaptureNorm(str, enum.Enum):
    EUCLIDEAN = "euclidean"
    RELATIVE = "relative-ellipsoid"


@dataclass(frozen=True)
class AttractorSpec:
    """What it means for a trajectory to have returned.

    A trajectory is captured when it is within ``capture_radius`` of
    ``center`` (Euclidean, or relative to the center's components for the
    ellipsoid norm) and stays there for ``dwell_time``.
    """

    center: np.ndarray
    capture_radius: float
    capture_norm: CaptureNorm = CaptureNorm.EUCLIDEAN
    dwell_time: float = 0.0
    unsafe_predicate: Optional[Predicate] = None

    def __post_init__(self):
        center = np.asarray(self.center, dtype=float).copy()
        center.setflags(write=False)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "capture_norm", CaptureNorm(self.capture_norm))
        if not self.capture_radius > 0:
            raise ConfigurationError("capture_radius must be positive")
        if self.dwell_time < 0:
            raise ConfigurationError("dwell_time must be nonnegative")
        if self.capture_norm is CaptureNorm.RELATIVE and np.any(center == 0):
            raise ConfigurationError("relative capture norm needs a center with nonzero components")
        if self.unsafe_predicate is not None:
            if bool(self.unsafe_predicate(center.reshape(1, -1))[0]):
                raise ConfigurationError("the attractor center lies in the unsafe set")

    def capture_distance(self, x: np.ndarray) -> np.ndarray:
        """Distance to the center in the capture norm, for states of shape (n, dim)."""
        d = x - self.center
        if self.capture_norm is CaptureNorm.RELATIVE:
            d = d / self.center
        # fixed summation order keeps results independent of batch layout
        acc = d[..., 0] * d[..., 0]
        for i in range(1, d.shape[-1]):
            acc = acc + d[..., i] * d[..., i]
        return np.sqrt(acc)

    def is_unsafe(self, x: np.ndarray) -> np.ndarray:
        if self.unsafe_predicate is None:
            return np.zeros(x.shape[0], dtype=bool)
        return np.asarray(self.unsafe_predicate(x), dtype=bool)


class Verdict(str, enum.Enum):
    SAFE = "safe"
    UNSAFE = "unsafe"
    UNDETERMINED = "undetermined"


@dataclass(frozen=True)
class TrajectoryOutcome:
    initial_condition: np.ndarray
    verdict: Verdict
    return_time: Optional[float]
    terminal_state: np.ndarray
    steps_taken: int = 0

    def __post_init__(self):
        if (self.verdict is Verdict.SAFE) != (self.return_time is not None):
            raise ValueError("return_time must be present exactly for safe outcomes")
        if self.return_time is not None and self.return_time < 0:
            raise ValueError("return_time must be nonnegative")

    @property
    def safe(self) -> bool:
        return self.verdict is Verdict.SAFE


class DistanceKind(str, enum.Enum):
    EUCLIDEAN = "euclidean"
    ENERGY = "energy"
    RELATIVE = "relative"


@dataclass(frozen=True)
class EnergyParams:
    m: float
    k: float
    k_m: float
    a: float


@dataclass(frozen=True)
class DistanceSpec:
    kind: DistanceKind
    reference: np.ndarray
    energy_params: Optional[EnergyParams] = None
    relative_scale: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", DistanceKind(self.kind))
        object.__setattr__(self, "reference", np.asarray(self.reference, dtype=float))
        if self.kind is DistanceKind.ENERGY:
            if self.energy_params is None:
                raise ConfigurationError("energy distance needs energy_params")
            if self.reference.shape != (2,):
                raise ConfigurationError("energy distance is defined for 2D (position, velocity) states")
        if self.kind is DistanceKind.RELATIVE:
            if self.relative_scale is None:
                raise ConfigurationError("relative distance needs relative_scale")
            scale = np.asarray(self.relative_scale, dtype=float)
            if scale.shape != self.reference.shape or np.any(scale <= 0):
                raise ConfigurationError("relative_scale must be strictly positive and match the state")
            object.__setattr__(self, "relative_scale", scale)


def _wagon_force_balance(x, p: EnergyParams):
    # spring pull toward 0 minus magnetic pull toward a
    return p.k * x - p.k_m / (x - p.a) ** 2


def _force_roots(p: EnergyParams) -> list[float]:
    """Zeros of k x - k_m/(x-a)^2 left of the magnet (at most two)."""
    if p.k == 0:
        return []
    # k x (x-a)^2 - k_m is a cubic in x
    coeffs = [p.k, -2 * p.k * p.a, p.k * p.a**2, -p.k_m]
    roots = np.roots(coeffs)
    return sorted(float(r.real) for r in roots if abs(r.imag) < 1e-12 and r.real < p.a)


def _force_antiderivative(x, p: EnergyParams) -> float:
    return p.k * x * x / 2.0 + p.k_m / (x - p.a)


def potential_work(p: EnergyParams, x_eq: float, x0: float) -> float:
    """Work needed to move the wagon slowly from ``x_eq`` to ``x0``.

    Only stretches where the external push has to work against the net
    force are counted; where the field would carry the wagon along, nothing
    is given back. Between consecutive force roots the integrand keeps one
    sign, so each stretch is a difference of the closed-form antiderivative.
    """
    if x0 == x_eq:
        return 0.0
    if x0 >= p.a:
        return float("inf")
    sign = 1.0 if x0 > x_eq else -1.0
    lo, hi = min(x0, x_eq), max(x0, x_eq)
    cuts = [lo] + [r for r in _force_roots(p) if lo < r < hi] + [hi]
    total = 0.0
    for u, v in zip(cuts, cuts[1:]):
        if sign * _wagon_force_balance(0.5 * (u + v), p) > 0:
            total += sign * (_force_antiderivative(v, p) - _force_antiderivative(u, p))
    return float(total)


def distance(spec: DistanceSpec, x) -> float:
    """Distance from state ``x`` to the reference point under ``spec``."""
    x = np.asarray(x, dtype=float)
    if x.shape != spec.reference.shape:
        raise UsageError(f"state shape {x.shape} does not match reference {spec.reference.shape}")
    if spec.kind is DistanceKind.EUCLIDEAN:
        return float(np.sqrt(np.sum((x - spec.reference) ** 2)))
    if spec.kind is DistanceKind.RELATIVE:
        return float(np.sqrt(np.sum(((x - spec.reference) / spec.relative_scale) ** 2)))
    p = spec.energy_params
    x_eq = float(spec.reference[0])
    return potential_work(p, x_eq, float(x[0])) + 0.5 * p.m * float(x[1]) ** 2


def distances(spec: DistanceSpec, xs) -> np.ndarray:
    """Vectorised :func:`distance` over states of shape (n, dim)."""
    xs = np.asarray(xs, dtype=float).reshape(-1, spec.reference.shape[0])
    if spec.kind is DistanceKind.EUCLIDEAN:
        return np.sqrt(np.sum((xs - spec.reference) ** 2, axis=1))
    if spec.kind is DistanceKind.RELATIVE:
        return np.sqrt(np.sum(((xs - spec.reference) / spec.relative_scale) ** 2, axis=1))
    return np.array([distance(spec, x) for x in xs])
