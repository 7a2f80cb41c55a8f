"""Perturbation sets: truncated multivariate normals and restricted subsets.

Every sample index owns an independent Philox stream keyed by
``(seed, index)``, so sample ``k`` is the same no matter how many samples are
drawn, in which order, or by how many workers.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .core import ConfigurationError

RNG_NAME = "numpy.random.Philox(key=seed + (index << 64)) -> Generator.standard_normal"
MAX_ATTEMPTS = 1_000_000


def _accept_all(x):
    return np.ones(x.shape[0], dtype=bool)


class PositiveOrthant:
    """Accepts states whose components are all strictly positive."""

    def __call__(self, x):
        return np.all(x > 0, axis=1)


class BelowInDimension:
    """Accepts states with ``x[dim] < bound``."""

    def __init__(self, dim: int, bound: float):
        self.dim = dim
        self.bound = bound

    def __call__(self, x):
        return x[:, self.dim] < self.bound


@dataclass(frozen=True)
class PerturbationPlan:
    center: np.ndarray
    std: np.ndarray
    count: int
    seed: int
    domain_filter: Callable = _accept_all
    frozen_dims: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        center = np.asarray(self.center, dtype=float)
        std = np.broadcast_to(np.asarray(self.std, dtype=float), center.shape).copy()
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "std", std)
        object.__setattr__(self, "frozen_dims", frozenset(int(d) for d in self.frozen_dims))
        if np.any(std < 0) or not np.all(np.isfinite(std)):
            raise ConfigurationError("standard deviations must be finite and nonnegative")
        if self.count < 1:
            raise ConfigurationError("count must be at least 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigurationError("seed must be a 64-bit unsigned integer")
        if any(d < 0 or d >= center.size for d in self.frozen_dims):
            raise ConfigurationError("frozen dimension out of range")

    @property
    def dim(self) -> int:
        return self.center.size


def _substream(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed) + (int(index) << 64)))


def draw_one(plan: PerturbationPlan, index: int) -> np.ndarray:
    """The ``index``-th sample of ``plan``, redrawn until it passes the domain filter."""
    gen = _substream(plan.seed, index)
    frozen = sorted(plan.frozen_dims)
    attempts = 0
    batch = 1
    while attempts < MAX_ATTEMPTS:
        z = gen.standard_normal((batch, plan.dim))
        x = plan.center + plan.std * z
        if frozen:
            x[:, frozen] = plan.center[frozen]
        ok = np.flatnonzero(plan.domain_filter(x))
        if ok.size:
            return x[ok[0]]
        attempts += batch
        batch = min(batch * 4, 4096)
    raise ConfigurationError(
        f"sample {index}: no draw inside the domain after {MAX_ATTEMPTS} attempts; "
        "the distribution does not fit the domain"
    )


def draw(plan: PerturbationPlan, indices: Optional[Sequence[int]] = None) -> np.ndarray:
    """Draw the plan's samples (or only ``indices``) as an array of shape (count, dim)."""
    if indices is None:
        indices = range(plan.count)
    out = np.empty((len(indices), plan.dim))
    for row, i in enumerate(indices):
        out[row] = draw_one(plan, i)
    return out


@dataclass(frozen=True)
class RestrictedSet:
    """Closed ellipsoid ``sum(((x - center) / scale)^2) <= radius_sq``."""

    center: np.ndarray
    scale: np.ndarray
    radius_sq: float = 0.25
    kind: str = "relative-ellipsoid"
    dims: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        object.__setattr__(self, "scale", np.asarray(self.scale, dtype=float))
        if np.any(self.scale <= 0):
            raise ConfigurationError("ellipsoid scale must be strictly positive")
        if not self.radius_sq > 0:
            raise ConfigurationError("radius_sq must be positive")

    def contains(self, xs) -> np.ndarray:
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        d = (xs - self.center) / self.scale
        if self.dims is not None:
            d = d[:, list(self.dims)]
        return np.sum(d * d, axis=1) <= self.radius_sq


def restrict(samples, rset: RestrictedSet) -> list:
    """Samples inside the restricted set, in their original order."""
    samples = list(samples)
    if not samples:
        return []
    mask = rset.contains(np.asarray(samples, dtype=float))
    return [s for s, keep in zip(samples, mask) if keep]


def save_samples(path, samples) -> None:
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"x{i + 1}" for i in range(samples.shape[1])])
        for row in samples:
            writer.writerow([format(v, ".17g") for v in row])


def load_samples(path) -> np.ndarray:
    with open(Path(path), newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        for i, name in enumerate(header):
            if name != f"x{i + 1}":
                raise ConfigurationError(f"unexpected column {name!r} in sample file, expected x{i + 1}")
        rows = [[float(v) for v in row] for row in reader if row]
    return np.array(rows, dtype=float).reshape(-1, len(header))
