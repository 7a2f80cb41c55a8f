"""Turn a run configuration into concrete objects for one parameter point, and evaluate it."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import integrate
from .config import RunConfig
from .core import (AttractorSpec, ConfigurationError, DistanceKind, DistanceSpec, SystemModel,
                   TrajectoryOutcome)
from .measures import MeasureReport, lambda_max, no_attractor_report, summarize
from .models import FAMILIES, Equilibrium, EquilibriumError, find_equilibrium
from .models import solow as solow_mod
from .models import wagon as wagon_mod
from .sample import BelowInDimension, PerturbationPlan, PositiveOrthant, RestrictedSet, draw


@dataclass(frozen=True)
class Point:
    """Everything needed to evaluate the measures at one parameter point."""

    model: SystemModel
    params: object
    equilibrium: Equilibrium
    attractor: AttractorSpec
    plan: PerturbationPlan
    dist: DistanceSpec
    restricted: Optional[RestrictedSet]
    tau: float
    t_eps: float


class NoAttractor(Exception):
    """The parameter point has no stable equilibrium to test."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


def _unsafe_predicate(name, params):
    if name == "wagon":
        return wagon_mod.CrashPredicate(params)
    if name == "solow":
        return solow_mod.SolowUnsafe(params)
    return None


def _domain_filter(name, params):
    if name == "wagon":
        return BelowInDimension(0, params.a)
    if name == "fish":
        return PositiveOrthant()
    # capital must stay nonnegative
    return _Nonnegative()


class _Nonnegative:
    def __call__(self, x):
        return np.all(x >= 0, axis=1)


def _vector(spec, eq_state, what):
    if isinstance(spec, str):
        if spec == "equilibrium":
            return np.asarray(eq_state, dtype=float)
        raise ConfigurationError(f"{what}: unknown keyword {spec!r}")
    v = np.asarray(spec, dtype=float)
    if v.shape != eq_state.shape:
        raise ConfigurationError(f"{what}: expected {eq_state.size} components, got {v.size}")
    return v


def build_point(cfg: RunConfig, param_overrides: Optional[dict] = None, guess=None,
                count: Optional[int] = None) -> Point:
    """Resolve the configuration at one parameter point.

    Raises
    ------
    NoAttractor
        When the model has no stable equilibrium here (fold passed, extinction).
    """
    name = cfg.model_name
    module, params_cls = FAMILIES[name]
    try:
        params = params_cls(**{**cfg.model_params, **(param_overrides or {})})
        model = module.build(params)
    except ConfigurationError as exc:
        raise NoAttractor(f"invalid structure: {exc}") from exc
    doc = cfg.doc

    att_cfg = doc["attractor"]
    if att_cfg == "auto" or (isinstance(att_cfg, dict) and "center" not in att_cfg):
        try:
            eq = find_equilibrium(model, guess)
        except EquilibriumError as exc:
            raise NoAttractor(f"no equilibrium: {exc}") from exc
        if eq.extinct:
            raise NoAttractor("extinct")
        center = eq.state
    else:
        center = np.asarray(att_cfg["center"], dtype=float)
        eq = Equilibrium(state=center, residual=float(np.max(np.abs(model.f(center)))))
    att_opts = att_cfg if isinstance(att_cfg, dict) else {}
    attractor = AttractorSpec(
        center=center,
        capture_radius=float(att_opts.get("capture_radius", 0.01)),
        capture_norm=att_opts.get("capture_norm", "euclidean"),
        dwell_time=float(att_opts.get("dwell_time", 0.0)),
        unsafe_predicate=_unsafe_predicate(name, params),
    )

    pert = doc["perturbation"]
    if "std" in pert:
        std = _vector(pert["std"], center, "perturbation.std")
    else:
        std = np.abs(center) * np.asarray(pert["std_rel"], dtype=float)
    plan = PerturbationPlan(
        center=center,
        std=std,
        count=int(count if count is not None else pert["count"]),
        seed=int(pert["seed"]),
        domain_filter=_domain_filter(name, params),
        frozen_dims=frozenset(pert.get("frozen_dims", [])),
    )

    kind = DistanceKind(doc["distance"]["kind"])
    dist_kwargs = {}
    if kind is DistanceKind.ENERGY:
        if name != "wagon":
            raise ConfigurationError("the energy distance is defined for the wagon model")
        dist_kwargs["energy_params"] = params.energy
    elif kind is DistanceKind.RELATIVE:
        dist_kwargs["relative_scale"] = _vector(doc["distance"].get("scale", "equilibrium"), center, "distance.scale")
    dist = DistanceSpec(kind=kind, reference=center, **dist_kwargs)

    meas = doc["measures"]
    rcfg = meas.get("restricted")
    restricted = None
    if rcfg:
        restricted = RestrictedSet(center=center, scale=_vector(rcfg.get("scale", "equilibrium"), center, "restricted.scale"),
                                   radius_sq=float(rcfg.get("radius_sq", 0.25)))
    return Point(model=model, params=params, equilibrium=eq, attractor=attractor, plan=plan, dist=dist,
                 restricted=restricted, tau=float(meas["tau"]), t_eps=float(meas["t_eps"]))



def classify_point(point: Point, cfg: RunConfig) -> list[TrajectoryOutcome]:
    """Draw the perturbation set and classify it: the one integration pass for this point."""
    ics = draw(point.plan)
    return integrate.classify_many(point.model, point.attractor, ics, cfg.integrator, workers=cfg.workers)


def report_point(point: Point, outcomes, *, seed: int, params: Optional[dict] = None) -> MeasureReport:
    lam = lambda_max(point.model, point.equilibrium.state)
    return summarize(outcomes, point.dist, tau=point.tau, t_eps=point.t_eps, restricted=point.restricted,
                     lam=lam, seed=seed, params=params)


def evaluate(cfg: RunConfig, param_overrides: Optional[dict] = None, guess=None,
             count: Optional[int] = None, row_params: Optional[dict] = None):
    """Measures at one point: ``(report, point or None, outcomes)``.

    Points without an attractor produce a flagged report in which every
    perturbation counts as lost.
    """
    n = int(count if count is not None else cfg.count)
    try:
        point = build_point(cfg, param_overrides, guess=guess, count=n)
    except NoAttractor as exc:
        rep = no_attractor_report(n, tau=float(cfg.doc["measures"]["tau"]), t_eps=float(cfg.doc["measures"]["t_eps"]),
                                  dist_kind=cfg.doc["distance"]["kind"], seed=cfg.seed, params=row_params,
                                  status="no attractor" if "invalid" not in exc.reason else "flagged: " + exc.reason)
        return rep, None, []
    outcomes = classify_point(point, cfg)
    rep = report_point(point, outcomes, seed=cfg.seed, params=row_params)
    return rep, point, outcomes


def with_equilibrium_columns(rep: MeasureReport, point: Optional[Point], dim: int) -> MeasureReport:
    """Copy of ``rep`` whose parameter block also carries the equilibrium components."""
    extra = {f"eq_x{i + 1}": (None if point is None else float(point.equilibrium.state[i])) for i in range(dim)}
    return replace(rep, params={**rep.params, **extra})


def model_dim(name: str) -> int:
    return {"solow": 1, "wagon": 2, "fish": 3}[name]

