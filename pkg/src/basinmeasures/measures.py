"""Estimators computed from one set of classified perturbations.

All estimators are pure reductions over a list of
:class:`~basinmeasures.core.TrajectoryOutcome`. Undetermined outcomes are
treated like unsafe ones everywhere, but are counted separately.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .core import DistanceKind, DistanceSpec, SystemModel, TrajectoryOutcome, UsageError, Verdict, distances
from .models.equilibrium import jacobian
from .sample import RestrictedSet

REPORT_COLUMNS = (
    "p_hat", "p_std_err", "d_hat", "r_hat", "r_worst", "p_tau", "d_tau", "lambda_max",
    "n_safe", "n_unsafe", "n_undetermined", "n_tot", "seed",
)
# not part of the fixed column block; appended after it
EXTRA_COLUMNS = ("r_std_err", "p_tau_std_err", "tau", "t_eps", "d_norm", "status")


class ConditionWarning(RuntimeWarning):
    """The Jacobian is ill-conditioned or nearly defective; lambda_max may be inaccurate."""


def _require(outcomes: Sequence[TrajectoryOutcome]) -> None:
    if len(outcomes) == 0:
        raise UsageError("no outcomes to estimate from")


def _check_positive(name: str, value: float) -> None:
    if not value > 0:
        raise UsageError(f"{name} must be positive, got {value}")


def counts(outcomes: Sequence[TrajectoryOutcome]) -> tuple[int, int, int]:
    """(n_safe, n_unsafe, n_undetermined)."""
    n_safe = sum(1 for o in outcomes if o.verdict is Verdict.SAFE)
    n_unsafe = sum(1 for o in outcomes if o.verdict is Verdict.UNSAFE)
    return n_safe, n_unsafe, len(outcomes) - n_safe - n_unsafe


def estimate_P(outcomes: Sequence[TrajectoryOutcome]) -> tuple[float, float]:
    """Fraction of safe outcomes and its binomial standard error.

    Examples
    --------
    Three safe outcomes out of four give ``(0.75, 0.2165...)``.
    """
    _require(outcomes)
    n = len(outcomes)
    p = counts(outcomes)[0] / n
    return p, math.sqrt(p * (1.0 - p) / n)


def estimate_D_with_argmin(outcomes: Sequence[TrajectoryOutcome], dist: DistanceSpec):
    """Smallest distance to a non-safe initial condition, and that initial condition.

    Returns ``(None, None)`` when every outcome is safe.
    """
    bad = [o.initial_condition for o in outcomes if not o.safe]
    if not bad:
        return None, None
    d = distances(dist, np.asarray(bad, dtype=float))
    i = int(np.argmin(d))
    return float(d[i]), np.asarray(bad[i], dtype=float)


def estimate_D(outcomes: Sequence[TrajectoryOutcome], dist: DistanceSpec) -> Optional[float]:
    """Sample minimum of ``distance(dist, ic)`` over unsafe and undetermined outcomes."""
    return estimate_D_with_argmin(outcomes, dist)[0]


def _return_rates(outcomes: Sequence[TrajectoryOutcome], t_eps: float) -> list[float]:
    return [1.0 / (o.return_time + t_eps) if o.safe else 0.0 for o in outcomes]


def estimate_R(outcomes: Sequence[TrajectoryOutcome], t_eps: float = 1.0) -> float:
    """Mean return rate ``1/(T + t_eps)``; non-returning perturbations contribute 0."""
    _require(outcomes)
    _check_positive("t_eps", t_eps)
    return math.fsum(_return_rates(outcomes, t_eps)) / len(outcomes)


def estimate_R_std_err(outcomes: Sequence[TrajectoryOutcome], t_eps: float = 1.0) -> float:
    """Standard error of :func:`estimate_R` (sample standard deviation over sqrt(n))."""
    _require(outcomes)
    rates = _return_rates(outcomes, t_eps)
    n = len(rates)
    if n < 2:
        return 0.0
    mean = math.fsum(rates) / n
    var = math.fsum((r - mean) ** 2 for r in rates) / (n - 1)
    return math.sqrt(var / n)


def estimate_R_worst(outcomes: Sequence[TrajectoryOutcome], rset: RestrictedSet,
                     t_eps: float = 1.0) -> Optional[float]:
    """Slowest return rate over the restricted set; 0 if any member fails to return."""
    _check_positive("t_eps", t_eps)
    if not outcomes:
        return None
    inside = rset.contains(np.asarray([o.initial_condition for o in outcomes], dtype=float))
    members = [o for o, keep in zip(outcomes, inside) if keep]
    if not members:
        return None
    if any(not o.safe for o in members):
        return 0.0
    return min(1.0 / (o.return_time + t_eps) for o in members)


def tau_safe(outcome: TrajectoryOutcome, tau: float) -> bool:
    return outcome.safe and outcome.return_time <= tau


def estimate_basin_time_measures(outcomes: Sequence[TrajectoryOutcome], tau: float,
                                 dist: DistanceSpec) -> tuple[float, Optional[float]]:
    """``(p_tau, d_tau)``: P and D with "returns within tau" in place of "returns"."""
    _require(outcomes)
    _check_positive("tau", tau)
    ok = [tau_safe(o, tau) for o in outcomes]
    p_tau = sum(ok) / len(outcomes)
    bad = [o.initial_condition for o, good in zip(outcomes, ok) if not good]
    d_tau = float(np.min(distances(dist, np.asarray(bad, dtype=float)))) if bad else None
    return p_tau, d_tau


# -- local baseline ---------------------------------------------------------------

def _quadratic_roots(b: float, c: float) -> tuple[complex, complex]:
    """Roots of ``l^2 + b l + c``, computed without cancellation."""
    disc = b * b - 4.0 * c
    if disc >= 0:
        s = math.sqrt(disc)
        q = -0.5 * (b + math.copysign(s, b))
        if q == 0:
            return 0j, 0j
        return complex(q), complex(c / q)
    s = math.sqrt(-disc)
    return complex(-0.5 * b, 0.5 * s), complex(-0.5 * b, -0.5 * s)


def _cubic_roots(b: float, c: float, d: float) -> tuple[complex, complex, complex]:
    """Roots of ``l^3 + b l^2 + c l + d``: one real root in closed form, polished, then deflated."""
    p = c - b * b / 3.0
    q = 2.0 * b**3 / 27.0 - b * c / 3.0 + d
    disc = (q / 2.0) ** 2 + (p / 3.0) ** 3
    if disc > 0:
        s = math.sqrt(disc)
        t = math.copysign(abs(-q / 2.0 + s) ** (1 / 3), -q / 2.0 + s)
        u = math.copysign(abs(-q / 2.0 - s) ** (1 / 3), -q / 2.0 - s)
        r = t + u
    elif p == 0:
        r = 0.0
    else:
        m = 2.0 * math.sqrt(-p / 3.0)
        arg = max(-1.0, min(1.0, 3.0 * q / (p * m)))
        r = m * math.cos(math.acos(arg) / 3.0)
    r -= b / 3.0
    for _ in range(3):
        f = ((r + b) * r + c) * r + d
        fp = (3.0 * r + 2.0 * b) * r + c
        if fp == 0 or f == 0:
            break
        r -= f / fp
    # deflate: l^3 + b l^2 + c l + d = (l - r)(l^2 + (b + r) l + (c + r (b + r)))
    b2 = b + r
    c2 = c + r * b2
    z1, z2 = _quadratic_roots(b2, c2)
    return complex(r), z1, z2


def eigenvalues(J: np.ndarray) -> list[complex]:
    """Eigenvalues of a small dense matrix.

    Closed-form roots of the characteristic polynomial for ``n <= 3``;
    LAPACK for anything larger.
    """
    J = np.asarray(J, dtype=float)
    n = J.shape[0]
    if n == 1:
        return [complex(J[0, 0])]
    if n == 2:
        tr = J[0, 0] + J[1, 1]
        det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
        return list(_quadratic_roots(-tr, det))
    if n == 3:
        tr = float(np.trace(J))
        minors = (J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
                  + J[0, 0] * J[2, 2] - J[0, 2] * J[2, 0]
                  + J[1, 1] * J[2, 2] - J[1, 2] * J[2, 1])
        det = float(np.linalg.det(J))
        return list(_cubic_roots(-tr, float(minors), -det))
    return [complex(v) for v in np.linalg.eigvals(J)]


def lambda_max(model: SystemModel, equilibrium, t: float = 0.0, residual_tol: float = 1e-8) -> float:
    """Largest real part among the Jacobian eigenvalues at ``equilibrium``.

    The local resilience baseline is ``-lambda_max``.

    Raises
    ------
    UsageError
        If ``equilibrium`` is not a zero of the right-hand side.
    """
    x = np.asarray(equilibrium, dtype=float).reshape(model.dim)
    res = model.f(x, t)
    if not np.all(np.abs(res) < residual_tol):
        raise UsageError(f"not an equilibrium: residual {np.max(np.abs(res)):.3g} >= {residual_tol:g}")
    J = jacobian(lambda v: model.f(v, t), x)
    eig = eigenvalues(J)
    lam = max(z.real for z in eig)
    _warn_if_ill_conditioned(J, eig)
    return float(lam)


def _warn_if_ill_conditioned(J: np.ndarray, eig: list[complex]) -> None:
    scale = max(1.0, max(abs(z) for z in eig))
    gaps = [abs(a - b) for i, a in enumerate(eig) for b in eig[i + 1:]]
    if gaps and min(gaps) < 1e-6 * scale:
        warnings.warn("Jacobian has (nearly) repeated eigenvalues; it may be defective", ConditionWarning, stacklevel=3)
    elif np.linalg.cond(J) > 1e12:
        warnings.warn("Jacobian is ill-conditioned", ConditionWarning, stacklevel=3)


# -- reports ----------------------------------------------------------------------

@dataclass(frozen=True)
class MeasureReport:
    p_hat: float
    p_std_err: float
    d_hat: Optional[float]
    r_hat: float
    r_worst: Optional[float]
    p_tau: float
    d_tau: Optional[float]
    lambda_max: Optional[float]
    n_safe: int
    n_unsafe: int
    n_undetermined: int
    n_tot: int
    seed: Optional[int] = None
    r_std_err: float = 0.0
    p_tau_std_err: float = 0.0
    tau: float = 1.0
    t_eps: float = 1.0
    d_norm: str = DistanceKind.EUCLIDEAN.value
    status: str = "ok"
    params: Mapping[str, object] = field(default_factory=dict)
    d_argmin: Optional[tuple] = None

    def __post_init__(self):
        if self.n_safe + self.n_unsafe + self.n_undetermined != self.n_tot:
            raise ValueError("outcome counts do not add up to n_tot")
        if self.p_tau > self.p_hat:
            raise ValueError("p_tau cannot exceed p_hat")

    @property
    def d_norm_kind(self) -> DistanceKind:
        return DistanceKind(self.d_norm)

    def row(self) -> dict:
        """Flat mapping in output column order: parameters, fixed block, extras."""
        out = {k: v for k, v in self.params.items()}
        for name in REPORT_COLUMNS + EXTRA_COLUMNS:
            out[name] = getattr(self, name)
        return out

    def to_json(self) -> str:
        data = asdict(self)
        data["params"] = dict(self.params)
        if self.d_argmin is not None:
            data["d_argmin"] = list(self.d_argmin)
        return json.dumps(data, indent=2, sort_keys=False, allow_nan=False, default=_json_default)

    def to_csv(self, header: bool = True) -> str:
        return reports_to_csv([self], header=header)


def _json_default(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    raise TypeError(f"cannot serialise {type(v).__name__}")


def format_value(v) -> str:
    """Cell text: 17 significant digits for floats, empty for absent values."""
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def reports_to_csv(reports: Sequence[MeasureReport], header: bool = True) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if reports:
        cols = list(reports[0].row())
        if header:
            writer.writerow(cols)
        for rep in reports:
            row = rep.row()
            writer.writerow([format_value(row.get(c)) for c in cols])
    return buf.getvalue()


def summarize(outcomes: Sequence[TrajectoryOutcome], dist: DistanceSpec, *, tau: float, t_eps: float = 1.0,
              restricted: Optional[RestrictedSet] = None, lam: Optional[float] = None,
              seed: Optional[int] = None, params: Optional[Mapping] = None) -> MeasureReport:
    """Every estimator from the one outcome set."""
    _require(outcomes)
    n_safe, n_unsafe, n_und = counts(outcomes)
    p_hat, p_se = estimate_P(outcomes)
    d_hat, argmin = estimate_D_with_argmin(outcomes, dist)
    p_tau, d_tau = estimate_basin_time_measures(outcomes, tau, dist)
    n = len(outcomes)
    return MeasureReport(
        p_hat=p_hat,
        p_std_err=p_se,
        d_hat=d_hat,
        r_hat=estimate_R(outcomes, t_eps),
        r_worst=estimate_R_worst(outcomes, restricted, t_eps) if restricted is not None else None,
        p_tau=p_tau,
        d_tau=d_tau,
        lambda_max=lam,
        n_safe=n_safe,
        n_unsafe=n_unsafe,
        n_undetermined=n_und,
        n_tot=n,
        seed=seed,
        r_std_err=estimate_R_std_err(outcomes, t_eps),
        p_tau_std_err=math.sqrt(p_tau * (1.0 - p_tau) / n),
        tau=tau,
        t_eps=t_eps,
        d_norm=dist.kind.value,
        params=dict(params or {}),
        d_argmin=None if argmin is None else tuple(float(v) for v in argmin),
    )


def no_attractor_report(n_tot: int, *, tau: float, t_eps: float, dist_kind: str, seed=None,
                        params=None, status: str = "no attractor") -> MeasureReport:
    """Row for a parameter point with no stable equilibrium: every perturbation counts as lost."""
    return MeasureReport(
        p_hat=0.0, p_std_err=0.0, d_hat=None, r_hat=0.0, r_worst=None, p_tau=0.0, d_tau=None,
        lambda_max=None, n_safe=0, n_unsafe=n_tot, n_undetermined=0, n_tot=n_tot, seed=seed,
        tau=tau, t_eps=t_eps, d_norm=DistanceKind(dist_kind).value, status=status, params=dict(params or {}),
    )
