import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from basinmeasures.core import DistanceKind, DistanceSpec, SystemModel, UsageError
from basinmeasures.measures import (EXTRA_COLUMNS, REPORT_COLUMNS, ConditionWarning, MeasureReport, eigenvalues,
                                    estimate_basin_time_measures, estimate_D, estimate_D_with_argmin, estimate_P,
                                    estimate_R, estimate_R_worst, lambda_max, reports_to_csv, summarize)
from basinmeasures.models import FishParams, WagonParams, fish, wagon
from basinmeasures.models.equilibrium import jacobian
from basinmeasures.sample import RestrictedSet

from conftest import make_outcome

EUCLID_1D = DistanceSpec(DistanceKind.EUCLIDEAN, [0.0])


def test_p_examples():
    assert estimate_P([make_outcome("safe", 0.0)] * 3) == (1.0, 0.0)
    assert estimate_P([make_outcome("unsafe")] * 3) == (0.0, 0.0)
    p, se = estimate_P([make_outcome("safe", 0.0)] * 3 + [make_outcome("unsafe")])
    assert p == 0.75
    assert se == pytest.approx(0.2165, abs=1e-4)
    with pytest.raises(UsageError):
        estimate_P([])


def test_undetermined_counts_as_unsafe():
    outs = [make_outcome("safe", 0.0), make_outcome("undetermined", ic=[2.0])]
    assert estimate_P(outs)[0] == 0.5
    assert estimate_D(outs, EUCLID_1D) == 2.0


def test_d_examples():
    assert estimate_D([make_outcome("safe", 1.0)], EUCLID_1D) is None
    outs = [make_outcome("unsafe", ic=[v]) for v in (3.0, -1.5, 7.0)] + [make_outcome("safe", 1.0, ic=[0.1])]
    d, arg = estimate_D_with_argmin(outs, EUCLID_1D)
    assert d == 1.5
    assert arg.tolist() == [-1.5]


def test_r_examples():
    assert estimate_R([make_outcome("safe", 0.0)] * 2, 1.0) == 1.0
    assert estimate_R([make_outcome("safe", 0.0), make_outcome("safe", 1.0)], 1.0) == 0.75
    assert estimate_R([make_outcome("safe", 0.0), make_outcome("unsafe")], 1.0) == 0.5


def test_r_worst_examples():
    rset = RestrictedSet(center=[0.0], scale=[1.0], radius_sq=1.0)
    inside = [make_outcome("safe", 1.0, ic=[0.5]), make_outcome("safe", 4.0, ic=[-0.5])]
    outside = [make_outcome("safe", 100.0, ic=[5.0])]
    assert estimate_R_worst(inside + outside, rset, 1.0) == pytest.approx(0.2)
    assert estimate_R_worst(inside + [make_outcome("unsafe", ic=[0.9])], rset, 1.0) == 0.0
    assert estimate_R_worst(outside, rset, 1.0) is None


def test_basin_time_examples():
    outs = [make_outcome("safe", t) for t in (1.0, 3.0, 9.0)]
    p_tau, _ = estimate_basin_time_measures(outs, 5.0, EUCLID_1D)
    assert p_tau == pytest.approx(2 / 3)
    p_tau, d_tau = estimate_basin_time_measures([make_outcome("safe", 1.0)] * 2, 5.0, EUCLID_1D)
    assert p_tau == 1.0 and d_tau is None
    rel = DistanceSpec(DistanceKind.RELATIVE, [1.0, 1.0, 1.0], relative_scale=[1.0, 1.0, 1.0])
    outs = [make_outcome("safe", 10.0, ic=[1.5, 1.0, 1.0]), make_outcome("unsafe", ic=[1.0, 1.8, 1.0]),
            make_outcome("safe", 1.0, ic=[1.0, 1.0, 3.0])]
    assert estimate_basin_time_measures(outs, 5.0, rel)[1] == pytest.approx(0.5)


@st.composite
def outcome_sets(draw):
    n = draw(st.integers(1, 30))
    out = []
    for i in range(n):
        kind = draw(st.sampled_from(["safe", "safe", "unsafe", "undetermined"]))
        x = draw(st.floats(-10, 10))
        if kind == "safe":
            out.append(make_outcome("safe", draw(st.floats(0.0, 50.0)), ic=[x]))
        else:
            out.append(make_outcome(kind, ic=[x]))
    return out


@settings(max_examples=60, deadline=None)
@given(outcome_sets(), st.floats(0.01, 40.0), st.floats(0.0, 40.0), st.floats(0.1, 5.0))
def test_estimator_properties(outs, tau, dtau, t_eps):
    p_hat, _ = estimate_P(outs)
    p1, d1 = estimate_basin_time_measures(outs, tau, EUCLID_1D)
    p2, d2 = estimate_basin_time_measures(outs, tau + dtau, EUCLID_1D)
    assert p1 <= p2 <= p_hat
    if d1 is not None and d2 is not None:
        assert d1 <= d2
    p_inf, _ = estimate_basin_time_measures(outs, 1e9, EUCLID_1D)
    assert p_inf == p_hat
    assert estimate_R(outs, t_eps) <= p_hat / t_eps + 1e-15
    d_hat = estimate_D(outs, EUCLID_1D)
    if d_hat is not None and d1 is not None:
        assert d1 <= d_hat
    rep = summarize(outs, EUCLID_1D, tau=tau, t_eps=t_eps)
    assert rep == summarize(outs, EUCLID_1D, tau=tau, t_eps=t_eps)
    assert rep.n_safe + rep.n_unsafe + rep.n_undetermined == rep.n_tot


def test_all_safe_limits():
    outs = [make_outcome("safe", 2.0, ic=[v]) for v in range(5)]
    assert estimate_P(outs)[0] == 1.0
    assert estimate_D(outs, EUCLID_1D) is None


class Decay:
    def __call__(self, x, t):
        return -x


class Shifted:
    def __call__(self, x, t):
        return 1.0 - x


def test_lambda_scalar():
    assert lambda_max(SystemModel(name="d", dim=1, rhs=Decay()), [0.0]) == pytest.approx(-1.0, abs=1e-9)


def test_lambda_requires_equilibrium():
    with pytest.raises(UsageError):
        lambda_max(SystemModel(name="s", dim=1, rhs=Shifted()), [0.0])


def test_lambda_linear_wagon_repeated_root():
    p = WagonParams(k_m=0.0, k=0.25)
    m = wagon.build(p)
    with pytest.warns(ConditionWarning):
        lam = lambda_max(m, [0.0, 0.0])
    # lambda^2 + lambda + 0.25 = (lambda + 0.5)^2
    assert lam == pytest.approx(-0.5, abs=1e-5)


def test_lambda_fish_half_step_consistency():
    p = FishParams(h_J=0.5, h_A=0.5)
    m = fish.build(p)
    eq = fish.positive_equilibrium(p)
    f = lambda v: m.f(v)  # noqa: E731
    full = sorted(eigenvalues(jacobian(f, eq, 1e-6)), key=lambda z: (z.real, z.imag))
    half = sorted(eigenvalues(jacobian(f, eq, 5e-7)), key=lambda z: (z.real, z.imag))
    for a, b in zip(full, half):
        assert abs(a - b) <= 1e-5 * abs(b)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert lambda_max(m, eq) == pytest.approx(max(z.real for z in full), abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_closed_form_eigenvalues_match_lapack(n, seed):
    J = np.random.default_rng(seed).normal(size=(n, n))
    ours = sorted(eigenvalues(J), key=lambda z: (round(z.real, 8), z.imag))
    ref = sorted(np.linalg.eigvals(J), key=lambda z: (round(z.real, 8), z.imag))
    scale = max(1.0, np.abs(ref).max())
    for a, b in zip(ours, ref):
        assert abs(a - b) < 1e-8 * scale


def test_large_matrix_uses_dense_solver():
    J = np.diag([-1.0, -2.0, -3.0, -4.0, -0.5])
    assert max(z.real for z in eigenvalues(J)) == pytest.approx(-0.5)


def _report(**kw):
    base = dict(p_hat=0.75, p_std_err=0.1, d_hat=0.5, r_hat=0.4, r_worst=None, p_tau=0.5, d_tau=0.25,
                lambda_max=-1.0, n_safe=3, n_unsafe=1, n_undetermined=0, n_tot=4, seed=1)
    base.update(kw)
    return MeasureReport(**base)


def test_report_invariants():
    with pytest.raises(ValueError):
        _report(n_tot=5)
    with pytest.raises(ValueError):
        _report(p_tau=0.9)


def test_report_serialisation():
    rep = _report(params={"k": 0.3})
    data = json.loads(rep.to_json())
    assert data["p_hat"] == 0.75 and data["r_worst"] is None and data["params"] == {"k": 0.3}
    lines = rep.to_csv().splitlines()
    header = lines[0].split(",")
    assert header == ["k", *REPORT_COLUMNS, *EXTRA_COLUMNS]
    cells = dict(zip(header, lines[1].split(",")))
    assert cells["r_worst"] == "" and cells["p_hat"] == "0.75" and cells["k"] == "0.29999999999999999"
    assert float(cells["k"]) == 0.3
    assert reports_to_csv([rep, rep]).count("\n") == 3


def test_summarize_synthetic():
    rel = DistanceSpec(DistanceKind.RELATIVE, [1.0, 1.0, 1.0], relative_scale=[1.0, 1.0, 1.0])
    outs = [make_outcome("safe", t, ic=[1.0, 1.0, 1.0]) for t in (0.0, 1.0, 4.0)]
    outs.append(make_outcome("unsafe", ic=[1.5, 1.0, 1.0]))
    rep = summarize(outs, rel, tau=5.0, t_eps=1.0)
    assert (rep.p_hat, rep.p_tau) == (0.75, 0.75)
    assert rep.r_hat == pytest.approx(0.425, abs=1e-15)
    assert rep.d_hat == rep.d_tau == pytest.approx(0.5)
    assert rep.d_argmin == (1.5, 1.0, 1.0)
    assert math.isclose(rep.p_std_err, math.sqrt(0.75 * 0.25 / 4))


def test_wagon_energy_d_hat_against_quadrature():
    from scipy import integrate as quad_integrate

    from basinmeasures.config import RunConfig
    from basinmeasures.scenario import evaluate

    cfg = RunConfig.from_dict({"model": {"name": "wagon", "params": {"k": 0.3, "y_limit": 2.0}}},
                              {"perturbation.count": 10_000})
    rep, point, outs = evaluate(cfg)
    p = point.params
    x_eq = float(point.equilibrium.state[0])
    roots = sorted(r.real for r in np.roots([p.k, -2 * p.k * p.a, p.k * p.a**2, -p.k_m])
                   if abs(r.imag) < 1e-12 and r.real < p.a)

    def w(x0, y0):
        sign = 1.0 if x0 > x_eq else -1.0
        lo, hi = sorted((x_eq, x0))
        push = lambda x: max(0.0, sign * (p.k * x - p.k_m / (x - p.a) ** 2))  # noqa: E731
        inner = [r for r in roots if lo < r < hi] or None
        return quad_integrate.quad(push, lo, hi, points=inner, limit=200, epsabs=1e-12)[0] + 0.5 * p.m * y0**2

    unsafe = [o.initial_condition for o in outs if not o.safe]
    assert len(unsafe) > 100
    oracle = min(w(*ic) for ic in unsafe)
    assert rep.d_hat == pytest.approx(oracle, rel=1e-8)
