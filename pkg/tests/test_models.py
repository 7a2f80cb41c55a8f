import math

import numpy as np
import pytest

from basinmeasures.core import ConfigurationError
from basinmeasures.integrate import IntegratorConfig, integrate_to
from basinmeasures.models import (FishParams, SolowParams, WagonParams, build_model, find_equilibrium, fish,
                                  maturation, solow, wagon, yield_)
from basinmeasures.models.equilibrium import EquilibriumError
from basinmeasures.models.solow import VARIANTS, identical_neighbourhood, production

TIGHT = IntegratorConfig(rel_tol=1e-10, abs_tol=1e-12)


def _bisect(f, lo, hi, n=200):
    flo = f(lo)
    for _ in range(n):
        mid = 0.5 * (lo + hi)
        if (f(mid) > 0) == (flo > 0):
            lo, flo = mid, f(mid)
        else:
            hi = mid
    return 0.5 * (lo + hi)


# -- Solow --------------------------------------------------------------------------

@pytest.mark.parametrize("variant", VARIANTS)
def test_solow_zero_capital(variant):
    assert production(SolowParams(variant=variant), [0.0])[0] == 0.0


def test_solow_base_equilibrium():
    assert solow.equilibria(SolowParams())["E"] == pytest.approx(3.0, abs=1e-10)
    assert find_equilibrium(solow.build(SolowParams())).state[0] == pytest.approx(3.0, abs=1e-10)


@pytest.mark.parametrize("variant", VARIANTS)
def test_solow_structure(variant):
    eq = solow.check_structure(SolowParams(variant=variant))
    assert eq["E"] == pytest.approx(3.0, abs=1e-9)
    if variant in ("fc", "fd"):
        assert eq["E0_stable"] and 0 < eq["E1"] < eq["E"]


def test_solow_fd_threshold_closer_than_fc():
    def root(variant):
        rhs = solow.SolowRHS(SolowParams(variant=variant))
        return _bisect(lambda v: float(rhs.net(np.array([v]))[0]), 0.05, 2.5)

    e1_c, e1_d = root("fc"), root("fd")
    assert e1_c == pytest.approx(solow.equilibria(SolowParams(variant="fc"))["E1"], abs=1e-9)
    assert e1_d == pytest.approx(solow.equilibria(SolowParams(variant="fd"))["E1"], abs=1e-9)
    assert abs(3.0 - e1_d) < abs(3.0 - e1_c)


def test_solow_variants_coincide_near_equilibrium():
    lo, hi = identical_neighbourhood(SolowParams())
    assert lo < 3.0 < hi
    xs = np.linspace(lo + 1e-9, hi - 1e-9, 2001)
    base = production(SolowParams(), xs)
    for variant in ("fb", "fc", "fd"):
        assert np.max(np.abs(production(SolowParams(variant=variant), xs) - base)) <= 1e-9
    # fa changes the slope of the net growth at E
    h = 1e-5
    slope = lambda v: (solow.SolowRHS(SolowParams(variant=v)).net(np.array([3 + h, 3 - h])) @ [1, -1]) / (2 * h)  # noqa: E731
    assert slope("fa") == pytest.approx(0.5 * slope("base"), rel=1e-6)
    assert slope("base") == pytest.approx(1 / 16 - 0.25, abs=1e-8)


def test_solow_structure_violation():
    with pytest.raises(ConfigurationError):
        solow.build(SolowParams(C=2.0))
    with pytest.raises(ConfigurationError):
        SolowParams(variant="fe")


# -- wagon --------------------------------------------------------------------------

def test_wagon_rhs_at_origin():
    m = wagon.build(WagonParams())
    np.testing.assert_allclose(m.f([0.0, 0.0]), [0.0, 0.04], rtol=0, atol=1e-15)


def test_wagon_equilibrium_matches_bisection():
    oracle = _bisect(lambda x: 0.7 * x * (x - 5.0) ** 2 - 1.0, -1.0, 5.0 / 3.0)
    eq = find_equilibrium(wagon.build(WagonParams()))
    assert eq.state[0] == pytest.approx(oracle, abs=1e-12)
    assert eq.state[1] == 0.0
    # the commonly quoted 0.0593 is a rounding of this root
    assert abs(eq.state[0] - 0.0593) < 1e-3


def test_wagon_fold():
    p = WagonParams()
    assert wagon.fold_stiffness(p) == pytest.approx(0.054)

    def fails(k):
        try:
            find_equilibrium(wagon.build(WagonParams(k=k)))
            return False
        except EquilibriumError:
            return True

    lo, hi = 0.01, 0.2
    assert fails(lo) and not fails(hi)
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if fails(mid) else (lo, mid)
    assert lo == pytest.approx(0.054, abs=1e-6)


@pytest.mark.parametrize("k", [0.06, 0.3, 0.7, 2.0])
def test_wagon_two_equilibria_above_fold(k):
    roots = np.roots([k, -10 * k, 25 * k, -1.0])
    real = [r.real for r in roots if abs(r.imag) < 1e-9 and r.real < 5.0]
    assert len(real) == 2


def test_wagon_switch_configuration():
    assert wagon.build(WagonParams()).switch is None
    m = wagon.build(WagonParams(y_limit=2.0))
    assert m.switch.unsafe_after and m.switch.disables_capture
    with pytest.raises(ConfigurationError):
        WagonParams(y_limit=0.0)


def test_wagon_undamped_energy_conservation_scales_with_tolerance():
    p = WagonParams(c=0.0, k_m=0.0, k=0.7)
    m = wagon.build(p)
    energy = lambda s: 0.5 * p.k * s[0] ** 2 + 0.5 * p.m * s[1] ** 2  # noqa: E731
    e0 = energy([1.0, 0.0])
    drifts = []
    for rtol in (1e-3, 1e-5, 1e-7):
        s = integrate_to(m, [1.0, 0.0], 100.0, IntegratorConfig(rel_tol=rtol, abs_tol=rtol * 1e-3))
        drifts.append(abs(energy(s) - e0) / e0)
    # local error control: drift accumulates over ~11 periods but stays proportional to rel_tol
    for rtol, d in zip((1e-3, 1e-5, 1e-7), drifts):
        assert d < 50 * rtol
    assert drifts[0] > drifts[1] > drifts[2]


# -- fish ---------------------------------------------------------------------------

def test_fish_production_at_unit_resource():
    m = fish.build(FishParams())
    dJ, dA, _ = m.f([1.0, 0.0, 1.0])
    v = dA
    assert dJ + v + 0.1 == pytest.approx(1.5, abs=1e-14)
    dJ, _, _ = m.f([0.0, 1.0, 1.0])
    assert dJ == pytest.approx(1.125, abs=1e-14)


def test_maturation_limit():
    assert maturation(0.1, 0.1, 0.01) == pytest.approx(-0.1 / math.log(0.01), rel=1e-12)
    assert maturation(0.1, 0.1, 0.01) == pytest.approx(0.021715, abs=1e-6)
    # continuous through the series branch
    for dx in (1e-9, 1e-7, 1e-6):
        assert maturation(0.1 + dx, 0.1, 0.01) == pytest.approx(0.021715, abs=1e-5)
    assert maturation(0.0, 0.1, 0.01) == 0.0


def test_fish_extinction_state_is_stationary():
    m = fish.build(FishParams(h_J=0.4, h_A=0.2))
    np.testing.assert_array_equal(m.f([0.0, 0.0, 2.0]), [0.0, 0.0, 0.0])


def test_fish_rhs_nonnegative_on_faces():
    m = fish.build(FishParams(h_J=1.0, h_A=1.0))
    rng = np.random.default_rng(1)
    for _ in range(200):
        s = rng.uniform(0, 3, size=3)
        s[rng.integers(3)] = 0.0
        f = m.f(s)
        assert np.all(f[s == 0] >= 0)


def test_fish_equilibrium_matches_forward_integration():
    m = fish.build(FishParams())
    eq = find_equilibrium(m)
    assert not eq.extinct and np.all(eq.state > 0)
    assert np.max(np.abs(m.f(eq.state))) < 1e-10
    late = integrate_to(m, [0.5, 0.5, 1.0], 2000.0, TIGHT)
    np.testing.assert_allclose(late, eq.state, rtol=1e-6)


def test_fish_extinct_when_overharvested():
    p = FishParams(h_J=3.0, h_A=3.0)
    eq = find_equilibrium(fish.build(p))
    assert eq.extinct
    np.testing.assert_array_equal(eq.state, [0.0, 0.0, 2.0])
    late = integrate_to(fish.build(p), [0.5, 0.5, 1.0], 300.0, TIGHT)
    assert late[0] < 1e-6 and late[1] < 1e-6 and late[2] == pytest.approx(2.0, abs=1e-6)


def test_yield_examples():
    assert yield_(0.5, 0.5, 2.0, 1.0) == 1.5
    assert yield_(0.0, 0.7, 1.3, 0.0) == 0.0
    with pytest.raises(ValueError):
        yield_(-1.0, 0.0, 1.0, 1.0)


def test_equal_harvest_yield_curve():
    thr = fish.extinction_threshold("equal")
    assert 1.0 < thr < 5.0

    def y(h):
        eq = fish.positive_equilibrium(FishParams(h_J=h, h_A=h))
        return 0.0 if eq is None else yield_(h, h, eq[0], eq[1])

    assert y(0.0) == 0.0
    assert y(thr) == 0.0
    assert y(thr * (1 - 1e-3)) < 0.01
    assert all(y(h) > 0 for h in np.linspace(0.05, thr * 0.99, 12))


def test_build_model_by_name():
    assert build_model("fish").dim == 3
    with pytest.raises(KeyError):
        build_model("rotor")
