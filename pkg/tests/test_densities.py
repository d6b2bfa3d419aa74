from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from meltfront.densities import (
    Constant,
    GapDensity,
    HeavyTail,
    ScaledCdf,
    Tabulated,
    TravellingWave,
    blowup_criterion,
    check_conditions,
    deficit_transform,
    density_from_dict,
    density_to_dict,
)


# --- pointwise values and exact cumulatives ---------------------------------

def test_constant_family():
    g = Constant(0.5)
    assert g.value(np.array([0.0, 5.0]))[1] == 0.5
    assert g.cumulative(np.array([7.0]))[0] == pytest.approx(3.5, abs=1e-15)
    assert g.bound == 0.5
    with pytest.raises(ValueError):
        Constant(-0.1)


def test_travelling_wave_family():
    g = TravellingWave(1.0)
    xs = np.array([0.0, 0.5, 2.0])
    np.testing.assert_allclose(g.value(xs), 1.0 - np.exp(-xs), rtol=1e-14)
    assert g.cumulative(np.array([2.0]))[0] == pytest.approx(2.0 + math.expm1(-2.0),
                                                             abs=1e-14)
    assert g.deficit_integral() == pytest.approx(1.0)
    assert TravellingWave(4.0).deficit_integral() == pytest.approx(0.25)
    with pytest.raises(ValueError):
        TravellingWave(0.0)


def test_gap_density_family():
    g = GapDensity(10.0, 0.25)
    ladder = g.ladder(2_000.0)
    np.testing.assert_allclose(ladder[:4], [1.0, 11.0, 111.0, 1111.0])
    assert g.value(np.array([0.5]))[0] == 0.0          # below the first rung
    assert g.value(np.array([5.0]))[0] == 7.5          # inside a dense band
    assert g.value(np.array([50.0]))[0] == 0.0         # inside a gap band
    assert g.cumulative(np.array([11.0]))[0] == pytest.approx(75.0, abs=1e-9)
    assert g.cumulative(np.array([111.0]))[0] == pytest.approx(75.0, abs=1e-9)
    assert g.bound == 7.5


def test_gap_density_ladder_inequalities():
    # alternating mass concentration: odd rungs carry at least L*x/2 of
    # cumulative mass, even rungs at most (1-alpha)*x
    L, alpha = 10.0, 0.25
    g = GapDensity(L, alpha)
    x = lambda i: (L ** (i + 1) - 1.0) / (L - 1.0)
    for i in (1, 3, 5):
        assert g.cumulative(np.array([x(i)]))[0] >= L * x(i) / 2.0
    for i in (2, 4, 6):
        assert g.cumulative(np.array([x(i)]))[0] <= (1.0 - alpha) * x(i)


def test_heavy_tail_family():
    g = HeavyTail(0.5)
    assert g.value(np.array([0.5]))[0] == 0.0
    assert g.value(np.array([2.0]))[0] == pytest.approx(1.0 + 0.5 * 2.0 ** -1.5)
    assert g.cumulative(np.array([1.0]))[0] == pytest.approx(0.0, abs=1e-15)
    assert g.cumulative(np.array([4.0]))[0] == pytest.approx(3.5, abs=1e-14)
    assert g.bound == pytest.approx(1.5)
    assert g.deficit_integral() == 0.0


def test_tabulated_family():
    g = Tabulated(xs=(0.0, 1.0, 3.0), gs=(0.2, 0.8, 0.0))
    np.testing.assert_allclose(g.value(np.array([0.5, 2.0, 10.0])), [0.2, 0.8, 0.0])
    assert g.cumulative(np.array([2.0]))[0] == pytest.approx(0.2 + 0.8, abs=1e-15)
    assert g.cumulative(np.array([5.0]))[0] == pytest.approx(0.2 + 1.6, abs=1e-15)


def test_scaled_cdf_callable_matches_knots():
    g = ScaledCdf(2.0, lambda x: -np.expm1(-x), x_max=40.0)
    xs = np.linspace(0.0, 39.0, 200)
    # cumulative must integrate the tabulated piecewise-linear profile exactly
    for x in (0.7, 3.0, 17.5):
        val, err = quad(lambda u: float(g.value(np.array([u]))[0]), 0.0, x, limit=200)
        assert g.cumulative(np.array([x]))[0] == pytest.approx(val, abs=1e-6)
    assert np.all(np.diff(g.value(xs)) >= -1e-12)


def test_smooth_cumulatives_match_quadrature():
    for spec, pts in [(TravellingWave(2.0), ()), (HeavyTail(0.3), (1.0,))]:
        for x in (0.4, 1.7, 6.0, 23.0):
            val, err = quad(lambda u: float(spec.value(np.array([u]))[0]), 0.0, x,
                            points=[p for p in pts if p < x], limit=200)
            assert spec.cumulative(np.array([x]))[0] == pytest.approx(
                val, abs=max(1e-8, 10 * err))


def test_piecewise_cumulative_increments_are_exact():
    # within one constant block, G(b) - G(a) = g * (b - a) with no quadrature
    cases = [
        (GapDensity(10.0, 0.25), 2.0, 9.0, 7.5),
        (GapDensity(10.0, 0.25), 20.0, 100.0, 0.0),
        (Tabulated(xs=(0.0, 1.0), gs=(0.3, 1.2)), 4.0, 7.0, 1.2),
        (Constant(0.8), 1.0, 2.5, 0.8),
    ]
    for spec, a, b, level in cases:
        inc = spec.cumulative(np.array([b]))[0] - spec.cumulative(np.array([a]))[0]
        assert inc == pytest.approx(level * (b - a), abs=1e-9)


# --- transform of the sub-unit deficit ---------------------------------------

def test_deficit_transform_closed_families():
    assert deficit_transform(Constant(0.4), 2.0) == pytest.approx(0.3, abs=1e-15)
    for lam in (0.5, 1.0, 2.0):
        assert deficit_transform(TravellingWave(3.0), lam) == pytest.approx(
            1.0 / (lam + 3.0), rel=1e-13)
    with pytest.raises(ValueError):
        deficit_transform(Constant(0.5), 0.0)


@pytest.mark.parametrize("spec,knots", [
    (GapDensity(10.0, 0.25), (1.0, 11.0)),
    (HeavyTail(0.5), (1.0,)),
    (Tabulated(xs=(0.0, 0.5, 2.0), gs=(0.0, 1.4, 0.6)), (0.5, 2.0)),
    (ScaledCdf(1.5, lambda x: -np.expm1(-x), x_max=60.0), ()),
])
def test_deficit_transform_matches_quadrature(spec, knots):
    for lam in (0.5, 1.0, 3.0):
        def integrand(x):
            return (1.0 - float(spec.value(np.array([x]))[0])) * math.exp(-lam * x)
        val = 0.0
        cuts = [0.0, *[k for k in knots if k < 80.0], 80.0]
        for a, b in zip(cuts[:-1], cuts[1:]):
            piece, _ = quad(integrand, a, b, limit=300)
            val += piece
        # tail beyond 80 is below e^{-40}; ignore it
        assert deficit_transform(spec, lam) == pytest.approx(val, abs=5e-7)


# --- blow-up scan -------------------------------------------------------------

def test_blowup_criterion_examples():
    assert blowup_criterion(Constant(3.0)) == 1.0
    assert blowup_criterion(Constant(0.5)) is None
    w = blowup_criterion(ScaledCdf(3.0, lambda x: -np.expm1(-x)),
                         grid=np.linspace(0.0, 5.0, 501))
    assert w is not None and 0.0 < w <= 5.0


@settings(max_examples=80, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=6),
       st.lists(st.floats(0.1, 5.0), min_size=1, max_size=6))
def test_blowup_never_fires_below_unit_density(gs, widths):
    n = min(len(gs), len(widths))
    xs = np.concatenate([[0.0], np.cumsum(widths[:n])])[:n]
    spec = Tabulated(xs=tuple(xs), gs=tuple(gs[:n]))
    assert blowup_criterion(spec, grid=np.linspace(0.0, 30.0, 301)) is None


# --- structural condition report ----------------------------------------------

def test_check_conditions_subcritical_constant():
    rep = check_conditions(Constant(0.5))
    assert bool(rep.bounded)
    assert bool(rep.sweepable)
    assert bool(rep.subcritical)
    assert rep.blowup_witness is None


def test_check_conditions_supercritical_constant():
    rep = check_conditions(Constant(1.5))
    assert not bool(rep.sweepable)
    assert not bool(rep.subcritical)


def test_check_conditions_gap_density_deepens():
    # the deepening ladder for this family lives at rungs 1, 111, 11111: the
    # default 60-wide window honestly reports indeterminate, a window past the
    # third rung certifies it
    assert check_conditions(GapDensity(10.0, 0.25)).deepening.status == "indeterminate"
    rep = check_conditions(GapDensity(10.0, 0.25), x_max=12_000.0)
    assert bool(rep.deepening)


def test_check_conditions_blowup_witness():
    # the fine scan fires at its first grid point for a level-3 density
    rep = check_conditions(Constant(3.0))
    assert rep.blowup_witness is not None
    assert 0.0 < rep.blowup_witness <= 1.0


def test_check_conditions_deterministic():
    a = check_conditions(GapDensity(10.0, 0.25))
    b = check_conditions(GapDensity(10.0, 0.25))
    assert a.summary() == b.summary()


# --- serialization --------------------------------------------------------------

@pytest.mark.parametrize("spec", [
    Constant(0.7),
    TravellingWave(2.5),
    GapDensity(12.0, 0.4),
    HeavyTail(0.25),
    Tabulated(xs=(0.0, 1.0, 2.0), gs=(0.1, 0.9, 0.3)),
    ScaledCdf(1.2, lambda x: -np.expm1(-x), x_max=30.0),
])
def test_density_dict_round_trip(spec):
    back = density_from_dict(density_to_dict(spec))
    xs = np.linspace(0.0, 25.0, 97)
    np.testing.assert_allclose(back.value(xs), spec.value(xs), atol=1e-12)
    np.testing.assert_allclose(back.cumulative(xs), spec.cumulative(xs), atol=1e-9)


def test_density_from_dict_rejects_garbage():
    with pytest.raises(ValueError):
        density_from_dict({"family": "pareto", "beta": 0.5})
    with pytest.raises(ValueError):
        density_from_dict({"family": "constant", "level": 0.5, "extra": 1})
    with pytest.raises(ValueError):
        density_from_dict({"level": 0.5})
