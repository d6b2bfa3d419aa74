from __future__ import annotations

import math

import numpy as np
import pytest

from meltfront.closed_form import gamma_linear
from meltfront.densities import Constant, GapDensity
from meltfront.errors import ConfigError, NumericalError
from meltfront.mean_field import GridFunction
from meltfront.particle_sim import (
    LinearBarrier,
    SimConfig,
    default_window,
    resolve_cascade,
    rescale_to_xi,
    run_euler,
    run_exact,
    run_fixed_barrier,
)
from meltfront.sampling import SeedSpec


def _cfg(**kw):
    base = dict(density=Constant(0.5), rate_scale=200.0, jump_unit=1.0 / 200,
                horizon=1.0, seed=SeedSpec(0), scheme="exact")
    base.update(kw)
    return SimConfig(**base)


# --- cascade resolution ------------------------------------------------------

def test_resolve_cascade_examples():
    assert resolve_cascade(np.array([0.0]), 0.0, 1.0) == 1
    assert resolve_cascade(np.array([0.0, 0.0]), 0.0, 1.0) == 2
    assert resolve_cascade(np.array([0.0, 0.4, 1.3, 1.7, 2.5]), 0.0, 1.0) == 5
    # a spread-out cloud stops the avalanche immediately
    assert resolve_cascade(np.array([0.0, 5.0, 9.0]), 0.0, 1.0) == 1
    # small jump unit: the trigger alone moves the barrier by a only
    assert resolve_cascade(np.array([0.0, 0.5]), 0.0, 0.1) == 1


def test_resolve_cascade_matches_brute_force():
    rng = np.random.default_rng(123)
    for _ in range(1000):
        n = int(rng.integers(1, 51))
        barrier = float(rng.normal(0.0, 2.0))
        a = float(rng.uniform(0.01, 2.0))
        pos = barrier + rng.uniform(0.0, rng.uniform(0.1, 5.0), size=n)
        pos[0] = barrier  # the trigger
        rel = np.sort(pos - barrier)
        brute = next(k for k in range(1, n + 1)
                     if np.sum(rel <= k * a) <= k)
        assert resolve_cascade(pos, barrier, a) == brute


# --- feedback runs: structure ------------------------------------------------

def test_run_exact_deterministic():
    a = run_exact(_cfg())
    b = run_exact(_cfg())
    assert a.n_initial == b.n_initial
    assert len(a.events) == len(b.events)
    for ea, eb in zip(a.events, b.events):
        assert ea.time == eb.time and ea.k == eb.k
        assert ea.barrier_before == eb.barrier_before


def test_run_euler_deterministic():
    a = run_euler(_cfg(scheme="euler", dt=0.01))
    b = run_euler(_cfg(scheme="euler", dt=0.01))
    assert [(e.time, e.k) for e in a.events] == [(e.time, e.k) for e in b.events]


def test_event_log_shape_and_monotonicity():
    log = run_exact(_cfg(seed=SeedSpec(3)))
    assert log.terminal == "completed"
    times = [e.time for e in log.events]
    assert times == sorted(times)
    path = log.barrier_path()
    assert path.is_nondecreasing()
    assert path.grid[-1] == log.terminal_time
    total_k = sum(e.k for e in log.events)
    assert total_k <= log.n_initial
    assert log.final_barrier == pytest.approx(log.config.jump_unit * total_k,
                                              rel=1e-12)
    # cadlag reading: at an event time the barrier has already jumped
    e = log.events[0]
    assert log.barrier_at(e.time) == pytest.approx(
        e.barrier_after(log.config.jump_unit), abs=1e-15)
    if e.time > 0:
        assert log.barrier_at(e.time * 0.999999) == pytest.approx(
            e.barrier_before, abs=1e-15)


def test_empty_cloud_runs_clean():
    log = run_exact(_cfg(density=Constant(0.0)))
    assert log.n_initial == 0
    assert log.events == []
    assert log.final_barrier == 0.0
    assert log.terminal == "completed"


def test_window_growth_injects_and_accounts():
    # a deliberately small starting window forces mid-run growth; injected
    # particles join the bookkeeping and absorption never exceeds the total
    cfg = _cfg(window=2.0, seed=SeedSpec(5))
    log = run_exact(cfg)
    assert log.final_window > 2.0
    assert log.terminal == "completed"
    assert 0 < sum(e.k for e in log.events) <= log.n_initial
    # the default window is roomy enough that no growth happens at all
    roomy = run_exact(_cfg(seed=SeedSpec(5)))
    assert roomy.final_window == pytest.approx(default_window(roomy.config))


def test_scheme_validation():
    with pytest.raises(ConfigError):
        run_exact(_cfg(scheme="euler", dt=0.01))
    with pytest.raises(ConfigError):
        run_euler(_cfg())
    with pytest.raises(ConfigError):
        _cfg(scheme="euler")  # euler needs dt
    with pytest.raises(ConfigError):
        _cfg(jump_unit=0.0)
    with pytest.raises(ConfigError):
        _cfg(truncation_margin=2.0)  # below the documented floor


def test_slots_mode_refuses_window_growth():
    cfg = _cfg(scheme="euler", dt=0.01, window=1.0, draw_mode="slots")
    with pytest.raises(ConfigError):
        run_euler(cfg)


def test_explosion_cap_marks_blowup():
    cfg = _cfg(density=Constant(3.0), rate_scale=100.0, jump_unit=1.0 / 100,
               horizon=2.0, explosion_cap=2.0, seed=SeedSpec(8))
    log = run_exact(cfg)
    assert log.terminal == "exploded"
    assert log.terminal_time < 2.0
    assert log.final_barrier > 2.0


def test_runaway_without_cap_raises():
    cfg = _cfg(density=Constant(3.0), rate_scale=30.0, jump_unit=1.0 / 30,
               horizon=5.0, max_window_growth=25, seed=SeedSpec(9))
    with pytest.raises(NumericalError, match="explosion_cap"):
        run_exact(cfg)


# --- feedback runs: law checks -------------------------------------------------

def test_first_event_time_law():
    # before the first absorption the barrier sits at 0, so the first event
    # time is the minimum of the particles' level-hit times: for unit density
    # the count of hits by t is Poisson with mean N*sqrt(2t/pi)
    reps = 2000
    n = 5.0
    firsts = np.empty(reps)
    for r in range(reps):
        cfg = _cfg(density=Constant(1.0), rate_scale=n, jump_unit=0.2,
                   horizon=0.25, seed=SeedSpec(17).with_replica(r))
        log = run_exact(cfg)
        firsts[r] = log.events[0].time if log.events else np.inf
    for t in (0.05, 0.15, 0.25):
        p = 1.0 - math.exp(-n * math.sqrt(2.0 * t / math.pi))
        emp = float(np.mean(firsts <= t))
        se = math.sqrt(p * (1.0 - p) / reps)
        assert abs(emp - p) < 3.0 * se, t


def test_monotone_domination_in_jump_unit():
    # shared randomness, bigger mass per absorption => barrier everywhere higher
    grid = np.linspace(0.0, 1.0, 21)
    for r in range(50):
        seed = SeedSpec(23).with_replica(r)
        logs = []
        for a in (1.0 / 600, 1.0 / 300):
            cfg = SimConfig(density=Constant(0.5), rate_scale=300.0,
                            jump_unit=a, horizon=1.0, seed=seed,
                            scheme="euler", dt=0.01, window=6.0,
                            draw_mode="slots")
            logs.append(run_euler(cfg))
        lo = np.array([logs[0].barrier_at(t) for t in grid])
        hi = np.array([logs[1].barrier_at(t) for t in grid])
        assert np.all(hi >= lo - 1e-12)


def test_comparison_with_prescribed_line():
    # coupled form of the domination argument: when the no-feedback run stays
    # strictly below the line, the feedback run (same draws) cannot cross it
    f = LinearBarrier(1.0, 0.3)
    held = 0
    for r in range(25):
        seed = SeedSpec(42).with_replica(r)
        fixed = run_fixed_barrier(Constant(0.5), 500.0, f, 1.0, seed,
                                  scheme="euler", dt=0.01, window=6.0,
                                  draw_mode="slots")
        line = f.at(fixed.grid)
        if not np.all(fixed.absorbed_fraction < line):
            continue
        held += 1
        cfg = SimConfig(density=Constant(0.5), rate_scale=500.0,
                        jump_unit=1.0 / 500, horizon=1.0, seed=seed,
                        scheme="euler", dt=0.01, window=6.0,
                        draw_mode="slots")
        log = run_euler(cfg)
        fb = np.array([log.barrier_at(t) for t in fixed.grid])
        assert np.all(fb <= line + 1e-12)
    assert held >= 20  # the hypothesis should hold in nearly every replica


@pytest.mark.slow
def test_linear_bound_on_supercritical_free_run():
    # at N=10^4 with a half-unit density the barrier stays under 2t+1 in all
    # but a vanishing fraction of replicas
    reps = 200
    above = 0
    for r in range(reps):
        cfg = SimConfig(density=Constant(0.5), rate_scale=1e4, jump_unit=1e-4,
                        horizon=1.0, seed=SeedSpec(31).with_replica(r),
                        scheme="euler", dt=1e-3)
        log = run_euler(cfg)
        if log.final_barrier > 2.0 * 1.0 + 1.0:
            above += 1
    assert above / reps < 0.01


# --- fixed-barrier runs ----------------------------------------------------------

def test_fixed_barrier_never_reached():
    res = run_fixed_barrier(Constant(0.5), 100.0, LinearBarrier(0.0, -5.0),
                            1.0, SeedSpec(0))
    assert res.total == 0.0
    assert np.all(res.absorbed_fraction == 0.0)


def test_fixed_barrier_linear_mean_matches_closed_form():
    target = gamma_linear(1.0, -1.0, 1.0)
    reps = 100
    totals = np.array([
        run_fixed_barrier(Constant(1.0), 2000.0, LinearBarrier(1.0, -1.0), 1.0,
                          SeedSpec(19).with_replica(r)).total
        for r in range(reps)
    ])
    se = totals.std(ddof=1) / math.sqrt(reps)
    assert abs(totals.mean() - target) < 3.0 * se


def test_fixed_barrier_step_path_mean_matches_closed_form():
    # constant step path at 0.2 == zero-slope line started at 0.2
    barrier = GridFunction(np.array([0.0, 0.5, 1.0]), np.array([0.2, 0.2, 0.2]))
    target = gamma_linear(0.0, 0.2, 1.0)
    reps = 100
    totals = np.array([
        run_fixed_barrier(Constant(1.0), 1000.0, barrier, 1.0,
                          SeedSpec(29).with_replica(r)).total
        for r in range(reps)
    ])
    se = totals.std(ddof=1) / math.sqrt(reps)
    assert abs(totals.mean() - target) < 3.0 * se


def test_fixed_barrier_counts_are_poisson():
    # thinned cloud against a prescribed line: absorbed count is Poisson, so
    # the dispersion index sits at 1
    reps = 800
    counts = np.array([
        run_fixed_barrier(Constant(1.0), 500.0, LinearBarrier(1.0, -1.0), 1.0,
                          SeedSpec(37).with_replica(r)).total * 500.0
        for r in range(reps)
    ])
    dispersion = counts.var(ddof=1) / counts.mean()
    assert abs(dispersion - 1.0) < 3.0 * math.sqrt(2.0 / reps)


def test_fixed_barrier_validation():
    with pytest.raises(ConfigError):
        run_fixed_barrier(Constant(0.5), 100.0, LinearBarrier(1.0, 0.0), 0.0,
                          SeedSpec(0))
    with pytest.raises(ConfigError):
        run_fixed_barrier(Constant(0.5), 100.0, "not a barrier", 1.0, SeedSpec(0))
    down = GridFunction(np.array([0.0, 1.0]), np.array([1.0, 0.5]))
    with pytest.raises(ConfigError):
        run_fixed_barrier(Constant(0.5), 100.0, down, 1.0, SeedSpec(0))
    with pytest.raises(ConfigError):
        run_fixed_barrier(Constant(0.5), 100.0, LinearBarrier(1.0, 0.0), 1.0,
                          SeedSpec(0), scheme="euler")  # dt missing
    with pytest.raises(ConfigError):
        run_fixed_barrier(Constant(0.5), 100.0, LinearBarrier(1.0, 0.0), 1.0,
                          SeedSpec(0), scheme="euler", dt=0.01,
                          draw_mode="slots")  # window missing


# --- rescaling ---------------------------------------------------------------------

def test_rescale_to_xi_identity_at_unit_scales():
    cfg = SimConfig(density=Constant(1.0), rate_scale=1.0, jump_unit=1.0,
                    horizon=2.0, seed=SeedSpec(4), scheme="exact")
    log = run_exact(cfg)
    path = log.barrier_path()
    xi = rescale_to_xi(log)
    np.testing.assert_array_equal(xi.grid, path.grid)
    np.testing.assert_array_equal(xi.values, path.values)


def test_rescale_to_xi_is_pure_reindexing():
    n, level = 50.0, 0.5
    cfg = SimConfig(density=Constant(level), rate_scale=n, jump_unit=1.0 / n,
                    horizon=1.0, seed=SeedSpec(6), scheme="exact")
    log = run_exact(cfg)
    xi = rescale_to_xi(log)
    scale = n * level
    path = log.barrier_path()
    np.testing.assert_allclose(xi.grid, path.grid * scale * scale, rtol=1e-15)
    np.testing.assert_allclose(xi.values, path.values * scale, rtol=1e-15)
    # round trip back to the original units
    back = GridFunction(xi.grid / scale**2, xi.values / scale)
    np.testing.assert_allclose(back.values, path.values, rtol=1e-15)
    # endpoint identity, exactly
    assert xi.values[-1] == pytest.approx(scale * log.final_barrier, rel=1e-15)


def test_rescale_to_xi_validates_config():
    cfg = SimConfig(density=GapDensity(10.0, 0.25), rate_scale=10.0,
                    jump_unit=0.1, horizon=0.1, seed=SeedSpec(0), scheme="exact")
    log = run_exact(cfg)
    with pytest.raises(ConfigError):
        rescale_to_xi(log)
    cfg2 = SimConfig(density=Constant(0.5), rate_scale=10.0, jump_unit=0.2,
                     horizon=0.1, seed=SeedSpec(0), scheme="exact")
    with pytest.raises(ConfigError):
        rescale_to_xi(run_exact(cfg2))
