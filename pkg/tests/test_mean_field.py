"""Tests for the mean-field operator, solver, and the identities around it.

The operator under test is Gamma(f)_t = E[G(sup_{s<=t}(f_s - B_s))]; the
solver iterates it monotonically from zero.  Cross-checks run against the
closed-form module (reflection law, linear-barrier formula, the travelling
wave) rather than against the operator itself.
"""

from __future__ import annotations

import numpy as np
import pytest

from meltfront.closed_form import gamma_linear, k_alpha
from meltfront.densities import (Constant, GapDensity, HeavyTail, ScaledCdf,
                                 Tabulated, TravellingWave)
from meltfront.errors import ConfigError
from meltfront.mean_field import (GammaEvalConfig, GridFunction,
                                  SubBarrierDensity, asymptotic_speed,
                                  detect_explosion, estimate_contraction,
                                  estimate_subbarrier_density, eval_gamma,
                                  laplace_residual, physical_jump_size,
                                  solve_minimal, sqrt_time_grid)
from meltfront.sampling import SeedSpec


def _cfg(paths=20_000, root=11, **kw):
    return GammaEvalConfig(paths=paths, seed=SeedSpec(root), **kw)


# ---------------------------------------------------------------------------
# GridFunction plumbing


def test_grid_function_validation_and_eval():
    f = GridFunction(np.array([0.0, 1.0, 3.0]), np.array([0.1, 0.5, 0.9]))
    assert f.horizon == 3.0
    # cadlag: value at a knot is the new one, left of it the old one
    assert f.at(1.0) == 0.5
    assert f.at(0.999) == 0.1
    assert f.at([0.0, 2.0, 5.0]).tolist() == [0.1, 0.5, 0.9]
    assert f.interp(2.0) == pytest.approx(0.7)
    with pytest.raises(ConfigError):
        GridFunction(np.array([0.5, 1.0]), np.array([0.0, 1.0]))
    with pytest.raises(ConfigError):
        GridFunction(np.array([0.0, 1.0, 1.0]), np.array([0.0, 1.0, 2.0]))
    with pytest.raises(ConfigError):
        f.at(-0.5)


def test_sqrt_time_grid_shape():
    g = sqrt_time_grid(4.0, 16)
    assert len(g) == 17
    assert g[0] == 0.0 and g[-1] == pytest.approx(4.0)
    # uniform in sqrt(t): increments of sqrt(g) constant
    assert np.allclose(np.diff(np.sqrt(g)), np.sqrt(4.0) / 16)


# ---------------------------------------------------------------------------
# eval_gamma against closed forms


def test_gamma_of_zero_is_reflection_law():
    # sup of -B over [0,t] is distributed as |B_t|, so for Constant(a)
    # Gamma(0)_t = a * E|B_t| = a * sqrt(2t/pi)
    a = 0.7
    f = GridFunction(np.array([0.0, 0.5, 1.0, 2.0]), np.zeros(4))
    out = eval_gamma(f, Constant(a), _cfg(paths=100_000))
    for t, got in zip(out.grid[1:], out.values[1:]):
        want = a * np.sqrt(2.0 * t / np.pi)
        se = a * np.sqrt(t * (1.0 - 2.0 / np.pi) / 100_000)
        assert abs(got - want) < 3.0 * se, (t, got, want)


def test_gamma_linear_barrier_matches_quadrature_formula():
    c, a = 0.4, 0.6
    ts = np.array([0.0, 0.5, 1.0, 1.5, 2.0])
    f = GridFunction(ts, c * ts)
    out = eval_gamma(f, Constant(a), _cfg(paths=80_000))
    want = a * gamma_linear(c, 0.0, ts)
    se = a * np.sqrt(np.maximum(ts, 1e-12) / 80_000)
    assert np.all(np.abs(out.values - want) < 3.0 * se + 1e-12)


def test_travelling_wave_is_fixed_point_of_gamma():
    v = 1.0
    ts = np.array([0.0, 0.25, 0.5, 1.0, 2.0, 3.0, 4.0])
    f = GridFunction(ts, v * ts / 2.0)
    out = eval_gamma(f, TravellingWave(v), _cfg(paths=100_000))
    for t, got in zip(ts[1:], out.values[1:]):
        se = np.sqrt(t / 100_000) + 1e-4
        assert abs(got - v * t / 2.0) < 3.0 * se, (t, got)


def test_gamma_monotone_in_argument_path_exact():
    ts = np.linspace(0.0, 2.0, 9)
    lo = GridFunction(ts, 0.3 * ts)
    hi = GridFunction(ts, 0.3 * ts + 0.2)
    g = TravellingWave(1.0)
    cfg = _cfg(paths=5_000)
    out_lo = eval_gamma(lo, g, cfg)
    out_hi = eval_gamma(hi, g, cfg)
    # common random numbers make this exact per path, not just in the mean
    assert np.all(out_hi.values >= out_lo.values - 1e-12)


def test_gamma_output_nondecreasing_and_refinement_consistent():
    ts = np.array([0.0, 1.0, 2.0])
    f = GridFunction(ts, 0.5 * ts)
    g = Constant(0.8)
    coarse = eval_gamma(f, g, _cfg(paths=40_000))
    fine = eval_gamma(f, g, _cfg(paths=40_000, dt=0.125))
    assert coarse.is_nondecreasing() and fine.is_nondecreasing()
    assert set(np.round(ts, 12)).issubset(set(np.round(fine.grid, 12)))
    # refinement adds reporting points without changing the law
    at_knots = fine.values[np.searchsorted(fine.grid, ts)]
    assert np.all(np.abs(at_knots - coarse.values) < 0.02)


def test_gamma_rejects_decreasing_candidate():
    f = GridFunction(np.array([0.0, 1.0]), np.array([1.0, 0.5]))
    with pytest.raises(ConfigError):
        eval_gamma(f, Constant(0.5), _cfg(paths=100))


# ---------------------------------------------------------------------------
# solve_minimal


def test_solver_travelling_wave_within_two_percent():
    grid = sqrt_time_grid(5.0, 50)
    sol = solve_minimal(TravellingWave(1.0), grid, _cfg(paths=15_000), tol=1e-3)
    assert sol.converged
    mask = grid >= 0.5
    rel = np.abs(sol.path.values[mask] / (grid[mask] / 2.0) - 1.0)
    assert np.max(rel) < 0.02, np.max(rel)
    assert sol.jumps == []


def test_solver_constant_half_matches_similarity_constant():
    grid = sqrt_time_grid(4.0, 50)
    sol = solve_minimal(Constant(0.5), grid, _cfg(paths=20_000), tol=5e-4)
    assert sol.converged
    k = k_alpha(0.5)  # 0.6120031809624812
    mask = grid >= 1.0
    ratio = sol.path.values[mask] / np.sqrt(grid[mask])
    assert np.max(np.abs(ratio / k - 1.0)) < 0.02


def test_solver_zero_density_stays_at_zero():
    grid = sqrt_time_grid(2.0, 20)
    sol = solve_minimal(Constant(0.0), grid, _cfg(paths=2_000))
    assert sol.converged
    assert np.all(sol.path.values == 0.0)
    assert sol.residual == 0.0


def test_solver_iterates_monotone_path_exact():
    grid = sqrt_time_grid(2.0, 25)
    g = Constant(0.5)
    cfg = _cfg(paths=4_000)
    prev = GridFunction(grid, np.zeros_like(grid))
    for _ in range(4):
        nxt = eval_gamma(prev, g, cfg)
        assert np.all(nxt.values >= prev.values - 1e-12)
        prev = nxt


def test_solver_output_is_half_holder_stably():
    # max (Lambda_t - Lambda_s)/sqrt(t-s) stays bounded and roughly stable
    # when the grid is refined
    ratios = []
    for n in (30, 60):
        grid = sqrt_time_grid(2.0, n)
        sol = solve_minimal(Constant(0.5), grid, _cfg(paths=20_000), tol=5e-4)
        t = sol.path.grid[None, :]
        s = sol.path.grid[:, None]
        dv = sol.path.values[None, :] - sol.path.values[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(t > s, dv / np.sqrt(np.maximum(t - s, 1e-300)), 0.0)
        ratios.append(float(np.max(r)))
    assert all(0.4 < r < 0.9 for r in ratios), ratios
    assert abs(ratios[1] - ratios[0]) < 0.1


# ---------------------------------------------------------------------------
# jump rule


def test_jump_rule_subunit_density_gives_no_jump():
    assert physical_jump_size(Constant(0.5)) == 0.0
    assert physical_jump_size(Constant(0.999)) == 0.0


def test_jump_rule_block_density():
    # mass 2x on [0,1] then flat: cumulative first falls short of x at x = 2
    d = Tabulated(np.array([0.0, 1.0]), np.array([2.0, 0.0]))
    assert physical_jump_size(d) == pytest.approx(2.0, abs=1e-9)


def test_jump_rule_supercritical_everywhere_marks_explosion():
    assert physical_jump_size(Constant(1.2)) == np.inf


def test_jump_rule_matches_brute_force_on_random_step_densities():
    rng = np.random.default_rng(2024)
    window, step = 12.0, 1e-3

    def brute(xs, cum):
        s = cum - xs
        for i in range(1, len(xs)):
            if s[i] < 0.0:
                if s[i - 1] <= 0.0:
                    return float(xs[i - 1])
                return float(xs[i - 1] + s[i - 1] * (xs[i] - xs[i - 1])
                             / (s[i - 1] - s[i]))
        return np.inf

    for _ in range(1000):
        n = rng.integers(2, 8)
        knots = np.concatenate([[0.0], np.sort(rng.uniform(0.1, window, n - 1))])
        levels = rng.uniform(0.0, 2.5, n)
        d = Tabulated(knots, levels)
        xs = np.arange(0.0, window + step / 2, step)
        xs = np.unique(np.concatenate([xs, knots]))
        xs = xs[xs <= window]
        expect = brute(xs, np.asarray(d.cumulative(xs), dtype=float))
        got = physical_jump_size(d, window=window, step=step)
        assert got == expect, (knots, levels, got, expect)


def test_jump_rule_on_estimated_profile():
    prof = SubBarrierDensity(
        t=1.0, barrier=0.5,
        offsets=np.array([0.0, 0.5, 1.0, 1.5, 2.0]),
        cumulative=np.array([0.0, 0.9, 1.4, 1.45, 1.5]),
        density=np.zeros(5), bandwidth=0.5, paths=1)
    # shortfall first hit between 1.0 (cum 1.4 > 1.0) and 1.5 (cum 1.45 < 1.5)
    got = physical_jump_size(prof)
    assert 1.0 < got < 1.5
    s0, s1 = 1.4 - 1.0, 1.45 - 1.5
    assert got == pytest.approx(1.0 + s0 * 0.5 / (s0 - s1))


# ---------------------------------------------------------------------------
# sub-barrier profile


def test_subbarrier_profile_mass_accounting():
    ts = np.array([0.0, 0.25, 0.5, 1.0])
    f = GridFunction(ts, 0.3 * ts)
    g = Constant(0.5)
    prof = estimate_subbarrier_density(f, g, _cfg(paths=30_000), t=1.0,
                                       x_max=3.0, dx=0.05)
    assert prof.side == "left"
    assert prof.cumulative[0] == 0.0
    assert np.all(np.diff(prof.cumulative) >= -1e-12)
    # mass above the barrier cannot exceed the initial mass of the window
    assert prof.cumulative[-1] <= 0.5 * (prof.barrier + 3.0) + 1e-9
    assert np.all(prof.density >= 0.0)
    # clamped by the Gaussian envelope
    env = 0.5  # bound for Constant(0.5) times Phi(...) <= 0.5
    assert np.all(prof.density <= env + 1e-9)


def test_subbarrier_profile_validation():
    f = GridFunction(np.array([0.0, 1.0]), np.array([0.0, 0.2]))
    with pytest.raises(ConfigError):
        estimate_subbarrier_density(f, Constant(0.5), _cfg(paths=100),
                                    t=0.7, x_max=1.0, dx=0.1)
    with pytest.raises(ConfigError):
        estimate_subbarrier_density(f, Constant(0.5), _cfg(paths=100),
                                    t=1.0, x_max=1.0, dx=0.1, side="middle")


# ---------------------------------------------------------------------------
# Laplace identity


def test_laplace_identity_travelling_wave_exact():
    # Lambda_t = vt/2 makes both sides equal 1/(lam + v)
    v = 1.0
    ts = np.linspace(0.0, 60.0, 2)
    path = GridFunction(ts, v * ts / 2.0)
    for lam in (0.5, 1.0, 2.0):
        res = laplace_residual(path, TravellingWave(v), lam)
        assert res.lhs == pytest.approx(1.0 / (lam + v), rel=1e-12)
        assert res.abs < 1e-6, (lam, res.lhs, res.rhs)


def test_laplace_identity_horizon_too_short():
    path = GridFunction(np.array([0.0, 1.0]), np.array([0.0, 0.5]))
    with pytest.raises(ConfigError, match="horizon"):
        laplace_residual(path, TravellingWave(1.0), 0.5)


def test_laplace_identity_rejects_bad_lambda():
    path = GridFunction(np.array([0.0, 60.0]), np.array([0.0, 30.0]))
    with pytest.raises(ConfigError):
        laplace_residual(path, TravellingWave(1.0), 0.0)


@pytest.mark.slow
def test_laplace_identity_on_solver_output():
    grid = sqrt_time_grid(130.0, 170)
    sol = solve_minimal(Constant(0.5), grid, _cfg(paths=20_000), tol=2e-3)
    assert sol.converged
    for lam in (0.5, 1.0, 2.0):
        res = laplace_residual(sol.path, Constant(0.5), lam)
        assert res.rel < 0.01, (lam, res.lhs, res.rhs, res.rel)


# ---------------------------------------------------------------------------
# contraction


def test_contraction_constant_half_is_exactly_half():
    # for Constant(a) the sup shifts by exactly eps, so the ratio is a
    grid = sqrt_time_grid(2.0, 30)
    path = GridFunction(grid, k_alpha(0.5) * np.sqrt(grid))
    est = estimate_contraction(Constant(0.5), path, eps=0.05, horizon=2.0,
                               cfg=_cfg(paths=20_000))
    assert est.kappa == pytest.approx(0.5, abs=1e-12)
    assert not est.warn_supercritical


def test_contraction_zero_density():
    grid = sqrt_time_grid(1.0, 10)
    path = GridFunction(grid, np.zeros_like(grid))
    est = estimate_contraction(Constant(0.0), path, eps=0.1, horizon=1.0,
                               cfg=_cfg(paths=2_000))
    assert est.kappa == 0.0


def test_contraction_eps_halving_agrees():
    grid = sqrt_time_grid(2.0, 30)
    path = GridFunction(grid, grid / 2.0)
    g = TravellingWave(1.0)
    # eps small enough that the second-order term eps/2 * E[g'(S)] sits well
    # inside the tolerance (with common random numbers the SE alone is ~1e-3)
    a = estimate_contraction(g, path, eps=0.02, horizon=2.0, cfg=_cfg(paths=40_000))
    b = estimate_contraction(g, path, eps=0.01, horizon=2.0, cfg=_cfg(paths=40_000))
    assert a.kappa < 1.0 and b.kappa < 1.0
    tol = 3.0 * np.hypot(a.se, b.se) + 1e-3
    assert abs(a.kappa - b.kappa) < tol, (a.kappa, b.kappa, tol)


def test_contraction_flags_supercritical_density():
    grid = sqrt_time_grid(1.0, 10)
    path = GridFunction(grid, np.sqrt(grid))
    est = estimate_contraction(Constant(1.5), path, eps=0.01, horizon=1.0,
                               cfg=_cfg(paths=2_000))
    assert est.warn_supercritical
    with pytest.raises(ConfigError):
        estimate_contraction(Constant(0.5), path, eps=0.0, horizon=1.0,
                             cfg=_cfg(paths=100))


# ---------------------------------------------------------------------------
# asymptotic speed and explosion


def test_asymptotic_speed_classification():
    lin = asymptotic_speed(TravellingWave(1.0))
    assert lin.regime == "linear"
    assert lin.rate == pytest.approx(0.5, rel=1e-9)

    sq = asymptotic_speed(Constant(0.5))
    assert sq.regime == "sqrt"
    assert sq.rate == pytest.approx(k_alpha(0.5), rel=1e-9)

    degenerate = asymptotic_speed(Constant(0.0))
    assert degenerate.regime == "sqrt"
    assert degenerate.rate == 0.0

    heavy = asymptotic_speed(HeavyTail(0.5))
    assert heavy.regime == "not_applicable"


def test_detect_explosion_bounded_solution():
    grid = sqrt_time_grid(4.0, 40)
    path = GridFunction(grid, k_alpha(0.5) * np.sqrt(grid))
    assert detect_explosion(path, cap=50.0) is None
    assert detect_explosion(path, cap=1.0) == pytest.approx(grid[np.argmax(
        k_alpha(0.5) * np.sqrt(grid) > 1.0)])


def test_detect_explosion_blowup_density_at_time_zero():
    grid = sqrt_time_grid(1.0, 5)
    path = GridFunction(grid, np.zeros_like(grid))
    assert detect_explosion(path, cap=50.0, g=Constant(3.0)) == 0.0


@pytest.mark.slow
def test_detect_explosion_scaled_cdf_finite_time():
    # alpha = 2 doubles an exponential CDF profile: total mass 2 forces the
    # boundary to run away at some finite positive time
    g = ScaledCdf(2.0, lambda x: -np.expm1(-np.asarray(x, dtype=float)))
    grid = sqrt_time_grid(3.0, 60)
    sol = solve_minimal(g, grid, _cfg(paths=10_000), explosion_cap=40.0)
    assert sol.exploded
    t_star = detect_explosion(sol, cap=40.0)
    assert t_star is not None and 0.0 < t_star <= 3.0
