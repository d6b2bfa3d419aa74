"""Mean-field free boundary: the absorbed-mass operator and its minimal fixed point.

The limit object is a barrier ``Lambda`` fed by the mass it absorbs from a
heat flow with initial density ``g``.  Everything reduces to one operator: for
a nondecreasing cadlag barrier candidate ``f``,

    Gamma(f)_t = E[ G( sup_{s <= t} (f_s - B_s) ) ],

with ``B`` a standard Brownian motion and ``G`` the cumulative of ``g``.  The
physical solution is the *minimal* fixed point ``Lambda = Gamma(Lambda)``,
reached from below by monotone iteration starting at 0.

This module provides:

* ``GridFunction`` -- nondecreasing cadlag step functions on a time grid;
* ``eval_gamma`` -- unbiased Monte Carlo for ``Gamma(f)`` (the per-step
  running supremum is refined with exactly-sampled Brownian-bridge minima, so
  a piecewise-constant ``f`` is evaluated without time-discretization bias);
* ``solve_minimal`` -- the monotone iteration, with common random numbers
  across iterates (the iteration is then exactly monotone path by path),
  explosion detection against a cap, and a census of macroscopic jumps;
* ``physical_jump_size`` -- the jump rule ``inf {x > 0 : mass([0,x]) < x}``
  applied to an initial density or an estimated sub-barrier profile;
* ``estimate_subbarrier_density`` -- the surviving-mass profile just above
  the barrier at a fixed time, from the same path ensemble;
* ``laplace_residual`` -- the exact-transform identity the solution must
  satisfy, as a numerical residual (infinite-horizon and finite-t forms);
* ``estimate_contraction`` -- empirical Lipschitz ratio of ``Gamma`` around a
  solution (the quantity that governs uniqueness/stability regimes);
* ``asymptotic_speed`` -- classifies the long-run barrier law (linear /
  square-root / not applicable) from the density's deficit structure;
* ``detect_explosion`` -- first time a barrier object exceeds a cap, or time
  0 when the initial density already forces an infinite jump.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
import numpy as np

from .closed_form import gauss_cdf, k_alpha, sample_bridge_min
from .densities import (Constant, DensitySpec, TravellingWave, check_conditions,
                        deficit_transform)
from .errors import ConfigError, NumericalError
from .sampling import SeedSpec

__all__ = [
    "GridFunction",
    "GammaEvalConfig",
    "MinimalSolution",
    "JumpRecord",
    "SubBarrierDensity",
    "eval_gamma",
    "solve_minimal",
    "physical_jump_size",
    "estimate_subbarrier_density",
    "laplace_residual",
    "LaplaceResidual",
    "estimate_contraction",
    "ContractionEstimate",
    "asymptotic_speed",
    "SpeedVerdict",
    "detect_explosion",
    "sqrt_time_grid",
]

_fresh_stream_counter = itertools.count()


@dataclass
class GridFunction:
    """Nondecreasing cadlag step function: value ``values[i]`` on [grid[i], grid[i+1]).

    The grid must start at 0; beyond the last grid point the function holds
    its final value.
    """

    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.grid.ndim != 1 or self.grid.shape != self.values.shape:
            raise ConfigError("grid and values must be equal-length 1-d arrays")
        if len(self.grid) == 0 or self.grid[0] != 0.0:
            raise ConfigError("time grid must start at 0")
        if np.any(np.diff(self.grid) <= 0):
            raise ConfigError("time grid must strictly increase")

    @property
    def horizon(self) -> float:
        return float(self.grid[-1])

    def at(self, t):
        """Cadlag evaluation (vectorized)."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise ConfigError("cannot evaluate at negative times")
        idx = np.clip(np.searchsorted(self.grid, t, side="right") - 1, 0, len(self.grid) - 1)
        return self.values[idx]

    def interp(self, t):
        """Piecewise-linear evaluation (for quadrature and comparisons)."""
        return np.interp(np.asarray(t, dtype=float), self.grid, self.values)

    def is_nondecreasing(self, tol: float = 1e-12) -> bool:
        return bool(np.all(np.diff(self.values) >= -tol))

    @staticmethod
    def constant(value: float, horizon: float) -> "GridFunction":
        return GridFunction(np.array([0.0, float(horizon)]),
                            np.array([float(value)] * 2))


def sqrt_time_grid(horizon: float, n: int) -> np.ndarray:
    """Grid uniform in sqrt(t): resolves the fast early motion of the barrier."""
    return (np.sqrt(horizon) * np.linspace(0.0, 1.0, n + 1)) ** 2


@dataclass(frozen=True)
class GammaEvalConfig:
    """Budget and seeding for one Monte Carlo evaluation of Gamma.

    ``paths`` Brownian paths are simulated in fixed ``batch``-sized blocks,
    each block on its own seed substream, and reduced in block order — results
    are identical for any worker count.  With ``common_random_numbers`` (the
    default) repeated evaluations under the same seed reuse exactly the same
    paths, which makes the solver iteration monotone path by path and lets
    finite-difference estimates difference out the noise.  ``dt`` optionally
    refines the output grid between the knots of the evaluated barrier
    (refinement never changes the law — within-step suprema are sampled
    exactly — it only adds reporting points).
    """

    paths: int = 20000
    dt: float | None = None
    seed: SeedSpec = field(default_factory=lambda: SeedSpec(root=0))
    common_random_numbers: bool = True
    batch: int = 25000

    def stream_purpose(self) -> str:
        if self.common_random_numbers:
            return "gamma"
        return f"gamma-fresh-{next(_fresh_stream_counter)}"


def _eval_grid(f: GridFunction, dt: float | None) -> np.ndarray:
    if dt is None:
        return f.grid.copy()
    extra = np.arange(0.0, f.horizon + dt / 2, dt)
    return np.unique(np.concatenate([f.grid, extra, [f.horizon]]))


def _sup_ensemble(grid: np.ndarray, fvals: np.ndarray, g: DensitySpec,
                  cfg: GammaEvalConfig, probe_index: int | None = None):
    """Simulate sup_{s<=t}(f_s - B_s) over the grid for cfg.paths paths.

    Returns ``(batch_sums, probe)`` where ``batch_sums[b, k]`` is the sum over
    batch ``b``'s paths of ``G(sup at grid[k])`` and ``probe`` (when
    ``probe_index`` is given) is the pair of per-path arrays
    ``(S_left, B)`` at that grid index: the supremum strictly before
    ``grid[probe_index]`` and the Brownian value there.

    The barrier is the piecewise-linear path through ``(grid, fvals)``.  On
    each step the difference ``f - B`` conditioned on its endpoints is a
    driftless Brownian bridge (linear drift is absorbed by the endpoint
    conditioning), so its maximum is sampled exactly; the estimate has *no*
    time-discretization bias for piecewise-linear barriers.  The probe's
    "strictly before" supremum holds the barrier at its left knot over the
    final step, so a jump placed at the probe knot does not leak into it.
    """
    n = len(grid)
    purpose = cfg.stream_purpose()
    n_batches = -(-cfg.paths // cfg.batch)
    batch_sums = np.zeros((n_batches, n))
    probe_s: list[np.ndarray] = []
    probe_b: list[np.ndarray] = []
    for b in range(n_batches):
        size = min(cfg.batch, cfg.paths - b * cfg.batch)
        rng = cfg.seed.generator(purpose, b)
        bm = np.zeros(size)
        sup = np.full(size, fvals[0])
        batch_sums[b, 0] = size * float(g.cumulative(max(fvals[0], 0.0)))
        if probe_index == 0:
            probe_s.append(np.full(size, fvals[0]))
            probe_b.append(np.zeros(size))
        for k in range(1, n):
            dt_k = grid[k] - grid[k - 1]
            eta = rng.standard_normal(size)
            u = rng.random(size)
            bm_new = bm + np.sqrt(dt_k) * eta
            d_prev = fvals[k - 1] - bm
            d_new = fvals[k] - bm_new
            if probe_index is not None and k == probe_index:
                u2 = rng.random(size)
                bmin = sample_bridge_min(bm, bm_new, dt_k, u2)
                probe_s.append(np.maximum(sup, fvals[k - 1] - bmin))
                probe_b.append(bm_new.copy())
            d_max = -sample_bridge_min(-d_prev, -d_new, dt_k, u)
            sup = np.maximum(sup, d_max)
            bm = bm_new
            batch_sums[b, k] = float(np.sum(g.cumulative(np.maximum(sup, 0.0))))
    probe = None
    if probe_index is not None:
        probe = (np.concatenate(probe_s), np.concatenate(probe_b))
    return batch_sums, probe


def eval_gamma(f: GridFunction, g: DensitySpec, cfg: GammaEvalConfig) -> GridFunction:
    """Monte Carlo estimate of ``Gamma(f)_t = E[G(sup_{s<=t}(f_s - B_s))]``.

    ``f`` must be nondecreasing and is read as the piecewise-linear path
    through its knots, for which the estimate carries no discretization bias
    (see ``_sup_ensemble``).  The output is nondecreasing path by path and
    lives on ``f``'s grid, optionally refined by ``cfg.dt`` (refinement only
    adds reporting points — it does not change the path).
    """
    if not f.is_nondecreasing():
        raise ConfigError("barrier candidate must be nondecreasing")
    grid = _eval_grid(f, cfg.dt)
    fvals = f.interp(grid)
    batch_sums, _ = _sup_ensemble(grid, fvals, g, cfg)
    return GridFunction(grid, batch_sums.sum(axis=0) / cfg.paths)


# ---------------------------------------------------------------------------
# physical jump rule


def _first_shortfall(xs: np.ndarray, cum: np.ndarray, tol: float = 0.0) -> float:
    """First x > 0 where ``cum(x) < x`` by linear interpolation; inf if none.

    ``s(x) = cum(x) - x`` starts at 0; the rule returns the first strict
    shortfall.  If the first interior grid point is already short, the root
    collapses to 0 (no jump).
    """
    s = cum - xs
    neg = np.nonzero(s < -tol)[0]
    neg = neg[neg > 0] if len(neg) else neg
    if len(neg) == 0:
        return np.inf
    i = int(neg[0])
    s0, s1 = s[i - 1], s[i]
    if s0 <= 0:
        return float(xs[i - 1])
    return float(xs[i - 1] + s0 * (xs[i] - xs[i - 1]) / (s0 - s1))


def physical_jump_size(density, window: float = 50.0, step: float = 1e-3) -> float:
    """Barrier jump demanded by a mass profile: ``inf {x > 0 : mass[0,x] < x}``.

    ``density`` is a density spec (jump of the barrier at time 0) or a
    ``SubBarrierDensity`` (jump out of an estimated pre-jump profile).
    Returns 0.0 when mass is immediately short (no jump), a positive size
    when the shortfall first appears at finite depth, and ``inf`` when the
    profile covers the identity on the whole scanned window (explosion
    marker — enlarge the window to distinguish a merely huge jump).
    """
    if isinstance(density, SubBarrierDensity):
        return _first_shortfall(density.offsets, density.cumulative)
    xs = np.arange(0.0, window + step / 2, step)
    breaks = getattr(density, "xs", None)
    if breaks is not None:
        xs = np.unique(np.concatenate([xs, np.asarray(breaks, dtype=float)]))
        xs = xs[xs <= window]
    if hasattr(density, "ladder"):
        xs = np.unique(np.concatenate([xs, density.ladder(window)]))
        xs = xs[xs <= window]
    return _first_shortfall(xs, np.asarray(density.cumulative(xs), dtype=float))


# ---------------------------------------------------------------------------
# sub-barrier profile


@dataclass
class SubBarrierDensity:
    """Estimated surviving-mass profile just above the barrier at one time.

    ``offsets`` are distances above the barrier; ``cumulative[j]`` estimates
    the surviving mass in ``(barrier, barrier + offsets[j]]`` and ``density``
    is its difference quotient, clamped by the a-priori Gaussian envelope
    ``bound * Phi((barrier + offset)/sqrt(t))``.  ``side`` records whether the
    profile is a left limit (pre-jump) or the current value.
    """

    t: float
    barrier: float
    offsets: np.ndarray
    cumulative: np.ndarray
    density: np.ndarray
    bandwidth: float
    paths: int
    side: str = "left"


def estimate_subbarrier_density(f: GridFunction, g: DensitySpec, cfg: GammaEvalConfig,
                                t: float, x_max: float, dx: float,
                                side: str = "left") -> SubBarrierDensity:
    """Monte Carlo profile of surviving mass above the barrier at time ``t``.

    Per path, the surviving initial mass with current position in
    ``(barrier, barrier + y]`` is ``(G(barrier + y - B_t) - G(s*))_+`` with
    ``s* = max(sup-so-far, barrier - B_t)``; averaging over paths gives the
    cumulative profile exactly (no histogram).  ``side="left"`` evaluates the
    pre-jump limit at a grid time (barrier at its left value, supremum over
    s < t), which is what the jump rule needs.
    """
    if side not in ("left", "right"):
        raise ConfigError("side must be 'left' or 'right'")
    k = int(np.searchsorted(f.grid, t))
    if k >= len(f.grid) or f.grid[k] != t:
        raise ConfigError(f"time {t} is not on the barrier grid")
    grid = f.grid[: k + 1]
    fvals = f.values[: k + 1]
    _, probe = _sup_ensemble(grid, fvals, g, cfg, probe_index=k)
    s_left, b_at = probe
    barrier = float(fvals[k - 1] if (side == "left" and k > 0) else fvals[k])
    if side == "right":
        s_left = np.maximum(s_left, fvals[k] - b_at)
    s_star = np.maximum(s_left, barrier - b_at)
    lower = np.asarray(g.cumulative(np.maximum(s_star, 0.0)), dtype=float)
    offsets = np.arange(0.0, x_max + dx / 2, dx)
    cum = np.empty_like(offsets)
    for j, y in enumerate(offsets):
        upper = np.asarray(g.cumulative(np.maximum(barrier + y - b_at, 0.0)), dtype=float)
        cum[j] = float(np.mean(np.maximum(upper - lower, 0.0)))
    dens = np.gradient(cum, offsets) if len(offsets) > 1 else np.zeros_like(cum)
    if t > 0:
        envelope = g.bound * gauss_cdf((barrier + offsets) / np.sqrt(t))
        dens = np.minimum(dens, envelope)
    return SubBarrierDensity(t=float(t), barrier=barrier, offsets=offsets,
                             cumulative=cum, density=dens, bandwidth=float(dx),
                             paths=cfg.paths, side=side)


# ---------------------------------------------------------------------------
# minimal solution


@dataclass
class JumpRecord:
    """One macroscopic barrier jump found by the solver."""

    index: int            # grid index of the post-jump value
    time: float
    before: float
    after: float
    raw_size: float       # increment of the converged iterate over one grid step
    physical_size: float | None = None  # jump rule applied to the pre-jump profile


@dataclass
class MinimalSolution:
    """Result of the monotone iteration for the minimal fixed point."""

    path: GridFunction
    iterations: int
    residual: float
    converged: bool
    exploded: bool = False
    explosion_time: float | None = None
    jumps: list[JumpRecord] = field(default_factory=list)


def solve_minimal(g: DensitySpec, grid: np.ndarray, cfg: GammaEvalConfig,
                  tol: float | None = None, max_iter: int = 200,
                  explosion_cap: float | None = None,
                  census_physical: bool = True) -> MinimalSolution:
    """Minimal barrier solution by monotone iteration from 0.

    Iterates ``Lambda <- Gamma(Lambda)`` on the given grid with common random
    numbers, so the sequence is nondecreasing *path by path* and converges to
    the minimal fixed point of the Monte Carlo operator from below.  Stops
    when the sup-norm increment falls below ``tol`` (default
    ``1e-4 * max(1, horizon)``) or ``max_iter`` is hit (the best iterate is
    returned flagged ``converged=False``).

    With an ``explosion_cap``, values crossing the cap mark the path as
    exploding; iteration continues (values clipped just above the cap) until
    the first-crossing time stabilizes, and the first crossing of the final
    iterate is reported as the explosion time.  Without a cap, runaway growth
    raises ``NumericalError`` asking for one.

    Macroscopic jumps (single-step increments far above the typical crawl)
    are reported in a census; with ``census_physical`` the pre-jump
    sub-barrier profile is re-simulated and the jump rule's size is attached
    to each record for cross-checking.  The returned path is the raw
    monotone iterate — a certified approximation from below — not mutated by
    the census.
    """
    grid = np.asarray(grid, dtype=float)
    cfg_eval = replace(cfg, dt=None)
    if tol is None:
        tol = 1e-4 * max(1.0, grid[-1])
    lam = np.zeros_like(grid)
    f = GridFunction(grid, lam)
    runaway_guard = 1e12 if explosion_cap is None else explosion_cap
    exploded = False
    first_cross = len(grid)
    stable_for = 0
    iterations = 0
    residual = np.inf
    for iterations in range(1, max_iter + 1):
        new = eval_gamma(GridFunction(grid, lam), g, cfg_eval).values
        if np.any(new > runaway_guard):
            if explosion_cap is None:
                raise NumericalError(
                    "barrier iteration exceeded 1e12 without an explosion cap; "
                    "set explosion_cap to ask for the explosion time instead")
            exploded = True
            cross = int(np.argmax(new > explosion_cap))
            stable_for = stable_for + 1 if cross == first_cross else 0
            first_cross = min(first_cross, cross)
            np.minimum(new, explosion_cap * 1.25, out=new)
        residual = float(np.max(new - lam))
        lam = new
        if exploded:
            if stable_for >= 5:
                break
        elif residual < tol:
            break
    path = GridFunction(grid, lam)
    jumps = _jump_census(path, g, cfg_eval, tol, census_physical and not exploded)
    return MinimalSolution(
        path=path, iterations=iterations, residual=residual,
        converged=(not exploded) and residual < tol,
        exploded=exploded,
        explosion_time=float(grid[first_cross]) if exploded else None,
        jumps=jumps)


def _jump_census(path: GridFunction, g: DensitySpec, cfg: GammaEvalConfig,
                 tol: float, want_physical: bool) -> list[JumpRecord]:
    diffs = np.diff(path.values)
    pos = diffs[diffs > 0]
    if len(pos) == 0:
        return []
    crawl = float(np.median(pos))
    floor = max(5.0 * crawl, 20.0 * tol)
    records = []
    for i in np.nonzero(diffs > floor)[0]:
        rec = JumpRecord(index=int(i + 1), time=float(path.grid[i + 1]),
                         before=float(path.values[i]), after=float(path.values[i + 1]),
                         raw_size=float(diffs[i]))
        if want_physical:
            try:
                prof = estimate_subbarrier_density(
                    path, g, cfg, t=float(path.grid[i + 1]),
                    x_max=2.5 * rec.raw_size + 1.0,
                    dx=max(rec.raw_size / 400.0, 1e-4), side="left")
                rec.physical_size = physical_jump_size(prof)
            except NumericalError:
                rec.physical_size = None
        records.append(rec)
    return records


# ---------------------------------------------------------------------------
# Laplace identity


def laplace_one_minus_g(g: DensitySpec, lam: float) -> float:
    """``integral_0^inf (1 - g(x)) e^{-lam x} dx`` (exact per family)."""
    return deficit_transform(g, lam)


@dataclass
class LaplaceResidual:
    lhs: float
    rhs: float

    @property
    def abs(self) -> float:
        return abs(self.lhs - self.rhs)

    @property
    def rel(self) -> float:
        scale = max(abs(self.lhs), abs(self.rhs), 1e-300)
        return self.abs / scale


def _exp_time_integral(path: GridFunction, lam: float) -> float:
    """``integral_0^T exp(-lam*Lambda_s - lam^2 s/2) ds`` with Lambda piecewise linear.

    Each segment integrates in closed form: with slope ``B`` over
    ``[t0, t1]``, the integrand is ``exp(-lam*Lambda(t0)) * exp(-r (s - t0))``
    for ``r = lam*B + lam^2/2 > 0``.  Piecewise-linear interpolation of the
    barrier is second-order accurate and exact for linear stretches, unlike a
    step representation whose one-sided error would dominate tight residuals.
    """
    grid, vals = path.grid, path.values
    t0, t1 = grid[:-1], grid[1:]
    v0, v1 = vals[:-1], vals[1:]
    slope = (v1 - v0) / (t1 - t0)
    r = lam * slope + lam * lam / 2.0
    head = np.exp(-lam * v0 - lam * lam * t0 / 2.0)
    seg = head * (1.0 - np.exp(-r * (t1 - t0))) / r
    return float(np.sum(seg))


def laplace_residual(path: GridFunction, g: DensitySpec, lam: float,
                     mode: str = "infinite_horizon", t: float | None = None,
                     density: SubBarrierDensity | None = None,
                     jump_densities: dict[int, SubBarrierDensity] | None = None,
                     jump_floor: float | None = None) -> LaplaceResidual:
    """Residual of the exact transform identity satisfied by the solution.

    infinite_horizon:  ``integral (1-g) e^{-lam x} dx  =
    (lam/2) integral_0^inf exp(-lam*Lambda_s - lam^2 s/2) ds`` for continuous
    solutions.  The path must extend far enough that the integrand's tail is
    below 1e-8 (otherwise ConfigError reports the horizon needed), and must
    be jump-free (jumpy solutions need the finite-t form with profiles).

    finite_t: mass balance in transform space up to time ``t``:
    ``m_0 - e^{-lam^2 t/2} m_t  =  integral_0^t e^{-lam Lambda_s - lam^2 s/2}
    dLambda_s(cont) + sum over jumps of the transform of the swallowed
    profile``.  ``m_t`` comes from the supplied ``density`` profile;
    ``jump_densities`` maps jump grid indices to pre-jump profiles.
    """
    if lam <= 0:
        raise ConfigError("transform parameter must be positive")
    deficit = laplace_one_minus_g(g, lam)
    diffs = np.diff(path.values)
    pos = diffs[diffs > 0]
    if jump_floor is None:
        crawl = float(np.median(pos)) if len(pos) else 0.0
        jump_floor = max(8.0 * crawl, 1e-6 * max(1.0, path.values[-1]), 1e-12)
    jump_idx = np.nonzero(diffs > jump_floor)[0] + 1

    if mode == "infinite_horizon":
        tail = lam * path.values[-1] + lam * lam * path.horizon / 2.0
        if tail < 18.4:
            slope = max(path.values[-1] / max(path.horizon, 1e-12), 1e-12)
            need = 18.4 / (lam * slope + lam * lam / 2.0)
            raise ConfigError(
                f"horizon {path.horizon:g} too short for lam={lam:g}: integrand tail "
                f"is exp(-{tail:.2f}); extend the path to roughly t={need:.1f}")
        if len(jump_idx):
            raise ConfigError("path has jumps; use mode='finite_t' with profiles")
        rhs = 0.5 * lam * _exp_time_integral(path, lam)
        return LaplaceResidual(lhs=deficit, rhs=rhs)

    if mode != "finite_t":
        raise ConfigError(f"unknown mode {mode!r}")
    if t is None or density is None:
        raise ConfigError("finite_t mode needs t and a sub-barrier density estimate")
    if not np.any(np.isclose(path.grid, t, rtol=0, atol=1e-12)):
        raise ConfigError(f"t={t} must be a grid point of the path")
    m0 = 1.0 / lam - deficit
    lam_t = float(path.at(t))
    trans_profile = _profile_transform(density, lam)
    m_t = np.exp(-lam * lam_t) * trans_profile
    lhs = m0 - np.exp(-lam * lam * t / 2.0) * m_t

    jump_idx = jump_idx[path.grid[jump_idx] <= t + 1e-15]
    rhs = 0.0
    grid, vals = path.grid, path.values
    keep = grid <= t + 1e-15
    for i in np.nonzero(keep[1:])[0] + 1:
        dv = vals[i] - vals[i - 1]
        if i in jump_idx:
            continue
        s_mid = 0.5 * (grid[i] + grid[i - 1])
        v_mid = 0.5 * (vals[i] + vals[i - 1])
        rhs += np.exp(-lam * v_mid - lam * lam * s_mid / 2.0) * dv
    if len(jump_idx) and jump_densities is None:
        raise ConfigError("path jumps before t; supply jump_densities for the jump terms")
    for i in jump_idx:
        prof = jump_densities.get(int(i))
        if prof is None:
            raise ConfigError(f"no pre-jump profile supplied for jump at grid index {i}")
        size = vals[i] - vals[i - 1]
        swallowed = _profile_transform(prof, lam, y_max=size)
        rhs += np.exp(-lam * lam * grid[i] / 2.0 - lam * vals[i - 1]) * swallowed
    return LaplaceResidual(lhs=float(lhs), rhs=float(rhs))


def _profile_transform(density: SubBarrierDensity, lam: float,
                       y_max: float | None = None) -> float:
    """``integral_0^{y_max} V(y) e^{-lam y} dy`` from the cumulative profile.

    Uses the low-variance cumulative via integration by parts:
    ``integral V e^{-lam y} = nu(Y) e^{-lam Y} + lam integral nu(y) e^{-lam y} dy``.
    """
    ys = density.offsets
    nu = density.cumulative
    if y_max is not None:
        keep = ys <= y_max + 1e-15
        ys, nu = ys[keep], nu[keep]
        if len(ys) == 0 or ys[-1] < y_max - 1e-9:
            raise ConfigError("profile window shorter than the jump size")
    boundary = nu[-1] * np.exp(-lam * ys[-1])
    body = lam * np.trapezoid(nu * np.exp(-lam * ys), ys)
    return float(boundary + body)


# ---------------------------------------------------------------------------
# contraction and speed


@dataclass
class ContractionEstimate:
    kappa: float
    se: float
    eps: float
    horizon: float
    warn_supercritical: bool


def estimate_contraction(g: DensitySpec, path: GridFunction, eps: float,
                         horizon: float, cfg: GammaEvalConfig) -> ContractionEstimate:
    """Empirical Lipschitz ratio of Gamma at ``path``:

        kappa = sup_{t <= horizon} (Gamma(path + eps)_t - Gamma(path)_t) / eps,

    with both evaluations on the *same* Brownian paths, so the Monte Carlo
    noise differences out and the per-path increment is bounded by the local
    density level (for Constant(a) the ratio is <= a pathwise).  In the
    strictly subcritical regime (g <= 1 with a strict prefix near 0, and eps
    below half that prefix) the theory guarantees kappa < 1, which is what
    makes the solution unique and the particle fluctuations controllable; a
    density failing that check sets ``warn_supercritical`` (the ratio is
    still returned).  The standard error of the sup statistic comes from a
    leave-one-out jackknife over path batches.
    """
    if eps <= 0:
        raise ConfigError("eps must be positive")
    report = check_conditions(g, x_max=40.0, step=0.005)
    warn = report.subcritical.status != "holds"
    if not warn:
        prefix = report.subcritical.detail.get("prefix", 0.0)
        warn = eps > prefix / 2.0 + 1e-12
    keep = path.grid <= horizon + 1e-15
    grid = path.grid[keep]
    base = path.values[keep]
    # re-batch so the jackknife has enough blocks; both evaluations share it
    cfg2 = replace(cfg, batch=max(500, min(cfg.batch, cfg.paths // 8)))
    sums_up, _ = _sup_ensemble(grid, base + eps, g, cfg2)
    sums_dn, _ = _sup_ensemble(grid, base, g, cfg2)
    diff = sums_up - sums_dn
    counts = np.minimum(cfg2.batch, cfg2.paths - np.arange(diff.shape[0]) * cfg2.batch)
    total = diff.sum(axis=0)
    kappa_hat = float(np.max(total / cfg2.paths / eps))
    if diff.shape[0] > 1:
        jack = np.asarray([
            np.max((total - diff[b]) / (cfg2.paths - counts[b]) / eps)
            for b in range(diff.shape[0])
        ])
        nb = len(jack)
        se = float(np.sqrt((nb - 1) / nb * np.sum((jack - jack.mean()) ** 2)))
    else:
        se = float("nan")
    return ContractionEstimate(kappa=kappa_hat, se=se, eps=eps,
                               horizon=horizon, warn_supercritical=warn)


@dataclass
class SpeedVerdict:
    regime: str               # "linear" | "sqrt" | "not_applicable"
    rate: float | None        # barrier ~ rate * t  or  rate * sqrt(t)
    reason: str


def asymptotic_speed(g: DensitySpec) -> SpeedVerdict:
    """Long-run barrier law from the density's deficit structure.

    If the total deficit ``I = integral (1 - g)`` is finite and positive the
    barrier is asymptotically linear with rate ``1/(2 I)`` (the travelling
    wave pins the constant: g = 1 - e^{-v x} has I = 1/v and speed v/2).
    Otherwise, if ``g`` has a limit ``a < 1`` at infinity, the barrier is
    diffusive with rate ``k_alpha(a)`` (0 for a = 0).  Densities exceeding 1
    in the tail, or with no tail limit, are out of scope here.
    """
    d = g.deficit_integral()
    if np.isfinite(d) and d > 1e-12:
        return SpeedVerdict("linear", 1.0 / (2.0 * d),
                            f"finite total deficit {d:g}")
    tail = g.tail_limit()
    if tail is not None and tail < 1.0 - 1e-9:
        return SpeedVerdict("sqrt", k_alpha(tail),
                            f"tail density level {tail:g} < 1")
    if tail is None:
        return SpeedVerdict("not_applicable", None, "density has no tail limit")
    return SpeedVerdict("not_applicable", None,
                        f"tail level {tail:g} >= 1 with non-positive deficit")


# ---------------------------------------------------------------------------
# explosion


def detect_explosion(obj, cap: float, g: DensitySpec | None = None,
                     window: float = 50.0) -> float | None:
    """First time the barrier exceeds ``cap``; 0.0 if the initial density
    already forces an unbounded jump; None if no explosion is seen.

    ``obj`` may be a GridFunction, a MinimalSolution, or an event log from
    the particle module (anything with ``.barrier_path()``).
    """
    if g is not None and np.isinf(physical_jump_size(g, window=window)):
        return 0.0
    if isinstance(obj, MinimalSolution):
        if obj.exploded:
            return obj.explosion_time
        obj = obj.path
    if getattr(obj, "terminal", None) == "exploded":
        return float(obj.terminal_time)
    if hasattr(obj, "barrier_path"):
        obj = obj.barrier_path()
    above = obj.values > cap
    if np.any(above):
        return float(obj.grid[np.argmax(above)])
    return None
