"""Event-level simulation of Brownian particles absorbed by a climbing barrier.

``rate_scale * g`` Poisson-many particles start on ``[0, window)`` and diffuse
as independent Brownian motions.  A barrier starts at 0; whenever a particle
touches it, the barrier instantly climbs by ``jump_unit`` per absorbed
particle, sweeping up every particle it reaches, until the self-consistent
cascade rule is satisfied:

    k = min { k >= 1 : #( particles in [barrier, barrier + k*jump_unit] ) <= k }.

Two schemes:

* ``run_exact`` — event-driven and unbiased: exact first-passage draws give
  the next touch time, the toucher is placed exactly on the barrier, and all
  other particles are moved to the event time by *exact* sampling of the
  Brownian kernel conditioned on not touching (inverse-CDF of the killed
  transition, no time discretization anywhere).

* ``run_euler`` — fixed steps of ``dt`` with Brownian-bridge crossing
  corrections inside each step; crossers are gathered at the barrier and one
  cascade is resolved per step.  Bias is O(dt) purely from the barrier
  feedback lag (the bridge correction removes the crossing-detection bias).

The spatial window is finite but safe: it always covers the barrier plus
``truncation_margin * sqrt(time left)``, growing on demand; particles added
on growth are diffused to the current time conditioned on avoiding the
current barrier level (the ignored staircase history contributes at most the
Gaussian tail ``Phi(-margin)`` per particle, ~3e-5 at the default margin 4).

``run_fixed_barrier`` runs the same dynamics against a *prescribed* barrier
(no feedback) and returns the absorbed fraction over time; against a linear
barrier the exact scheme reduces to one inverse-Gaussian draw per particle.
``rescale_to_xi`` maps an event log of the small-jump family (Constant(a)
density, jump unit 1/N) onto the unit-jump system via the exact space-time
scaling ``xi(N^2 a^2 t) = N * a * barrier(t)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from .densities import Constant, DensitySpec
from .errors import ConfigError, NumericalError
from .mean_field import GridFunction
from .sampling import SeedSpec, extend_window, sample_ppp

# hard ceiling on particles injected by a single window growth: a request past
# this is a blow-up trying to allocate the whole half-line, not a simulation
_MAX_INJECTION = 5_000_000

__all__ = [
    "SimConfig",
    "SimEvent",
    "EventLog",
    "LinearBarrier",
    "FixedBarrierResult",
    "resolve_cascade",
    "run_exact",
    "run_euler",
    "run_fixed_barrier",
    "rescale_to_xi",
    "default_window",
]


@dataclass(frozen=True)
class LinearBarrier:
    """Prescribed barrier ``slope * t + intercept`` (no feedback)."""

    slope: float
    intercept: float = 0.0

    def at(self, t):
        return self.slope * np.asarray(t, dtype=float) + self.intercept


@dataclass(frozen=True)
class SimConfig:
    """One particle run: density, scale N, jump unit a, horizon, scheme, seed.

    ``window`` overrides the initial spatial truncation (otherwise a bound of
    the barrier's reach plus the diffusive margin is used, see
    ``default_window``).  ``explosion_cap`` turns runaway sweeps into a clean
    ``exploded`` terminal instead of endless window growth.  ``draw_mode``
    selects how Euler noise is indexed: ``"alive"`` (default, draws only for
    live particles) or ``"slots"`` (draws for every initial slot each step,
    so runs differing only in ``jump_unit`` consume identical noise — used by
    coupling tests).
    """

    density: DensitySpec
    rate_scale: float
    jump_unit: float
    horizon: float
    seed: SeedSpec
    scheme: str = "exact"
    dt: float | None = None
    truncation_margin: float = 4.0
    window: float | None = None
    explosion_cap: float | None = None
    max_window_growth: int = 200
    draw_mode: str = "alive"

    def __post_init__(self):
        if self.rate_scale <= 0 or self.jump_unit <= 0 or self.horizon <= 0:
            raise ConfigError("rate_scale, jump_unit and horizon must be positive")
        if self.scheme not in ("exact", "euler"):
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if self.scheme == "euler" and (self.dt is None or self.dt <= 0):
            raise ConfigError("euler scheme needs a positive dt")
        if self.truncation_margin < 3.0:
            raise ConfigError("truncation margin must be >= 3")
        if self.draw_mode not in ("alive", "slots"):
            raise ConfigError(f"unknown draw_mode {self.draw_mode!r}")


@dataclass
class SimEvent:
    time: float
    barrier_before: float
    k: int
    absorbed: np.ndarray  # particle ids swallowed in this cascade

    def barrier_after(self, jump_unit: float) -> float:
        return self.barrier_before + self.k * jump_unit


@dataclass
class EventLog:
    config: SimConfig
    events: list[SimEvent]
    terminal: str          # "completed" | "exploded"
    terminal_time: float
    n_initial: int
    final_window: float

    @property
    def final_barrier(self) -> float:
        return self.config.jump_unit * sum(e.k for e in self.events)

    def barrier_path(self) -> GridFunction:
        """Cadlag step path of the barrier on [0, terminal time]."""
        a = self.config.jump_unit
        times = [0.0]
        vals = [0.0]
        level = 0.0
        for e in self.events:
            level += a * e.k
            if e.time == times[-1]:
                vals[-1] = level
            else:
                times.append(e.time)
                vals.append(level)
        if self.terminal_time > times[-1]:
            times.append(self.terminal_time)
            vals.append(level)
        return GridFunction(np.asarray(times), np.asarray(vals))

    def barrier_at(self, t):
        return self.barrier_path().at(t)


def default_window(config: SimConfig) -> float:
    """Initial window: barrier-reach guess + diffusive margin.

    Uses a crude linear bound on the barrier (speed ``max(1, density bound)``
    from a unit offset) plus ``margin * sqrt(T)``.  Any underestimate is
    corrected at runtime by window growth; this is only the starting size.
    """
    c = max(1.0, config.density.bound)
    return c * config.horizon + 1.0 + config.truncation_margin * np.sqrt(config.horizon)


def resolve_cascade(positions: np.ndarray, barrier: float, jump_unit: float) -> int:
    """Size of the self-consistent cascade triggered at ``barrier``.

    ``positions`` are the current locations of live particles (the trigger
    sits exactly at the barrier).  Returns the smallest ``k >= 1`` with
    ``#(positions <= barrier + k*jump_unit) <= k``.  The count is
    nondecreasing in ``k``, so the minimal solution is found by jumping
    ``k <- count(k)`` until it stabilizes; at most ``len(positions)``.
    """
    rel = np.sort(np.asarray(positions, dtype=float) - barrier)
    k = 1
    while True:
        count = int(np.searchsorted(rel, k * jump_unit, side="right"))
        if count <= k:
            return k
        k = count


def _killed_positions(gaps: np.ndarray, dt: float, rng: np.random.Generator) -> np.ndarray:
    """Exact gaps after time ``dt`` conditioned on never touching 0.

    The killed transition density from gap ``g`` is
    ``phi_s(y - g) - phi_s(y + g)`` (image charge), ``s = sqrt(dt)``.  Its CDF
    is inverted per particle: one uniform, then a bracketed Newton/bisection
    hybrid on

        h(y) = Phi((y-g)/s) - Phi((y+g)/s) + (1-u) * P_surv

    which increases from -u*P_surv at 0 to (1-u)*P_surv at infinity, so the
    root is unique.  The image-free probit quantile is a guaranteed
    under-estimate and seeds the lower bracket; Newton steps are accepted
    only while they stay inside the bracket, falling back to bisection, so
    the solve cannot stall however close the particle sits to the barrier.
    Cost is O(1) per particle — no rejection storms.
    """
    if dt <= 0 or len(gaps) == 0:
        return gaps.copy()
    s = np.sqrt(dt)
    z0 = gaps / s
    a0 = ndtr(-z0)
    p_surv = 1.0 - 2.0 * a0
    u = rng.random(len(gaps))
    q = np.clip(a0 + u * p_surv, 1e-300, 1.0 - 1e-16)
    shift = (1.0 - u) * p_surv

    def h_at(y):
        return (ndtr((y - gaps) / s) - ndtr((y + gaps) / s)) + shift

    lo = np.maximum(gaps + s * ndtri(q), 0.0)  # image-free guess, always <= root
    hi = lo + s
    for _ in range(80):  # expand until the bracket holds the root
        short = h_at(hi) < 0.0
        if not np.any(short):
            break
        hi = np.where(short, 2.0 * hi - lo + s, hi)
    y = 0.5 * (lo + hi)
    for _ in range(80):
        h = h_at(y)
        lo = np.where(h < 0.0, y, lo)
        hi = np.where(h < 0.0, hi, y)
        hp = (np.exp(-0.5 * ((y - gaps) / s) ** 2)
              - np.exp(-0.5 * ((y + gaps) / s) ** 2)) / (s * np.sqrt(2 * np.pi))
        newton = y - h / np.maximum(hp, 1e-300)
        inside = (newton > lo) & (newton < hi)
        y = np.where(inside, newton, 0.5 * (lo + hi))
        if np.all(hi - lo <= 1e-12 * (s + hi)):
            break
    return y


class _Frame:
    """Live state shared by the two feedback schemes: cloud, window, barrier."""

    def __init__(self, config: SimConfig):
        self.config = config
        self.window = config.window if config.window is not None else default_window(config)
        self.cloud = sample_ppp(config.density, config.rate_scale, self.window, config.seed)
        self.pos = self.cloud.points.copy()
        self.ids = np.arange(len(self.pos))
        self.next_id = len(self.pos)
        self.n_initial = len(self.pos)
        self.barrier = 0.0
        self.growths = 0
        self.inject_rng = config.seed.generator("window-growth")

    def margin_now(self, t: float) -> float:
        left = max(self.config.horizon - t, 0.0)
        return self.config.truncation_margin * np.sqrt(left)

    def ensure_window(self, needed: float, t: float) -> bool:
        """Grow the window to at least ``needed``; inject new particles at time t.

        Returns True if particles were added.  New particles are diffused from
        their initial positions to the current time, conditioned on avoiding
        the current barrier level.
        """
        if needed <= self.window:
            return False
        self.growths += 1
        if self.growths > self.config.max_window_growth:
            raise NumericalError(
                f"window grew {self.growths} times (barrier {self.barrier:g}); "
                "the density likely explodes — set explosion_cap")
        target = max(needed, self.window * 1.5)
        projected = self.config.rate_scale * float(
            self.config.density.cumulative(np.array([target]))[0]
            - self.config.density.cumulative(np.array([self.window]))[0])
        if projected > _MAX_INJECTION:
            raise NumericalError(
                f"window growth to {target:g} would inject ~{projected:.3g} "
                f"particles (barrier {self.barrier:g}); the run is exploding "
                "— set explosion_cap")
        self.cloud, added = extend_window(self.cloud, self.config.density, target,
                                          self.config.seed)
        self.window = self.cloud.window
        if len(added) == 0:
            return False
        if t > 0:
            gaps = _killed_positions(added - self.barrier, t, self.inject_rng)
            newpos = self.barrier + gaps
        else:
            newpos = added.copy()
        self.pos = np.concatenate([self.pos, newpos])
        self.ids = np.concatenate([self.ids, np.arange(self.next_id,
                                                       self.next_id + len(added))])
        self.next_id += len(added)
        self.n_initial += len(added)
        return True

    def cascade(self, t: float) -> SimEvent:
        """Resolve one cascade at the current barrier (trigger(s) already at it)."""
        a = self.config.jump_unit
        while True:
            k = resolve_cascade(self.pos, self.barrier, a)
            reach = self.barrier + k * a
            if reach + self.margin_now(t) <= self.window:
                break
            cap = self.config.explosion_cap
            if cap is not None and reach > cap:
                break  # beyond the cap the exact sweep size no longer matters
            self.ensure_window(reach + self.margin_now(t) + 1.0, t)
        absorbed = self.pos <= self.barrier + k * a + 0.0
        event = SimEvent(time=t, barrier_before=self.barrier, k=k,
                         absorbed=self.ids[absorbed])
        self.barrier += k * a
        self.pos = self.pos[~absorbed]
        self.ids = self.ids[~absorbed]
        return event


def run_exact(config: SimConfig) -> EventLog:
    """Unbiased event-driven simulation (see module docstring)."""
    if config.scheme != "exact":
        raise ConfigError("run_exact requires scheme='exact'")
    frame = _Frame(config)
    hit_rng = config.seed.generator("hit-times")
    move_rng = config.seed.generator("killed-moves")
    events: list[SimEvent] = []
    t = 0.0
    terminal = "completed"
    terminal_time = config.horizon
    frame.ensure_window(frame.barrier + frame.margin_now(0.0), 0.0)
    while len(frame.pos) > 0:
        gaps = frame.pos - frame.barrier
        z = hit_rng.standard_normal(len(gaps))
        z = np.where(z == 0.0, np.finfo(float).tiny, z)
        taus = (gaps / np.abs(z)) ** 2
        j = int(np.argmin(taus))
        dt_e = float(taus[j])
        if t + dt_e > config.horizon:
            break
        t += dt_e
        if dt_e > 0:
            surv = np.ones(len(frame.pos), dtype=bool)
            surv[j] = False
            new_gaps = _killed_positions(gaps[surv], dt_e, move_rng)
            frame.pos[surv] = frame.barrier + new_gaps
        frame.pos[j] = frame.barrier
        events.append(frame.cascade(t))
        cap = config.explosion_cap
        if cap is not None and frame.barrier > cap:
            terminal = "exploded"
            terminal_time = t
            break
        frame.ensure_window(frame.barrier + frame.margin_now(t), t)
    return EventLog(config=config, events=events, terminal=terminal,
                    terminal_time=terminal_time, n_initial=frame.n_initial,
                    final_window=frame.window)


def run_euler(config: SimConfig) -> EventLog:
    """Fixed-step simulation with bridge-corrected crossings (see module docstring)."""
    if config.scheme != "euler":
        raise ConfigError("run_euler requires scheme='euler' (and a dt)")
    frame = _Frame(config)
    step_rng = config.seed.generator("euler-steps")
    h = float(config.dt)
    n_steps = max(1, int(np.ceil(config.horizon / h - 1e-9)))
    events: list[SimEvent] = []
    terminal = "completed"
    terminal_time = config.horizon
    slots = config.draw_mode == "slots"
    n_slots = frame.next_id  # draws are indexed by particle id
    for step in range(n_steps):
        t0 = step * h
        t1 = min((step + 1) * h, config.horizon)
        dt_k = t1 - t0
        frame.ensure_window(frame.barrier + frame.margin_now(t0), t0)
        if slots and frame.next_id > n_slots:
            raise ConfigError(
                "draw_mode='slots' cannot survive window growth; "
                "set a fixed window large enough for the whole run")
        n = len(frame.pos)
        if n == 0:
            break
        if slots:
            eta = step_rng.standard_normal(n_slots)[frame.ids]
            u = step_rng.random(n_slots)[frame.ids]
        else:
            eta = step_rng.standard_normal(n)
            u = step_rng.random(n)
        w = frame.pos
        y = w + np.sqrt(dt_k) * eta
        g0 = w - frame.barrier
        g1 = y - frame.barrier
        with np.errstate(over="ignore"):
            cross = (g1 <= 0) | (u < np.exp(np.minimum(-2.0 * g0 * g1 / dt_k, 0.0)))
        frame.pos = np.where(cross, frame.barrier, y)
        if np.any(cross):
            events.append(frame.cascade(t1))
            cap = config.explosion_cap
            if cap is not None and frame.barrier > cap:
                terminal = "exploded"
                terminal_time = t1
                break
    return EventLog(config=config, events=events, terminal=terminal,
                    terminal_time=terminal_time, n_initial=frame.n_initial,
                    final_window=frame.window)


@dataclass
class FixedBarrierResult:
    """Absorption by a prescribed barrier: cumulative absorbed fraction on a grid.

    ``absorbed_fraction[i]`` is ``#absorbed by grid[i]`` divided by
    ``rate_scale`` — the finite-N analogue of the barrier functional
    evaluated on the prescribed path.
    """

    grid: np.ndarray
    absorbed_fraction: np.ndarray
    n_initial: int
    rate_scale: float

    def absorbed_path(self) -> GridFunction:
        return GridFunction(self.grid, self.absorbed_fraction)

    @property
    def total(self) -> float:
        return float(self.absorbed_fraction[-1])


def run_fixed_barrier(density: DensitySpec, rate_scale: float, barrier,
                      horizon: float, seed: SeedSpec, *, scheme: str = "exact",
                      dt: float | None = None, window: float | None = None,
                      truncation_margin: float = 4.0, out_points: int = 201,
                      draw_mode: str = "alive") -> FixedBarrierResult:
    """Absorb the particle cloud on a *prescribed* barrier (no feedback).

    ``barrier`` is a ``LinearBarrier`` or a ``GridFunction`` (cadlag step
    path).  Exact scheme: a linear barrier uses one first-passage draw per
    particle (inverse-Gaussian for positive slope); a step path is handled
    interval by interval with exact hit probabilities and exact killed-kernel
    moves, so the absorbed counts at the path's own grid points are unbiased.
    Euler scheme: fixed ``dt`` steps with bridge corrections against the
    barrier value at the left endpoint of each step.

    ``draw_mode='slots'`` (euler only) indexes the per-step draws by initial
    particle slot from the same stream a feedback run reads, so a
    ``run_euler`` call with the same seed, window and dt is pathwise coupled
    to this one — the comparison arguments ("dominated by the prescribed
    line") can then be checked replica by replica.  Requires an explicit
    ``window`` matching the feedback run's.

    The spatial window defaults to the barrier's reach plus
    ``truncation_margin * sqrt(horizon)``; the neglected mass beyond it is at
    most ``Phi(-margin)`` per unit of rate.
    """
    from .closed_form import sample_level_hit, sample_line_hit

    if horizon <= 0 or rate_scale <= 0:
        raise ConfigError("horizon and rate_scale must be positive")
    if draw_mode == "slots" and window is None:
        raise ConfigError("draw_mode='slots' needs an explicit window")
    if isinstance(barrier, LinearBarrier):
        reach = barrier.at(horizon)
    elif isinstance(barrier, GridFunction):
        if not barrier.is_nondecreasing():
            raise ConfigError("prescribed barrier must be nondecreasing")
        reach = float(barrier.values[-1])
    else:
        raise ConfigError("barrier must be a LinearBarrier or a GridFunction")
    if window is None:
        # barriers below the cloud may produce a non-positive default; keep a
        # sliver so the run degenerates to "nothing absorbed" instead of erroring
        window = max(float(reach) + truncation_margin * np.sqrt(horizon) + 1.0, 1.0)
    cloud = sample_ppp(density, rate_scale, window, seed)
    pos = cloud.points.copy()

    if isinstance(barrier, LinearBarrier) and scheme == "exact":
        rng = seed.generator("line-hits")
        taus = sample_line_hit(pos, barrier.slope, barrier.intercept, rng)
        grid = np.linspace(0.0, horizon, out_points)
        taus = np.sort(taus[np.isfinite(taus)])
        counts = np.searchsorted(taus, grid, side="right")
        return FixedBarrierResult(grid=grid, absorbed_fraction=counts / rate_scale,
                                  n_initial=len(pos), rate_scale=rate_scale)

    if scheme == "exact":
        # step path, interval-exact
        rng = seed.generator("step-hits")
        move_rng = seed.generator("step-moves")
        tgrid = list(barrier.grid[barrier.grid < horizon]) + [horizon]
        tgrid = np.asarray(tgrid, dtype=float)
        absorbed = np.zeros(len(tgrid), dtype=np.int64)
        for i in range(len(tgrid)):
            level = float(barrier.at(tgrid[i]))
            below = pos <= level
            absorbed[i] += int(below.sum())
            pos = pos[~below]
            if i + 1 < len(tgrid):
                dt_k = tgrid[i + 1] - tgrid[i]
                if dt_k <= 0 or len(pos) == 0:
                    continue
                gaps = pos - level
                p_hit = 2.0 * ndtr(-gaps / np.sqrt(dt_k))
                hit = rng.random(len(pos)) < p_hit
                absorbed[i + 1] += int(hit.sum())
                surv = pos[~hit]
                new_gaps = _killed_positions(surv - level, dt_k, move_rng)
                pos = level + new_gaps
        counts = np.cumsum(absorbed)
        return FixedBarrierResult(grid=tgrid, absorbed_fraction=counts / rate_scale,
                                  n_initial=len(cloud.points), rate_scale=rate_scale)

    if scheme != "euler":
        raise ConfigError(f"unknown scheme {scheme!r}")
    if dt is None or dt <= 0:
        raise ConfigError("euler scheme needs a positive dt")
    if draw_mode not in ("alive", "slots"):
        raise ConfigError(f"unknown draw_mode {draw_mode!r}")
    slots = draw_mode == "slots"
    rng = seed.generator("euler-steps" if slots else "euler-fixed")
    n_slots = len(pos)
    ids = np.arange(n_slots)
    n_steps = max(1, int(np.ceil(horizon / dt - 1e-9)))
    grid = np.minimum(np.arange(n_steps + 1) * dt, horizon)
    absorbed = np.zeros(n_steps + 1, dtype=np.int64)
    level0 = float(barrier.at(0.0))
    below = pos <= level0
    absorbed[0] = int(below.sum())
    pos, ids = pos[~below], ids[~below]
    for step in range(n_steps):
        if len(pos) == 0:
            break
        dt_k = grid[step + 1] - grid[step]
        level = float(barrier.at(grid[step]))
        below = pos <= level
        absorbed[step + 1] += int(below.sum())
        pos, ids = pos[~below], ids[~below]
        if dt_k <= 0:
            continue
        if slots:
            eta = rng.standard_normal(n_slots)[ids]
            u = rng.random(n_slots)[ids]
        else:
            if len(pos) == 0:
                continue
            eta = rng.standard_normal(len(pos))
            u = rng.random(len(pos))
        y = pos + np.sqrt(dt_k) * eta
        g0 = pos - level
        g1 = y - level
        with np.errstate(over="ignore"):
            cross = (g1 <= 0) | (u < np.exp(np.minimum(-2.0 * g0 * g1 / dt_k, 0.0)))
        absorbed[step + 1] += int(cross.sum())
        pos, ids = y[~cross], ids[~cross]
    counts = np.cumsum(absorbed)
    return FixedBarrierResult(grid=grid, absorbed_fraction=counts / rate_scale,
                              n_initial=len(cloud.points), rate_scale=rate_scale)


def rescale_to_xi(log: EventLog, rate_scale: float | None = None,
                  jump_unit: float | None = None) -> GridFunction:
    """Map a small-jump run onto the unit-jump system, exactly in law.

    A run with ``Constant(a)`` initial density, rate scale ``N`` and jump
    unit ``1/N`` satisfies ``xi(N^2 a^2 t) = N * a * barrier(t)`` in law,
    where ``xi`` is the barrier of the unit system (unit density level, unit
    jumps, unit rate).  One trajectory therefore yields the rescaled path at
    every horizon up to ``N^2 a^2 * horizon``.

    Returns the rescaled cadlag path.  ``rate_scale`` / ``jump_unit``
    override the values recorded in the log's config (rarely needed).
    """
    cfg = log.config
    n_scale = cfg.rate_scale if rate_scale is None else rate_scale
    a_unit = cfg.jump_unit if jump_unit is None else jump_unit
    if not isinstance(cfg.density, Constant):
        raise ConfigError("rescaling requires a Constant initial density")
    if abs(a_unit * n_scale - 1.0) > 1e-9:
        raise ConfigError(
            f"rescaling requires jump_unit == 1/rate_scale, got {a_unit} vs 1/{n_scale}")
    level = cfg.density.level
    if not 0 < level <= 1:
        raise ConfigError("rescaling requires a density level in (0, 1]")
    factor_t = (n_scale * level) ** 2
    factor_x = n_scale * level
    path = log.barrier_path()
    return GridFunction(path.grid * factor_t, path.values * factor_x)
