"""The critical-density scaling limit: a frontier driven by a *spatial* Brownian path.

At unit initial density the absorbed mass exactly matches the barrier's
sweep, so the frontier's speed is set by the fluctuations of the initial
particle count rather than by a mass deficit.  In the limit the rescaled
barrier ``Lambda^N_t / N^(1/3)`` follows

    R_t = inf { x : integral_0^x 2 * max(b(s), 0) ds > t },

the generalized inverse of the integrated positive part of a standard
Brownian motion ``b`` in the space variable.  ``R`` ramps where ``b > 0``
and jumps across the excursions where ``b <= 0``.

This module samples ``b`` (``sample_space_bm``), inverts it (``r_process``),
draws i.i.d. replicas of ``R`` at fixed times with an adaptively grown space
window (``sample_r``), and rescales particle-run logs for distributional
comparison (``critical_rescale``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .densities import Constant
from .errors import ConfigError, NumericalError
from .mean_field import GridFunction
from .particle_sim import EventLog
from .sampling import SeedSpec

__all__ = [
    "SpacePath",
    "sample_space_bm",
    "r_process",
    "sample_r",
    "sample_r_pair",
    "critical_rescale",
]


@dataclass(frozen=True)
class SpacePath:
    """A Brownian path in the space variable on the grid 0, dx, 2dx, ..."""

    dx: float
    values: np.ndarray
    seed: SeedSpec | None = None

    def __post_init__(self):
        if self.dx <= 0:
            raise ConfigError("space step must be positive")
        if self.values[0] != 0.0:
            raise ConfigError("spatial Brownian path must start at 0")

    @property
    def window(self) -> float:
        return (len(self.values) - 1) * self.dx


def sample_space_bm(dx: float, window: float, seed: SeedSpec) -> SpacePath:
    """Standard Brownian motion in space on [0, window] with step dx."""
    if dx <= 0 or window <= 0:
        raise ConfigError("dx and window must be positive")
    n = int(np.ceil(window / dx))
    rng = seed.generator("space-bm")
    incr = rng.standard_normal(n) * np.sqrt(dx)
    return SpacePath(dx=dx, values=np.concatenate([[0.0], np.cumsum(incr)]), seed=seed)


def _r_from_cum(cum: np.ndarray, dx: float, times: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(cum, times, side="right")
    if np.any(idx >= len(cum)):
        worst = float(times[np.argmax(idx >= len(cum))])
        raise NumericalError(
            f"space window exhausted: integrated positive part reaches "
            f"{cum[-1]:.6g} < requested time {worst:.6g}; extend the window")
    return idx * dx


def r_process(path: SpacePath, times) -> np.ndarray:
    """``R_t = inf {x : integral_0^x 2*max(b,0) ds > t}`` on the path's grid.

    The integral is the left-Riemann cumulative of ``2*max(b, 0)*dx`` and the
    inverse takes the *first grid point* where the cumulative strictly
    exceeds ``t`` — so R jumps exactly across maximal stretches where the
    positive part vanishes.  Raises a window-exhaustion error (naming the
    deficit) when the path's integral never reaches ``max(times)``.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(np.diff(times) < 0):
        raise ConfigError("times must be sorted ascending")
    if np.any(times < 0):
        raise ConfigError("times must be >= 0")
    pos = 2.0 * np.maximum(path.values[:-1], 0.0) * path.dx
    cum = np.concatenate([[0.0], np.cumsum(pos)])
    return _r_from_cum(cum, path.dx, times)


def sample_r(times, n_samples: int, seed: SeedSpec, dx: float = 1e-3,
             window: float | None = None, max_chunks: int = 200000) -> np.ndarray:
    """I.i.d. replicas of ``(R_t)_{t in times}``: array (n_samples, len(times)).

    Each replica advances its Brownian path one window at a time (default
    ``4 * t_max^(2/3) + 1``, a proxy for four times the mean of R, capped so
    a window stays cheap), growing the total window adaptively until the
    integrated positive part exceeds every requested time — so truncation
    never biases the law.  Whenever the path ends a window below zero the
    whole negative excursion is skipped with an exact first-passage draw
    (``tau = (b/Z)^2``, snapped up to the lattice): it contributes nothing
    to the integral, and the excursion-length law is too heavy-tailed to
    step through.  Replicas use independent seed streams keyed by index, so
    results do not depend on evaluation order.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(np.diff(times) < 0):
        raise ConfigError("times must be sorted ascending")
    if np.any(times < 0):
        raise ConfigError("times must be >= 0")
    if n_samples <= 0:
        raise ConfigError("need at least one replica")
    out = np.empty((n_samples, len(times)))
    if len(times) == 0:
        return out
    t_max = float(times[-1])
    if window is None:
        window = 4.0 * t_max ** (2.0 / 3.0) + 1.0
    m = max(int(np.ceil(min(window, 50.0) / dx)), 16)
    sq = np.sqrt(dx)
    for rep in range(n_samples):
        rng = seed.generator("r-replica", rep)
        x = 0.0   # current lattice position
        v = 0.0   # path value there
        c = 0.0   # integrated positive part up to x
        j = 0     # first unresolved time index
        chunks = 0
        while j < len(times):
            if v < 0.0:
                z = rng.standard_normal()
                while z == 0.0:
                    z = rng.standard_normal()
                x += np.ceil((v / z) ** 2 / dx) * dx
                v = 0.0
                continue
            if chunks >= max_chunks:
                raise NumericalError(
                    f"space window exhausted after {chunks} chunks "
                    f"(integral reached {c:.6g} < requested {t_max:.6g})")
            chunks += 1
            path = v + np.cumsum(rng.standard_normal(m) * sq)
            lefts = np.concatenate([[v], path[:-1]])
            cc = c + np.cumsum(2.0 * np.maximum(lefts, 0.0) * dx)
            sub = np.searchsorted(cc, times[j:], side="right")
            k = int(np.sum(sub < m))
            out[rep, j:j + k] = x + (sub[:k] + 1.0) * dx
            j += k
            x += m * dx
            v = float(path[-1])
            c = float(cc[-1])
    return out


def sample_r_pair(times, n_samples: int, seed: SeedSpec, dx: float = 5e-4,
                  window: float | None = None,
                  max_chunks: int = 200000) -> tuple[np.ndarray, np.ndarray]:
    """Coupled replicas of R on grids ``dx`` and ``2*dx`` from one path.

    The coarse path is the fine path read at every other lattice point, so
    the two R samples share all randomness and their difference isolates the
    grid bias: the right way to measure dx-sensitivity of quantiles, since
    independent runs would drown a percent-level bias in sampling noise.
    Excursion skips snap to the coarse lattice to keep the grids aligned.
    Returns ``(fine, coarse)``, each shaped (n_samples, len(times)).
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(np.diff(times) < 0) or np.any(times < 0):
        raise ConfigError("times must be sorted ascending and >= 0")
    if n_samples <= 0:
        raise ConfigError("need at least one replica")
    fine = np.empty((n_samples, len(times)))
    coarse = np.empty((n_samples, len(times)))
    if len(times) == 0:
        return fine, coarse
    t_max = float(times[-1])
    if window is None:
        window = 4.0 * t_max ** (2.0 / 3.0) + 1.0
    m = max(int(np.ceil(min(window, 50.0) / dx)), 16)
    m += m % 2  # chunk boundaries must sit on the coarse lattice
    sq = np.sqrt(dx)
    for rep in range(n_samples):
        rng = seed.generator("r-replica", rep)
        x = 0.0
        v = 0.0
        cf = cc_ = 0.0
        jf = jc = 0
        chunks = 0
        while jf < len(times) or jc < len(times):
            if v < 0.0:
                z = rng.standard_normal()
                while z == 0.0:
                    z = rng.standard_normal()
                x += np.ceil((v / z) ** 2 / (2.0 * dx)) * (2.0 * dx)
                v = 0.0
                continue
            if chunks >= max_chunks:
                raise NumericalError(
                    f"space window exhausted after {chunks} chunks "
                    f"(integral reached {cf:.6g} < requested {t_max:.6g})")
            chunks += 1
            path = v + np.cumsum(rng.standard_normal(m) * sq)
            lefts = np.concatenate([[v], path[:-1]])
            cum_f = cf + np.cumsum(2.0 * np.maximum(lefts, 0.0) * dx)
            cum_c = cc_ + np.cumsum(
                2.0 * np.maximum(lefts[::2], 0.0) * (2.0 * dx))
            sub = np.searchsorted(cum_f, times[jf:], side="right")
            k = int(np.sum(sub < m))
            fine[rep, jf:jf + k] = x + (sub[:k] + 1.0) * dx
            jf += k
            sub = np.searchsorted(cum_c, times[jc:], side="right")
            k = int(np.sum(sub < m // 2))
            coarse[rep, jc:jc + k] = x + (sub[:k] + 1.0) * (2.0 * dx)
            jc += k
            x += m * dx
            v = float(path[-1])
            cf = float(cum_f[-1])
            cc_ = float(cum_c[-1])
    return fine, coarse


def critical_rescale(log: EventLog, rate_scale: float | None = None) -> GridFunction:
    """Rescale a unit-density run: the path ``t -> Lambda^N_t / N^(1/3)``.

    Requires the log's config to be the critical family: ``Constant(1)``
    initial density and jump unit ``1/N``.  ``N = 1`` is the identity.
    """
    cfg = log.config
    n_scale = cfg.rate_scale if rate_scale is None else rate_scale
    if not isinstance(cfg.density, Constant) or abs(cfg.density.level - 1.0) > 1e-12:
        raise ConfigError("critical rescaling requires Constant(1) initial density")
    if abs(cfg.jump_unit * n_scale - 1.0) > 1e-9:
        raise ConfigError(
            f"critical rescaling requires jump_unit == 1/rate_scale, "
            f"got {cfg.jump_unit} vs 1/{n_scale}")
    path = log.barrier_path()
    return GridFunction(path.grid, path.values / n_scale ** (1.0 / 3.0))
