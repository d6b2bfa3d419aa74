"""Closed forms for Brownian absorption at straight-line barriers.

Everything here is about a single Brownian motion ``x0 + B_t`` and a barrier
that is constant or linear in time.  These are the exactly-solvable anchors
that the Monte Carlo machinery in the rest of the package is tested against:

* ``k_alpha`` -- the similarity constant ``K`` of the square-root barrier
  ``K * sqrt(t)`` produced by a constant initial density ``a``.  It solves

      a = K * sqrt(2*pi) * (1 - Phi(K)) * exp(K**2 / 2),

  whose right side increases from 0 to 1, so there is exactly one root for
  ``0 < a < 1``.

* ``gamma_linear`` -- the expected absorbed mass of a unit-density cloud on
  ``[0, inf)`` swept by the line ``c*t + d``, in closed form (Gaussian error
  functions), valid for ``c >= 0`` and any intercept ``d``.

* first-passage laws of a single particle to a level or a line, both as CDFs
  and as exact samplers (used by the event-driven particle scheme).

* the Brownian-bridge crossing probability used to correct Euler steps.

Scalar arguments may be floats or numpy arrays; outputs follow numpy
broadcasting.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erfcx, log_ndtr, ndtr

SQRT2 = np.sqrt(2.0)
SQRT_2PI = np.sqrt(2.0 * np.pi)
SQRT_2_OVER_PI = np.sqrt(2.0 / np.pi)


def gauss_pdf(x):
    """Standard normal density."""
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x) / SQRT_2PI


def gauss_cdf(x):
    """Standard normal distribution function (scipy's ndtr, exact tails)."""
    return ndtr(np.asarray(x, dtype=float))


def k_alpha_map(k):
    """The increasing map whose root defines ``k_alpha``.

    Evaluates ``K * sqrt(2*pi) * (1 - Phi(K)) * exp(K**2/2)`` through the
    scaled complementary error function, ``K * sqrt(pi/2) * erfcx(K/sqrt(2))``,
    which is overflow-free for large ``K``.
    """
    k = np.asarray(k, dtype=float)
    return k * np.sqrt(np.pi / 2.0) * erfcx(k / SQRT2)


def k_alpha(a: float) -> float:
    """Similarity constant of the square-root barrier for density level ``a``.

    For a constant initial density ``a`` in (0, 1) the mean-field barrier is
    ``K * sqrt(t)`` with ``K`` the unique root of ``k_alpha_map(K) = a``.
    ``a = 0`` returns 0.  For small ``a``, ``K ~ a * sqrt(2/pi)``.
    """
    if not 0.0 <= a < 1.0:
        raise ValueError(f"density level must be in [0, 1), got {a}")
    if a == 0.0:
        return 0.0
    # bracket: map(K) ~ 1 - 1/K**2 for large K, so 2/sqrt(1-a) is safely past
    # the root; bisection gives a tight bracket, Newton polishes to the
    # floating-point limit.
    lo, hi = 0.0, max(4.0, 2.0 / np.sqrt(1.0 - a))
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if k_alpha_map(mid) < a:
            lo = mid
        else:
            hi = mid
    k = 0.5 * (lo + hi)
    for _ in range(4):
        z = k / SQRT2
        e = erfcx(z)
        # d/dK [K*sqrt(pi/2)*erfcx(K/sqrt(2))] via erfcx'(z) = 2 z erfcx - 2/sqrt(pi)
        deriv = np.sqrt(np.pi / 2.0) * (e + k * (SQRT2 * z * e - SQRT2 / np.sqrt(np.pi)))
        step = (k_alpha_map(k) - a) / deriv
        k -= step
        if abs(step) < 1e-16 * (1.0 + k):
            break
    return float(k)


def _gamma_linear_zero_intercept_slope0(dp, t):
    # constant barrier at height -dp <= 0: absorbed mass 2*sqrt(t)*(phi(z) - z*Phi(-z))
    z = np.divide(dp, np.sqrt(t), out=np.full_like(t, np.inf), where=t > 0)
    with np.errstate(invalid="ignore"):  # t = 0 rows produce inf*0, masked below
        val = 2.0 * np.sqrt(t) * (gauss_pdf(z) - z * ndtr(-z))
    return np.where(t > 0, val, 0.0)


def gamma_linear(c: float, d: float, t):
    """Mean absorbed mass of a unit-density cloud at the line barrier ``c*t + d``.

    The cloud is Lebesgue measure on ``[0, inf)``; each point ``x`` runs an
    independent Brownian motion ``x + B_t`` and is absorbed when it first
    touches the barrier.  Integrating the drifted first-passage law over the
    starting point gives, for ``d <= 0`` (write ``dp = -d``, ``w = (c*t-dp)/sqrt(t)``,
    ``zeta = (c*t+dp)/sqrt(t)``):

        Gamma(t) = (c*t - dp)
                   + sqrt(t)*phi(w) - (c*t - dp)*Phi(-w)
                   + (1/(2c)) * [Phi(w) - (1/2)*erfcx(zeta/sqrt(2))*exp(-w**2/2)]

    where the last bracket is the numerically stable rewrite of
    ``Phi(w) - exp(2*c*dp)*(1 - Phi(zeta))`` (the identity
    ``zeta**2/2 - 2*c*dp = w**2/2`` removes the overflowing factor).
    A positive intercept shifts the problem: ``Gamma = d + Gamma(c, 0, t)``.
    ``c = 0`` reduces to the constant-barrier formula.  Vectorized in ``t``.
    """
    if c < 0:
        raise ValueError(f"slope must be nonnegative, got {c}")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ValueError("time must be nonnegative")
    scalar = t_arr.ndim == 0
    t_arr = np.atleast_1d(t_arr)

    if d > 0:
        out = d + gamma_linear(c, 0.0, t_arr)
        return float(out[0]) if scalar else out

    dp = -d
    if c == 0.0:
        out = _gamma_linear_zero_intercept_slope0(np.full_like(t_arr, dp), t_arr)
        return float(out[0]) if scalar else out

    with np.errstate(divide="ignore", invalid="ignore"):
        sq = np.sqrt(t_arr)
        w = np.where(t_arr > 0, (c * t_arr - dp) / np.where(sq > 0, sq, 1.0), -np.inf)
        zeta = np.where(t_arr > 0, (c * t_arr + dp) / np.where(sq > 0, sq, 1.0), np.inf)
        diff = (
            sq * gauss_pdf(w)
            - (c * t_arr - dp) * ndtr(-w)
            + (0.5 / c) * (ndtr(w) - 0.5 * erfcx(zeta / SQRT2) * np.exp(-0.5 * w * w))
        )
        out = (c * t_arr - dp) + diff
    out = np.where(t_arr > 0, out, 0.0)
    # absorbed mass is a nondecreasing quantity starting at 0; clip the
    # last-ulp negatives that the cancellation above can leave near t = 0
    out = np.maximum(out, 0.0)
    return float(out[0]) if scalar else out


def level_hit_cdf(x0: float, level: float, t):
    """P(first passage of ``x0 + B`` to ``level`` is <= t): ``2*Phi(-gap/sqrt(t))``.

    ``gap = x0 - level``; a start at or below the level counts as already hit
    (CDF identically 1).
    """
    t_arr = np.asarray(t, dtype=float)
    gap = x0 - level
    if gap <= 0:
        return np.ones_like(t_arr) if t_arr.ndim else 1.0
    with np.errstate(divide="ignore"):
        z = np.divide(gap, np.sqrt(t_arr), out=np.full_like(np.atleast_1d(t_arr), np.inf),
                      where=np.atleast_1d(t_arr) > 0).reshape(t_arr.shape)
    return 2.0 * ndtr(-z)


def sample_level_hit(gaps, rng: np.random.Generator):
    """Exact first-passage times of Brownian motions to a level ``gaps`` below.

    For gap ``m > 0`` the hitting time is ``(m/|Z|)**2`` with ``Z`` standard
    normal (the reflection-principle inverse).  Nonpositive gaps return 0.
    """
    gaps = np.asarray(gaps, dtype=float)
    z = rng.standard_normal(gaps.shape)
    z = np.where(z == 0.0, np.finfo(float).tiny, z)
    tau = (gaps / np.abs(z)) ** 2
    return np.where(gaps > 0, tau, 0.0)


def sample_line_hit(x0, c: float, d: float, rng: np.random.Generator):
    """Exact first-passage times of ``x0 + B_t`` to the rising line ``c*t + d``.

    The barrier-relative gap ``m = x0 - d`` is eroded at drift ``c``; for
    ``c > 0`` the hitting time is inverse-Gaussian with mean ``m/c`` and shape
    ``m**2`` (numpy's Wald), a.s. finite.  ``c = 0`` falls back to the level
    law.  Starts at or below the line return 0.
    """
    x0 = np.asarray(x0, dtype=float)
    m = x0 - d
    if c == 0.0:
        return sample_level_hit(m, rng)
    pos = m > 0
    tau = np.zeros_like(m)
    if np.any(pos):
        mp = m[pos]
        tau[pos] = rng.wald(mp / c, mp * mp)
    return tau


def bridge_cross_prob(x0, x1, level, dt: float):
    """P(a Brownian bridge from ``x0`` to ``x1`` over ``dt`` dips to ``level``).

    ``exp(-2*(x0-level)*(x1-level)/dt)`` when both endpoints are above the
    level, else 1.  Exact for a constant level, and exact for a *linear*
    barrier when ``x0, x1`` are measured relative to the barrier's endpoint
    values (the barrier-relative bridge is again a bridge vs. a constant).
    """
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    g0 = x0 - level
    g1 = x1 - level
    with np.errstate(over="ignore"):
        p = np.exp(np.minimum(-2.0 * g0 * g1 / dt, 0.0))
    return np.where((g0 > 0) & (g1 > 0), p, 1.0)


def sample_bridge_min(b0, b1, dt, u):
    """Exact minimum of a Brownian bridge from ``b0`` to ``b1`` over ``dt``.

    Inverse-CDF sampling: with ``u`` uniform(0,1),

        min = (b0 + b1 - sqrt((b1 - b0)**2 - 2*dt*log(u))) / 2.

    Vectorized; used to refine per-step running suprema without time bias.
    """
    b0 = np.asarray(b0, dtype=float)
    diff = b1 - b0
    return 0.5 * (b0 + b1 - np.sqrt(diff * diff - 2.0 * dt * np.log(u)))


def log_gauss_tail(z):
    """log(1 - Phi(z)) without underflow (wraps scipy's log_ndtr)."""
    return log_ndtr(-np.asarray(z, dtype=float))
