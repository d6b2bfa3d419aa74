"""Initial density families and structural checks on them.

A density spec describes the initial particle intensity ``g`` on ``[0, inf)``.
Each family provides

* ``value(x)``   -- pointwise ``g(x)``, vectorized,
* ``cumulative(x)`` -- ``G(x) = integral_0^x g``, exact per family,
* ``bound``      -- a finite majorant ``C >= sup g`` (thinning envelope),
* ``tail_limit`` -- ``lim g(x)`` at infinity when it exists, else None,
* ``deficit_integral`` -- ``integral_0^inf (1 - g)``: a float, ``inf`` when the
  deficit diverges to +inf, ``-inf`` when ``g`` exceeds 1 so strongly that the
  integral diverges downward.

The structural checks at the bottom classify a density the way the asymptotic
theory needs:

* a sweepable-tail witness ``x*`` (the deficit ``F(x) = G(x) - x`` dips below 0
  at ``x*`` and never recovers above that dip within the scan window),
* an unbounded-deficit ladder (running minima of ``F`` that keep deepening),
* growth of the smoothed deficit ``(1/l) * integral (1-g) e^{-l x} dx`` as the
  smoothing scale ``1/l`` grows (its divergence is what guarantees global
  solutions even without a sweepable tail),
* a sub-critical prefix (``g <= 1`` everywhere scanned and ``g`` strictly below
  1 near the origin),
* the continuity-breaking test ``G(x) > 2x`` at some scan point (a witness
  forces a jump in every solution).

All of these are *scan-window heuristics*: they evaluate the defining
quantities on a finite grid and report ``"holds" / "fails" / "indeterminate"``
honestly rather than deciding the tail behaviour from a finite window.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Constant",
    "TravellingWave",
    "ScaledCdf",
    "GapDensity",
    "HeavyTail",
    "Tabulated",
    "DensitySpec",
    "density_from_dict",
    "density_to_dict",
    "deficit_transform",
    "blowup_criterion",
    "check_conditions",
    "ConditionReport",
]


@dataclass(frozen=True)
class Constant:
    """g(x) = level for all x >= 0."""

    level: float

    def __post_init__(self):
        if self.level < 0:
            raise ValueError(f"density level must be >= 0, got {self.level}")

    @property
    def bound(self) -> float:
        return max(self.level, 1e-300)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return np.full_like(x, self.level)

    def cumulative(self, x):
        return self.level * np.asarray(x, dtype=float)

    def tail_limit(self):
        return self.level

    def deficit_integral(self) -> float:
        if self.level < 1.0:
            return np.inf
        if self.level == 1.0:
            return 0.0
        return -np.inf


@dataclass(frozen=True)
class TravellingWave:
    """g(x) = 1 - exp(-v*x): the stationary profile of the speed-v/2 wave."""

    v: float

    def __post_init__(self):
        if self.v <= 0:
            raise ValueError(f"wave parameter must be > 0, got {self.v}")

    @property
    def bound(self) -> float:
        return 1.0

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return -np.expm1(-self.v * x)

    def cumulative(self, x):
        x = np.asarray(x, dtype=float)
        return x + np.expm1(-self.v * x) / self.v

    def tail_limit(self):
        return 1.0

    def deficit_integral(self) -> float:
        return 1.0 / self.v


@dataclass(frozen=True)
class ScaledCdf:
    """g(x) = alpha * F(x) with F a distribution function on [0, inf).

    ``cdf`` may be a callable (tabulated on ``tab_points`` points up to
    ``x_max`` at construction) or an explicit knot table ``(xs, Fs)`` treated
    as piecewise linear.  Beyond the last knot F is held at its final value,
    so choose ``x_max`` large enough that ``1 - F(x_max)`` is negligible.
    The cumulative integral of the piecewise-linear F is evaluated exactly
    (quadratic segments).
    """

    alpha: float
    cdf: Callable[[np.ndarray], np.ndarray] | tuple = None
    x_max: float = 50.0
    tab_points: int = 20001
    _xs: np.ndarray = field(init=False, repr=False, compare=False, default=None)
    _fs: np.ndarray = field(init=False, repr=False, compare=False, default=None)
    _cum: np.ndarray = field(init=False, repr=False, compare=False, default=None)

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        if callable(self.cdf):
            xs = np.linspace(0.0, self.x_max, self.tab_points)
            fs = np.asarray(self.cdf(xs), dtype=float)
        elif self.cdf is not None:
            xs, fs = (np.asarray(a, dtype=float) for a in self.cdf)
        else:
            raise ValueError("ScaledCdf needs a callable cdf or a (xs, Fs) knot table")
        if xs[0] != 0.0:
            raise ValueError("cdf table must start at x = 0")
        if np.any(np.diff(xs) <= 0) or np.any(np.diff(fs) < -1e-12):
            raise ValueError("cdf table must be strictly increasing in x and nondecreasing in F")
        if fs[0] < 0 or fs[-1] > 1.0 + 1e-9:
            raise ValueError("cdf values must lie in [0, 1]")
        # exact integral of the piecewise-linear interpolant at the knots
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (fs[1:] + fs[:-1]) * np.diff(xs))])
        object.__setattr__(self, "_xs", xs)
        object.__setattr__(self, "_fs", fs)
        object.__setattr__(self, "_cum", cum)

    @property
    def bound(self) -> float:
        return self.alpha * float(self._fs.max())

    def _f(self, x):
        return np.interp(x, self._xs, self._fs)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return self.alpha * self._f(x)

    def cumulative(self, x):
        x = np.asarray(x, dtype=float)
        xs, fs, cum = self._xs, self._fs, self._cum
        idx = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, len(xs) - 2)
        x0 = xs[idx]
        dx = np.minimum(x, xs[-1]) - x0
        slope = (fs[idx + 1] - fs[idx]) / (xs[idx + 1] - xs[idx])
        inner = cum[idx] + fs[idx] * dx + 0.5 * slope * dx * dx
        beyond = np.maximum(x - xs[-1], 0.0) * fs[-1]
        return self.alpha * (inner + beyond)

    def tail_limit(self):
        return self.alpha * float(self._fs[-1])

    def deficit_integral(self) -> float:
        tail = self.tail_limit()
        if tail < 1.0 - 1e-9:
            return np.inf
        if tail > 1.0 + 1e-9:
            return -np.inf
        # integral of (1 - alpha F) over the table; the tail term vanishes
        return float(self._xs[-1] - self.cumulative(self._xs[-1]))


@dataclass(frozen=True)
class GapDensity:
    """Alternating empty gaps and dense blocks on a geometric ladder.

    With ladder points ``xh_i = (L**(i+1) - 1)/(L - 1)`` (so 1, 11, 111, ...
    for L = 10), the density is ``(1-alpha)*L`` on the blocks
    ``[xh_{2i}, xh_{2i+1})`` and 0 on ``[0, xh_0)`` and the gaps
    ``[xh_{2i+1}, xh_{2i+2})``.  Each block holds more mass than the whole
    interval below it, which is what forces macroscopic barrier jumps across
    the blocks and crawling through the gaps.
    """

    L: float
    alpha: float

    def __post_init__(self):
        if self.L < 10:
            raise ValueError(f"ladder ratio must be >= 10, got {self.L}")
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")

    @property
    def bound(self) -> float:
        return (1.0 - self.alpha) * self.L

    def ladder(self, x_max: float) -> np.ndarray:
        """Ladder points xh_0, xh_1, ... up to the first one >= x_max."""
        pts = []
        i = 0
        while True:
            p = (self.L ** (i + 1) - 1.0) / (self.L - 1.0)
            pts.append(p)
            if p >= x_max:
                break
            i += 1
        return np.asarray(pts)

    def _breaks(self, x_max: float):
        lad = self.ladder(x_max)
        breaks = np.concatenate([[0.0], lad])
        w = self.bound
        # density on [breaks[j], breaks[j+1]): 0 for j even (initial gap and
        # gaps after odd ladder points), w on blocks [xh_0,xh_1), [xh_2,xh_3)...
        dens = np.array([w if j % 2 == 1 else 0.0 for j in range(len(breaks))])
        cum = np.concatenate([[0.0], np.cumsum(dens[:-1] * np.diff(breaks))])
        return breaks, dens, cum

    def value(self, x):
        x = np.asarray(x, dtype=float)
        breaks, dens, _ = self._breaks(float(np.max(x, initial=1.0)) + 1.0)
        idx = np.clip(np.searchsorted(breaks, x, side="right") - 1, 0, len(dens) - 1)
        return dens[idx]

    def cumulative(self, x):
        x = np.asarray(x, dtype=float)
        breaks, dens, cum = self._breaks(float(np.max(x, initial=1.0)) + 1.0)
        idx = np.clip(np.searchsorted(breaks, x, side="right") - 1, 0, len(dens) - 1)
        return cum[idx] + dens[idx] * (x - breaks[idx])

    def tail_limit(self):
        return None

    def deficit_integral(self) -> float:
        return -np.inf  # oscillates with diverging positive part; not summable


@dataclass(frozen=True)
class HeavyTail:
    """g = 0 on [0,1], then 1 + beta*x**(-beta-1): unit deficit repaid at a crawl.

    The cumulative is ``G(x) = x - x**(-beta)`` for ``x >= 1``; the deficit
    ``x - G(x) = x**(-beta)`` decays polynomially, which slows the barrier to a
    polynomial (rather than linear) time law.
    """

    beta: float

    def __post_init__(self):
        if not 0 < self.beta < 1:
            raise ValueError(f"tail exponent must be in (0, 1), got {self.beta}")

    @property
    def bound(self) -> float:
        return 1.0 + self.beta

    def value(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", over="ignore"):
            tail = 1.0 + self.beta * np.power(np.maximum(x, 1.0), -self.beta - 1.0)
        return np.where(x > 1.0, tail, 0.0)

    def cumulative(self, x):
        x = np.asarray(x, dtype=float)
        xc = np.maximum(x, 1.0)
        return np.where(x > 1.0, xc - np.power(xc, -self.beta), 0.0)

    def tail_limit(self):
        return 1.0

    def deficit_integral(self) -> float:
        return 0.0  # the [0,1] deficit is exactly repaid by the excess tail


@dataclass(frozen=True)
class Tabulated:
    """Piecewise-constant density: value ``gs[i]`` on ``[xs[i], xs[i+1])``.

    Right-continuous; held at ``gs[-1]`` beyond the last knot.
    """

    xs: Sequence[float]
    gs: Sequence[float]

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        gs = np.asarray(self.gs, dtype=float)
        if xs.shape != gs.shape or xs.ndim != 1 or len(xs) < 1:
            raise ValueError("knot arrays must be equal-length 1-d")
        if xs[0] != 0.0 or np.any(np.diff(xs) <= 0):
            raise ValueError("knots must start at 0 and strictly increase")
        if np.any(gs < 0):
            raise ValueError("density values must be >= 0")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "gs", gs)
        cum = np.concatenate([[0.0], np.cumsum(gs[:-1] * np.diff(xs))])
        object.__setattr__(self, "_cum", cum)

    @property
    def bound(self) -> float:
        return max(float(np.max(self.gs)), 1e-300)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(self.xs, x, side="right") - 1, 0, len(self.gs) - 1)
        return self.gs[idx]

    def cumulative(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(self.xs, x, side="right") - 1, 0, len(self.gs) - 1)
        return self._cum[idx] + self.gs[idx] * (x - self.xs[idx])

    def tail_limit(self):
        return float(self.gs[-1])

    def deficit_integral(self) -> float:
        last = float(self.gs[-1])
        body = float(self.xs[-1] - self.cumulative(self.xs[-1]))
        if last < 1.0:
            return np.inf
        if last > 1.0:
            return -np.inf
        return body


DensitySpec = Constant | TravellingWave | ScaledCdf | GapDensity | HeavyTail | Tabulated

_FAMILIES = {
    "constant": Constant,
    "travelling_wave": TravellingWave,
    "scaled_cdf": ScaledCdf,
    "gap": GapDensity,
    "heavy_tail": HeavyTail,
    "tabulated": Tabulated,
}


def density_to_dict(spec: DensitySpec) -> dict:
    """Config-file form of a density spec (ScaledCdf serializes its knots)."""
    if isinstance(spec, Constant):
        return {"family": "constant", "level": spec.level}
    if isinstance(spec, TravellingWave):
        return {"family": "travelling_wave", "v": spec.v}
    if isinstance(spec, ScaledCdf):
        return {
            "family": "scaled_cdf",
            "alpha": spec.alpha,
            "cdf_x": [float(v) for v in spec._xs],
            "cdf_f": [float(v) for v in spec._fs],
        }
    if isinstance(spec, GapDensity):
        return {"family": "gap", "L": spec.L, "alpha": spec.alpha}
    if isinstance(spec, HeavyTail):
        return {"family": "heavy_tail", "beta": spec.beta}
    if isinstance(spec, Tabulated):
        return {"family": "tabulated", "xs": [float(v) for v in spec.xs],
                "gs": [float(v) for v in spec.gs]}
    raise TypeError(f"not a density spec: {spec!r}")


def density_from_dict(d: dict) -> DensitySpec:
    """Inverse of density_to_dict; rejects unknown families and fields."""
    d = dict(d)
    family = d.pop("family", None)
    if family not in _FAMILIES:
        raise ValueError(f"unknown density family: {family!r}")
    if family == "constant":
        allowed = {"level"}
    elif family == "travelling_wave":
        allowed = {"v"}
    elif family == "scaled_cdf":
        allowed = {"alpha", "cdf_x", "cdf_f"}
    elif family == "gap":
        allowed = {"L", "alpha"}
    elif family == "heavy_tail":
        allowed = {"beta"}
    else:
        allowed = {"xs", "gs"}
    unknown = set(d) - allowed
    if unknown:
        raise ValueError(f"unknown field(s) for density family {family!r}: {sorted(unknown)}")
    if family == "scaled_cdf":
        return ScaledCdf(alpha=d["alpha"], cdf=(d["cdf_x"], d["cdf_f"]))
    return _FAMILIES[family](**d)


# ---------------------------------------------------------------------------
# structural checks


def _segment_transform(breaks: np.ndarray, dens: np.ndarray, tail_density: float,
                       lam: float) -> float:
    """Exact ``integral (1-g) e^{-lam x} dx`` for piecewise-constant ``g``.

    ``dens[j]`` holds on ``[breaks[j], breaks[j+1])``; ``tail_density`` beyond
    the last break.
    """
    w = np.exp(-lam * breaks)
    seg = (1.0 - dens[: len(breaks) - 1]) * (w[:-1] - w[1:])
    return float(seg.sum() + (1.0 - tail_density) * w[-1]) / lam


def deficit_transform(spec: DensitySpec, lam: float) -> float:
    """``integral_0^inf (1 - g(x)) e^{-lam x} dx``, exact per family.

    Piecewise-constant families are summed segment by segment; the heavy tail
    integrates its polynomial excess by adaptive quadrature; the scaled-CDF
    family integrates its piecewise-linear profile in closed form.  This is
    the transform whose ``1/lam``-scaled growth as ``lam -> 0`` separates
    densities with globally solvable dynamics from critical/supercritical
    ones, and it doubles as the initial-mass term of the transform balance
    checks.
    """
    if lam <= 0:
        raise ValueError(f"transform parameter must be > 0, got {lam}")
    if isinstance(spec, Constant):
        return (1.0 - spec.level) / lam
    if isinstance(spec, TravellingWave):
        return 1.0 / (lam + spec.v)
    if isinstance(spec, GapDensity):
        breaks, dens, _ = spec._breaks(60.0 / lam)
        # beyond the ladder the truncation error is at most bound*e^{-60}/lam
        return _segment_transform(breaks, dens, dens[len(breaks) - 1], lam)
    if isinstance(spec, Tabulated):
        return _segment_transform(spec.xs, spec.gs, float(spec.gs[-1]), lam)
    if isinstance(spec, HeavyTail):
        from scipy.integrate import quad

        head = -np.expm1(-lam) / lam  # g = 0 on [0, 1]
        excess, _ = quad(lambda x: x ** (-spec.beta - 1.0) * np.exp(-lam * x),
                         1.0, np.inf, limit=200)
        return head - spec.beta * excess
    if isinstance(spec, ScaledCdf):
        xs, fs = spec._xs, spec._fs
        f = 1.0 - spec.alpha * fs  # 1 - g at the knots, piecewise linear
        slope = np.diff(f) / np.diff(xs)
        w = np.exp(-lam * xs)
        # integral of (linear) * e^{-lam x} over each segment, by parts
        seg = (f[:-1] / lam + slope / lam ** 2) * w[:-1] \
            - (f[1:] / lam + slope / lam ** 2) * w[1:]
        tail = (1.0 - spec.alpha * fs[-1]) * w[-1] / lam
        return float(seg.sum() + tail)
    raise TypeError(f"not a density spec: {spec!r}")


def blowup_criterion(spec: DensitySpec, grid=None):
    """First scan point with ``G(x) > 2x``; None if the test never fires.

    A witness ``x`` with ``G(x) > 2x`` certifies that no solution can remain
    continuous for all time: the frontier must jump somewhere (for mass this
    concentrated the jump can be infinite, as for a constant density above 1,
    or finite, as for banded densities).  The converse is false — the test
    firing nowhere proves nothing.  Default grid: integers 0..10.
    """
    if grid is None:
        grid = np.arange(0.0, 10.0 + 1e-9, 1.0)
    grid = np.asarray(grid, dtype=float)
    xs = grid[grid > 0]
    hits = spec.cumulative(xs) > 2.0 * xs
    if not np.any(hits):
        return None
    return float(xs[np.argmax(hits)])


@dataclass
class CheckResult:
    status: str  # "holds" | "fails" | "indeterminate"
    detail: dict

    def __bool__(self):  # truthiness == holds, for terse call sites
        return self.status == "holds"


@dataclass
class ConditionReport:
    """Scan-based classification of a density (all entries are heuristics)."""

    bounded: CheckResult          # finite sup bound, with the constant
    sweepable: CheckResult        # deficit dips below 0 and never recovers past the dip
    deepening: CheckResult        # running deficit minima keep deepening
    smoothed_growth: CheckResult  # smoothed deficit grows as the scale grows
    subcritical: CheckResult      # g <= 1 with a strict prefix near 0
    blowup_witness: float | None  # first scan x with G(x) > 2x, if any
    window: tuple                 # (x_max, step) actually scanned

    def summary(self) -> dict:
        return {
            "bounded": self.bounded.status,
            "sweepable": self.sweepable.status,
            "deepening": self.deepening.status,
            "smoothed_growth": self.smoothed_growth.status,
            "subcritical": self.subcritical.status,
            "blowup_witness": self.blowup_witness,
        }


def check_conditions(spec: DensitySpec, x_max: float = 60.0, step: float = 0.01,
                     lambdas=None) -> ConditionReport:
    """Scan ``g`` on ``[0, x_max]`` and classify its deficit structure.

    The deficit is ``F(x) = G(x) - x``; every verdict below is relative to the
    scan window and honestly reported as indeterminate when the window cannot
    decide.

    * bounded: sup of the scanned values against the family's stated bound.
    * sweepable: first grid ``x*`` with ``F(x*) < 0`` and
      ``F(x*) >= max_{y >= x*} F(y)`` on the window (a line of positive slope
      through ``x*`` then clears the remaining mass).
    * deepening: the running-minimum deficit ``y(x) = max(0, -min_{u<=x} F)``
      must keep growing: holds when ``y(x_max) >= 1.9 * y(x_max/2) > 0`` and
      at least 3 geometrically-thinned record minima exist; fails when the
      deficit never appears.
    * smoothed_growth: ``J(l) = (1/l) integral_0^inf (1-g) e^{-l x} dx``
      (exact transform) on a geometric grid of ``l`` down to ``2^-15``; holds
      when the running peak of J keeps growing as ``l`` shrinks (>= 8x from
      the middle of the scale grid to its end).  Independent of ``x_max``.
    * subcritical: ``g <= 1`` on the whole window and sup over a prefix < 1;
      reports the largest such prefix.
    """
    xs = np.arange(0.0, x_max + step / 2, step)
    g = spec.value(xs)
    G = spec.cumulative(xs)
    F = G - xs
    tol = 1e-9 * max(1.0, x_max)

    bound = spec.bound
    bounded = CheckResult(
        "holds" if np.max(g) <= bound * (1 + 1e-12) else "fails",
        {"bound": float(bound), "observed_max": float(np.max(g))},
    )

    # sweepable tail: F(x*) < 0 and >= every later F on the window.  Witness
    # candidates are confined to the first 90% of the window — the very last
    # points trivially dominate their (empty) suffix and would fake a witness
    # for a recovering deficit like the heavy tail's.
    suffix_max = np.maximum.accumulate(F[::-1])[::-1]
    dips = F < -tol
    ok = dips & (F >= suffix_max - 1e-12 * max(1.0, x_max)) & (xs <= 0.9 * x_max)
    if np.any(ok):
        i = int(np.argmax(ok))
        sweepable = CheckResult("holds", {"witness": float(xs[i]), "deficit": float(-F[i])})
    elif not np.any(dips):
        sweepable = CheckResult("fails", {"reason": "deficit never goes negative on window"})
    elif np.all(suffix_max[dips] > F[dips] + tol):
        sweepable = CheckResult("fails",
                                {"reason": "every dip is strictly exceeded later in the window"})
    else:
        sweepable = CheckResult("indeterminate",
                                {"reason": "dips persist only at the window edge"})

    # deepening deficit: running minima records, geometrically thinned
    runmin = np.minimum.accumulate(F)
    y_full = max(0.0, float(-runmin[-1]))
    half_idx = np.searchsorted(xs, x_max / 2.0)
    y_half = max(0.0, float(-runmin[min(half_idx, len(xs) - 1)]))
    records = []
    last_kept = 0.0
    new_min = F < np.concatenate([[np.inf], runmin[:-1]])
    for i in np.nonzero(new_min & (F < -tol))[0]:
        y = -F[i]
        if y >= max(1.25 * last_kept, tol):
            records.append((float(xs[i]), float(y)))
            last_kept = y
            if len(records) >= 12:
                break
    if y_full <= tol:
        deepening = CheckResult("fails", {"reason": "no deficit on window"})
    elif y_half > 0 and y_full >= 1.9 * y_half and len(records) >= 3:
        deepening = CheckResult("holds", {"records": records, "y_half": y_half, "y_full": y_full})
    else:
        deepening = CheckResult("indeterminate",
                                {"records": records, "y_half": y_half, "y_full": y_full})

    # smoothed deficit growth: J(l) = (1/l) * integral (1-g) e^{-lx} dx on a
    # geometric grid of scales.  The verdict tracks the running maximum along
    # decreasing l because banded densities make J oscillate while its peaks
    # escape to infinity.  A finite scan cannot prove a limsup, so this is a
    # labeled trend heuristic: "holds" = the peaks grew by >= 8x from the
    # first half of the scale grid to its end and finished positive.
    if lambdas is None:
        lambdas = 2.0 ** -np.arange(0.0, 16.0)  # 1, 1/2, ..., 2^-15
    lambdas = np.asarray(sorted(lambdas, reverse=True), dtype=float)
    jvals = np.array([deficit_transform(spec, lam) / lam for lam in lambdas])
    peaks = np.maximum.accumulate(jvals)
    mid = len(jvals) // 2
    detail = {"lambdas": lambdas.tolist(), "values": jvals.tolist()}
    if peaks[-1] <= tol:
        smoothed = CheckResult("fails", detail)
    elif peaks[-1] >= 8.0 * max(peaks[mid], tol) and jvals[-1] > 0:
        smoothed = CheckResult("holds", detail)
    else:
        smoothed = CheckResult("indeterminate", detail)

    # subcritical prefix
    if np.max(g) <= 1.0 + 1e-12:
        below = g < 1.0 - 1e-9
        if below[0] and np.all(below):
            eps = float(xs[-1])
        elif below[0]:
            eps = float(xs[int(np.argmin(below)) - 1]) if not np.all(below) else float(xs[-1])
        else:
            eps = 0.0
        subcritical = CheckResult("holds" if eps > 0 else "fails", {"prefix": eps})
    else:
        subcritical = CheckResult("fails", {"observed_max": float(np.max(g))})

    witness = blowup_criterion(spec, xs)
    return ConditionReport(bounded, sweepable, deepening, smoothed,
                           subcritical, witness, (x_max, step))
