"""Seeded randomness and initial particle clouds.

Two responsibilities:

* ``SeedSpec`` — a reproducible addressing scheme for every random draw in the
  package.  A draw site is addressed by ``(root, replica, purpose, index)``;
  the purpose string is hashed to a 64-bit integer and the tuple feeds
  ``numpy.random.SeedSequence``, so independent substreams never collide and
  any single site can be replayed in isolation.

* ``sample_ppp`` — the initial condition of the particle system: a Poisson
  point process on ``[0, window]`` with intensity ``N * g``.  It is sampled in
  fixed unit blocks ``[j, j+1)`` (Poisson count at the majorant rate
  ``N * C``, uniform positions, thinning accept ``u < g(x)/C``), each block
  from its own substream.  Because a block's draws depend only on
  ``(seed, block index)``, restricting to a sub-window or extending the window
  later reproduces exactly the same points inside any region both samplings
  cover — the particle scheme relies on this when it grows its window
  mid-run.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, replace

import numpy as np

from .densities import DensitySpec

__all__ = ["SeedSpec", "PointCloud", "sample_ppp", "extend_window"]

BLOCK = 1.0  # fixed spatial block length for the thinning substreams


def _purpose_int(purpose: str) -> int:
    return int.from_bytes(hashlib.blake2s(purpose.encode(), digest_size=8).digest(), "big")


@dataclass(frozen=True)
class SeedSpec:
    """Address of a family of random streams: a root seed plus a replica index."""

    root: int
    replica: int = 0

    def generator(self, purpose: str, index: int = 0) -> np.random.Generator:
        """Fresh PCG64 generator for the (purpose, index) substream."""
        ss = np.random.SeedSequence([self.root, self.replica, _purpose_int(purpose), index])
        return np.random.default_rng(ss)

    def with_replica(self, replica: int) -> "SeedSpec":
        return replace(self, replica=replica)


@dataclass
class PointCloud:
    """Sorted initial positions of the particle system on [0, window)."""

    points: np.ndarray
    window: float
    rate_scale: float

    @property
    def n(self) -> int:
        return len(self.points)


def _block_points(spec: DensitySpec, rate_scale: float, j: int,
                  seed: SeedSpec) -> np.ndarray:
    rng = seed.generator("cloud", j)
    c = spec.bound
    lam = rate_scale * c * BLOCK
    n = rng.poisson(lam)
    xs = rng.uniform(j * BLOCK, (j + 1) * BLOCK, n)
    us = rng.random(n)
    return xs[us * c < spec.value(xs)]


def sample_ppp(spec: DensitySpec, rate_scale: float, window: float,
               seed: SeedSpec) -> PointCloud:
    """Thinned Poisson cloud with intensity ``rate_scale * g`` on [0, window)."""
    if window <= 0:
        raise ValueError(f"window must be positive, got {window}")
    if rate_scale <= 0:
        raise ValueError(f"rate scale must be positive, got {rate_scale}")
    n_blocks = math.ceil(window / BLOCK)
    parts = []
    for j in range(n_blocks):
        xs = _block_points(spec, rate_scale, j, seed)
        parts.append(xs[xs < window])
    points = np.sort(np.concatenate(parts)) if parts else np.empty(0)
    return PointCloud(points=points, window=float(window), rate_scale=float(rate_scale))


def extend_window(cloud: PointCloud, spec: DensitySpec, new_window: float,
                  seed: SeedSpec) -> tuple[PointCloud, np.ndarray]:
    """Grow the cloud's window; returns (new cloud, the newly added points).

    Deterministic given the seed: the points below the old window are exactly
    the old cloud's (same block substreams), so only the slice
    ``[old window, new window)`` is new.
    """
    if new_window <= cloud.window:
        return cloud, np.empty(0)
    first = math.floor(cloud.window / BLOCK)
    last = math.ceil(new_window / BLOCK)
    parts = []
    for j in range(first, last):
        xs = _block_points(spec, cloud.rate_scale, j, seed)
        parts.append(xs[(xs >= cloud.window) & (xs < new_window)])
    added = np.sort(np.concatenate(parts)) if parts else np.empty(0)
    points = np.sort(np.concatenate([cloud.points, added]))
    return PointCloud(points=points, window=float(new_window),
                      rate_scale=cloud.rate_scale), added
