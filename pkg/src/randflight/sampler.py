"""Monte Carlo oracle: flight simulation and histogram density estimates.

Sampling is exact: the switching count is Poisson, the switching times
given the count are sorted uniforms, and every direction is an exact
draw from the dissipation law.  All public entry points take explicit
seeds or generators; runs are reproducible and blocks are merged in a
fixed order, so results do not depend on the worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import FlightParams, PolarGrid, RadialGrid
from .dissipation import DissipationLaw
from .errors import DomainError, EstimationError

__all__ = [
    "FlightSample",
    "DensityEstimate",
    "simulate_flight",
    "simulate_batch",
    "estimate_density",
]

_BOUNDARY_REL_TOL = 1e-9


@dataclass(frozen=True)
class FlightSample:
    """Terminal position of one flight and its number of turns."""

    position: np.ndarray
    n_events: int


def simulate_flight(params: FlightParams, law: DissipationLaw, t: float,
                    rng: np.random.Generator) -> FlightSample:
    """Simulate a single flight up to time t."""
    if not t > 0:
        raise DomainError(f"time must be positive, got {t}")
    n = int(rng.poisson(params.lam * t))
    if n == 0:
        u = law.sample(rng, 1)[0]
        return FlightSample(params.c * t * u, 0)
    times = np.sort(rng.random(n)) * t
    durations = np.diff(np.concatenate([[0.0], times, [t]]))
    dirs = law.sample(rng, n + 1)
    position = params.c * durations @ dirs
    return FlightSample(position, n)


def simulate_batch(params: FlightParams, law: DissipationLaw, t: float,
                   n_samples: int,
                   rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized simulation; returns (positions (n, m), event counts (n,)).

    Samples are grouped by event count so that each group runs as one
    array operation; the iteration order over counts is deterministic.
    """
    counts = rng.poisson(params.lam * t, n_samples)
    positions = np.empty((n_samples, params.m))
    for n in np.unique(counts):
        sel = np.flatnonzero(counts == n)
        k = sel.size
        if n == 0:
            positions[sel] = params.c * t * law.sample(rng, k)
            continue
        times = np.sort(rng.random((k, n)), axis=1) * t
        bounds = np.concatenate(
            [np.zeros((k, 1)), times, np.full((k, 1), t)], axis=1)
        durations = np.diff(bounds, axis=1)
        dirs = law.sample(rng, k * (n + 1)).reshape(k, n + 1, params.m)
        positions[sel] = params.c * np.einsum("ij,ijk->ik", durations, dirs)
    return positions, counts


@dataclass(frozen=True)
class DensityEstimate:
    """Histogram density estimate on a grid with per-bin standard errors.

    For ``conditioning='all'`` the estimate targets the absolutely
    continuous component: zero-event samples (which sit exactly on the
    support sphere) are excluded from the bins and reported through
    ``boundary_fraction``; the binned mass then estimates 1 - exp(-lam t).
    For integer conditioning the estimate is the conditional density
    given that many turns, normalized by the conditioned sample count.
    """

    grid: RadialGrid | PolarGrid
    values: np.ndarray
    standard_errors: np.ndarray
    n_samples: int
    conditioning: str | int
    n_conditioned: int
    boundary_fraction: float


def _radial_bin_edges(grid: RadialGrid | PolarGrid) -> np.ndarray:
    r = grid.nodes
    inner = 0.5 * (r[:-1] + r[1:])
    return np.concatenate([[0.0], inner, [grid.support_radius]])


def _bin_volumes(edges: np.ndarray, m: int) -> np.ndarray:
    if m == 2:
        return np.pi * np.diff(edges**2)
    if m == 3:
        return 4.0 / 3.0 * np.pi * np.diff(edges**3)
    raise DomainError(f"binning not implemented for m={m}")


def estimate_density(params: FlightParams, law: DissipationLaw, t: float,
                     n_samples: int, grid: RadialGrid | PolarGrid,
                     conditioning: str | int = "all",
                     seed: int | np.random.Generator = 0,
                     block_size: int = 1_000_000,
                     threads: int | None = None) -> DensityEstimate:
    """Bin-count density estimate from ``n_samples`` simulated flights."""
    if n_samples < 10_000:
        raise DomainError("estimate_density needs at least 1e4 samples")
    if isinstance(grid, PolarGrid) and params.m != 2:
        raise DomainError("polar binning is planar only")

    if isinstance(seed, np.random.Generator):
        root = seed.bit_generator.seed_seq
    else:
        root = np.random.SeedSequence(seed)
    n_blocks = (n_samples + block_size - 1) // block_size
    child_seeds = root.spawn(n_blocks)
    sizes = [min(block_size, n_samples - i * block_size) for i in range(n_blocks)]

    edges_r = _radial_bin_edges(grid)
    polar = isinstance(grid, PolarGrid)
    if polar:
        n_th = grid.n_theta
        dth = 2.0 * np.pi / n_th

    def one_block(args):
        size, ss = args
        rng = np.random.default_rng(ss)
        pos, counts = simulate_batch(params, law, t, size, rng)
        n_zero = int(np.count_nonzero(counts == 0))
        if conditioning == "all":
            keep = counts >= 1
        else:
            keep = counts == int(conditioning)
        pos = pos[keep]
        radii = np.linalg.norm(pos, axis=1)
        ct = params.radius(t)
        n_boundary = int(np.count_nonzero(radii >= ct * (1.0 - _BOUNDARY_REL_TOL)))
        if polar:
            theta = np.arctan2(pos[:, 1], pos[:, 0])
            # angular bins centered on the grid angles, with wraparound
            jth = np.floor((theta + np.pi + 0.5 * dth) / dth).astype(int) % n_th
            ir = np.searchsorted(edges_r, radii, side="right") - 1
            ok = (ir >= 0) & (ir < grid.n_r)
            hist = np.zeros((grid.n_r, n_th))
            np.add.at(hist, (ir[ok], jth[ok]), 1.0)
        else:
            hist, _ = np.histogram(radii, bins=edges_r)
        return hist.astype(float), int(keep.sum()), n_zero, n_boundary

    work = list(zip(sizes, child_seeds))
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(one_block, work))
    else:
        results = [one_block(w) for w in work]

    hist = sum(r[0] for r in results)
    n_kept = sum(r[1] for r in results)
    n_zero = sum(r[2] for r in results)
    n_boundary = sum(r[3] for r in results)

    if n_kept == 0:
        raise EstimationError(
            f"empty conditioning set: no samples with conditioning="
            f"{conditioning!r} out of {n_samples} (zero-event count {n_zero})")

    vols = _bin_volumes(edges_r, params.m)
    if polar:
        vols = vols[:, None] * (dth / (2.0 * np.pi))
    if conditioning == "all":
        norm = n_samples  # joint AC density: mass sums to P(N >= 1)
    else:
        norm = n_kept  # conditional density: mass sums to 1
    values = hist / (norm * vols)
    errors = np.sqrt(hist) / (norm * vols)
    return DensityEstimate(grid, values, errors, n_samples, conditioning,
                           n_kept, n_boundary / max(n_kept, 1))


def zero_event_fraction(params: FlightParams, law: DissipationLaw, t: float,
                        n_samples: int,
                        seed: int = 0) -> tuple[float, float]:
    """Fraction of flights with no turns and its binomial standard error."""
    rng = np.random.default_rng(seed)
    counts = rng.poisson(params.lam * t, n_samples)
    p = np.count_nonzero(counts == 0) / n_samples
    return p, math.sqrt(max(p * (1 - p), 1e-300) / n_samples)
