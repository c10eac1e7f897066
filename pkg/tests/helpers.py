"""Shared test fixtures: seeded random states and small oracles."""

from __future__ import annotations

import numpy as np

from vnlab import (
    DensityOperator,
    Grid1D,
    PhaseSpaceDensity,
    SpectralObservable,
)
from vnlab.states import phase_density_from_values


def random_density_matrix(dim: int, rng: np.random.Generator, rank: int | None = None) -> DensityOperator:
    """Mixture of Haar-like random pure states."""
    rank = rank or dim
    m = np.zeros((dim, dim), dtype=complex)
    weights = rng.random(rank)
    weights /= weights.sum()
    for w in weights:
        v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        v /= np.linalg.norm(v)
        m += w * np.outer(v, v.conj())
    return DensityOperator(m)


def random_spectral_observable(dim: int, rng: np.random.Generator) -> SpectralObservable:
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return SpectralObservable.from_hermitian(g + g.conj().T)


def random_gaussian_mixture(
    qgrid: Grid1D, pgrid: Grid1D, rng: np.random.Generator, k: int = 2
) -> PhaseSpaceDensity:
    """Convex combination of k off-center Gaussians, safely inside the grid."""
    qq, pp = np.meshgrid(qgrid.nodes, pgrid.nodes, indexing="ij")
    vals = np.zeros_like(qq)
    weights = rng.random(k)
    weights /= weights.sum()
    for w in weights:
        cq = rng.uniform(0.25 * qgrid.lo, 0.25 * qgrid.hi)
        cp = rng.uniform(0.25 * pgrid.lo, 0.25 * pgrid.hi)
        sq = rng.uniform(0.6, 1.2)
        sp = rng.uniform(0.6, 1.2)
        vals += w * np.exp(-0.5 * ((qq - cq) / sq) ** 2 - 0.5 * ((pp - cp) / sp) ** 2) / (
            2.0 * np.pi * sq * sp
        )
    return phase_density_from_values(qgrid, pgrid, vals)


def trace_distance(a: DensityOperator, b: DensityOperator) -> float:
    w = np.linalg.eigvalsh(a.matrix - b.matrix)
    return 0.5 * float(np.sum(np.abs(w)))


def density_variance(grid: Grid1D, density: np.ndarray) -> float:
    mass = grid.integrate(density)
    mean = grid.integrate(grid.nodes * density) / mass
    return grid.integrate((grid.nodes - mean) ** 2 * density) / mass
