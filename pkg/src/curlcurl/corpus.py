"""Seeded random test fields: sums of smooth bumps with compact support in the box."""

from __future__ import annotations

import numpy as np

from .grid import CylField, Grid

__all__ = ["random_bumps", "field_corpus", "cutoff"]


def cutoff(grid: Grid) -> np.ndarray:
    """(1 - (r/rmax)^2)^2 (1 - (z/zmax)^2)^2: smooth, even in r, zero on the outer boundary."""
    a = 1.0 - (grid.R / grid.rmax) ** 2
    b = 1.0 - (grid.Z / grid.zmax) ** 2
    return (a * a) * (b * b)


def random_bumps(grid: Grid, rng: np.random.Generator, max_bumps: int = 4, centered: bool = False) -> CylField:
    """Nonnegative sum of 1..max_bumps Gaussian bumps, even in r, times the cutoff.

    Widths are at least three cells so every bump is resolved.  With
    ``centered`` all bumps sit at z = 0 (the field is then Steiner-symmetric).
    """
    R, Z = grid.R, grid.Z
    out = np.zeros(grid.shape)
    hmin = 3.0 * max(grid.dr, grid.dz)
    for _ in range(int(rng.integers(1, max_bumps + 1))):
        amp = rng.uniform(0.2, 2.0)
        r0 = rng.uniform(0.0, 0.4 * grid.rmax)
        z0 = 0.0 if centered else rng.uniform(-0.4 * grid.zmax, 0.4 * grid.zmax)
        sr = max(hmin, rng.uniform(0.04, 0.2) * grid.rmax)
        sz = max(hmin, rng.uniform(0.04, 0.2) * grid.zmax)
        gz = np.exp(-0.5 * ((Z - z0) / sz) ** 2)
        gr = 0.5 * (np.exp(-0.5 * ((R - r0) / sr) ** 2) + np.exp(-0.5 * ((R + r0) / sr) ** 2))
        out += amp * gr * gz
    return CylField(grid, out * cutoff(grid))


def field_corpus(grid: Grid, seed: int, count: int, **kw) -> list[CylField]:
    rng = np.random.default_rng(seed)
    return [random_bumps(grid, rng, **kw) for _ in range(count)]
