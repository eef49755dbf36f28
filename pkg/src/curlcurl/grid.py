"""
Truncated tensor-product discretization of the half-plane (0, inf) x R.

Nodes are uniform in r and z; r = 0 is a node (the symmetry axis) and nz is
odd so that z = 0 is a node as well.  Fields are stored row-major with shape
(nr, nz): row i holds u(r_i, .).

Boundary conventions
    r = rmax, |z| = zmax : homogeneous Dirichlet (fields vanish there)
    r = 0                : even reflection, u(-dr, z) = u(dr, z)

Two quadratures are provided, for the measures r^3 dr dz and r dr dz.  Both
are tensor products of a trapezoidal rule in z with a trapezoidal rule for
g(r) * r^k in r.  The r^3 rule carries the Euler-Maclaurin end correction of
the weight at r = rmax, which makes the total weight exact; the correction
sits on a Dirichlet node, so it never changes the integral of a valid field.

The Dirichlet form used by the energy is edge based (differences on the
staggered half-grid).  Its node-wise variation divided by the r^3 weights is
the conservative weighted Laplacian, which is what makes the discrete PDE
residual the exact gradient of the discrete energy.  The radial edge weights

    rho_{i+1/2} = 2 dr^3 i^2 (i+1)^2 / (2i+1)
                = r_{i+1/2}^3 (1 - 1/(2i+1)^2)^2

are the unique choice that makes the conservative operator exact on r^2 for
the node weights dr r_i^3.  Plain midpoint weights r_{i+1/2}^3 leave an
O(dr^2/r^2) consistency error, i.e. O(1) next to the axis.  The first edge
weight vanishes, so the energy does not see the axis row; axis values are
fixed by regularity instead (see axis_extrapolate).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

__all__ = [
    "Grid",
    "CylField",
    "GridMismatchError",
    "build_grid",
    "integrate_r3",
    "integrate_r1",
    "gradient",
    "dirichlet_energy",
    "dirichlet_energy_r",
    "dirichlet_energy_z",
    "weighted_laplacian",
    "axis_extrapolate",
    "write_field_csv",
    "read_field_csv",
    "gaussian",
]


class GridMismatchError(ValueError):
    """Two objects that must share a grid do not."""


@dataclass(frozen=True)
class Grid:
    rmax: float
    zmax: float
    nr: int
    nz: int

    def __post_init__(self):
        if not (np.isfinite(self.rmax) and np.isfinite(self.zmax)):
            raise ValueError("grid extents must be finite")
        if self.rmax <= 0 or self.zmax <= 0:
            raise ValueError(f"grid extents must be positive, got rmax={self.rmax}, zmax={self.zmax}")
        if self.nr < 3 or self.nz < 3:
            raise ValueError(f"need nr >= 3 and nz >= 3, got nr={self.nr}, nz={self.nz}")
        if self.nz % 2 != 1:
            raise ValueError(f"nz must be odd so that z = 0 is a node, got nz={self.nz}")

    @property
    def dr(self) -> float:
        return self.rmax / (self.nr - 1)

    @property
    def dz(self) -> float:
        return 2.0 * self.zmax / (self.nz - 1)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nr, self.nz)

    @property
    def center(self) -> int:
        """Index of the z = 0 node."""
        return (self.nz - 1) // 2

    @cached_property
    def r(self) -> np.ndarray:
        r = np.arange(self.nr, dtype=np.float64) * self.dr
        r[-1] = self.rmax
        r.flags.writeable = False
        return r

    @cached_property
    def z(self) -> np.ndarray:
        # built from the positive half and mirrored so z[k] == -z[nz-1-k] bit for bit
        c = self.center
        half = np.arange(c + 1, dtype=np.float64) * self.dz
        half[-1] = self.zmax
        z = np.concatenate([-half[::-1], half[1:]])
        z.flags.writeable = False
        return z

    @cached_property
    def R(self) -> np.ndarray:
        R = np.broadcast_to(self.r[:, None], self.shape)
        return R

    @cached_property
    def Z(self) -> np.ndarray:
        Z = np.broadcast_to(self.z[None, :], self.shape)
        return Z

    @cached_property
    def wz(self) -> np.ndarray:
        """Trapezoidal weights in z (exact for piecewise linear data)."""
        w = np.full(self.nz, self.dz)
        w[0] = w[-1] = 0.5 * self.dz
        w.flags.writeable = False
        return w

    @cached_property
    def wr3(self) -> np.ndarray:
        """Weights for g(r) r^3 dr; zero on the axis, exact total weight."""
        h = self.dr
        w = h * self.r**3
        w[-1] = 0.5 * h * self.rmax**3 - 0.25 * h * h * self.rmax**2
        w.flags.writeable = False
        return w

    @cached_property
    def wr1(self) -> np.ndarray:
        """Weights for g(r) r dr, end-corrected like wr3.

        d(g r)/dr = g at r = 0 does not vanish, so the plain trapezoid is only
        O(dr^2) there; the correction dr^2/12 moves that error to O(dr^4).
        """
        h = self.dr
        w = h * self.r.copy()
        w[0] = h * h / 12.0
        w[-1] = 0.5 * h * self.rmax - h * h / 12.0
        w.flags.writeable = False
        return w

    @cached_property
    def w3(self) -> np.ndarray:
        w = np.outer(self.wr3, self.wz)
        w.flags.writeable = False
        return w

    @cached_property
    def w1(self) -> np.ndarray:
        w = np.outer(self.wr1, self.wz)
        w.flags.writeable = False
        return w

    @cached_property
    def edge_r3(self) -> np.ndarray:
        """Radial edge weights rho_{i+1/2}, i = 0..nr-2 (rho_{1/2} = 0)."""
        i = np.arange(self.nr - 1, dtype=np.float64)
        out = 2.0 * self.dr**3 * i * i * (i + 1) ** 2 / (2 * i + 1)
        out.flags.writeable = False
        return out

    @cached_property
    def interior(self) -> np.ndarray:
        """Mask of nodes not on the Dirichlet boundary (the axis is included)."""
        m = np.zeros(self.shape, dtype=bool)
        m[:-1, 1:-1] = True
        m.flags.writeable = False
        return m

    def field(self, values) -> CylField:
        return CylField(self, values)

    def sample(self, func) -> CylField:
        """Evaluate ``func(R, Z)`` on the nodes."""
        values = np.broadcast_to(np.asarray(func(self.R, self.Z), dtype=np.float64), self.shape)
        return CylField(self, np.array(values))

    def zeros(self) -> CylField:
        return CylField(self, np.zeros(self.shape))

    def refine(self, factor: int = 2, scale: float = 1.0) -> Grid:
        """Grid with spacing divided by ``factor`` and extents multiplied by ``scale``."""
        nr = int(round((self.nr - 1) * factor * scale)) + 1
        nz = int(round((self.nz - 1) * factor * scale)) + 1
        return Grid(self.rmax * scale, self.zmax * scale, nr, nz)


def build_grid(rmax: float, zmax: float, nr: int, nz: int) -> Grid:
    """Validated constructor; raises ValueError on a bad configuration."""
    if int(nr) != nr or int(nz) != nz:
        raise ValueError("nr and nz must be integers")
    return Grid(float(rmax), float(zmax), int(nr), int(nz))


@dataclass(frozen=True, eq=False)
class CylField:
    """Samples u(r_i, z_j) on a Grid; the values array is read-only."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.shape != self.grid.shape:
            raise GridMismatchError(f"values have shape {v.shape}, grid expects {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            bad = np.argwhere(~np.isfinite(v))[0]
            raise ValueError(f"non-finite field value at node (i={bad[0]}, j={bad[1]})")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def with_values(self, values) -> CylField:
        return CylField(self.grid, values)

    def __mul__(self, other: float) -> CylField:
        return CylField(self.grid, self.values * float(other))

    __rmul__ = __mul__

    def __add__(self, other: CylField) -> CylField:
        _same_grid(self, other)
        return CylField(self.grid, self.values + other.values)

    def __sub__(self, other: CylField) -> CylField:
        _same_grid(self, other)
        return CylField(self.grid, self.values - other.values)

    def __neg__(self) -> CylField:
        return CylField(self.grid, -self.values)


def _same_grid(*fields) -> Grid:
    g = fields[0].grid
    for f in fields[1:]:
        if f.grid != g:
            raise GridMismatchError(f"fields live on different grids: {g} vs {f.grid}")
    return g


def _weighted_sum(weights: np.ndarray, values: np.ndarray) -> float:
    # fixed reduction order: rows first, then across rows
    return float(np.sum(np.sum(weights * values, axis=1)))


def integrate_r3(u2: CylField) -> float:
    """Quadrature of u2 * r^3 dr dz over the truncated domain."""
    return _weighted_sum(u2.grid.w3, u2.values)


def integrate_r1(u2: CylField) -> float:
    """Quadrature of u2 * r dr dz over the truncated domain."""
    return _weighted_sum(u2.grid.w1, u2.values)


def gradient(u: CylField) -> tuple[CylField, CylField]:
    """Node-wise (du/dr, du/dz).

    Central differences inside, second-order one-sided stencils on the outer
    boundary, and the even-extension stencil on the axis (which gives
    du/dr = 0 there).
    """
    g = u.grid
    v = u.values
    ur = np.empty_like(v)
    uz = np.empty_like(v)

    ur[1:-1] = (v[2:] - v[:-2]) / (2 * g.dr)
    ur[0] = 0.0
    ur[-1] = (3 * v[-1] - 4 * v[-2] + v[-3]) / (2 * g.dr)

    uz[:, 1:-1] = (v[:, 2:] - v[:, :-2]) / (2 * g.dz)
    uz[:, 0] = (-3 * v[:, 0] + 4 * v[:, 1] - v[:, 2]) / (2 * g.dz)
    uz[:, -1] = (3 * v[:, -1] - 4 * v[:, -2] + v[:, -3]) / (2 * g.dz)
    return CylField(g, ur), CylField(g, uz)


def dirichlet_energy_r(u: CylField) -> float:
    """Edge form for int (du/dr)^2 r^3 dr dz."""
    g = u.grid
    d = np.diff(u.values, axis=0)
    return float(np.sum(g.wz * np.sum(g.edge_r3[:, None] * d * d, axis=0))) / g.dr


def dirichlet_energy_z(u: CylField) -> float:
    """Edge form for int (du/dz)^2 r^3 dr dz."""
    g = u.grid
    d = np.diff(u.values, axis=1)
    return float(np.sum(g.wr3 * np.sum(d * d, axis=1))) / g.dz


def dirichlet_energy(u: CylField) -> float:
    """Edge form for int |grad_{r,z} u|^2 r^3 dr dz."""
    return dirichlet_energy_r(u) + dirichlet_energy_z(u)


def weighted_laplacian(u: CylField) -> np.ndarray:
    """-(1/r^3) d/dr (r^3 du/dr) - d^2u/dz^2 on interior nodes, 0 on the boundary.

    Conservative differencing of the radial flux; on the axis the
    regularized limit -4 d^2u/dr^2 with the even-extension stencil.
    """
    g = u.grid
    v = u.values
    out = np.zeros_like(v)
    dr2 = g.dr * g.dr
    flux = g.edge_r3[:, None] * np.diff(v, axis=0)
    rad = np.zeros_like(v)
    rad[1:-1] = -(flux[1:] - flux[:-1]) / (g.r[1:-1, None] ** 3 * dr2)
    rad[0] = -8.0 * (v[1] - v[0]) / dr2
    zz = np.zeros_like(v)
    zz[:, 1:-1] = -(v[:, 2:] - 2.0 * v[:, 1:-1] + v[:, :-2]) / (g.dz * g.dz)
    out[:-1, 1:-1] = rad[:-1, 1:-1] + zz[:-1, 1:-1]
    return out


def axis_extrapolate(values: np.ndarray) -> np.ndarray:
    """Copy of ``values`` with the axis row set to (4 u_1 - u_2) / 3.

    This is the value for which the one-sided second-order du/dr vanishes at
    r = 0, i.e. the discrete form of the axis regularity condition.
    """
    out = np.array(values, dtype=np.float64)
    out[0] = (4.0 * out[1] - out[2]) / 3.0
    return out


def write_field_csv(u: CylField, path) -> None:
    """Header ``r,z,value``; row-major over (i, j); 17 significant digits."""
    g = u.grid
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write("r,z,value\n")
        for i in range(g.nr):
            ri = repr_float(g.r[i])
            for j in range(g.nz):
                fh.write(f"{ri},{repr_float(g.z[j])},{repr_float(u.values[i, j])}\n")


def repr_float(x: float) -> str:
    return f"{float(x):.17g}"


def read_field_csv(path) -> CylField:
    """Inverse of write_field_csv; the grid is reconstructed from the node columns."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["r", "z", "value"]:
            raise ValueError(f"{path}: expected header 'r,z,value', got {header}")
        rows = [(float(a), float(b), float(c)) for a, b, c in reader]
    data = np.array(rows, dtype=np.float64)
    rs = np.unique(data[:, 0])
    zs = np.unique(data[:, 1])
    nr, nz = len(rs), len(zs)
    if nr * nz != len(data):
        raise ValueError(f"{path}: {len(data)} rows do not form a {nr}x{nz} tensor grid")
    grid = build_grid(rs[-1], zs[-1], nr, nz)
    if not (np.allclose(rs, grid.r, rtol=0, atol=1e-12 * grid.rmax)
            and np.allclose(zs, grid.z, rtol=0, atol=1e-12 * grid.zmax)):
        raise ValueError(f"{path}: nodes are not a uniform grid with r from 0 and symmetric z")
    if abs(-zs[0] - zs[-1]) > 1e-12 * grid.zmax or rs[0] != 0.0:
        raise ValueError(f"{path}: z nodes must be symmetric and r must start at 0")
    values = data[:, 2].reshape(nr, nz)
    # the file is row-major over (i, j); verify the ordering rather than trusting it
    expect_r = np.repeat(rs, nz)
    if not np.array_equal(data[:, 0], expect_r):
        raise ValueError(f"{path}: rows are not ordered row-major over (r, z)")
    return CylField(grid, values)


def gaussian(grid: Grid, amplitude: float = 1.0, z0: float = 0.0) -> CylField:
    """amplitude * exp(-(r^2 + (z - z0)^2) / 2), the default initial profile."""
    return grid.sample(lambda R, Z: amplitude * np.exp(-0.5 * (R * R + (Z - z0) ** 2)))


def closed_form_volume_r3(grid: Grid) -> float:
    return grid.rmax**4 / 4.0 * 2.0 * grid.zmax


SQRT_PI = math.sqrt(math.pi)
