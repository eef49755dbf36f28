"""
Lift a cylindrical profile u(r, z) to U(x) = u(r, x3) (-x2, x1, 0) on a cube.

The profile is interpolated by a tensor spline in (r, z) fitted to the
evenly mirrored data u(-r, z) = u(r, z).  The spline is even in r, so the
lifted field is smooth across the axis, and it is an exact ansatz field of
the spline profile.  Differences between the 3D residual and r times the
scalar residual of that same profile therefore measure only the 3D stencil
error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .fields import Nonlinearity, Potential, pde_residual
from .grid import CylField

__all__ = [
    "VectorField3D",
    "ProfileInterpolant",
    "reconstruct",
    "divergence",
    "curl",
    "curlcurl_residual",
    "curlcurl_residual_vector",
    "scalar_residual_lifted",
    "consistency_error",
    "interior_mask",
    "write_vtk",
    "write_slice_csv",
]


class ProfileInterpolant:
    """u(r, z) and its derivatives from node data; zero outside the truncated domain."""

    def __init__(self, u: CylField, method: str = "quintic"):
        g = u.grid
        self.grid = g
        self.method = method
        if method == "quintic":
            r_m = np.concatenate([-g.r[:0:-1], g.r])
            v_m = np.concatenate([u.values[:0:-1], u.values], axis=0)
            self._spl = RectBivariateSpline(r_m, g.z, v_m, kx=5, ky=5, s=0)
        elif method == "bilinear":
            self._spl = RectBivariateSpline(g.r, g.z, u.values, kx=1, ky=1, s=0)
        else:
            raise ValueError(f"unknown interpolation method {method!r}")

    def __call__(self, r, z, dr: int = 0, dz: int = 0):
        r = np.asarray(r, dtype=np.float64)
        z = np.asarray(z, dtype=np.float64)
        r, z = np.broadcast_arrays(r, z)
        ra = np.abs(r) if self.method == "bilinear" else r
        out = self._spl.ev(ra.ravel(), z.ravel(), dx=dr, dy=dz).reshape(r.shape)
        inside = (np.abs(r) <= self.grid.rmax) & (np.abs(z) <= self.grid.zmax)
        return np.where(inside, out, 0.0)


@dataclass
class VectorField3D:
    L: float
    n: int
    U1: np.ndarray
    U2: np.ndarray
    U3: np.ndarray

    @property
    def h(self) -> float:
        return 2.0 * self.L / (self.n - 1)

    @property
    def axis(self) -> np.ndarray:
        # mirrored like the cylindrical z-nodes, so x = 0 is a node and the grid is exactly symmetric
        c = (self.n - 1) // 2
        half = np.arange(c + 1, dtype=np.float64) * self.h
        half[-1] = self.L
        return np.concatenate([-half[::-1], half[1:]])

    def coords(self):
        x = self.axis
        return np.meshgrid(x, x, x, indexing="ij")

    def magnitude(self) -> np.ndarray:
        return np.sqrt(self.U1**2 + self.U2**2 + self.U3**2)


def _check_cube(u: CylField, L: float, n: int) -> None:
    g = u.grid
    if not (0 < L <= min(g.rmax, g.zmax)):
        raise ValueError(f"L={L} must lie in (0, min(rmax, zmax)] = (0, {min(g.rmax, g.zmax)}]")
    if n < 5 or n % 2 == 0:
        raise ValueError(f"need an odd node count >= 5 per direction, got {n}")


def _ansatz(prof: ProfileInterpolant, X1, X2, X3):
    uu = prof(np.hypot(X1, X2), X3)
    return -X2 * uu, X1 * uu, np.zeros_like(uu)


def reconstruct(u: CylField, L: float, n: int, method: str = "quintic") -> VectorField3D:
    """Sample the ansatz field on the (n x n x n) grid over [-L, L]^3."""
    _check_cube(u, L, n)
    U = VectorField3D(float(L), int(n), None, None, None)
    U.U1, U.U2, U.U3 = _ansatz(ProfileInterpolant(u, method), *U.coords())
    return U


def _d(a: np.ndarray, axis: int, h: float) -> np.ndarray:
    """Central difference along ``axis``; the outermost layer is left at 0."""
    out = np.zeros_like(a)
    idx = [slice(None)] * 3
    idx_p = list(idx)
    idx_m = list(idx)
    idx[axis] = slice(1, -1)
    idx_p[axis] = slice(2, None)
    idx_m[axis] = slice(None, -2)
    out[tuple(idx)] = (a[tuple(idx_p)] - a[tuple(idx_m)]) / (2.0 * h)
    return out


def _div(A1, A2, A3, h):
    return _d(A1, 0, h) + _d(A2, 1, h) + _d(A3, 2, h)


def divergence(U: VectorField3D) -> np.ndarray:
    return _div(U.U1, U.U2, U.U3, U.h)


def curl(A1, A2, A3, h):
    return (
        _d(A3, 1, h) - _d(A2, 2, h),
        _d(A1, 2, h) - _d(A3, 0, h),
        _d(A2, 0, h) - _d(A1, 1, h),
    )


def _vector_residual(A, X1, X2, X3, h, V, f):
    CC = curl(*curl(*A, h), h)
    r = np.hypot(X1, X2)
    coef = V(r, X3) - f.eval_f(r, X3, A[0] ** 2 + A[1] ** 2 + A[2] ** 2)
    return tuple(cc + coef * a for cc, a in zip(CC, A))


def curlcurl_residual_vector(U: VectorField3D, V: Potential, f: Nonlinearity):
    """Components of curl curl U + V U - f(x, |U|^2) U (valid two cells inside)."""
    return _vector_residual((U.U1, U.U2, U.U3), *U.coords(), U.h, V, f)


def curlcurl_residual(U: VectorField3D, V: Potential, f: Nonlinearity) -> np.ndarray:
    """Pointwise |curl curl U + V U - f(x, |U|^2) U|."""
    R1, R2, R3 = curlcurl_residual_vector(U, V, f)
    return np.sqrt(R1**2 + R2**2 + R3**2)


def _lifted(u, prof, X1, X2, X3, V, f):
    r = np.hypot(X1, X2)
    if prof.method == "bilinear":
        s = ProfileInterpolant(pde_residual(u, V, f), "bilinear")(r, X3)
    else:
        p = prof(r, X3)
        pr = prof(r, X3, dr=1)
        prr = prof(r, X3, dr=2)
        pzz = prof(r, X3, dz=2)
        with np.errstate(divide="ignore", invalid="ignore"):
            # (3/r) u_r -> 3 u_rr on the axis for an even profile
            lap = -(prr + 3.0 * np.where(r > 0, pr / r, prr)) - pzz
        s = lap + (V(r, X3) - f.eval_f(r, X3, r * r * p * p)) * p
    return -X2 * s, X1 * s, np.zeros_like(s)


def scalar_residual_lifted(u: CylField, U: VectorField3D, V: Potential, f: Nonlinearity, method: str = "quintic"):
    """Vector field s(r, x3) (-x2, x1, 0), s the scalar residual.

    With the quintic profile, s is the exact residual of the spline (spline
    derivatives); with the bilinear profile, s interpolates the discrete
    cylindrical residual.
    """
    return _lifted(u, ProfileInterpolant(u, method), *U.coords(), V, f)


def interior_mask(U: VectorField3D, margin: int = 2, r_min_cells: float = 2.0) -> np.ndarray:
    """Nodes at least ``margin`` cells inside the cube and with r > r_min_cells * h."""
    n = U.n
    m = np.zeros((n, n, n), dtype=bool)
    m[margin:-margin, margin:-margin, margin:-margin] = True
    X1, X2, _ = U.coords()
    return m & (np.hypot(X1, X2) > r_min_cells * U.h)


def _slab_errors(u, prof, x, h, k0, k1, V, f, margin, r_min_cells):
    """Consistency maxima over the planes k0..k1-1, computed on a haloed slab."""
    n = len(x)
    a, b = max(k0 - margin, 0), min(k1 + margin, n)
    X1, X2, X3 = np.meshgrid(x, x, x[a:b], indexing="ij")
    A = _ansatz(prof, X1, X2, X3)
    div = _div(*A, h)
    vec = _vector_residual(A, X1, X2, X3, h, V, f)
    lifted = _lifted(u, prof, X1, X2, X3, V, f)
    diff = np.sqrt(sum((p - q) ** 2 for p, q in zip(vec, lifted)))
    ks = np.arange(a, b)
    keep = (ks >= max(k0, margin)) & (ks < min(k1, n - margin))
    mask = np.zeros(X1.shape, dtype=bool)
    mask[margin:-margin, margin:-margin, keep] = True
    mask &= np.hypot(X1, X2) > r_min_cells * h
    if not mask.any():
        return 0.0, 0.0
    return float(np.max(np.abs(div[mask]))), float(np.max(diff[mask]))


def consistency_error(
    u: CylField,
    L: float,
    n: int,
    V: Potential,
    f: Nonlinearity,
    method: str = "quintic",
    slab: int = 16,
    workers: int = 1,
    margin: int = 2,
    r_min_cells: float = 2.0,
):
    """(max |div U|, max |vector residual - r * scalar residual e_theta|) on the n^3 cube.

    Only nodes ``margin`` cells inside the cube with r > r_min_cells * h
    count.  The cube is processed in x3-slabs so memory stays bounded;
    slab maxima are combined in slab order.
    """
    _check_cube(u, L, n)
    geom = VectorField3D(float(L), int(n), None, None, None)
    x, h = geom.axis, geom.h
    prof = ProfileInterpolant(u, method)
    jobs = [(k, min(k + slab, n)) for k in range(0, n, slab)]

    def run(job):
        return _slab_errors(u, prof, x, h, job[0], job[1], V, f, margin, r_min_cells)

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    return max(r[0] for r in results), max(r[1] for r in results)


def write_vtk(U: VectorField3D, path, scalars: np.ndarray | None = None, scalar_name: str = "residual") -> None:
    """Legacy ASCII STRUCTURED_POINTS with one VECTORS and one SCALARS attribute."""
    n = U.n
    if scalars is None:
        scalars = np.zeros((n, n, n))
    h = U.h
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write("ansatz field u(r,z)(-x2,x1,0)\n")
        fh.write("ASCII\n")
        fh.write("DATASET STRUCTURED_POINTS\n")
        fh.write(f"DIMENSIONS {n} {n} {n}\n")
        fh.write(f"ORIGIN {-U.L:.17g} {-U.L:.17g} {-U.L:.17g}\n")
        fh.write(f"SPACING {h:.17g} {h:.17g} {h:.17g}\n")
        fh.write(f"POINT_DATA {n ** 3}\n")
        fh.write("VECTORS U double\n")
        # VTK point order: x fastest, then y, then z
        vec = np.stack([U.U1, U.U2, U.U3], axis=-1).transpose(2, 1, 0, 3).reshape(-1, 3)
        np.savetxt(fh, vec, fmt="%.17g")
        fh.write(f"SCALARS {scalar_name} double 1\n")
        fh.write("LOOKUP_TABLE default\n")
        np.savetxt(fh, np.asarray(scalars).transpose(2, 1, 0).reshape(-1), fmt="%.17g")


def write_slice_csv(U: VectorField3D, path, k: int | None = None) -> None:
    """The plane x3 = x3[k] (default the middle plane) as rows x1,x2,x3,U1,U2,U3."""
    n = U.n
    k = (n - 1) // 2 if k is None else k
    x = U.axis
    X1, X2 = np.meshgrid(x, x, indexing="ij")
    data = np.column_stack(
        [X1.ravel(), X2.ravel(), np.full(n * n, x[k]), U.U1[:, :, k].ravel(), U.U2[:, :, k].ravel(), U.U3[:, :, k].ravel()]
    )
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("x1,x2,x3,U1,U2,U3\n")
        np.savetxt(fh, data, fmt="%.17g", delimiter=",")
