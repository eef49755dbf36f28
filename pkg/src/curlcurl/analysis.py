"""
Numerical checks of the functional inequalities and of coercivity.

Each check returns an InequalityReport with the convention
    pass  <=>  lhs <= constant * rhs + tol,    slack = lhs - constant * rhs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .fields import Potential
from .grid import CylField, Grid, GridMismatchError, dirichlet_energy, dirichlet_energy_r
from .symmetry import steiner_rows

__all__ = [
    "InequalityReport",
    "DecayReport",
    "PreconditionError",
    "CoercivityError",
    "C_HARDY",
    "C_EMB",
    "hardy_weights",
    "check_hardy",
    "embedding_ratio",
    "check_embedding",
    "decay_constant",
    "check_nonexpansivity",
    "quadratic_form_matrices",
    "coercivity_lambda_min",
]

C_HARDY = 1.0
# Calibrated on seeded bump corpora, q in {2,...,6}, boxes of half-width 2..64.
# Sup observed 0.995 at q = 2 on wide fields, where the ratio is <= 1 by the
# choice of weights (r^2 w1 = w3 off the boundary); every q > 2 stayed below 0.45.
C_EMB = 1.0


class PreconditionError(ValueError):
    pass


class CoercivityError(RuntimeError):
    """Inverse iteration did not converge; carries the last Rayleigh quotient."""

    def __init__(self, message: str, last_rq: float):
        super().__init__(f"{message} (last Rayleigh quotient {last_rq!r})")
        self.last_rq = last_rq


@dataclass
class InequalityReport:
    id: str
    lhs: float
    rhs: float
    constant: float
    passed: bool
    slack: float

    def csv_row(self) -> str:
        return f"{self.id},{self.lhs:.17g},{self.rhs:.17g},{self.constant:.17g},{str(self.passed).lower()},{self.slack:.17g}"


def _report(id_: str, lhs: float, rhs: float, c: float, tol: float) -> InequalityReport:
    slack = lhs - c * rhs
    return InequalityReport(id_, lhs, rhs, c, bool(slack <= tol), slack)


def hardy_weights(grid: Grid) -> np.ndarray:
    """Weights for int g r dr dz that leave out the axis row.

    The axis end correction dr^2/12 of the r-dr rule is carried by the first
    off-axis row instead; for even g this keeps the rule O(dr^4).
    """
    wr = np.array(grid.wr1)
    wr[1] += wr[0]
    wr[0] = 0.0
    return np.outer(wr, grid.wz)


def check_hardy(u: CylField, tol: float = 1e-12) -> InequalityReport:
    """int u^2 / r^2 r^3  <=  C_H int |grad u|^2 r^3."""
    lhs = float(np.sum(np.sum(hardy_weights(u.grid) * u.values**2, axis=1)))
    rhs = dirichlet_energy(u)
    return _report("hardy", lhs, rhs, C_HARDY, tol * (1.0 + abs(lhs)))


def embedding_ratio(u: CylField, q: float) -> tuple[float, float]:
    """(||r u||_{L^q(r dr dz)}, ||u||_{H^1(r^3 dr dz)})."""
    if not (2.0 <= q <= 6.0):
        raise ValueError(f"embedding exponent q must lie in [2, 6], got {q}")
    g = u.grid
    ru = np.abs(g.R * u.values)
    num = float(np.sum(np.sum(g.w1 * ru**q, axis=1))) ** (1.0 / q)
    den = float(np.sqrt(dirichlet_energy(u) + np.sum(np.sum(g.w3 * u.values**2, axis=1))))
    return num, den


def check_embedding(u: CylField, q: float, constant: float = C_EMB, tol: float = 1e-12) -> InequalityReport:
    num, den = embedding_ratio(u, q)
    ratio = num / den if den > 0 else 0.0
    # lhs is the ratio itself so the report is scale free; rhs = 1
    return _report(f"embedding_q{q:g}", ratio, 1.0, constant, tol)


@dataclass
class DecayReport:
    constant: float
    r: float
    z: float
    index: tuple[int, int]
    nr: int
    nz: int
    grad_r_norm: float
    l2_norm: float


def decay_constant(u: CylField, tol: float = 1e-10) -> DecayReport:
    """sup u r^(3/2) |z|^(1/2) / (||du/dr||^(1/2) ||u||^(1/2)) over the nodes.

    Norms are L^2(r^3 dr dz).  Requires u >= 0 with every row nonincreasing
    in |z|.
    """
    g = u.grid
    v = u.values
    if np.any(v < -tol):
        i, j = np.unravel_index(np.argmin(v), v.shape)
        raise PreconditionError(f"decay_constant needs u >= 0; u[{i},{j}] = {v[i, j]:.6g}")
    c = g.center
    upper = np.diff(v[:, c:], axis=1)           # should be <= 0
    lower = np.diff(v[:, c::-1], axis=1)        # walking toward -zmax, should be <= 0
    excess = np.maximum(upper.max(axis=1), lower.max(axis=1))
    if np.any(excess > tol):
        worst = int(np.argmax(excess))
        raise PreconditionError(
            f"row i={worst} (r={g.r[worst]:.6g}) increases in |z| by {excess[worst]:.3g}; "
            "u is not Steiner-symmetric"
        )
    gr = float(np.sqrt(dirichlet_energy_r(u)))
    l2 = float(np.sqrt(np.sum(np.sum(g.w3 * v * v, axis=1))))
    if gr == 0.0 or l2 == 0.0:
        return DecayReport(0.0, 0.0, 0.0, (0, c), g.nr, g.nz, gr, l2)
    prod = v * g.R**1.5 * np.sqrt(np.abs(g.Z))
    i, j = np.unravel_index(int(np.argmax(prod)), prod.shape)
    const = float(prod[i, j]) / np.sqrt(gr * l2)
    return DecayReport(const, float(g.r[i]), float(g.z[j]), (int(i), int(j)), g.nr, g.nz, gr, l2)


def check_nonexpansivity(u: CylField, v: CylField, tol: float = 1e-12) -> InequalityReport:
    """Rowwise ||u* - v*|| <= ||u - v||, aggregated with the r^3 z-weights."""
    if u.grid != v.grid:
        raise GridMismatchError("u and v live on different grids")
    if np.any(u.values < 0) or np.any(v.values < 0):
        raise ValueError("check_nonexpansivity needs u, v >= 0")
    g = u.grid
    d_sym = steiner_rows(u.values) - steiner_rows(v.values)
    d = u.values - v.values
    row_lhs = np.sum(d_sym * d_sym, axis=1)
    row_rhs = np.sum(d * d, axis=1)
    rows_ok = bool(np.all(row_lhs <= row_rhs * (1.0 + tol) + tol))
    lhs = float(np.sqrt(np.sum(g.w3 * d_sym * d_sym)))
    rhs = float(np.sqrt(np.sum(g.w3 * d * d)))
    rep = _report("nonexpansivity", lhs, rhs, 1.0, tol * (1.0 + rhs))
    rep.passed = rep.passed and rows_ok
    return rep


# -- coercivity -------------------------------------------------------------------


def quadratic_form_matrices(V: Potential):
    """Sparse (A, w) with x.A.x = int (|grad u|^2 + V u^2) r^3 and x.diag(w).x = int u^2 r^3.

    Unknowns are the nodes off the axis and off the Dirichlet boundary, in
    row-major order.  The axis row carries no weight in either form.
    """
    g = V.grid
    m, k = g.nr - 2, g.nz - 2
    wr = g.wr3[1:-1]
    wz = g.wz[1:-1]

    # radial edges (i, i+1) for i = 1..nr-2; u_{nr-1} = 0
    Dr = sp.diags([-np.ones(m), np.ones(m - 1)], [0, 1], shape=(m, m), format="csr")
    rho = g.edge_r3[1:] / g.dr
    Ar = Dr.T @ sp.diags(rho) @ Dr
    # z edges (j, j+1) for j = 0..nz-2 with both ends pinned to 0
    Dz = sp.diags([-np.ones(k), np.ones(k)], [0, -1], shape=(k + 1, k), format="csr")
    Az = (Dz.T @ Dz) / g.dz

    w = np.kron(wr, wz)
    A = sp.kron(Ar, sp.diags(wz)) + sp.kron(sp.diags(wr), Az) + sp.diags(w * V.values[1:-1, 1:-1].ravel())
    return A.tocsc(), w


def coercivity_lambda_min(V: Potential, tol: float = 1e-8, max_iter: int = 5000) -> float:
    """Smallest eigenvalue of A x = lambda W x by shifted inverse iteration."""
    A, w = quadratic_form_matrices(V)
    s = 1.0 / np.sqrt(w)
    B = sp.diags(s) @ A @ sp.diags(s)
    # B >= min(V) because the gradient part is nonnegative: the shift keeps B - sigma positive definite
    sigma = float(V.values[1:-1, 1:-1].min()) - 1.0
    n = B.shape[0]
    lu = splu((B - sigma * sp.identity(n, format="csc")).tocsc())
    x = np.sqrt(w)  # W^{1/2} * ones, i.e. the constant profile
    x /= np.linalg.norm(x)
    rq = float(x @ (B @ x))
    for _ in range(max_iter):
        y = lu.solve(x)
        x = y / np.linalg.norm(y)
        Bx = B @ x
        rq = float(x @ Bx)
        res = float(np.linalg.norm(Bx - rq * x))
        if res <= tol * max(abs(rq), 1.0):
            return rq
    raise CoercivityError(f"inverse iteration did not reach residual {tol:g} in {max_iter} steps", rq)
