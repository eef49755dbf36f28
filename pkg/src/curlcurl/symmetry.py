"""
Discrete Steiner symmetrization in z and the rearrangement checks.

Each r-row is sorted in decreasing order and written back at the z-nodes
ordered by distance from the center: 0, +dz, -dz, +2dz, -2dz, ...  On a
uniform z-grid this is a permutation of the row, so every rowwise level set
keeps its measure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fields import Nonlinearity, Potential, nonlinear_I, nonlinear_Iprime, norm_V, validate_nonlinearity
from .grid import CylField, Grid, GridMismatchError

__all__ = [
    "steiner_symmetrize",
    "steiner_rows",
    "placement_order",
    "is_reversed_steiner",
    "is_steiner_symmetric",
    "check_rearrangement",
    "SymmetryReport",
    "z_energy_rows",
    "r_edge_energy",
]


def placement_order(nz: int) -> np.ndarray:
    """Column indices in the order they receive decreasing values."""
    c = nz // 2
    order = [c]
    for k in range(1, c + 1):
        order += [c + k, c - k]
    return np.asarray(order, dtype=np.intp)


def steiner_rows(values: np.ndarray) -> np.ndarray:
    """Symmetric-decreasing rearrangement of every row of a 2D array."""
    v = np.asarray(values, dtype=np.float64)
    nz = v.shape[-1]
    if nz % 2 == 0:
        raise ValueError("row length must be odd so that z=0 is a node")
    # stable sort of -v keeps equal values in index order
    idx = np.argsort(-v, axis=-1, kind="stable")
    ranked = np.take_along_axis(v, idx, axis=-1)
    out = np.empty_like(v)
    out[..., placement_order(nz)] = ranked
    return out


def steiner_symmetrize(u: CylField) -> CylField:
    if np.any(u.values < 0):
        i, j = np.argwhere(u.values < 0)[0]
        raise ValueError(
            f"steiner_symmetrize needs u >= 0; u[{i},{j}] = {u.values[i, j]:.6g} (take max(u, 0) or |u| first)"
        )
    return u.with_values(steiner_rows(u.values))


def is_steiner_symmetric(u: CylField, tol: float = 1e-8) -> bool:
    if np.any(u.values < 0):
        return False
    return bool(np.max(np.abs(steiner_rows(u.values) - u.values), initial=0.0) <= tol)


def is_reversed_steiner(V: Potential, tol: float = 1e-12) -> bool:
    """True iff max V - V is Steiner-symmetric row by row."""
    w = V.values.max() - V.values
    return bool(np.max(np.abs(steiner_rows(w) - w), initial=0.0) <= tol)


def z_energy_rows(values: np.ndarray) -> np.ndarray:
    """Sum over j of (u_{i,j+1} - u_{i,j})^2 per row (unscaled)."""
    d = np.diff(values, axis=1)
    return np.sum(d * d, axis=1)


def r_edge_energy(values: np.ndarray) -> np.ndarray:
    """Sum over j of (u_{i+1,j} - u_{i,j})^2 per radial edge (unscaled)."""
    d = np.diff(values, axis=0)
    return np.sum(d * d, axis=1)


@dataclass
class SymmetryReport:
    norm_before: float
    norm_after: float
    I_before: float
    I_after: float
    Iprime_before: float
    Iprime_after: float
    slacks: dict[str, float] = field(default_factory=dict)
    violations: list[tuple[str, float]] = field(default_factory=list)
    preconditions: list[str] = field(default_factory=list)
    rowwise_l2_preserved: bool = True
    polya_szego_z: bool = True
    r_edges_nonexpanding: bool = True

    @property
    def passed(self) -> bool:
        return not self.violations

    def lines(self) -> list[str]:
        out = [
            f"norm_before={self.norm_before!r}",
            f"norm_after={self.norm_after!r}",
            f"I_before={self.I_before!r}",
            f"I_after={self.I_after!r}",
            f"Iprime_before={self.Iprime_before!r}",
            f"Iprime_after={self.Iprime_after!r}",
        ]
        out += [f"slack_{k}={v!r}" for k, v in self.slacks.items()]
        out += [
            f"rowwise_l2_preserved={str(self.rowwise_l2_preserved).lower()}",
            f"polya_szego_z={str(self.polya_szego_z).lower()}",
            f"r_edges_nonexpanding={str(self.r_edges_nonexpanding).lower()}",
            f"violations={len(self.violations)}",
        ]
        out += [f"violation={k} slack={s!r}" for k, s in self.violations]
        out += [f"precondition_failed={p}" for p in self.preconditions]
        out.append(f"pass={str(self.passed).lower()}")
        return out


def check_rearrangement(
    u: CylField,
    V: Potential,
    f: Nonlinearity,
    rel_tol: float = 1e-10,
    validate_f: bool = True,
) -> SymmetryReport:
    """Compare u and u* on the norm, I, I' and the sectional energies.

    An inequality lhs <= rhs is violated when lhs - rhs > rel_tol * (1 + |lhs|).
    Failed preconditions are listed in the report; the comparisons still run
    on max(u, 0).
    """
    if V.grid != u.grid:
        raise GridMismatchError("u and V live on different grids")
    pre = []
    if np.any(u.values < 0):
        pre.append(f"u has negative values (min {u.values.min():.3g}); using max(u, 0)")
        u = u.with_values(np.maximum(u.values, 0.0))
    edge = np.concatenate([u.values[-1], u.values[:, 0], u.values[:, -1]])
    if np.any(edge != 0.0):
        pre.append(f"u is nonzero on the Dirichlet boundary (max {np.abs(edge).max():.3g})")
    if not is_reversed_steiner(V, 1e-12):
        pre.append("V is not reversed Steiner-symmetric")
    if validate_f and not validate_nonlinearity(f, u.grid)["v"].passed:
        pre.append("f fails the z-monotonicity assumption (v)")

    us = steiner_symmetrize(u)
    nb, na = norm_V(u, V), norm_V(us, V)
    Ib, Ia = nonlinear_I(u, f), nonlinear_I(us, f)
    Pb, Pa = nonlinear_Iprime(u, f), nonlinear_Iprime(us, f)

    rep = SymmetryReport(nb, na, Ib, Ia, Pb, Pa, preconditions=pre)
    for key, lhs, rhs in (("norm", na, nb), ("I", Ib, Ia), ("Iprime", Pb, Pa)):
        slack = lhs - rhs
        rep.slacks[key] = slack
        if slack > rel_tol * (1.0 + abs(lhs)):
            rep.violations.append((key, slack))

    rep.rowwise_l2_preserved = bool(np.array_equal(np.sort(u.values, axis=1), np.sort(us.values, axis=1)))
    if not rep.rowwise_l2_preserved:
        rep.violations.append(("rowwise_multiset", float("nan")))

    ez_b, ez_a = z_energy_rows(u.values), z_energy_rows(us.values)
    ps = ez_a - ez_b - 1e-12 * (1.0 + ez_b)
    rep.polya_szego_z = bool(np.all(ps <= 0.0))
    rep.slacks["polya_szego_z"] = float(np.max(ez_a - ez_b))
    if not rep.polya_szego_z:
        rep.violations.append(("polya_szego_z", float(np.max(ps))))

    er_b, er_a = r_edge_energy(u.values), r_edge_energy(us.values)
    rep.slacks["r_edges"] = float(np.max(er_a - er_b))
    rep.r_edges_nonexpanding = bool(np.all(er_a <= er_b * (1.0 + 1e-8) + 1e-300))
    if not rep.r_edges_nonexpanding:
        rep.violations.append(("r_edges", rep.slacks["r_edges"]))
    return rep
