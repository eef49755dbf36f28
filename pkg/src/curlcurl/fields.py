"""
Functionals of the reduced variational problem on a Grid.

With the r^3-weighted quadrature of :mod:`curlcurl.grid`:

    ||u||^2    = int (|grad u|^2 + V u^2) r^3          (equivalent norm)
    I(u)       = int F(r, z, r^2 u^2) / (2 r^2) r^3
    I'(u)[u]   = int f(r, z, r^2 u^2) u^2 r^3
    J(u)       = ||u||^2 / 2 - I(u)

and the residual of

    -(1/r^3) d/dr (r^3 du/dr) - d^2u/dz^2 + V u = f(r, z, r^2 u^2) u.

On every node off the axis and the Dirichlet boundary, residual * weight is
exactly dJ/du at that node.  The axis row carries zero weight in every
integral; there the residual uses the regularized limit of the radial
operator, -4 d^2u/dr^2.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .grid import CylField, Grid, GridMismatchError, dirichlet_energy, weighted_laplacian

__all__ = [
    "Nonlinearity",
    "Potential",
    "GridFunction",
    "NonCoerciveError",
    "power_nonlinearity",
    "log_nonlinearity",
    "custom_nonlinearity",
    "zero_nonlinearity",
    "quadratic_form",
    "norm_V",
    "energy_J",
    "nonlinear_I",
    "nonlinear_Iprime",
    "nehari_residual",
    "pde_residual",
    "validate_nonlinearity",
    "ValidationReport",
    "CheckResult",
    "DEFAULT_LADDER",
]

DEFAULT_LADDER = np.logspace(-8, 8, 33)


class NonCoerciveError(ArithmeticError):
    """The quadratic form int(|grad u|^2 + V u^2) r^3 went negative."""


class GridFunction:
    """Node values on a Grid, callable at arbitrary (r, z) by bilinear interpolation.

    Evaluation at the grid's own node arrays returns the stored values
    without interpolating.  Points with r > rmax or |z| > zmax get the value
    ``outside`` (the Dirichlet truncation).
    """

    def __init__(self, grid: Grid, values, outside: float = 0.0):
        v = np.array(values, dtype=np.float64)
        if v.shape != grid.shape:
            raise GridMismatchError(f"values have shape {v.shape}, grid expects {grid.shape}")
        v.flags.writeable = False
        self.grid = grid
        self.values = v
        self.outside = outside
        self._interp = None

    def __call__(self, r, z):
        g = self.grid
        if (r is g.R and z is g.Z) or (r is g.r[:, None] and z is g.z[None, :]):
            return self.values
        r = np.asarray(r, dtype=np.float64)
        z = np.asarray(z, dtype=np.float64)
        if self._interp is None:
            self._interp = RegularGridInterpolator(
                (g.r, g.z), self.values, method="linear", bounds_error=False, fill_value=self.outside
            )
        r, z = np.broadcast_arrays(r, z)
        pts = np.stack([np.abs(r).ravel(), z.ravel()], axis=-1)
        return self._interp(pts).reshape(r.shape)


def _as_coefficient(c) -> Callable:
    if isinstance(c, GridFunction):
        return c
    if isinstance(c, CylField):
        return GridFunction(c.grid, c.values)
    if callable(c):
        return c
    value = float(c)
    return lambda r, z: value


@dataclass(frozen=True)
class Potential:
    """V(r, z) sampled on a grid."""

    grid: Grid
    values: np.ndarray
    _func: GridFunction = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        gf = GridFunction(self.grid, np.broadcast_to(self.values, self.grid.shape))
        if not np.all(np.isfinite(gf.values)):
            raise ValueError("potential must be finite (V in L^inf)")
        object.__setattr__(self, "values", gf.values)
        object.__setattr__(self, "_func", gf)

    @classmethod
    def constant(cls, grid: Grid, value: float) -> Potential:
        return cls(grid, np.full(grid.shape, float(value)))

    @classmethod
    def from_function(cls, grid: Grid, func) -> Potential:
        return cls(grid, np.broadcast_to(func(grid.R, grid.Z), grid.shape))

    @classmethod
    def from_field(cls, u: CylField) -> Potential:
        return cls(u.grid, u.values)

    @property
    def esssup(self) -> float:
        return float(self.values.max())

    @property
    def essinf(self) -> float:
        return float(self.values.min())

    def __call__(self, r, z):
        return self._func(r, z)


@dataclass(frozen=True)
class Nonlinearity:
    """f(r, z, s) >= 0 and its primitive F(r, z, s) = int_0^s f(r, z, t) dt.

    ``p`` is the growth exponent of assumption (i): f <= c (1 + s^((p-1)/2)).
    """

    eval_f: Callable
    eval_F: Callable
    p: float
    kind: str = "custom"
    gamma: Callable | None = None

    def __post_init__(self):
        if not (1.0 < self.p < 5.0):
            raise ValueError(f"growth exponent p must lie in (1, 5), got {self.p}")


def power_nonlinearity(p: float, gamma=1.0) -> Nonlinearity:
    """f = Gamma s^((p-1)/2), i.e. f(|U|^2) U = Gamma |U|^(p-1) U in 3D."""
    p = float(p)
    g = _as_coefficient(gamma)
    a = 0.5 * (p - 1.0)
    b = 0.5 * (p + 1.0)

    def f(r, z, s):
        return g(r, z) * np.power(s, a)

    def F(r, z, s):
        return g(r, z) * np.power(s, b) / b

    return Nonlinearity(f, F, p, "power", g)


def log_nonlinearity(gamma=1.0, p: float = 3.0) -> Nonlinearity:
    """f = Gamma log(1 + s); F in closed form.

    Grows slower than any power, so (i) holds for every p in (1, 5); ``p``
    is only the exponent the growth check is run against.
    """
    g = _as_coefficient(gamma)

    def f(r, z, s):
        return g(r, z) * np.log1p(s)

    def F(r, z, s):
        return g(r, z) * ((1.0 + s) * np.log1p(s) - s)

    return Nonlinearity(f, F, float(p), "log", g)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)


def custom_nonlinearity(f: Callable, p: float, F: Callable | None = None) -> Nonlinearity:
    """Wrap a user f(r, z, s); F defaults to 24-point Gauss-Legendre on [0, s]."""
    if F is None:
        def F(r, z, s):
            s = np.asarray(s, dtype=np.float64)
            half = 0.5 * s
            total = np.zeros(np.broadcast(r, z, s).shape)
            for x, w in zip(_GL_X, _GL_W):
                total = total + w * f(r, z, half * (x + 1.0))
            return half * total

    return Nonlinearity(f, F, float(p), "custom", None)


def zero_nonlinearity() -> Nonlinearity:
    """f = 0; only useful for the linear part of the functionals."""

    def zero(r, z, s):
        return np.zeros(np.broadcast(r, z, s).shape)

    return Nonlinearity(zero, zero, 3.0, "custom", None)


def _check_grid(u: CylField, V: Potential | None = None) -> Grid:
    if V is not None and V.grid != u.grid:
        raise GridMismatchError(f"field grid {u.grid} differs from potential grid {V.grid}")
    return u.grid


def _finite_or_raise(arr: np.ndarray, what: str, offset: int = 0) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        i, j = np.argwhere(~np.isfinite(arr))[0]
        raise ValueError(f"{what} is not finite at node (i={i + offset}, j={j})")
    return arr


def quadratic_form(u: CylField, V: Potential) -> float:
    """int (|grad u|^2 + V u^2) r^3, without the coercivity check."""
    g = _check_grid(u, V)
    pot = float(np.sum(np.sum(g.w3 * V.values * u.values * u.values, axis=1)))
    return dirichlet_energy(u) + pot


def norm_V(u: CylField, V: Potential) -> float:
    q = quadratic_form(u, V)
    if q < 0:
        raise NonCoerciveError(
            f"int(|grad u|^2 + V u^2) r^3 = {q:.6g} < 0: V does not give an equivalent norm on this grid"
        )
    return float(np.sqrt(q))


def nonlinear_I(u: CylField, f: Nonlinearity) -> float:
    """int F(r, z, r^2 u^2) / (2 r^2) r^3; the axis row contributes 0."""
    g = u.grid
    r = g.r[1:, None]
    v = u.values[1:]
    dens = _finite_or_raise(f.eval_F(r, g.z[None, :], r * r * v * v), "F(r, z, r^2 u^2)", offset=1)
    w = g.w3[1:] / (2.0 * r * r)
    return float(np.sum(np.sum(w * dens, axis=1)))


def nonlinear_Iprime(u: CylField, f: Nonlinearity) -> float:
    """I'(u)[u] = int f(r, z, r^2 u^2) u^2 r^3."""
    g = u.grid
    R = g.r[:, None]
    v = u.values
    dens = _finite_or_raise(f.eval_f(R, g.z[None, :], R * R * v * v), "f(r, z, r^2 u^2)")
    return float(np.sum(np.sum(g.w3 * dens * v * v, axis=1)))


def energy_J(u: CylField, V: Potential, f: Nonlinearity) -> float:
    return 0.5 * quadratic_form(u, V) - nonlinear_I(u, f)


def nehari_residual(u: CylField, V: Potential, f: Nonlinearity) -> float:
    """|‖u‖^2 - I'(u)[u]| / ‖u‖^2."""
    q = quadratic_form(u, V)
    if q == 0.0:
        raise ValueError("Nehari residual undefined for u with ||u|| = 0")
    return abs(q - nonlinear_Iprime(u, f)) / abs(q)


def pde_residual(u: CylField, V: Potential, f: Nonlinearity) -> CylField:
    """Discrete residual of the reduced equation; 0 on the Dirichlet boundary."""
    g = _check_grid(u, V)
    R = g.r[:, None]
    v = u.values
    nl = _finite_or_raise(f.eval_f(R, g.z[None, :], R * R * v * v), "f(r, z, r^2 u^2)")
    res = weighted_laplacian(u) + (V.values - nl) * v
    res = np.where(g.interior, res, 0.0)
    return CylField(g, res)


# -- validators for the structural assumptions on f ----------------------------


@dataclass
class CheckResult:
    passed: bool
    witness: str
    value: float = float("nan")


@dataclass
class ValidationReport:
    kind: str
    checks: dict[str, CheckResult]

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def __getitem__(self, key: str) -> CheckResult:
        return self.checks[key]

    def failed(self) -> list[str]:
        return [k for k, c in self.checks.items() if not c.passed]

    def lines(self) -> list[str]:
        return [f"assumption_{k}={'pass' if c.passed else 'FAIL'} ({c.witness})" for k, c in self.checks.items()]


MONOTONE_MARGIN = 1e-12


def validate_nonlinearity(f: Nonlinearity, grid: Grid, s_ladder=DEFAULT_LADDER) -> ValidationReport:
    """Numerical witnesses for assumptions (i)-(v) on the grid nodes.

    Failures are recorded in the report; nothing is raised.
    """
    s = np.asarray(s_ladder, dtype=np.float64)
    if s.ndim != 1 or len(s) < 4 or np.any(np.diff(s) <= 0) or s[0] <= 0:
        raise ValueError("s_ladder must be a strictly increasing positive sequence of length >= 4")

    R = grid.r[:, None, None]
    Z = grid.z[None, :, None]
    S = s[None, None, :]
    fv = np.broadcast_to(f.eval_f(R, Z, S), (grid.nr, grid.nz, len(s)))
    Fv = np.broadcast_to(f.eval_F(R, Z, S), fv.shape)
    checks: dict[str, CheckResult] = {}

    a = 0.5 * (f.p - 1.0)
    finite = bool(np.all(np.isfinite(fv)) and np.all(np.isfinite(Fv)))

    # (i) nonnegativity and growth no faster than s^((p-1)/2)
    nonneg = finite and bool(np.all(fv >= 0.0))
    c_fit = float(np.max(fv / (1.0 + S**a))) if finite else float("inf")
    with np.errstate(divide="ignore", invalid="ignore"):
        tail_slope = np.log(fv[..., -1] / fv[..., -2]) / np.log(s[-1] / s[-2])
    tail_slope = np.where(fv[..., -1] > 0, tail_slope, 0.0)
    worst_slope = float(np.nanmax(tail_slope)) if finite else float("inf")
    ok_i = nonneg and np.isfinite(c_fit) and worst_slope <= a + 1e-6
    checks["i"] = CheckResult(
        ok_i, f"min f={float(fv.min()) if finite else float('nan'):.3g}, c={c_fit:.6g}, "
              f"tail log-slope={worst_slope:.6g} vs (p-1)/2={a:.6g}", c_fit
    )

    # (ii) f -> 0 as s -> 0: positive local power law at the bottom of the ladder
    f0, f1 = fv[..., 0], fv[..., 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        low_exp = np.log(f1 / f0) / np.log(s[1] / s[0])
    low_exp = np.where(f0 <= 0.0, np.inf, low_exp)
    b_low = float(np.nanmin(low_exp)) if finite else float("nan")
    ok_ii = finite and b_low > 1e-6 and bool(np.all(f0 <= f1))
    checks["ii"] = CheckResult(
        ok_ii, f"max f(s={s[0]:.3g})={float(np.max(f0)):.3g}, local exponent={b_low:.6g}", float(np.max(f0))
    )

    # (iii) strictly increasing in s
    df = np.diff(fv, axis=-1)
    margin = MONOTONE_MARGIN * np.maximum(np.abs(fv[..., 1:]), MONOTONE_MARGIN)
    worst = float(np.min(df - margin)) if finite else float("-inf")
    ok_iii = finite and worst > 0.0
    checks["iii"] = CheckResult(ok_iii, f"min increment minus margin={worst:.3g}", worst)

    # (iv) F(s)/s -> infinity: increments of F/s per unit log s must not decay at the tail
    q = Fv[..., -3:] / s[-3:]
    d1 = (q[..., 1] - q[..., 0]) / np.log(s[-2] / s[-3])
    d2 = (q[..., 2] - q[..., 1]) / np.log(s[-1] / s[-2])
    ok_iv = finite and bool(np.all(d2 > 0.0)) and bool(np.all(d2 >= 0.5 * d1))
    ratio = float(np.min(d2 / np.where(d1 > 0, d1, np.inf))) if finite else float("nan")
    checks["iv"] = CheckResult(
        ok_iv, f"min tail increment of F/s={float(np.min(d2)) if finite else float('nan'):.3g}, "
               f"decay ratio={ratio:.3g}", float(np.min(d2)) if finite else float("nan")
    )

    # (v) phi_sigma(r, z, s) = f((s+sigma)^2)(s+sigma)^2 - f(s^2)s^2 symmetric nonincreasing in z
    amps = np.sqrt(s[:: max(1, len(s) // 5)])
    worst_sym, worst_mono = 0.0, 0.0
    c = grid.center
    Rz = grid.r[:, None]
    Zz = grid.z[None, :]
    for s0 in np.concatenate([[0.0], amps]):
        for sig in amps:
            t = s0 + sig
            hi = np.broadcast_to(f.eval_f(Rz, Zz, t * t) * t * t, grid.shape)
            lo = np.broadcast_to(f.eval_f(Rz, Zz, s0 * s0) * s0 * s0, grid.shape)
            phi = hi - lo
            # the difference inherits the rounding of both terms
            tol = MONOTONE_MARGIN * (1.0 + np.abs(hi) + np.abs(lo))
            asym = np.abs(phi - phi[:, ::-1]) - tol
            upper = phi[:, c:]
            incr = np.diff(upper, axis=1) - tol[:, c + 1:]
            worst_sym = max(worst_sym, float(np.max(asym)))
            worst_mono = max(worst_mono, float(np.max(incr)))
    ok_v = finite and worst_sym <= 0.0 and worst_mono <= 0.0
    checks["v"] = CheckResult(
        ok_v, f"max asymmetry excess={worst_sym:.3g}, max increase in |z| excess={worst_mono:.3g}",
        max(worst_sym, worst_mono),
    )
    return ValidationReport(f.kind, checks)
