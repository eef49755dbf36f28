"""
Nehari-manifold projection and the ground-state descent solver.

Every nonzero ray {t u : t > 0} meets the Nehari set exactly once.  The
crossing t solves g(t) = ||u||^2 - I'(tu)[tu] / t^2 = 0, and g is strictly
decreasing.  The solver alternates a gradient step on J with the map

    clean(u) = project(steiner(max(u, 0)))

so every accepted iterate is nonnegative, Steiner-symmetric and on the set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .fields import (
    Nonlinearity,
    Potential,
    energy_J,
    nehari_residual,
    pde_residual,
    quadratic_form,
)
from .grid import CylField, Grid, axis_extrapolate, gaussian, read_field_csv
from .symmetry import is_steiner_symmetric, steiner_rows

__all__ = [
    "BracketError",
    "SolverConfig",
    "SolveReport",
    "TraceRow",
    "DiagnosticsRecord",
    "nehari_scale",
    "project",
    "power_scale_closed_form",
    "clean",
    "ground_state_solve",
    "minimizing_step_diagnostics",
    "write_trace_csv",
]

T_MIN, T_MAX = 1e-8, 1e8


class BracketError(RuntimeError):
    """No sign change of the Nehari function on [T_MIN, T_MAX]."""


class _Pairing:
    """t -> I'(tu)[tu] / t^2 with the node data gathered once."""

    def __init__(self, u: CylField, f: Nonlinearity):
        g = u.grid
        mask = (u.values != 0.0) & (g.w3 > 0.0)
        self.w = g.w3[mask]
        self.r = g.R[mask]
        self.z = g.Z[mask]
        self.u2 = u.values[mask] ** 2
        self.s1 = self.r * self.r * self.u2
        self.f = f

    def __call__(self, t: float) -> float:
        fv = self.f.eval_f(self.r, self.z, (t * t) * self.s1)
        return float(np.sum(self.w * fv * self.u2))


def nehari_scale(u: CylField, V: Potential, f: Nonlinearity, rtol: float = 1e-12) -> float:
    """The unique t > 0 with t u on the Nehari set."""
    if not np.any(u.values):
        raise ValueError("nehari_scale: u = 0 has no Nehari scaling")
    q = quadratic_form(u, V)
    if not q > 0.0:
        raise BracketError(f"||u||^2 = {q:.6g} <= 0: the quadratic form is not positive on u")
    pair = _Pairing(u, f)

    def g(logt: float) -> float:
        return q - pair(math.exp(logt))

    lo, hi = math.log(T_MIN), math.log(T_MAX)
    with np.errstate(over="ignore", invalid="ignore"):
        g_lo, g_hi = g(lo), g(hi)
    if not (g_lo > 0.0):
        raise BracketError(
            f"Nehari function g(t) = ||u||^2 - I'(tu)[tu]/t^2 is {g_lo:.6g} <= 0 at t={T_MIN:g}; "
            "f is not small near s = 0 on this grid"
        )
    if not (g_hi < 0.0):
        raise BracketError(
            f"Nehari function is {g_hi:.6g} >= 0 at t={T_MAX:g}: no crossing in [{T_MIN:g}, {T_MAX:g}]; "
            "f does not grow superquadratically (F/s -> infinity fails) on this grid"
        )
    # xtol on log t is a relative tolerance on t
    logt = brentq(g, lo, hi, xtol=rtol, rtol=4 * np.finfo(float).eps, maxiter=500)
    return math.exp(logt)


def project(u: CylField, V: Potential, f: Nonlinearity) -> CylField:
    return u * nehari_scale(u, V, f)


def power_scale_closed_form(u: CylField, V: Potential, f: Nonlinearity) -> float:
    """(||u||^2 / int Gamma r^(p-1) |u|^(p+1) r^3)^(1/(p-1)) for the power kind."""
    if f.kind != "power":
        raise ValueError("closed-form Nehari scale exists only for the power kind")
    g = u.grid
    gam = np.broadcast_to(f.gamma(g.R, g.Z), g.shape)
    den = float(np.sum(np.sum(g.w3 * gam * g.R ** (f.p - 1.0) * np.abs(u.values) ** (f.p + 1.0), axis=1)))
    return (quadratic_form(u, V) / den) ** (1.0 / (f.p - 1.0))


def clean(values: np.ndarray, grid: Grid, V: Potential, f: Nonlinearity, symmetrize: bool = True):
    """Axis fill, clip, symmetrize, project.  Returns (field, t)."""
    v = np.maximum(axis_extrapolate(values), 0.0)
    if symmetrize:
        v = steiner_rows(v)
    u = CylField(grid, v)
    t = nehari_scale(u, V, f)
    return u * t, t


@dataclass
class SolverConfig:
    grid: Grid
    V: Potential
    f: Nonlinearity
    init: str | CylField = "gaussian"
    init_path: str | None = None
    max_iters: int = 20000
    step0: float = 1e-3
    shrink: float = 0.5
    armijo: float = 1e-4
    tol_nehari: float = 1e-10
    tol_J: float = 1e-14
    symmetrize_every: int = 1
    stall_window: int = 5
    max_backtracks: int = 40

    def __post_init__(self):
        if self.V.grid != self.grid:
            raise ValueError("potential is sampled on a different grid")
        if not (self.tol_nehari > 0 and self.tol_J > 0):
            raise ValueError("tolerances must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not (0 < self.shrink < 1):
            raise ValueError("shrink must lie in (0, 1)")
        if not (0 < self.armijo < 1):
            raise ValueError("armijo constant must lie in (0, 1)")
        if self.step0 <= 0:
            raise ValueError("step0 must be positive")
        if self.symmetrize_every < 0:
            raise ValueError("symmetrize_every must be >= 0 (0 disables)")

    def initial_field(self) -> CylField:
        if isinstance(self.init, CylField):
            return self.init
        if self.init == "gaussian":
            return gaussian(self.grid)
        if self.init == "csv":
            u = read_field_csv(Path(self.init_path))
            if u.grid != self.grid:
                raise ValueError(f"initial field grid {u.grid} does not match configured grid {self.grid}")
            return u
        raise ValueError(f"unknown initial guess kind {self.init!r}")


@dataclass
class TraceRow:
    iter: int
    J: float
    residual: float
    t: float


@dataclass
class SolveReport:
    u: CylField | None
    J: float
    nehari_residual: float
    iterations: int
    trace: list[TraceRow]
    converged: bool
    symmetric: bool
    positive: bool
    message: str = ""
    pde_residual_max: float = float("nan")

    def summary(self) -> dict[str, object]:
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "J": self.J,
            "nehari_residual": self.nehari_residual,
            "pde_residual_max": self.pde_residual_max,
            "symmetric": self.symmetric,
            "positive": self.positive,
            "message": self.message,
        }


def _wdot(w: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sum(np.sum(w * a * b, axis=1)))


def ground_state_solve(config: SolverConfig) -> SolveReport:
    """Projected gradient descent on the Nehari set with BB steps and Armijo backtracking."""
    cfg = config
    grid, V, f = cfg.grid, cfg.V, cfg.f
    w = grid.w3
    mask = grid.interior.copy()
    mask[0, :] = False  # the axis row is slaved to its neighbours

    def fail(it, msg, trace):
        return SolveReport(None, float("nan"), float("nan"), it, trace, False, False, False, f"iteration {it}: {msg}")

    trace: list[TraceRow] = []
    try:
        u, t = clean(cfg.initial_field().values, grid, V, f, cfg.symmetrize_every > 0)
    except (BracketError, ValueError) as exc:
        return fail(0, str(exc), trace)

    J = energy_J(u, V, f)
    trace.append(TraceRow(0, J, nehari_residual(u, V, f), t))
    grad = np.where(mask, pde_residual(u, V, f).values, 0.0)
    alpha = cfg.step0
    quiet = 0
    converged = False
    message = "max_iters reached"
    it = 0
    for it in range(1, cfg.max_iters + 1):
        gg = _wdot(w, grad, grad)
        if gg == 0.0:
            converged = True
            message = "exact stationary point"
            break
        sym = cfg.symmetrize_every > 0 and it % cfg.symmetrize_every == 0
        step = alpha
        accepted = False
        for _ in range(cfg.max_backtracks):
            try:
                cand, tc = clean(u.values - step * grad, grid, V, f, sym)
            except BracketError:
                step *= cfg.shrink
                continue
            Jc = energy_J(cand, V, f)
            if Jc <= J - cfg.armijo * step * gg:
                accepted = True
                break
            step *= cfg.shrink
        if not accepted:
            # no admissible decrease left at machine resolution
            converged = nehari_residual(u, V, f) <= cfg.tol_nehari
            message = "line search exhausted at a stationary point" if converged else "line search failed"
            break

        gnew = np.where(mask, pde_residual(cand, V, f).values, 0.0)
        s = cand.values - u.values
        y = gnew - grad
        sy = _wdot(w, s, y)
        alpha = _wdot(w, s, s) / sy if sy > 0 else cfg.step0

        dJ = abs(J - Jc) / max(abs(Jc), 1e-300)
        u, J, t, grad = cand, Jc, tc, gnew
        res = nehari_residual(u, V, f)
        trace.append(TraceRow(it, J, res, t))
        quiet = quiet + 1 if (dJ <= cfg.tol_J and res <= cfg.tol_nehari) else 0
        if quiet >= cfg.stall_window:
            converged = True
            message = f"relative J change <= {cfg.tol_J:g} for {cfg.stall_window} consecutive iterations"
            break

    res = nehari_residual(u, V, f)
    resid = pde_residual(u, V, f).values
    return SolveReport(
        u=u,
        J=J,
        nehari_residual=res,
        iterations=it,
        trace=trace,
        converged=converged,
        symmetric=is_steiner_symmetric(u, 1e-8),
        positive=bool(np.all(u.values >= 0.0)),
        message=message,
        pde_residual_max=float(np.max(np.abs(resid[mask]))),
    )


def write_trace_csv(report: SolveReport, path) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("iter,J,residual,t\n")
        for row in report.trace:
            fh.write(f"{row.iter},{row.J:.17g},{row.residual:.17g},{row.t:.17g}\n")


@dataclass
class DiagnosticsRecord:
    t_star: float
    J_before: float
    J_after: float
    nehari_residual_before: float
    tol: float
    violations: list[tuple[str, float]] = field(default_factory=list)

    @property
    def t_slack(self) -> float:
        return self.t_star - 1.0

    @property
    def J_slack(self) -> float:
        return self.J_after - self.J_before

    @property
    def passed(self) -> bool:
        return not self.violations


def minimizing_step_diagnostics(u: CylField, V: Potential, f: Nonlinearity, rel_tol: float = 1e-8) -> DiagnosticsRecord:
    """Symmetrize an element of the Nehari set and rescale: t* <= 1 and J does not grow."""
    from .symmetry import steiner_symmetrize

    res0 = nehari_residual(u, V, f)
    us = steiner_symmetrize(u)
    t_star = nehari_scale(us, V, f)
    Jb = energy_J(u, V, f)
    Ja = energy_J(us * t_star, V, f)
    tol = rel_tol * (1.0 + abs(Jb))
    rec = DiagnosticsRecord(t_star, Jb, Ja, res0, tol)
    if res0 > 1e-8:
        rec.violations.append(("precondition_on_M", res0))
    if t_star - 1.0 > rel_tol:
        rec.violations.append(("t_star_le_1", t_star - 1.0))
    if Ja - Jb > tol:
        rec.violations.append(("J_decrease", Ja - Jb))
    return rec
