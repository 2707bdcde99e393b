"""Fixed-point solvers for the linear boundary value problem.

The bounded continuous solution is computed as the fixed point of

    u = C u + D u + F(g, h)

by plain successive substitution from u = 0 ("direct" route).  When the
direct map is not certified to contract but a presolve route is, every
iteration first solves the scalar boundary-trace equation exactly (to inner
tolerance) and only then substitutes into the interior, which tolerates
reflection norms at or above one; the periodic two-sided variant marches
rows with negative damping from the opposite end.

The first time derivative of the solution satisfies a companion problem of
exactly the same shape: shifting the diagonal coupling by d_t a_j / a_j
turns the transport weights into their level-1 counterparts, the boundary
operator becomes its delay-corrected derivative, and the data pick up one
time derivative plus a commutator term.  Solving that companion problem is
how differentiability is both exploited and tested: its fixed-point map
contracts exactly when the level-1 transfer norm is below one.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .boundary import (
    BoundaryOperatorSpec,
    TraceSet,
    apply_R,
    derived_spec,
    validate_nonnegative_lookbacks,
)
from .conditions import ConditionReport, evaluate_conditions
from .errors import (
    NonContractionError,
    ToleranceNotReachedError,
    ValidationFailedError,
    WindowTooShortError,
)
from .fields import Grid, GridField, Periodic, Window, validate_hyperbolicity
from .forcing import SampledTimeData, ZeroRhs
from .operators import OperatorAssembly

__all__ = [
    "LinearProblem",
    "SolveOptions",
    "SolveReport",
    "solve_linear",
    "solve_derivative_field",
    "verify_periodicity",
]


@dataclass
class LinearProblem:
    """A diagonal-frame linear problem: coefficients, boundary, data, grid."""

    system: object
    boundary: BoundaryOperatorSpec
    g: object
    h: object
    grid: Grid


@dataclass
class SolveOptions:
    tol: float = 1e-10
    max_iter: int = 10000
    noncontraction_patience: int = 50
    oversample: int = 4
    lambda0: float = 1e-3
    margin: float = 0.01      # safety margin for the norm verdicts
    route: str = "auto"       # auto | direct | presolve | periodic
    force: bool = False       # solve even without a contraction certificate
    inner_tol: Optional[float] = None
    inner_max_iter: int = 20000


@dataclass
class SolveReport:
    u: GridField
    iterations: int
    residuals: list
    contraction_ratio: float
    route: str
    conditions: ConditionReport
    sup_u: float
    sup_g: float
    sup_h: float
    forcing_norm: float
    apriori_bound: Optional[float]
    flags: list = field(default_factory=list)
    w: Optional[GridField] = None
    w_report: Optional["SolveReport"] = None

    def as_dict(self):
        out = {
            "iterations": self.iterations,
            "final_residual": self.residuals[-1] if self.residuals else 0.0,
            "contraction_ratio": self.contraction_ratio,
            "route": self.route,
            "sup_u": self.sup_u,
            "sup_g": self.sup_g,
            "sup_h": self.sup_h,
            "forcing_norm": self.forcing_norm,
            "apriori_bound": self.apriori_bound,
            "flags": self.flags,
        }
        return out


def _measured_ratio(residuals):
    """Median of the last few residual ratios; the observable contraction."""
    if len(residuals) < 3:
        return 0.0
    start = max(0, len(residuals) - 11)
    ratios = [residuals[i + 1] / residuals[i]
              for i in range(start, len(residuals) - 1)
              if residuals[i] > 0 and np.isfinite(residuals[i + 1] / residuals[i])]
    return float(np.median(ratios)) if ratios else 0.0


def _h_series(problem):
    t_nodes = problem.grid.t_nodes()
    n = problem.system.n
    series = np.zeros((n, problem.grid.nt))
    if problem.h is not None:
        for j in range(n):
            series[j] = problem.h.h_at(j, t_nodes)
    return series


def _sup_g(problem):
    if problem.g is None:
        return 0.0
    xs = problem.grid.x_nodes()
    t_nodes = problem.grid.t_nodes()
    worst = 0.0
    for j in range(problem.system.n):
        for x in xs:
            worst = max(worst, float(np.max(np.abs(
                problem.g.g_at(j, float(x), t_nodes)))))
    return worst


def _window_checks(problem):
    topo = problem.grid.topology
    if isinstance(topo, Window):
        lookback = problem.boundary.max_lookback(problem.grid.t_nodes())
        if lookback > topo.margin + 1e-12:
            raise ValidationFailedError(
                f"boundary lookback {lookback:.4g} exceeds the spin-up margin "
                f"{topo.margin:.4g}"
            )


class _Iterator:
    """One Picard update, specialized per solvability route.

    The iterate-independent parts, the forcing integral and the transported
    boundary data, are assembled once up front; each step only re-evaluates
    the coupling integral and the boundary feedback of the current iterate.
    """

    def __init__(self, problem, asm, route, opts, cond):
        self.problem = problem
        self.asm = asm
        self.route = route
        self.opts = opts
        self.n = problem.system.n
        g_provider = problem.g
        if route == "periodic":
            lo = cond.rates.inf_bjj
            self.pos_rows = [j for j in range(self.n) if lo[j] > 0]
            self.neg_rows = [j for j in range(self.n) if j not in self.pos_rows]
            self.forcing = np.zeros((self.n, asm.grid.nx + 1, asm.grid.nt))
            if g_provider is not None:
                if self.pos_rows:
                    self.forcing += asm.assemble_forcing(g_provider,
                                                         rows=self.pos_rows)
                if self.neg_rows:
                    self.forcing += asm.assemble_forcing(
                        g_provider, rows=self.neg_rows,
                        flipped_rows=set(self.neg_rows))
            self.h_transport = asm.assemble_boundary_transport(
                problem.h, rows=self.pos_rows)
            t_nodes = asm.grid.t_nodes()
            self.h_nodes = np.zeros((self.n, asm.grid.nt))
            if problem.h is not None:
                for j in range(self.n):
                    self.h_nodes[j] = problem.h.h_at(j, t_nodes)
        else:
            self.forcing = (asm.assemble_forcing(g_provider)
                            if g_provider is not None else
                            np.zeros((self.n, asm.grid.nx + 1, asm.grid.nt)))
            self.h_transport = asm.assemble_boundary_transport(problem.h)
        self.fixed = self.forcing + self.h_transport

    def forcing_norm(self):
        return float(np.max(np.abs(self.fixed)))

    def step(self, u_values):
        if self.route == "direct":
            z = self.asm.traces_of(u_values)
            series = self.asm.plan.apply(z)
            return self.asm.march(u_values=u_values,
                                  boundary_series=series) + self.fixed
        if self.route == "presolve":
            return self._presolve_step(u_values)
        return self._periodic_step(u_values)

    # -- u <- (I - C)^{-1} (D u + F(g,h)), boundary traces solved first ----

    def _inner_tol(self):
        return self.opts.inner_tol if self.opts.inner_tol is not None \
            else 0.1 * self.opts.tol

    def _presolve_step(self, u_values):
        asm = self.asm
        rest = asm.march(u_values=u_values) + self.fixed
        r_tilde = asm.traces_of(rest)
        z = r_tilde.copy()
        tol = self._inner_tol()
        for _ in range(self.opts.inner_max_iter):
            reflected = asm.plan.apply(z)
            z_new = np.stack([
                asm.exit_col_transport(asm.families[j], reflected[j],
                                       asm.trace_col(j))
                for j in range(self.n)
            ]) + r_tilde
            change = float(np.max(np.abs(z_new - z)))
            z = z_new
            if change < tol:
                break
        else:
            raise NonContractionError("boundary-trace presolve did not converge")
        reflected = asm.plan.apply(z)
        out = np.stack([
            asm.exit_transport(asm.families[j], reflected[j])
            for j in range(self.n)
        ]) + rest
        for j in range(self.n):
            e = asm.families[j].exit_col
            out[j, e] = reflected[j] + rest[j, e]
        return out

    # -- periodic ends, transport direction per row sign -------------------

    def _periodic_step(self, u_values):
        asm = self.asm
        out = np.zeros((self.n, asm.grid.nx + 1, asm.grid.nt))
        rest_pos = asm.march(u_values=u_values, rows=self.pos_rows) \
            + self.fixed if self.pos_rows else None
        rest_neg = asm.march(u_values=u_values, rows=self.neg_rows,
                             flipped_rows=set(self.neg_rows)) + self.forcing \
            if self.neg_rows else None
        tol = self._inner_tol()
        for j in self.pos_rows:
            fam = asm.families[j]
            zc = asm.trace_col(j)
            base = rest_pos[j, zc]
            z = base.copy()
            for _ in range(self.opts.inner_max_iter):
                z_new = asm.exit_col_transport(fam, z, zc) + base
                change = float(np.max(np.abs(z_new - z)))
                z = z_new
                if change < tol:
                    break
            else:
                raise NonContractionError("periodic trace solve did not converge")
            out[j] = asm.exit_transport(fam, z) + rest_pos[j]
            out[j, fam.exit_col] = z + self.h_nodes[j] + rest_pos[j, fam.exit_col] \
                - self.h_transport[j, fam.exit_col]
        for j in self.neg_rows:
            fam = asm.flipped(j)
            bc_col = asm.families[j].exit_col
            base = rest_neg[j, bc_col] - self.h_nodes[j]
            z = base.copy()
            for _ in range(self.opts.inner_max_iter):
                z_new = asm.exit_col_transport(fam, z, bc_col) + base
                change = float(np.max(np.abs(z_new - z)))
                z = z_new
                if change < tol:
                    break
            else:
                raise NonContractionError("periodic trace solve did not converge")
            out[j] = asm.exit_transport(fam, z) + rest_neg[j]
            out[j, fam.exit_col] = z + rest_neg[j, fam.exit_col]
        return out


def solve_linear(problem: LinearProblem, opts: SolveOptions = None,
                 conditions: ConditionReport = None,
                 assembly: OperatorAssembly = None) -> SolveReport:
    """Iterate the integral fixed point until the sup residual drops below
    tolerance.

    Raises NonContractionError when the residual stops decreasing for the
    configured number of consecutive iterations and ToleranceNotReachedError
    at the iteration cap.  Without a contraction certificate the solve
    refuses to start unless ``force`` is set (then it proceeds under a
    warning, which is how the loss-of-regularity experiments drive it).
    """
    opts = opts or SolveOptions()
    grid = problem.grid
    validate_hyperbolicity(problem.system, grid, opts.lambda0)
    validate_nonnegative_lookbacks(problem.boundary, grid.t_nodes())
    _window_checks(problem)

    if assembly is None:
        assembly = OperatorAssembly(problem.system, problem.boundary, grid,
                                    oversample=opts.oversample)
    if conditions is None:
        conditions = evaluate_conditions(problem.system, problem.boundary, grid,
                                         margin=opts.margin, assembly=assembly)
    flags = []
    route = opts.route
    if route == "auto":
        route = conditions.route
        if route == "none":
            if not opts.force:
                raise ValidationFailedError(
                    "no contraction certificate holds; pass force=True to "
                    "iterate anyway"
                )
            warnings.warn("solving without a contraction certificate",
                          stacklevel=2)
            flags.append("uncertified")
            route = "direct"
    elif route == "periodic" and conditions.periodic is None:
        raise ValidationFailedError("periodic route requires identity end coupling")

    sup_g = _sup_g(problem)
    sup_h = float(np.max(np.abs(_h_series(problem))))

    stepper = _Iterator(problem, assembly, route, opts, conditions)
    forcing_norm = stepper.forcing_norm()

    u = np.zeros((problem.system.n, grid.nx + 1, grid.nt))
    residuals = []
    streak = 0
    converged = False
    for it in range(1, opts.max_iter + 1):
        u_new = stepper.step(u)
        resid = float(np.max(np.abs(u_new - u)))
        u = u_new
        residuals.append(resid)
        if resid < opts.tol:
            converged = True
            break
        if len(residuals) >= 2 and residuals[-2] > 0 \
                and resid >= residuals[-2]:
            streak += 1
            if streak >= opts.noncontraction_patience:
                raise NonContractionError(
                    f"residual non-decreasing for {streak} consecutive "
                    f"iterations (at iteration {it})"
                )
        else:
            streak = 0
    if not converged:
        raise ToleranceNotReachedError(
            f"residual {residuals[-1]:.3e} after {opts.max_iter} iterations"
        )

    ratio = _measured_ratio(residuals)
    data_norm = sup_g + sup_h
    apriori = None
    if data_norm > 0 and ratio < 1:
        apriori = forcing_norm / ((1.0 - ratio) * data_norm)
    return SolveReport(
        u=GridField(grid, u),
        iterations=len(residuals),
        residuals=residuals,
        contraction_ratio=ratio,
        route=route,
        conditions=conditions,
        sup_u=float(np.max(np.abs(u))),
        sup_g=sup_g,
        sup_h=sup_h,
        forcing_norm=forcing_norm or 0.0,
        apriori_bound=apriori,
        flags=flags,
    )


# -- companion problem for the time derivative ------------------------------


class _DampingShiftedSystem:
    """Same transport, diagonal coupling shifted by d_t a_j / a_j.

    The shifted diagonal turns the exponential weights into their level-1
    counterparts, which is exactly what the derivative field transports.
    """

    def __init__(self, base):
        self.base = base
        self.n = base.n
        self.m = base.m

    def a_at(self, j, x, t):
        return self.base.a_at(j, x, t)

    def dta_at(self, j, x, t):
        return self.base.dta_at(j, x, t)

    def b_at(self, j, k, x, t):
        if j != k:
            return self.base.b_at(j, k, x, t)
        return self.base.b_at(j, j, x, t) \
            - self.base.dta_at(j, x, t) / self.base.a_at(j, x, t)

    def exit_abscissa(self, j):
        return self.base.exit_abscissa(j)


class _DerivativeForcing:
    """Forcing of the derivative problem:
    d_t g - (d_t a_j / a_j) g - sum_k [d_t b_jk - (d_t a_j / a_j) b_jk] u_k."""

    def __init__(self, system, g, u_field):
        self.system = system
        self.g = g
        self.u = u_field

    def g_at(self, j, x, t):
        sysb = self.system
        a = sysb.a_at(j, x, t)
        lam = sysb.dta_at(j, x, t) / a
        out = self.g.dtg_at(j, x, t) - lam * self.g.g_at(j, x, t)
        for k in range(sysb.n):
            uk = self.u.at(k, x, t)
            out = out - (sysb.dtb_at(j, k, x, t) - lam * sysb.b_at(j, k, x, t)) * uk
        return out


def derivative_problem(problem: LinearProblem, u: GridField) -> LinearProblem:
    """Build the companion problem satisfied by the time derivative."""
    grid = problem.grid
    t_nodes = grid.t_nodes()
    n = problem.system.n
    traces = np.stack([
        u.values[j, grid.nx if j < problem.system.m else 0, :] for j in range(n)
    ])
    Z = TraceSet(grid, traces)
    h1 = apply_R(derived_spec(problem.boundary, "Rprime"), Z, t_nodes,
                 dt_step=grid.dt)
    if problem.h is not None:
        for j in range(n):
            h1[j] = h1[j] + problem.h.dth_at(j, t_nodes)
    g_provider = problem.g if problem.g is not None else ZeroRhs(n)
    return LinearProblem(
        system=_DampingShiftedSystem(problem.system),
        boundary=derived_spec(problem.boundary, "Rtilde"),
        g=_DerivativeForcing(problem.system, g_provider, u),
        h=SampledTimeData(grid, h1),
        grid=grid,
    )


def solve_derivative_field(problem: LinearProblem, report: SolveReport,
                           opts: SolveOptions = None) -> SolveReport:
    """Solve the companion problem for w = d_t u.

    Proceeds even when the level-1 transfer norm check failed, flagging the
    report; in that regime the iteration may legitimately fail to contract,
    which is the observable form of the loss of regularity.
    """
    opts = opts or SolveOptions()
    wp = derivative_problem(problem, report.u)
    w_opts = SolveOptions(**{**opts.__dict__})
    w_opts.force = True
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        w_report = solve_linear(wp, w_opts)
    if not report.conditions.norm_verdicts["level1"]["passed"]:
        w_report.flags.append("regularity_uncertified")
    return w_report


def verify_periodicity(u: GridField, period: float) -> float:
    """Sup defect of u(x, t + T) - u(x, t) on the diagnostic window.

    Exactly zero (by construction) on periodic topologies; on windows the
    spin-up margin is excluded and the window must leave room for at least
    two periods past it.
    """
    grid = u.grid
    topo = grid.topology
    if isinstance(topo, Periodic):
        return 0.0
    if topo.t_hi - topo.t_lo - topo.margin < 2.0 * period - 1e-12:
        raise WindowTooShortError(
            "window must cover the spin-up margin plus two periods"
        )
    t_nodes = grid.t_nodes()
    mask = (t_nodes >= topo.t_lo + topo.margin - 1e-12) & \
           (t_nodes <= topo.t_hi - period + 1e-12)
    base = u.values[:, :, mask]
    shift = period / grid.dt
    if abs(shift - round(shift)) < 1e-9:
        rolled = np.roll(u.values, -int(round(shift)), axis=2)[:, :, mask]
    else:
        ts = t_nodes[mask] + period
        rolled = np.stack([
            np.stack([grid.sample_series(u.values[k, i, :], ts)
                      for i in range(grid.nx + 1)])
            for k in range(u.n_components)
        ])
    return float(np.max(np.abs(rolled - base)))
