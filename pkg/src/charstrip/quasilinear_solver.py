"""Outer iteration for the quasilinear problem.

Starting from the zero state, each round freezes the coefficients at the
current state field, diagonalizes them through the supplied eigen data,
solves the resulting linear problem, and maps the diagonal solution back.
In the small-data regime the state increments contract at a rate
proportional to the data size, which the scaling experiment below measures
directly.

Derivative fields for the frozen-coefficient chain rule come from the
linear solver's companion (derivative) problem whenever its contraction
certificate holds and the diagonalizer is time-constant; otherwise central
differences of the iterate are used.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import expr
from .boundary import BoundaryOperatorSpec
from .errors import (
    NonContractionError,
    OuterDivergenceError,
    StateOutOfBoxError,
    ValidationFailedError,
)
from .fields import (
    DiagonalSystem,
    Grid,
    GridField,
    QuasilinearSystem,
    diagonalize_at_state,
)
from .linear_solver import (
    LinearProblem,
    SolveOptions,
    SolveReport,
    solve_derivative_field,
    solve_linear,
)

__all__ = [
    "QuasilinearProblem",
    "QuasilinearOptions",
    "QuasilinearReport",
    "solve_quasilinear",
    "perturbation_experiment",
]


@dataclass
class QuasilinearProblem:
    system: QuasilinearSystem
    boundary: BoundaryOperatorSpec
    h: object
    grid: Grid


@dataclass
class QuasilinearOptions:
    tol: float = 1e-8             # C1 increment tolerance
    max_outer: int = 60
    divergence_patience: int = 5
    lambda0: float = 1e-3
    delta0: float = 1.0
    smallness_factor: float = 0.05
    force_smallness: bool = False
    derivative_mode: str = "auto"  # auto | companion | finite-difference
    inner: SolveOptions = dc_field(default_factory=SolveOptions)


@dataclass
class QuasilinearReport:
    V: GridField
    U: GridField
    dtV: GridField
    dxV: GridField
    iterations: int
    increments_c0: list
    increments_c1: list
    inner_iterations: list
    outer_ratio: float
    inner_report: SolveReport
    flags: list = dc_field(default_factory=list)

    def as_dict(self):
        return {
            "iterations": self.iterations,
            "increments_c0": self.increments_c0,
            "increments_c1": self.increments_c1,
            "inner_iterations": self.inner_iterations,
            "outer_ratio": self.outer_ratio,
            "sup_state": self.V.sup_norm(),
            "inner": self.inner_report.as_dict(),
            "flags": self.flags,
        }


class _SnapshotForcing:
    """Diagonal-frame forcing Q^{-1} f along a frozen state."""

    def __init__(self, snapshot, f_asts):
        self.snapshot = snapshot
        self.f = f_asts
        self._dtf = None

    def _f_vec(self, x, t, nodes):
        env = self.snapshot._env(x, t)
        shape = np.broadcast(np.asarray(x), np.asarray(t)).shape
        out = np.empty(shape + (self.snapshot.n,))
        for j in range(self.snapshot.n):
            out[..., j] = expr.evaluate(nodes[j], env)
        return out

    def g_at(self, j, x, t):
        fvec = self._f_vec(x, t, self.f)
        Q = self.snapshot._matrix_at(self.snapshot.parents.Q, x, t)
        sol = np.linalg.solve(Q, fvec[..., None])[..., 0]
        return np.broadcast_to(sol[..., j], np.shape(t)).astype(float, copy=False)

    def dtg_at(self, j, x, t):
        # exact only for a time-constant diagonalizer: d_t (Q^{-1} f) = Q^{-1} d_t f
        if not self.snapshot.parents.q_is_constant():
            raise ValidationFailedError(
                "exact forcing derivative needs a constant diagonalizer"
            )
        if self._dtf is None:
            self._dtf = [expr.differentiate(f, "t") for f in self.f]
        fvec = self._f_vec(x, t, self._dtf)
        Q = self.snapshot._matrix_at(self.snapshot.parents.Q, x, t)
        sol = np.linalg.solve(Q, fvec[..., None])[..., 0]
        return np.broadcast_to(sol[..., j], np.shape(t)).astype(float, copy=False)


def _matmul_field(q_nodes, values):
    # q_nodes: (nx+1, nt, n, n); values: (n, nx+1, nt)
    stacked = np.einsum("xtjk,kxt->jxt", q_nodes, values)
    return stacked


def _fd_time_derivative(values, grid):
    if grid.periodic:
        return (np.roll(values, -1, axis=2) - np.roll(values, 1, axis=2)) / (2 * grid.dt)
    out = np.gradient(values, grid.dt, axis=2)
    return out


def _c1_increment(delta, grid):
    """Sup of the value plus both first differences of an increment field."""
    d_t = np.abs(np.diff(delta, axis=2)).max(initial=0.0) / grid.dt
    d_x = np.abs(np.diff(delta, axis=1)).max(initial=0.0) / grid.dx
    return float(np.abs(delta).max() + d_t + d_x)


def _sup_f(system: QuasilinearSystem, grid):
    xs = grid.x_nodes()
    ts = grid.t_nodes()
    worst = 0.0
    for f in system.f:
        vals = np.abs(np.asarray(expr.evaluate(
            f, {"x": xs[:, None], "t": ts[None, :],
                **{f"V{i+1}": 0.0 for i in range(system.n)}})))
        worst = max(worst, float(np.max(vals)))
    return worst


def solve_quasilinear(problem: QuasilinearProblem,
                      opts: QuasilinearOptions = None) -> QuasilinearReport:
    """Iterate freeze / diagonalize / solve until the C1 increment drops
    below tolerance.

    Raises OuterDivergenceError when increments grow for the configured
    number of consecutive rounds and StateOutOfBoxError if an iterate
    leaves the coefficient box, rather than returning a silent wrong
    answer.  The small-data gate refuses to start on large forcing unless
    overridden.
    """
    opts = opts or QuasilinearOptions()
    system = problem.system
    grid = problem.grid
    n = system.n

    sup_f = _sup_f(system, grid)
    sup_h = 0.0
    if problem.h is not None:
        sup_h = float(np.max(np.abs(np.stack(
            [problem.h.h_at(j, grid.t_nodes()) for j in range(n)]))))
    if sup_f + sup_h > opts.smallness_factor * opts.lambda0 \
            and not opts.force_smallness:
        raise ValidationFailedError(
            f"data size {sup_f + sup_h:.3g} exceeds the smallness gate "
            f"{opts.smallness_factor * opts.lambda0:.3g}; override to proceed"
        )

    V = GridField.zeros(grid, n)
    dtV = GridField.zeros(grid, n)
    dxV = GridField.zeros(grid, n)
    flags = []
    inc_c0 = []
    inc_c1 = []
    inner_counts = []
    prev_c1 = None
    grow_streak = 0
    inner_report = None
    U = None
    use_companion = opts.derivative_mode
    if use_companion == "auto":
        use_companion = "companion" if system.q_is_constant() else "finite-difference"
        if use_companion == "finite-difference":
            flags.append("derivatives_by_finite_differences")

    for k in range(1, opts.max_outer + 1):
        snapshot = diagonalize_at_state(system, V, dtV, dxV,
                                        lambda0=opts.lambda0, delta0=opts.delta0)
        g_provider = _SnapshotForcing(snapshot, system.f)
        inner = LinearProblem(snapshot, problem.boundary, g_provider,
                              problem.h, grid)
        inner_report = solve_linear(inner, opts.inner)
        inner_counts.append(inner_report.iterations)
        U = inner_report.u
        V_new_vals = _matmul_field(snapshot.q_nodes, U.values)
        if float(np.max(np.abs(V_new_vals))) > opts.delta0:
            raise StateOutOfBoxError(
                f"iterate {k} left the coefficient box (sup |V| = "
                f"{float(np.max(np.abs(V_new_vals))):.4g} > {opts.delta0})"
            )
        V_new = GridField(grid, V_new_vals)

        delta = V_new.values - V.values
        inc_c0.append(float(np.max(np.abs(delta))))
        inc_c1.append(_c1_increment(delta, grid))

        # derivative fields for the next freeze
        dt_vals = None
        if use_companion == "companion":
            try:
                w_report = solve_derivative_field(inner, inner_report, opts.inner)
                dt_vals = _matmul_field(snapshot.q_nodes, w_report.u.values)
            except NonContractionError:
                flags.append(f"derivative_solve_noncontracting_at_{k}")
        if dt_vals is None:
            dt_vals = _fd_time_derivative(V_new.values, grid)
        dtV = GridField(grid, dt_vals)
        dxV = GridField(grid, _dx_from_pde(system, snapshot, V_new, dtV, grid))

        V = V_new
        if inc_c1[-1] < opts.tol:
            break
        if prev_c1 is not None and inc_c1[-1] >= prev_c1:
            grow_streak += 1
            if grow_streak >= opts.divergence_patience:
                raise OuterDivergenceError(
                    f"C1 increments grew for {grow_streak} consecutive rounds"
                )
        else:
            grow_streak = 0
        prev_c1 = inc_c1[-1]
    else:
        warnings.warn("outer iteration hit the round cap before tolerance",
                      stacklevel=2)
        flags.append("outer_cap_reached")

    ratios = [inc_c1[i + 1] / inc_c1[i]
              for i in range(max(0, len(inc_c1) - 6), len(inc_c1) - 1)
              if inc_c1[i] > 0]
    outer_ratio = float(np.median(ratios)) if ratios else 0.0
    return QuasilinearReport(V, U, dtV, dxV, len(inc_c0), inc_c0, inc_c1,
                             inner_counts, outer_ratio, inner_report, flags)


def _dx_from_pde(system, snapshot, V, dtV, grid):
    """d_x V = A(V_frozen)^{-1} (f - d_t V - B(V_frozen) V), node by node."""
    xs = grid.x_nodes()
    ts = grid.t_nodes()
    A = snapshot._matrix_at(system.A, xs[:, None], ts[None, :], grid_nodes=True)
    B = snapshot._matrix_at(system.B, xs[:, None], ts[None, :], grid_nodes=True)
    env = snapshot._env(xs[:, None], ts[None, :], grid_nodes=True)
    f = np.stack([
        np.broadcast_to(expr.evaluate(fj, env), (grid.nx + 1, grid.nt))
        for fj in system.f
    ])
    rhs = f - dtV.values - np.einsum("xtjk,kxt->jxt", B, V.values)
    sol = np.linalg.solve(A, np.moveaxis(rhs, 0, -1)[..., None])[..., 0]
    return np.moveaxis(sol, -1, 0)


def perturbation_experiment(problem, eps_p, opts=None, factor=10.0):
    """Additive speed perturbation eps * sin t: solve, measure the solution
    change, repeat at eps/factor, and report the ratio of changes.

    Works on a LinearProblem (perturbing each diagonal speed) or a
    QuasilinearProblem (shifting A by eps sin t times the identity, which
    shifts every eigenvalue by exactly eps sin t).
    """
    if eps_p == 0.0:
        base = _solve_any(problem, opts)
        return {"eps": 0.0, "delta_sup": 0.0, "delta_small": 0.0, "ratio": None,
                "base_sup": float(base.max())}
    base = _solve_any(problem, opts)
    deltas = []
    for eps in (eps_p, eps_p / factor):
        pert = _perturb(problem, eps)
        sol = _solve_any(pert, opts)
        deltas.append(float(np.max(np.abs(sol - base))))
    ratio = deltas[0] / deltas[1] if deltas[1] > 0 else np.inf
    return {"eps": eps_p, "delta_sup": deltas[0], "delta_small": deltas[1],
            "ratio": ratio, "base_sup": float(np.max(np.abs(base)))}


def _solve_any(problem, opts):
    if isinstance(problem, QuasilinearProblem):
        return solve_quasilinear(problem, opts).V.values
    return solve_linear(problem, opts).u.values


def _shift(e, eps):
    return expr.BinOp("+", e, expr.BinOp(
        "*", expr.constant(eps), expr.Call("sin", expr.Var("t"))))


def _perturb(problem, eps):
    if isinstance(problem, QuasilinearProblem):
        sysq = problem.system
        A = [[_shift(sysq.A[r][c], eps) if r == c else sysq.A[r][c]
              for c in range(sysq.n)] for r in range(sysq.n)]
        eigen = [_shift(ev, eps) for ev in sysq.eigenvalues]
        pert = QuasilinearSystem(sysq.n, sysq.m, A, sysq.B, sysq.Q, eigen, sysq.f)
        return QuasilinearProblem(pert, problem.boundary, problem.h, problem.grid)
    sysd = problem.system
    if not isinstance(sysd, DiagonalSystem):
        raise ValidationFailedError(
            "speed perturbation needs an expression-backed system"
        )
    pert = DiagonalSystem(sysd.n, sysd.m, [_shift(a, eps) for a in sysd.a],
                          [row[:] for row in sysd.b], parents=sysd.parents)
    return LinearProblem(pert, problem.boundary, problem.g, problem.h,
                         problem.grid)
