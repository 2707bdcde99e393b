"""Manufactured-solution study: solve, compare with the known answer,
estimate the empirical convergence order across dyadic grids."""

import numpy as np

from charstrip import (
    DiagonalSystem,
    ExprRhs,
    ExprTimeData,
    Grid,
    LinearProblem,
    Periodic,
    SolveOptions,
    general_boundary,
    solve_linear,
)

TWO_PI = 2 * np.pi

# exact solution u = x sin t for speed 1, damping 1, reflection 0.5
system = DiagonalSystem(1, 1, ["1"], [["1"]])
boundary = general_boundary(1, [{"j": 0, "k": 0, "r": "0.5"}])
forcing = ExprRhs(["x*cos(t) + sin(t) + x*sin(t)"])
data = ExprTimeData(["-0.5*sin(t)"])

errors = []
for n in (64, 128, 256):
    grid = Grid(n, n, Periodic(TWO_PI))
    problem = LinearProblem(system, boundary, forcing, data, grid)
    report = solve_linear(problem, SolveOptions(tol=1e-11))
    xs = grid.x_nodes()[:, None]
    ts = grid.t_nodes()[None, :]
    err = float(np.max(np.abs(report.u.values[0] - xs * np.sin(ts))))
    errors.append(err)
    print(f"n = {n:3d}: sup error {err:.3e}, iterations {report.iterations}, "
          f"contraction ratio {report.contraction_ratio:.3f}")

for i in range(len(errors) - 1):
    print(f"observed order {np.log2(errors[i] / errors[i + 1]):.2f}")
