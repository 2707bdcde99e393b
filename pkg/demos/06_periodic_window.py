"""Bounded-in-time solves on a finite window with a spin-up margin.

Periodic forcing yields a periodic solution past the margin; a forcing
with an incommensurate frequency does not repeat with the base period and
the defect stays at the scale of its amplitude.
"""

import numpy as np

from charstrip import (
    DiagonalSystem,
    ExprRhs,
    Grid,
    LinearProblem,
    SolveOptions,
    Window,
    general_boundary,
    solve_linear,
    verify_periodicity,
)

system = DiagonalSystem(1, 1, ["1"], [["2"]])
boundary = general_boundary(1, [{"j": 0, "k": 0, "r": "0.3"}])
grid = Grid(24, 577, Window(0.0, 6 * np.pi, margin=2 * np.pi))

for label, forcing in (("periodic sin t", "sin(t)"),
                       ("incommensurate sin(sqrt(2) t)", "sin(sqrt(2)*t)")):
    problem = LinearProblem(system, boundary, ExprRhs([forcing]), None, grid)
    report = solve_linear(problem, SolveOptions(tol=1e-9))
    defect = verify_periodicity(report.u, 2 * np.pi)
    print(f"{label}: periodicity defect over one base period = {defect:.3e}")
