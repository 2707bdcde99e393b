"""Quasilinear outer iteration: freeze, diagonalize, solve, repeat.

The increments contract at a rate proportional to the forcing amplitude;
halving the amplitude roughly halves the outer contraction ratio.
"""

import numpy as np

from charstrip import (
    Grid,
    Periodic,
    QuasilinearOptions,
    QuasilinearProblem,
    QuasilinearSystem,
    SolveOptions,
    general_boundary,
    solve_quasilinear,
)

boundary = general_boundary(1, [{"j": 0, "k": 0, "r": "0.5"}])
grid = Grid(48, 96, Periodic(2 * np.pi))
opts = QuasilinearOptions(lambda0=0.25, delta0=0.5, tol=1e-9,
                          inner=SolveOptions(tol=1e-11, lambda0=0.25))

ratios = []
for eps in (1e-2, 5e-3, 2.5e-3):
    system = QuasilinearSystem(1, 1, [["1 + V1"]], [["1"]], [["1"]],
                               ["1 + V1"], [f"{eps}*sin(t)"])
    report = solve_quasilinear(QuasilinearProblem(system, boundary, None, grid),
                               opts)
    ratios.append(report.outer_ratio)
    print(f"amplitude {eps:7.2e}: {report.iterations} rounds, "
          f"outer ratio {report.outer_ratio:.5f}, "
          f"sup |V| = {report.V.sup_norm():.3e}")

print(f"ratio-of-ratios: {ratios[0] / ratios[1]:.2f}, "
      f"{ratios[1] / ratios[2]:.2f}  (ideal 2.0)")
