"""Dissipativity checking: which route certifies the fixed point, and what
the trace-transfer norms say about differentiability.

Three configurations:
  * a damped autonomous system, where everything passes;
  * a reflection of norm 2, where only the trace-presolve route works;
  * the critical nonautonomous pair, solvable but with the level-1
    transfer norm above one: bounded continuous, not differentiable.
"""

import numpy as np

from charstrip import (
    DiagonalSystem,
    Grid,
    Periodic,
    evaluate_conditions,
    general_boundary,
)

TWO_PI = 2 * np.pi
grid = Grid(32, 1024, Periodic(TWO_PI))


def show(label, report):
    nv = report.norm_verdicts
    print(f"{label}:")
    print(f"  route {report.route!r}; solvable {report.solvable}; "
          f"c1 {report.c1_regular}; c2 {report.c2_regular}")
    print(f"  level-1 transfer norm {nv['level1']['estimate']:.5f}, "
          f"level-2 {nv['level2']['estimate']:.5f}")


autonomous = DiagonalSystem(2, 1, ["1.5", "-2"],
                            [["0.5", "0.1"], ["0.2", "-0.3"]])
spec = general_boundary(2, [{"j": 0, "k": 1, "r": "0.5"},
                            {"j": 1, "k": 0, "r": "0.7"}])
show("autonomous, damped", evaluate_conditions(autonomous, spec, grid))

big_reflection = DiagonalSystem(1, 1, ["1"], [["3"]])
spec2 = general_boundary(1, [{"j": 0, "k": 0, "r": "2"}])
show("reflection norm 2, strong damping",
     evaluate_conditions(big_reflection, spec2, grid))

critical = DiagonalSystem(2, 1, ["2/(4*pi-1)", "-(2+sin(t))"],
                          [["0", "0"], ["0", "0"]])
alpha = float(1.0 / (0.9 * (2 + np.sin(0.25)) / (2 - np.sin(0.25))))
spec3 = general_boundary(2, [
    {"j": 0, "k": 1, "r": f"{alpha!r} + 0.05*sin(t - 0.25)"},
    {"j": 1, "k": 0, "r": "0.9"},
])
show("critical nonautonomous pair", evaluate_conditions(critical, spec3, grid))
