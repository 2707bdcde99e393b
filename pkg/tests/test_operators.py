import numpy as np
import pytest

from charstrip.boundary import general_boundary, periodic_boundary
from charstrip.errors import AssemblyVersionError, MixedSignDampingError
from charstrip.fields import DiagonalSystem, Grid, GridField, Periodic
from charstrip.forcing import ExprRhs, ExprTimeData
from charstrip.operators import (
    OperatorAssembly,
    apply_C,
    apply_D,
    apply_F,
    estimate_operator_norms,
)

TWO_PI = 2.0 * np.pi
ZERO2 = [["0", "0"], ["0", "0"]]


def counterexample_system():
    return DiagonalSystem(2, 1, ["2/(4*pi-1)", "-(2+sin(t))"], ZERO2)


def counterexample_boundary(alpha=0.8665, beta=0.05, r2=0.9):
    return general_boundary(2, [
        {"j": 0, "k": 1, "r": f"{alpha} + {beta}*sin(t - 0.25)"},
        {"j": 1, "k": 0, "r": f"{r2}"},
    ])


def test_unit_speed_periodic_C_is_shift():
    # m = n = 1, a = 1, b = 0, R periodic: (Cu)(x,t) = u(1, t - x)
    sys = DiagonalSystem(1, 1, ["1"], [["0"]])
    grid = Grid(32, 256, Periodic(TWO_PI))
    asm = OperatorAssembly(sys, periodic_boundary(1), grid)
    u = GridField.from_function(grid, 1, lambda k, x, t: np.sin(t) + 0.0 * x)
    got = apply_C(asm, u)
    xs = grid.x_nodes()[:, None]
    ts = grid.t_nodes()[None, :]
    np.testing.assert_allclose(got.values[0], np.sin(ts - xs), atol=2e-4)

    zero = GridField.zeros(grid, 1)
    np.testing.assert_array_equal(apply_C(asm, zero).values, 0.0)


def test_counterexample_C_row1():
    # c_1 = 1, (Cu)_1(x,t) = r1(t - (4pi-1)x/2) u_2(0, t - (4pi-1)x/2)
    grid = Grid(64, 512, Periodic(TWO_PI))
    alpha, beta = 0.8665, 0.05
    asm = OperatorAssembly(counterexample_system(),
                           counterexample_boundary(alpha, beta), grid)
    u = GridField.from_function(
        grid, 2, lambda k, x, t: np.cos(t) * (1.0 + k) + 0.0 * x
    )
    got = apply_C(asm, u)
    xs = grid.x_nodes()[:, None]
    ts = grid.t_nodes()[None, :]
    shift = ts - (4 * np.pi - 1) / 2.0 * xs
    r1 = alpha + beta * np.sin(shift - 0.25)
    np.testing.assert_allclose(got.values[0], r1 * 2.0 * np.cos(shift), atol=2e-3)


def test_D_vanishes_without_coupling():
    grid = Grid(16, 64, Periodic(TWO_PI))
    asm = OperatorAssembly(counterexample_system(),
                           counterexample_boundary(), grid)
    u = GridField.from_function(grid, 2, lambda k, x, t: np.sin(t + k) + x)
    np.testing.assert_array_equal(apply_D(asm, u).values, 0.0)


def test_F_integrates_unit_forcing():
    # g = 1, h = 0, a = 1, b = 0: F_1(x,t) = x
    sys = DiagonalSystem(1, 1, ["1"], [["0"]])
    grid = Grid(32, 64, Periodic(TWO_PI))
    asm = OperatorAssembly(sys, periodic_boundary(1), grid)
    got = apply_F(asm, ExprRhs(["1"]), ExprTimeData(["0"]))
    xs = grid.x_nodes()[:, None]
    np.testing.assert_allclose(got.values[0], xs * np.ones((1, 64)), atol=1e-12)


def test_D_hand_quadrature():
    # a = (1,-1), b = [[0, 1/2], [1/2, 0]], u = (1,1): (Du)_1(x,t) = -x/2
    sys = DiagonalSystem(2, 1, ["1", "-1"], [["0", "0.5"], ["0.5", "0"]])
    grid = Grid(32, 64, Periodic(TWO_PI))
    asm = OperatorAssembly(sys, periodic_boundary(2), grid)
    u = GridField(grid, np.ones((2, 33, 64)))
    got = apply_D(asm, u)
    xs = grid.x_nodes()[:, None]
    np.testing.assert_allclose(got.values[0], -xs / 2.0 * np.ones((1, 64)), atol=1e-12)
    np.testing.assert_allclose(got.values[1], -(1.0 - xs) / 2.0 * np.ones((1, 64)),
                               atol=1e-12)


def test_linearity_to_machine_precision():
    sys = DiagonalSystem(2, 1, ["1.2 + 0.1*sin(t)", "-(2+sin(t))"],
                         [["0.3", "0.2*cos(t)"], ["0.1", "-0.4"]])
    grid = Grid(16, 64, Periodic(TWO_PI))
    asm = OperatorAssembly(sys, counterexample_boundary(), grid)
    rng = np.random.default_rng(2)
    ua = GridField(grid, rng.standard_normal((2, 17, 64)))
    ub = GridField(grid, rng.standard_normal((2, 17, 64)))
    lam = 0.37
    combo = GridField(grid, ua.values + lam * ub.values)
    for op in (apply_C, apply_D):
        lhs = op(asm, combo).values
        rhs = op(asm, ua).values + lam * op(asm, ub).values
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_autonomous_norm_levels_coincide():
    sys = DiagonalSystem(2, 1, ["1.5", "-2"], [["0.5", "0.1"], ["0.2", "-0.3"]])
    spec = general_boundary(2, [
        {"j": 0, "k": 1, "r": "0.5"},
        {"j": 1, "k": 0, "r": "0.7"},
    ])
    grid = Grid(16, 64, Periodic(TWO_PI))
    norms = estimate_operator_norms(OperatorAssembly(sys, spec, grid))
    assert norms["G0"]["rows"] == norms["G1"]["rows"] == norms["G2"]["rows"]


def test_counterexample_norm_estimate():
    # level-1 row bound is at least r2 * (amplification at the fixed time)
    grid = Grid(32, 1024, Periodic(TWO_PI))
    asm = OperatorAssembly(counterexample_system(),
                           counterexample_boundary(r2=0.9), grid)
    norms = estimate_operator_norms(asm)
    assert norms["G1"]["max"] >= 0.9 * 1.28233
    assert norms["G1"]["max"] == pytest.approx(0.9 * 1.48803, rel=1e-3)
    assert norms["G0"]["max"] < 1.0


def test_periodic_H_norms():
    # b = diag(1,1), a = (1,-1): each H0 row bound is e^{-1}
    sys = DiagonalSystem(2, 1, ["1", "-1"], [["1", "0"], ["0", "1"]])
    grid = Grid(16, 64, Periodic(TWO_PI))
    norms = estimate_operator_norms(OperatorAssembly(sys, periodic_boundary(2), grid))
    np.testing.assert_allclose(norms["H0"]["rows"], np.exp(-1.0), rtol=1e-10)

    # flipped direction for negative damping
    sys2 = DiagonalSystem(2, 1, ["1", "-1"], [["1", "0"], ["0", "-1"]])
    norms2 = estimate_operator_norms(OperatorAssembly(sys2, periodic_boundary(2), grid))
    np.testing.assert_allclose(norms2["H0"]["rows"], np.exp(-1.0), rtol=1e-10)

    sys3 = DiagonalSystem(2, 1, ["1", "-1"], [["1", "0"], ["0", "sin(t)"]])
    with pytest.raises(MixedSignDampingError):
        estimate_operator_norms(OperatorAssembly(sys3, periodic_boundary(2), grid))


def test_version_mismatch():
    sys = DiagonalSystem(1, 1, ["1"], [["0"]])
    grid = Grid(16, 64, Periodic(TWO_PI))
    other = Grid(16, 64, Periodic(1.0))
    asm = OperatorAssembly(sys, periodic_boundary(1), grid)
    with pytest.raises(AssemblyVersionError):
        apply_C(asm, GridField.zeros(other, 1))


def test_exit_data_against_tracer():
    # composed per-cell march matches the standalone RK4 tracer
    from charstrip.characteristics import trace

    sys = DiagonalSystem(2, 1, ["1.3 + 0.25*sin(t + x)", "-(2+sin(t))"], ZERO2)
    grid = Grid(64, 256, Periodic(TWO_PI))
    asm = OperatorAssembly(sys, periodic_boundary(2), grid)
    xs = grid.x_nodes()
    ts = grid.t_nodes()
    for j, i, l in [(0, 40, 17), (0, 64, 100), (1, 0, 9), (1, 30, 200)]:
        curve = trace(sys, j, float(xs[i]), float(ts[l]), nx=256, oversample=8)
        fam = asm.families[j]
        # column-composed data carry the resampling error of this resolution
        assert fam.omega_exit[i, l] == pytest.approx(curve.exit_ordinate, abs=2e-5)
        assert fam.c_exit[i, l] == pytest.approx(curve.exit_weight, rel=2e-5)
        assert fam.dtom_exit[i, l] == pytest.approx(curve.exit_dt_omega, rel=2e-5)


def test_contraction_certificate_bounds_measured_ratio():
    # when the direct route passes, the measured one-step gain of C + D on
    # random fields never exceeds the certified left-hand side + 0.02
    from charstrip.conditions import check_direct, compute_damping_rates
    from charstrip.boundary import row_norm

    sys = DiagonalSystem(2, 1, ["1.2 + 0.1*sin(t)", "-(2+sin(t))"],
                         [["0.6", "0.2"], ["0.1", "-0.2"]])
    spec = general_boundary(2, [
        {"j": 0, "k": 1, "r": "0.4 + 0.1*cos(t)"},
        {"j": 1, "k": 0, "r": "0.5"},
    ])
    grid = Grid(24, 96, Periodic(TWO_PI))
    rates = compute_damping_rates(sys, grid)
    norms = [row_norm(spec, j, grid.t_nodes(), grid.dt) for j in range(2)]
    verdicts = check_direct(rates, norms)
    assert all(v.passed for v in verdicts)
    lhs = 1.0 - min(v.margin for v in verdicts)

    asm = OperatorAssembly(sys, spec, grid)
    rng = np.random.default_rng(9)
    for _ in range(8):
        u = GridField(grid, rng.standard_normal((2, 25, 96)))
        out = apply_C(asm, u).values + apply_D(asm, u).values
        gain = np.max(np.abs(out)) / np.max(np.abs(u.values))
        assert gain <= lhs + 0.02


def test_level0_norm_matches_damped_reflection_bound():
    # level-0 estimate <= max_j row_norm * e^{-damping} plus grid slack
    from charstrip.conditions import compute_damping_rates
    from charstrip.boundary import row_norm

    sys = DiagonalSystem(2, 1, ["1.5", "-2"], [["0.8", "0.1"], ["0.1", "-0.5"]])
    spec = general_boundary(2, [
        {"j": 0, "k": 1, "r": "0.5 + 0.2*sin(t)"},
        {"j": 1, "k": 0, "r": "0.7"},
    ])
    grid = Grid(16, 64, Periodic(TWO_PI))
    rates = compute_damping_rates(sys, grid)
    norms = estimate_operator_norms(OperatorAssembly(sys, spec, grid))
    for j in range(2):
        bound = row_norm(spec, j, grid.t_nodes(), grid.dt) * np.exp(-rates.damping[j])
        assert norms["G0"]["rows"][j] <= bound + 1e-6


def test_exit_data_second_order():
    # halving the time step shrinks the composed exit error by about 4x
    from charstrip.characteristics import trace

    sys = DiagonalSystem(2, 1, ["1.3 + 0.25*sin(t + x)", "-(2+sin(t))"], ZERO2)
    errs = []
    for nt in (256, 512):
        grid = Grid(64, nt, Periodic(TWO_PI))
        asm = OperatorAssembly(sys, periodic_boundary(2), grid)
        curve = trace(sys, 1, 0.0, float(grid.t_nodes()[9]), nx=512, oversample=8)
        errs.append(abs(asm.families[1].omega_exit[0, 9] - curve.exit_ordinate))
    assert errs[1] < errs[0] / 2.5
