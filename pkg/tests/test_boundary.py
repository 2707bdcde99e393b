import numpy as np
import pytest

from charstrip.boundary import (
    BoundaryPlan,
    TraceSet,
    apply_R,
    apply_derived,
    general_boundary,
    periodic_boundary,
    row_norm,
)
from charstrip.errors import LookbackOutOfWindowError
from charstrip.fields import Grid, Periodic, Window

TWO_PI = 2.0 * np.pi


def grid_2pi(nt=256):
    return Grid(8, nt, Periodic(TWO_PI))


def make_traces(grid, *fns):
    t = grid.t_nodes()
    return TraceSet(grid, np.stack([f(t) for f in fns]))


def test_periodic_identity():
    grid = grid_2pi()
    Z = make_traces(grid, np.sin, np.cos)
    spec = periodic_boundary(2)
    t = grid.t_nodes()[[12, 70]]
    got = apply_R(spec, Z, t)
    np.testing.assert_allclose(got, [np.sin(t), np.cos(t)], atol=1e-12)


def test_counterexample_row():
    # row 1: r_12 = r1(t), everything else zero
    grid = grid_2pi(1024)
    spec = general_boundary(2, [{"j": 0, "k": 1, "r": "0.8 + 0.05*sin(t - 0.25)"}])
    Z = make_traces(grid, np.sin, np.cos)
    t = np.array([0.25, 2.0])
    got = apply_R(spec, Z, t)
    want0 = (0.8 + 0.05 * np.sin(t - 0.25)) * np.cos(t)
    np.testing.assert_allclose(got[0], want0, atol=1e-4)
    np.testing.assert_allclose(got[1], 0.0, atol=1e-14)


def test_constant_kernel_integrates_to_constant():
    grid = grid_2pi(512)
    spec = general_boundary(1, [{"j": 0, "k": 0, "kernel": "1", "horizon": "1"}])
    c = 0.37
    Z = make_traces(grid, lambda t: np.full_like(t, c))
    got = apply_R(spec, Z, np.array([0.0, 1.0, 4.0]))
    np.testing.assert_allclose(got[0], c, rtol=1e-12)


def test_autonomous_derived_degenerate():
    spec = general_boundary(2, [
        {"j": 0, "k": 1, "r": "0.5", "theta": "0.2"},
        {"j": 1, "k": 0, "r": "0.9"},
    ])
    grid = grid_2pi()
    Z = make_traces(grid, np.sin, np.cos)
    t = np.linspace(0, 6, 7)
    np.testing.assert_allclose(apply_derived(spec, "Rprime", Z, t), 0.0, atol=1e-14)
    np.testing.assert_allclose(
        apply_derived(spec, "Rtilde", Z, t), apply_R(spec, Z, t), atol=1e-14
    )
    np.testing.assert_allclose(
        apply_derived(spec, "Rhat", Z, t), apply_R(spec, Z, t), atol=1e-14
    )


def test_reflection_derived_operators():
    # row with time-varying reflection only: (R'Z)_1 = r'(t) Z_2(t),
    # (Rtilde Z)_1 = r(t) Z_2(t); node times keep trace interpolation exact
    spec = general_boundary(2, [{"j": 0, "k": 1, "r": "0.5 + 0.2*sin(t)"}])
    grid = grid_2pi(2048)
    Z = make_traces(grid, np.sin, np.cos)
    t = grid.t_nodes()[[130, 1077]]
    np.testing.assert_allclose(
        apply_derived(spec, "Rprime", Z, t)[0], 0.2 * np.cos(t) * np.cos(t), atol=1e-10
    )
    np.testing.assert_allclose(
        apply_derived(spec, "Rtilde", Z, t)[0],
        (0.5 + 0.2 * np.sin(t)) * np.cos(t), atol=1e-10,
    )


def test_pure_delay_rtilde():
    # r = 1, theta = 0.1 sin t: (Rtilde Z)(t) = Z(t - theta) (1 - 0.1 cos t)
    spec = general_boundary(1, [{"j": 0, "k": 0, "r": "1", "theta": "0.1*sin(t)"}])
    grid = grid_2pi(4096)
    Z = make_traces(grid, np.sin)
    t = np.array([0.3, 1.0, 5.5])
    want = np.sin(t - 0.1 * np.sin(t)) * (1.0 - 0.1 * np.cos(t))
    np.testing.assert_allclose(apply_derived(spec, "Rtilde", Z, t)[0], want, atol=1e-6)


def test_derivative_identity_first_line():
    # d/dt (RZ)_j, by finite differences, = (R'Z)_j + (Rtilde Z')_j to O(h)
    spec = general_boundary(1, [{
        "j": 0, "k": 0, "r": "0.4 + 0.1*cos(t)", "theta": "0.2 + 0.05*sin(t)",
        "kernel": "0.1*(1 + 0.5*sin(t))*exp(-tau)", "horizon": "0.5 + 0.1*cos(t)",
    }])
    grid = grid_2pi(8192)
    Z = make_traces(grid, lambda t: np.sin(t) + 0.3 * np.cos(2 * t))
    dZ = make_traces(grid, lambda t: np.cos(t) - 0.6 * np.sin(2 * t))
    h = 1e-4
    t = np.array([0.7, 2.9, 4.1])
    fd = (apply_R(spec, Z, t + h) - apply_R(spec, Z, t - h)) / (2 * h)
    direct = apply_derived(spec, "Rprime", Z, t) + apply_derived(spec, "Rtilde", dZ, t)
    np.testing.assert_allclose(fd, direct, atol=5e-3)


def test_row_norms():
    grid = grid_2pi(1024)
    t_nodes = grid.t_nodes()
    assert row_norm(periodic_boundary(2), 0) == 1.0

    r1 = "0.8 + 0.05*sin(t - 0.25)"
    spec = general_boundary(2, [
        {"j": 0, "k": 1, "r": r1},
        {"j": 1, "k": 0, "r": "0.9"},
    ])
    assert row_norm(spec, 0, t_nodes) == pytest.approx(0.85, abs=1e-4)
    assert row_norm(spec, 1, t_nodes) == pytest.approx(0.9, abs=1e-12)

    mixed = general_boundary(1, [{
        "j": 0, "k": 0, "r": "0.5", "kernel": "0.25", "horizon": "1",
    }])
    assert row_norm(mixed, 0, t_nodes, dt_step=grid.dt) == pytest.approx(0.75, rel=1e-10)


def test_row_norm_is_an_upper_bound():
    grid = grid_2pi(512)
    spec = general_boundary(2, [
        {"j": 0, "k": 1, "r": "0.3*sin(t)", "theta": "0.1"},
        {"j": 0, "k": 0, "kernel": "0.2*cos(tau)", "horizon": "0.8"},
        {"j": 1, "k": 0, "r": "-0.6"},
    ])
    rng = np.random.default_rng(5)
    bounds = [row_norm(spec, j, grid.t_nodes(), grid.dt) for j in range(2)]
    for _ in range(10):
        vals = rng.uniform(-1, 1, size=(2, grid.nt))
        Z = TraceSet(grid, vals)
        out = apply_R(spec, Z, grid.t_nodes())
        zmax = np.abs(vals).max()
        for j in range(2):
            assert np.abs(out[j]).max() <= bounds[j] * zmax + 1e-9


def test_plan_matches_direct_application():
    grid = grid_2pi(512)
    spec = general_boundary(2, [
        {"j": 0, "k": 1, "r": "0.4 + 0.2*cos(t)", "theta": "0.3 + 0.1*sin(t)"},
        {"j": 0, "k": 0, "kernel": "0.1*exp(-tau)*(1+0.2*sin(t))", "horizon": "0.7 + 0.2*cos(t)"},
        {"j": 1, "k": 0, "r": "0.9"},
    ])
    rng = np.random.default_rng(11)
    vals = rng.standard_normal((2, grid.nt))
    plan = BoundaryPlan(spec, grid)
    got = plan.apply(vals)
    want = apply_R(spec, TraceSet(grid, vals), grid.t_nodes())
    np.testing.assert_allclose(got, want, atol=1e-10)


def test_window_lookback():
    grid = Grid(8, 64, Window(0.0, 4.0, 1.0))
    vals = np.ones((1, 64))
    strict = TraceSet(grid, vals, clamp=False)
    spec = general_boundary(1, [{"j": 0, "k": 0, "r": "1", "theta": "0.5"}])
    with pytest.raises(LookbackOutOfWindowError):
        apply_R(spec, strict, np.array([0.1]))
    clamped = TraceSet(grid, vals)
    np.testing.assert_allclose(apply_R(spec, clamped, np.array([0.1]))[0], 1.0)


def test_max_lookback():
    spec = general_boundary(1, [{
        "j": 0, "k": 0, "r": "1", "theta": "0.25",
        "kernel": "1", "horizon": "0.5",
    }])
    t = np.linspace(0, TWO_PI, 64)
    assert spec.max_lookback(t) == pytest.approx(0.75)
