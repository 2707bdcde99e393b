import numpy as np
import pytest
from scipy.optimize import brentq

from charstrip.characteristics import dt_omega, trace
from charstrip.errors import StepFailureError
from charstrip.fields import DiagonalSystem

TWO_PI = 2.0 * np.pi


def counterexample_system():
    return DiagonalSystem(2, 1, ["2/(4*pi-1)", "-(2+sin(t))"],
                          [["0", "0"], ["0", "0"]])


def p(t):
    return -2.0 * t + np.cos(t)


def p_inverse(y):
    lo, hi = -abs(y) - 2.0, abs(y) + 2.0
    return brentq(lambda s: p(s) - y, lo, hi, xtol=1e-14)


def test_constant_speed_is_exact():
    sys = DiagonalSystem(1, 1, ["1"], [["0"]])
    curve = trace(sys, 0, x=0.63, t=0.2, nx=32)
    # omega(xi, x, t) = t + xi - x
    np.testing.assert_allclose(curve.omega, 0.2 + curve.xi - 0.63, atol=1e-12)
    assert curve.exit_ordinate == pytest.approx(0.2 - 0.63, abs=1e-12)


def test_counterexample_family1_affine():
    sys = counterexample_system()
    curve = trace(sys, 0, x=0.31, t=1.1, nx=64)
    want = (4 * np.pi - 1) / 2.0 * (curve.xi - 0.31) + 1.1
    np.testing.assert_allclose(curve.omega, want, atol=1e-10)


def test_counterexample_family2_exit_ordinate():
    # root-find oracle: omega solves p(omega) = p(t) + 1, and the symmetric
    # cosine makes omega_2(1, 0, 1/4) = -1/4 exact
    sys = counterexample_system()
    curve = trace(sys, 1, x=0.0, t=0.25, nx=512)
    assert curve.exit_ordinate == pytest.approx(-0.25, abs=1e-8)
    assert curve.exit_ordinate == pytest.approx(p_inverse(p(0.25) + 1.0), abs=1e-9)


def test_autonomous_dt_omega_is_one():
    sys = DiagonalSystem(1, 1, ["1 + 0.3*sin(2*pi*x)"], [["0"]])
    assert dt_omega(sys, 0, 0.0, 0.8, 0.37, nx=64) == pytest.approx(1.0, abs=1e-12)


def test_counterexample_amplification():
    sys = counterexample_system()
    got = dt_omega(sys, 1, 1.0, 0.0, 0.25, nx=512)
    want = (2.0 + np.sin(0.25)) / (2.0 - np.sin(0.25))
    assert got == pytest.approx(want, abs=1e-6)
    assert got == pytest.approx(1.28233, abs=1e-5)


def test_dt_omega_against_finite_differences():
    sys = counterexample_system()
    h = 1e-5
    for (x, t, xi) in [(0.0, 0.25, 1.0), (0.3, 1.0, 1.0), (0.8, -0.7, 1.0)]:
        hi = trace(sys, 1, x, t + h, nx=256)
        lo = trace(sys, 1, x, t - h, nx=256)
        fd = (hi.exit_ordinate - lo.exit_ordinate) / (2 * h)
        got = dt_omega(sys, 1, xi, x, t, nx=256)
        assert got == pytest.approx(fd, abs=1e-4)


def test_weight_identities():
    # c^1 = c * dt_omega and c^2 = c^1 * dt_omega along the samples
    sys = DiagonalSystem(2, 1, ["1.5 + 0.2*sin(t)", "-(2+sin(t))"],
                         [["0.5 + 0.1*cos(t)", "0.2"], ["0.1", "-0.3"]])
    for j in (0, 1):
        curve = trace(sys, j, 0.5, 0.77, nx=64)
        np.testing.assert_allclose(curve.c1, curve.c0 * curve.dt_omega, rtol=1e-6)
        np.testing.assert_allclose(curve.c2, curve.c1 * curve.dt_omega, rtol=1e-6)
        assert curve.c0[curve.anchor_index] == pytest.approx(1.0)  # c(x, x, t) = 1
        np.testing.assert_allclose(
            curve.d, curve.c0 / np.array(
                [sys.a_at(j, xi, np.array([om]))[0]
                 for xi, om in zip(curve.xi, curve.omega)]
            ),
            rtol=1e-12,
        )


def test_semigroup_property():
    # omega_j(xi2, xi1, omega_j(xi1, x, t)) = omega_j(xi2, x, t) to 1e-8,
    # with xi picked on the shared step lattice so both traces sample the
    # same abscissas
    sys = DiagonalSystem(2, 1, ["1.5 + 0.2*sin(t) + 0.1*x", "-(2+sin(t+x))"],
                         [["0", "0"], ["0", "0"]])
    rng = np.random.default_rng(7)
    nx, oversample = 256, 4
    h = 1.0 / (nx * oversample)
    for _ in range(12):
        j = int(rng.integers(0, 2))
        k_anchor = int(rng.integers(400, nx * oversample + 1))
        x = k_anchor * h
        t = float(rng.uniform(-3.0, 3.0))
        full = trace(sys, j, x, t, nx=nx, oversample=oversample)
        last = len(full.xi) - 1
        if j == 0:  # rightgoing: exit at the left end, walk toward it
            i1 = int(rng.integers(1, last))
            i2 = int(rng.integers(0, i1))
        else:  # leftgoing: exit at the right end
            i1 = int(rng.integers(1, last))
            i2 = int(rng.integers(i1 + 1, last + 1))
        xi1, om1 = float(full.xi[i1]), float(full.omega[i1])
        xi2, om2 = float(full.xi[i2]), float(full.omega[i2])
        second = trace(sys, j, xi1, om1, nx=nx, oversample=oversample)
        om2_again = float(np.interp(xi2, second.xi, second.omega))
        assert om2_again == pytest.approx(om2, abs=1e-8)


def test_rk4_order():
    # doubling the oversampling changes exit ordinates by O(h^4):
    # ratio of successive changes lies in [12, 20]
    sys = DiagonalSystem(1, 1, ["1 + 0.45*sin(t) + 0.3*cos(3*x)"], [["0"]])
    exits = [trace(sys, 0, 1.0, 0.3, nx=8, oversample=ov).exit_ordinate
             for ov in (1, 2, 4, 8)]
    d1 = abs(exits[1] - exits[0])
    d2 = abs(exits[2] - exits[1])
    d3 = abs(exits[3] - exits[2])
    assert 12.0 <= d1 / d2 <= 20.0
    assert 12.0 <= d2 / d3 <= 20.0


def test_step_failure_on_sign_change():
    sys = DiagonalSystem(1, 1, ["x - 0.5"], [["0"]])
    with pytest.raises(StepFailureError):
        trace(sys, 0, 1.0, 0.0, nx=32)
