"""Characteristic curves of the diagonal system.

For family j the curve through an anchor (x, t) solves
``d omega / d xi = 1 / a_j(xi, omega)`` with ``omega(x) = t``; it leaves the
strip through the exit abscissa (0 for rightgoing families, 1 for
leftgoing).  Alongside the ordinates the tracer accumulates, by composite
trapezoid on the same samples, the exponential weights

    c_j^l(xi, x, t) = exp  int_x^xi [ b_jj/a_j - l * (d_t a_j)/a_j^2 ]

for l = 0, 1, 2, the quadrature densities d_j = c_j / a_j, and the time
sensitivity d_t omega_j = exp int_xi^x (d_t a_j)/a_j^2 of the ordinate with
respect to the anchor time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import StepFailureError

__all__ = ["Characteristic", "trace", "dt_omega"]


@dataclass
class Characteristic:
    """Sampled characteristic with exit data and quadrature weights.

    Samples are stored with ``xi`` ascending over [min(exit, x), max(exit, x)];
    the exit end is index 0 for rightgoing families and -1 for leftgoing
    ones.  All weight arrays are aligned with ``xi`` and refer to the anchor
    (x, t): e.g. ``c0[k] = c_j(xi[k], x, t)``.
    """

    family: int
    x: float
    t: float
    exit_abscissa: float
    xi: np.ndarray
    omega: np.ndarray
    c0: np.ndarray
    c1: np.ndarray
    c2: np.ndarray
    d: np.ndarray
    dt_omega: np.ndarray

    @property
    def _exit_index(self) -> int:
        return 0 if self.exit_abscissa <= self.xi[0] + 1e-15 else -1

    @property
    def anchor_index(self) -> int:
        return -1 if self._exit_index == 0 else 0

    @property
    def exit_ordinate(self) -> float:
        return float(self.omega[self._exit_index])

    @property
    def exit_weight(self) -> float:
        return float(self.c0[self._exit_index])

    @property
    def exit_dt_omega(self) -> float:
        return float(self.dt_omega[self._exit_index])

    def sample_omega(self, xi):
        return np.interp(xi, self.xi, self.omega)

    def sample_dt_omega(self, xi):
        return np.interp(xi, self.xi, self.dt_omega)


def _speed(sys, j, xi, omega):
    a = sys.a_at(j, float(xi), np.asarray(omega, dtype=float))
    if np.any(a == 0.0) or not np.all(np.isfinite(a)):
        raise StepFailureError(
            f"speed of family {j} vanished near xi={float(xi):.6g}"
        )
    return a


def trace(sys, j, x, t, nx=64, oversample=4):
    """Trace the family-j characteristic through (x, t) to its exit.

    Classical RK4 with fixed step 1/(oversample*nx); weights by composite
    trapezoid along the samples.  Raises StepFailureError if the speed
    crosses zero along the way (a runtime hyperbolicity breach).
    """
    exit_x = sys.exit_abscissa(j)
    h_nominal = 1.0 / (oversample * nx)
    span = x - exit_x
    if abs(span) < 1e-300:
        xi = np.array([x])
        one = np.ones(1)
        return Characteristic(j, x, t, exit_x, xi, np.array([t]),
                              one.copy(), one.copy(), one.copy(),
                              1.0 / _speed(sys, j, x, np.array([t])), one.copy())

    nsteps = max(1, int(np.ceil(abs(span) / h_nominal - 1e-12)))
    h = -span / nsteps  # signed step from the anchor toward the exit

    xi_path = np.empty(nsteps + 1)
    om_path = np.empty(nsteps + 1)
    xi_path[0] = x
    om_path[0] = t
    w = np.array([t])
    for s in range(nsteps):
        xi0 = x + s * h
        k1 = 1.0 / _speed(sys, j, xi0, w)
        k2 = 1.0 / _speed(sys, j, xi0 + 0.5 * h, w + 0.5 * h * k1)
        k3 = 1.0 / _speed(sys, j, xi0 + 0.5 * h, w + 0.5 * h * k2)
        k4 = 1.0 / _speed(sys, j, xi0 + h, w + h * k3)
        w = w + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        xi_path[s + 1] = xi0 + h
        om_path[s + 1] = w[0]
    xi_path[-1] = exit_x

    # orient samples by ascending xi; the anchor sits at the right end for
    # rightgoing families (exit 0) and at the left end for leftgoing ones
    if xi_path[0] < xi_path[-1]:
        xi = xi_path.copy()
        omega = om_path.copy()
        anchor_idx = 0
    else:
        xi = xi_path[::-1].copy()
        omega = om_path[::-1].copy()
        anchor_idx = len(xi) - 1

    a = np.concatenate([_speed(sys, j, xi_k, omega[k:k + 1])
                        for k, xi_k in enumerate(xi)])
    if np.any(a[:-1] * a[1:] <= 0.0):
        raise StepFailureError(f"speed of family {j} changed sign along the trace")
    bjj = np.array([float(sys.b_at(j, j, float(xi_k), np.array([omega[k]]))[0])
                    for k, xi_k in enumerate(xi)])
    dta = np.array([float(sys.dta_at(j, float(xi_k), np.array([omega[k]]))[0])
                    for k, xi_k in enumerate(xi)])

    damp = bjj / a          # integrand of c_j
    sens = dta / a**2       # integrand of d_t omega

    # cumulative trapezoid, anchored so entry k holds int_x^{xi_k} f
    def cum_from_anchor(f):
        seg = 0.5 * (f[1:] + f[:-1]) * np.diff(xi)
        prefix = np.concatenate([[0.0], np.cumsum(seg)])
        return prefix - prefix[anchor_idx]

    int_damp = cum_from_anchor(damp)
    int_sens = cum_from_anchor(sens)

    c0 = np.exp(int_damp)
    dt_om = np.exp(-int_sens)
    c1 = np.exp(int_damp - int_sens)
    c2 = np.exp(int_damp - 2.0 * int_sens)
    d = c0 / a
    return Characteristic(j, float(x), float(t), exit_x, xi, omega,
                          c0, c1, c2, d, dt_om)


def dt_omega(sys, j, xi, x, t, nx=64, oversample=4):
    """Sensitivity of the ordinate at abscissa xi to the anchor time t."""
    curve = trace(sys, j, x, t, nx=nx, oversample=oversample)
    return float(curve.sample_dt_omega(xi))
