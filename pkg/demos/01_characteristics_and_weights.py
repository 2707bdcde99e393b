"""Characteristics 101: trace curves, exponential weights, amplification.

The leftgoing family of the regularity example has speed -(2 + sin t), so
its characteristics are curved in time and the exit ordinate responds to
the anchor time with a factor different from one. At the distinguished
time 1/4 that factor has the closed form (2 + sin 1/4)/(2 - sin 1/4).
"""

import numpy as np

from charstrip import DiagonalSystem, dt_omega, trace

system = DiagonalSystem(2, 1, ["2/(4*pi-1)", "-(2+sin(t))"],
                        [["0", "0"], ["0", "0"]])

print("rightgoing family: constant speed, affine characteristic")
curve = trace(system, 0, x=0.5, t=1.0, nx=64)
print(f"  omega(0, 0.5, 1.0) = {curve.exit_ordinate:.12f}"
      f"  (exact {1.0 - (4 * np.pi - 1) / 4:.12f})")

print("leftgoing family through (x, t) = (0, 1/4):")
curve = trace(system, 1, x=0.0, t=0.25, nx=512)
print(f"  exit ordinate  {curve.exit_ordinate:+.10f}   (exactly -1/4)")
print(f"  exit weight    {curve.exit_weight:.10f}   (no damping: 1)")

kappa = dt_omega(system, 1, 1.0, 0.0, 0.25, nx=2048)
closed = (2 + np.sin(0.25)) / (2 - np.sin(0.25))
print(f"  amplification  {kappa:.10f}   (closed form {closed:.10f})")

print("\nthe amplification is NOT maximal at t = 1/4:")
for t in (0.25, 0.0, -0.385):
    k = dt_omega(system, 1, 1.0, 0.0, t, nx=1024)
    print(f"  d(exit)/dt at t = {t:+.3f}: {k:.6f}")

print("\nweight identities along a damped system (c^1 = c * d_t omega):")
damped = DiagonalSystem(1, 1, ["1.5 + 0.2*sin(t)"], [["0.5"]])
curve = trace(damped, 0, 0.8, 0.3, nx=64)
err = np.max(np.abs(curve.c1 - curve.c0 * curve.dt_omega))
print(f"  max |c1 - c0 * dt_omega| = {err:.2e}")
