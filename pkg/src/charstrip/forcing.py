"""Providers for interior forcing and boundary data.

Solvers never see raw expressions: they call ``g_at(j, x, t)`` or
``h_at(j, t)`` on one of these small adapters, which also expose exact time
derivatives where the derivative-field solve needs them.
"""

from __future__ import annotations

import numpy as np

from . import expr
from .errors import ValidationFailedError

__all__ = ["ExprRhs", "ExprTimeData", "SampledTimeData", "ZeroRhs"]


class ExprRhs:
    """Forcing components g_j as expressions in (x, t)."""

    def __init__(self, components):
        self.components = [expr.parse(c) if isinstance(c, str) else c
                           for c in components]
        self._dt = [expr.differentiate(c, "t") for c in self.components]

    def g_at(self, j, x, t):
        return np.broadcast_to(
            expr.evaluate(self.components[j], {"x": x, "t": t}), np.shape(t)
        ).astype(float, copy=False)

    def dtg_at(self, j, x, t):
        return np.broadcast_to(
            expr.evaluate(self._dt[j], {"x": x, "t": t}), np.shape(t)
        ).astype(float, copy=False)


class ZeroRhs:
    def __init__(self, n):
        self.n = n

    def g_at(self, j, x, t):
        return np.zeros(np.shape(t))

    dtg_at = g_at


class ExprTimeData:
    """Boundary data h_j as expressions in t."""

    def __init__(self, components):
        self.components = [expr.parse(c) if isinstance(c, str) else c
                           for c in components]
        self._dt = [expr.differentiate(c, "t") for c in self.components]

    def h_at(self, j, t):
        return np.broadcast_to(
            expr.evaluate(self.components[j], {"t": t}), np.shape(t)
        ).astype(float, copy=False)

    def dth_at(self, j, t):
        return np.broadcast_to(
            expr.evaluate(self._dt[j], {"t": t}), np.shape(t)
        ).astype(float, copy=False)


class SampledTimeData:
    """Boundary data given by samples on a grid's time nodes."""

    def __init__(self, grid, values):
        values = np.asarray(values, dtype=float)
        if values.ndim != 2 or values.shape[1] != grid.nt:
            raise ValidationFailedError("sampled boundary data must be (n, nt)")
        self.grid = grid
        self.values = values

    def h_at(self, j, t):
        return self.grid.sample_series(self.values[j], t)
