"""Grids, interpolation, and validated system descriptions.

A :class:`Grid` discretizes the strip [0,1] x time with a declared time
topology.  :class:`GridField` is the immutable value carrier used by every
solver: vector functions sampled at the nodes with a bilinear interpolation
rule.  Coefficient data enter either as a :class:`DiagonalSystem` of
expressions in (x, t) or, for the quasilinear outer iteration, as a
:class:`StateSnapshot` obtained by freezing a state field and conjugating
the quasilinear matrices through the supplied diagonalizer.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import List, Optional, Union

import numpy as np

from . import expr
from .errors import (
    SingularDiagonalizerError,
    StateOutOfBoxError,
    ValidationFailedError,
)

__all__ = [
    "Periodic",
    "Window",
    "Grid",
    "GridField",
    "DiagonalSystem",
    "QuasilinearSystem",
    "StateSnapshot",
    "validate_hyperbolicity",
    "diagonalize_at_state",
    "write_field_csv",
    "write_checkpoint",
    "read_checkpoint",
]


@dataclass(frozen=True)
class Periodic:
    """Time wraps modulo ``period``; all lookups are exact under t -> t+T."""

    period: float

    def __post_init__(self):
        if self.period <= 0:
            raise ValidationFailedError("period must be positive")


@dataclass(frozen=True)
class Window:
    """Finite time window with a spin-up margin excluded from diagnostics."""

    t_lo: float
    t_hi: float
    margin: float = 0.0

    def __post_init__(self):
        if self.t_hi <= self.t_lo:
            raise ValidationFailedError("window must have positive length")
        if self.margin < 0 or self.margin > self.t_hi - self.t_lo:
            raise ValidationFailedError("spin-up margin must fit inside the window")


TimeTopology = Union[Periodic, Window]


@dataclass(frozen=True)
class Grid:
    """Uniform (x, t) grid: nx+1 spatial nodes on [0,1], nt temporal nodes."""

    nx: int
    nt: int
    topology: TimeTopology

    def __post_init__(self):
        if self.nx < 8 or self.nt < 8:
            raise ValidationFailedError("grid sizes must be at least 8 per direction")

    @property
    def dx(self) -> float:
        return 1.0 / self.nx

    @property
    def periodic(self) -> bool:
        return isinstance(self.topology, Periodic)

    @property
    def dt(self) -> float:
        if self.periodic:
            return self.topology.period / self.nt
        return (self.topology.t_hi - self.topology.t_lo) / (self.nt - 1)

    @property
    def t0(self) -> float:
        return 0.0 if self.periodic else self.topology.t_lo

    def x_nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.nx + 1)

    def t_nodes(self) -> np.ndarray:
        if self.periodic:
            return self.t0 + self.dt * np.arange(self.nt)
        return np.linspace(self.topology.t_lo, self.topology.t_hi, self.nt)

    # -- time indexing -------------------------------------------------

    def t_index(self, tau):
        """Return (i0, frac) for linear interpolation in t.

        Periodic topologies wrap; windows clamp to the stored range, which
        is what lets spin-up truncation decay instead of erroring out.
        """
        tau = np.asarray(tau, dtype=float)
        if self.periodic:
            # divide before wrapping so node+period maps back onto the node
            s = np.mod(tau / self.dt - self.t0 / self.dt, self.nt)
            i0 = np.floor(s).astype(np.int64)
            frac = s - i0
            i0 = np.mod(i0, self.nt)
            return i0, frac
        s = np.clip((tau - self.t0) / self.dt, 0.0, self.nt - 1.0)
        i0 = np.minimum(np.floor(s).astype(np.int64), self.nt - 2)
        return i0, s - i0

    def sample_series(self, series, tau):
        """Linearly interpolate a time series stored on the t nodes."""
        i0, frac = self.t_index(tau)
        i1 = np.mod(i0 + 1, self.nt) if self.periodic else i0 + 1
        series = np.asarray(series)
        return series[..., i0] * (1.0 - frac) + series[..., i1] * frac

    def pchip_slopes(self, series):
        """Fritsch-Carlson nodal slopes for a series on the t nodes.

        Harmonic-mean slopes, zeroed where the secants change sign; the
        resulting cubic never leaves the local data range, so repeated
        resampling cannot amplify noise.
        """
        series = np.asarray(series, dtype=float)
        if self.periodic:
            secant = (np.roll(series, -1) - series) / self.dt
            s_prev = np.roll(secant, 1)
        else:
            secant = np.empty_like(series)
            secant[:-1] = np.diff(series) / self.dt
            secant[-1] = secant[-2]
            s_prev = np.empty_like(series)
            s_prev[1:] = secant[:-1]
            s_prev[0] = secant[0]
        prod = s_prev * secant
        with np.errstate(divide="ignore", invalid="ignore"):
            harm = 2.0 * prod / (s_prev + secant)
        return np.where(prod > 0.0, harm, 0.0)

    def sample_series_pchip(self, series, tau, slopes=None):
        """Monotone cubic interpolation of a time series."""
        i0, s = self.t_index(tau)
        series = np.asarray(series, dtype=float)
        if slopes is None:
            slopes = self.pchip_slopes(series)
        i1 = np.mod(i0 + 1, self.nt) if self.periodic else np.minimum(i0 + 1, self.nt - 1)
        y0, y1 = series[i0], series[i1]
        m0, m1 = slopes[i0] * self.dt, slopes[i1] * self.dt
        s2 = s * s
        s3 = s2 * s
        return (y0 * (2 * s3 - 3 * s2 + 1) + m0 * (s3 - 2 * s2 + s)
                + y1 * (-2 * s3 + 3 * s2) + m1 * (s3 - s2))

    def sample_series_cubic(self, series, tau):
        """Cubic interpolation of a time series (trace diagnostics).

        Alias for the monotone cubic: unlimited cubics ring on the weakly
        singular traces the regularity diagnostics probe.
        """
        return self.sample_series_pchip(series, tau)


class GridField:
    """Values of an n-component function on a grid, bilinear interpolation.

    Instances are written once and treated as immutable snapshots; solvers
    produce a fresh field per iteration.
    """

    def __init__(self, grid: Grid, values: np.ndarray):
        values = np.asarray(values, dtype=float)
        if values.ndim != 3 or values.shape[1] != grid.nx + 1 or values.shape[2] != grid.nt:
            raise ValidationFailedError(
                f"field shape {values.shape} does not match grid "
                f"(n, {grid.nx + 1}, {grid.nt})"
            )
        if not np.all(np.isfinite(values)):
            raise ValidationFailedError("field contains non-finite values")
        self.grid = grid
        self.values = values
        self.values.flags.writeable = False

    @classmethod
    def zeros(cls, grid: Grid, n: int) -> "GridField":
        return cls(grid, np.zeros((n, grid.nx + 1, grid.nt)))

    @classmethod
    def from_function(cls, grid: Grid, n: int, fn) -> "GridField":
        """Sample fn(component, x_nodes, t_nodes meshgrid) onto the grid."""
        xs = grid.x_nodes()[:, None]
        ts = grid.t_nodes()[None, :]
        vals = np.stack([np.broadcast_to(fn(k, xs, ts), (grid.nx + 1, grid.nt)) for k in range(n)])
        return cls(grid, np.array(vals))

    @property
    def n_components(self) -> int:
        return self.values.shape[0]

    def component(self, k: int) -> np.ndarray:
        return self.values[k]

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def at(self, k: int, x, tau):
        """Bilinear interpolation of component k at points (x, tau)."""
        x = np.asarray(x, dtype=float)
        s = np.clip(x, 0.0, 1.0) * self.grid.nx
        j0 = np.minimum(np.floor(s).astype(np.int64), self.grid.nx - 1)
        fx = s - j0
        # interpolate in t on the two bracketing columns, then in x
        vk = self.values[k]
        i0, ft = self.grid.t_index(tau)
        i1 = np.mod(i0 + 1, self.grid.nt) if self.grid.periodic else i0 + 1
        lo = vk[j0, i0] * (1.0 - ft) + vk[j0, i1] * ft
        hi = vk[j0 + 1, i0] * (1.0 - ft) + vk[j0 + 1, i1] * ft
        return lo * (1.0 - fx) + hi * fx

    def boundary_trace(self, k: int, side: int) -> np.ndarray:
        """Component k values along x=0 (side 0) or x=1 (side 1)."""
        return self.values[k, 0 if side == 0 else self.grid.nx, :]

    def shifted_check(self, shift_nodes: int) -> float:
        """Periodic defect sup |u(x, t + shift) - u(x, t)| by index roll."""
        rolled = np.roll(self.values, -shift_nodes, axis=2)
        return float(np.max(np.abs(rolled - self.values)))


def _as_ast(e):
    return expr.parse(e) if isinstance(e, str) else e


class _ExprTable:
    """Expression matrix with cached t-derivatives, vectorized evaluation."""

    def __init__(self, entries):
        self.entries = entries
        self._dt = {}

    def value(self, index, env):
        return expr.evaluate(self.entries[index], env)

    def dt(self, index, env):
        if index not in self._dt:
            self._dt[index] = expr.differentiate(self.entries[index], "t")
        return expr.evaluate(self._dt[index], env)


@dataclass
class QuasilinearSystem:
    """Quasilinear data: matrices A, B and diagonalizer Q in (x, t, V),
    eigenvalue expressions for A, and the forcing f.

    Users supply the eigenvalues and Q analytically; no numerical
    eigendecomposition is attempted, since a smooth eigenvector choice is
    assumed to exist and is part of the problem statement.
    """

    n: int
    m: int
    A: List[List[expr.ExpressionAst]]
    B: List[List[expr.ExpressionAst]]
    Q: List[List[expr.ExpressionAst]]
    eigenvalues: List[expr.ExpressionAst]
    f: List[expr.ExpressionAst]

    def __post_init__(self):
        self.A = [[_as_ast(e) for e in row] for row in self.A]
        self.B = [[_as_ast(e) for e in row] for row in self.B]
        self.Q = [[_as_ast(e) for e in row] for row in self.Q]
        self.eigenvalues = [_as_ast(e) for e in self.eigenvalues]
        self.f = [_as_ast(e) for e in self.f]

    def q_is_constant(self) -> bool:
        return all(not expr.free_variables(e) for row in self.Q for e in row)


class DiagonalSystem:
    """Diagonal speeds a_j(x,t) and coupling matrix b_jk(x,t).

    The first m speeds are positive, the rest negative; hyperbolicity margins
    are checked against a sampling grid by :func:`validate_hyperbolicity`.
    May carry the quasilinear parents it was linearized from.
    """

    def __init__(self, n, m, a, b, parents: Optional[QuasilinearSystem] = None):
        self.n = n
        self.m = m
        self.a = [_as_ast(e) for e in a]
        self.b = [[_as_ast(e) for e in row] for row in b]
        if len(self.a) != n or len(self.b) != n or any(len(r) != n for r in self.b):
            raise ValidationFailedError("coefficient matrix shapes must be n x n")
        if not 0 <= m <= n:
            raise ValidationFailedError("m must lie in [0, n]")
        self.parents = parents
        self._dta = [expr.differentiate(e, "t") for e in self.a]
        self._dtb = None

    # vectorized coefficient access at a fixed x and an array of times
    def a_at(self, j, x, t):
        return np.broadcast_to(
            expr.evaluate(self.a[j], {"x": x, "t": t}), np.shape(t)
        ).astype(float, copy=False)

    def dta_at(self, j, x, t):
        return np.broadcast_to(
            expr.evaluate(self._dta[j], {"x": x, "t": t}), np.shape(t)
        ).astype(float, copy=False)

    def b_at(self, j, k, x, t):
        return np.broadcast_to(
            expr.evaluate(self.b[j][k], {"x": x, "t": t}), np.shape(t)
        ).astype(float, copy=False)

    def dtb_at(self, j, k, x, t):
        if self._dtb is None:
            self._dtb = [
                [expr.differentiate(e, "t") for e in row] for row in self.b
            ]
        return np.broadcast_to(
            expr.evaluate(self._dtb[j][k], {"x": x, "t": t}), np.shape(t)
        ).astype(float, copy=False)

    def exit_abscissa(self, j) -> float:
        return 0.0 if j < self.m else 1.0


@dataclass
class HyperbolicityReport:
    min_speed_margin: float
    min_gap: float
    min_abs_det_q: Optional[float]
    lambda0: float
    passed: bool
    worst: dict = field(default_factory=dict)


def _sample_points(resolution, topology):
    if isinstance(resolution, Grid):
        return resolution.x_nodes(), resolution.t_nodes()
    nx, nt = resolution
    xs = np.linspace(0.0, 1.0, nx + 1)
    if isinstance(topology, Periodic):
        ts = np.linspace(0.0, topology.period, nt, endpoint=False)
    else:
        ts = np.linspace(topology.t_lo, topology.t_hi, nt)
    return xs, ts


def validate_hyperbolicity(sys, resolution, lambda0, topology=None, raise_on_fail=True):
    """Check speed signs, margins, gaps and |det Q| on a sampling grid.

    ``resolution`` is a Grid or an (nx, nt) pair (the latter needs
    ``topology``).  Returns a HyperbolicityReport; raises
    ValidationFailedError naming the offending sample when the check fails
    and ``raise_on_fail`` is set.
    """
    if lambda0 <= 0:
        raise ValidationFailedError("lambda0 must be positive")
    if isinstance(resolution, Grid):
        topology = resolution.topology
    xs, ts = _sample_points(resolution, topology)
    tgrid = ts[None, :]
    speeds = np.empty((sys.n, xs.size, ts.size))
    for j in range(sys.n):
        for i, x in enumerate(xs):
            speeds[j, i, :] = sys.a_at(j, float(x), tgrid[0])

    signed = np.where(np.arange(sys.n)[:, None, None] < sys.m, speeds, -speeds)
    margin = float(signed.min())
    worst = {}
    if margin < lambda0:
        j, i, l = np.unravel_index(np.argmin(signed), signed.shape)
        worst["speed"] = (int(j), float(xs[i]), float(ts[l]), float(speeds[j, i, l]))

    gap = np.inf
    for j in range(sys.n):
        for k in range(j + 1, sys.n):
            d = np.abs(speeds[j] - speeds[k])
            dmin = float(d.min())
            if dmin < gap:
                gap = dmin
                if dmin < lambda0:
                    i, l = np.unravel_index(np.argmin(d), d.shape)
                    worst["gap"] = (j, k, float(xs[i]), float(ts[l]), dmin)
    if sys.n == 1:
        gap = np.inf

    det_min = None
    if getattr(sys, "parents", None) is not None or isinstance(sys, StateSnapshot):
        det_min = _min_abs_det_q(sys, xs, ts)
        if det_min is not None and det_min < lambda0:
            worst["det_q"] = det_min

    passed = margin >= lambda0 and gap >= lambda0 and (det_min is None or det_min >= lambda0)
    report = HyperbolicityReport(margin, gap, det_min, lambda0, passed, worst)
    if not passed and raise_on_fail:
        raise ValidationFailedError(
            f"hyperbolicity check failed: margin={margin:.6g}, gap={gap:.6g}, "
            f"|det q|min={det_min}, worst={worst}",
            where=worst,
        )
    return report


def _min_abs_det_q(sys, xs, ts):
    if isinstance(sys, StateSnapshot):
        return float(np.min(np.abs(np.linalg.det(sys.q_nodes))))
    parents = sys.parents
    if parents is None:
        return None
    env = {"x": xs[:, None], "t": ts[None, :]}
    env.update({f"V{i + 1}": 0.0 for i in range(sys.n)})
    q = np.empty((xs.size, ts.size, sys.n, sys.n))
    for r in range(sys.n):
        for c in range(sys.n):
            q[..., r, c] = expr.evaluate(parents.Q[r][c], env)
    return float(np.min(np.abs(np.linalg.det(q))))


class StateSnapshot:
    """Frozen-coefficient diagonal system built at a state field V.

    Speeds are the eigenvalue expressions evaluated at V; the coupling is
    Q^{-1}(B Q + d_t Q + A d_x Q) with the t- and x-derivatives of Q expanded
    through V by the chain rule using the supplied derivative fields.
    Implements the same coefficient interface as DiagonalSystem so the
    linear solver is agnostic to where its coefficients came from.
    """

    def __init__(self, parents: QuasilinearSystem, V: GridField, dtV: GridField,
                 dxV: GridField, lambda0: float, delta0: float):
        n = parents.n
        if V.n_components != n:
            raise ValidationFailedError("state field has wrong component count")
        if V.sup_norm() > delta0:
            raise StateOutOfBoxError(
                f"sup|V| = {V.sup_norm():.6g} exceeds the coefficient box {delta0}"
            )
        self.parents = parents
        self.n = n
        self.m = parents.m
        self.V = V
        self.dtV = dtV
        self.dxV = dxV
        self.lambda0 = lambda0
        self.delta0 = delta0
        self.grid = V.grid
        self._deriv_cache = {}

        xs = self.grid.x_nodes()
        ts = self.grid.t_nodes()
        self.q_nodes = self._matrix_at(parents.Q, xs[:, None], ts[None, :], grid_nodes=True)
        dets = np.abs(np.linalg.det(self.q_nodes))
        if dets.min() < lambda0:
            i, l = np.unravel_index(np.argmin(dets), dets.shape)
            raise SingularDiagonalizerError(
                f"|det Q| = {dets.min():.3g} < {lambda0} at "
                f"(x={xs[i]:.4g}, t={ts[l]:.4g})"
            )
        self.hat_a_nodes = np.stack(
            [self._eigen_at(j, xs[:, None], ts[None, :], grid_nodes=True) for j in range(n)]
        )
        self.hat_b_nodes = self._coupling_at_nodes(xs, ts)

    # -- helpers -------------------------------------------------------

    def _env(self, x, t, grid_nodes=False):
        env = {"x": x, "t": t}
        for i in range(self.n):
            if grid_nodes:
                env[f"V{i + 1}"] = self.V.values[i]
            else:
                env[f"V{i + 1}"] = self.V.at(i, x, t)
        return env

    def _matrix_at(self, entries, x, t, grid_nodes=False):
        env = self._env(x, t, grid_nodes)
        shape = np.broadcast(np.asarray(x), np.asarray(t)).shape
        out = np.empty(shape + (self.n, self.n))
        for r in range(self.n):
            for c in range(self.n):
                out[..., r, c] = expr.evaluate(entries[r][c], env)
        return out

    def _eigen_at(self, j, x, t, grid_nodes=False):
        return np.asarray(
            expr.evaluate(self.parents.eigenvalues[j], self._env(x, t, grid_nodes)),
            dtype=float,
        )

    def _dexpr(self, key, node, var):
        if (key, var) not in self._deriv_cache:
            self._deriv_cache[(key, var)] = expr.differentiate(node, var)
        return self._deriv_cache[(key, var)]

    def _total_dQ(self, x, t, which, grid_nodes=False):
        """d/dt or d/dx of Q(x,t,V(x,t)) including the chain through V."""
        env = self._env(x, t, grid_nodes)
        dV = self.dtV if which == "t" else self.dxV
        shape = np.broadcast(np.asarray(x), np.asarray(t)).shape
        out = np.empty(shape + (self.n, self.n))
        for r in range(self.n):
            for c in range(self.n):
                node = self.parents.Q[r][c]
                total = expr.evaluate(self._dexpr(("Q", r, c), node, which), env)
                for i in range(self.n):
                    dvi = dV.values[i] if grid_nodes else dV.at(i, x, t)
                    part = self._dexpr(("Q", r, c), node, f"V{i + 1}")
                    total = total + expr.evaluate(part, env) * dvi
                out[..., r, c] = total
        return out

    def _coupling_matrix(self, x, t, grid_nodes=False):
        A = self._matrix_at(self.parents.A, x, t, grid_nodes)
        B = self._matrix_at(self.parents.B, x, t, grid_nodes)
        Q = self._matrix_at(self.parents.Q, x, t, grid_nodes)
        dtQ = self._total_dQ(x, t, "t", grid_nodes)
        dxQ = self._total_dQ(x, t, "x", grid_nodes)
        rhs = B @ Q + dtQ + A @ dxQ
        dets = np.abs(np.linalg.det(Q))
        if np.any(dets < self.lambda0):
            raise SingularDiagonalizerError("|det Q| fell below the floor off-grid")
        return np.linalg.solve(Q, rhs)

    def _coupling_at_nodes(self, xs, ts):
        mat = self._coupling_matrix(xs[:, None], ts[None, :], grid_nodes=True)
        return np.transpose(mat, (2, 3, 0, 1))  # (j, k, x, t)

    # -- coefficient interface ------------------------------------------

    def a_at(self, j, x, t):
        return np.broadcast_to(self._eigen_at(j, x, t), np.shape(t)).astype(float, copy=False)

    def dta_at(self, j, x, t):
        """d/dt of the frozen speed, chain rule through the state field."""
        env = self._env(x, t)
        node = self.parents.eigenvalues[j]
        total = expr.evaluate(self._dexpr(("eig", j), node, "t"), env)
        for i in range(self.n):
            part = self._dexpr(("eig", j), node, f"V{i + 1}")
            total = total + expr.evaluate(part, env) * self.dtV.at(i, x, t)
        return np.broadcast_to(total, np.shape(t)).astype(float, copy=False)

    def b_at(self, j, k, x, t):
        mat = self._coupling_matrix(x, t)
        return np.broadcast_to(mat[..., j, k], np.shape(t)).astype(float, copy=False)

    def dtb_at(self, j, k, x, t):
        """d/dt of the coupling; only supported for constant diagonalizers,
        where the coupling reduces to B evaluated along the state."""
        if not self.parents.q_is_constant():
            raise ValidationFailedError(
                "dtb_at needs a constant diagonalizer; use finite differences"
            )
        env = self._env(x, t)
        Q = self._matrix_at(self.parents.Q, x, t)
        dtB = np.empty(np.shape(Q))
        for r in range(self.n):
            for c in range(self.n):
                node = self.parents.B[r][c]
                total = expr.evaluate(self._dexpr(("B", r, c), node, "t"), env)
                for i in range(self.n):
                    part = self._dexpr(("B", r, c), node, f"V{i + 1}")
                    total = total + expr.evaluate(part, env) * self.dtV.at(i, x, t)
                dtB[..., r, c] = total
        mat = np.linalg.solve(Q, dtB @ Q)
        return np.broadcast_to(mat[..., j, k], np.shape(t)).astype(float, copy=False)

    def exit_abscissa(self, j) -> float:
        return 0.0 if j < self.m else 1.0


def diagonalize_at_state(parents: QuasilinearSystem, V: GridField, dtV: GridField,
                         dxV: GridField, lambda0: float = 1e-3,
                         delta0: float = 1.0) -> StateSnapshot:
    """Freeze the quasilinear coefficients at a state field.

    Returns a StateSnapshot exposing diag(eigenvalues at V) and the
    conjugated coupling on the grid, with off-grid evaluation for the
    characteristic tracer.  Raises StateOutOfBoxError if sup|V| > delta0 and
    SingularDiagonalizerError if |det Q| dips below lambda0.
    """
    return StateSnapshot(parents, V, dtV, dxV, lambda0, delta0)


# -- serialization -----------------------------------------------------

_MAGIC = b"CHSTRP01"


def write_field_csv(field: GridField, path, header_names=None):
    n = field.n_components
    names = header_names or [f"u_{k + 1}" for k in range(n)]
    xs = field.grid.x_nodes()
    ts = field.grid.t_nodes()
    with open(path, "w") as fh:
        fh.write("x,t," + ",".join(names) + "\n")
        for i, x in enumerate(xs):
            for l, t in enumerate(ts):
                row = ",".join(repr(field.values[k, i, l]) for k in range(n))
                fh.write(f"{x!r},{t!r},{row}\n")


def write_checkpoint(field: GridField, path):
    topo = field.grid.topology
    code, p0, p1, p2 = (
        (1, topo.period, 0.0, 0.0) if isinstance(topo, Periodic)
        else (2, topo.t_lo, topo.t_hi, topo.margin)
    )
    header = _MAGIC + struct.pack(
        "<IIII3d", field.n_components, field.grid.nx, field.grid.nt, code, p0, p1, p2
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(field.values.astype("<f8").tobytes())


def read_checkpoint(path) -> GridField:
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise ValidationFailedError(f"bad checkpoint magic {magic!r}")
        n, nx, nt, code, p0, p1, p2 = struct.unpack("<IIII3d", fh.read(16 + 24))
        topo = Periodic(p0) if code == 1 else Window(p0, p1, p2)
        data = np.frombuffer(fh.read(), dtype="<f8").reshape(n, nx + 1, nt)
    return GridField(Grid(nx, nt, topo), np.array(data))
