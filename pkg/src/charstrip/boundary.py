"""Boundary operators: reflections, delays, and integral feedback terms.

The operator R maps the outgoing boundary traces Z back into incoming
boundary values, row by row:

    (R Z)_j(t) = sum_k [ r_jk(t) Z_k(t - theta_jk(t))
                         + int_0^{vartheta_jk(t)} p_jk(t,tau) Z_k(t-tau) dtau ]

Its derived operators come from differentiating this display in t and
splitting off the part acting on Z' rather than Z:

    d/dt (R Z)_j      = (R' Z)_j      + (Rtilde Z')_j
    d/dt (Rtilde Z)_j = (Rtilde' Z)_j + (Rhat Z')_j

All four derived operators stay inside the same reflection/delay/kernel
family with symbolically differentiated coefficient data, so one applier
covers everything.  The periodic special case is the identity (Rtilde and
Rhat degenerate to the identity, the primed operators to zero).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from . import expr
from .errors import LookbackOutOfWindowError, ValidationFailedError
from .fields import Grid, Window

__all__ = [
    "ReflectionTerm",
    "BoundaryOperatorSpec",
    "periodic_boundary",
    "general_boundary",
    "derived_spec",
    "apply_R",
    "apply_derived",
    "row_norm",
    "validate_nonnegative_lookbacks",
    "TraceSet",
    "BoundaryPlan",
]

_ZERO = expr.constant(0.0)


@dataclass(frozen=True)
class ReflectionTerm:
    """One (j, k) feedback term: reflection r(t) after delay theta(t), plus a
    memory kernel p(t, tau) integrated over tau in [0, horizon(t)]."""

    j: int
    k: int
    r: Optional[expr.ExpressionAst] = None
    theta: Optional[expr.ExpressionAst] = None
    kernel: Optional[expr.ExpressionAst] = None
    horizon: Optional[expr.ExpressionAst] = None


@dataclass(frozen=True)
class BoundaryOperatorSpec:
    kind: str  # "periodic" | "general"
    n: int
    terms: tuple = ()

    def __post_init__(self):
        if self.kind not in ("periodic", "general"):
            raise ValidationFailedError(f"unknown boundary kind {self.kind!r}")
        for term in self.terms:
            if not (0 <= term.j < self.n and 0 <= term.k < self.n):
                raise ValidationFailedError("boundary term indices out of range")
            if term.kernel is not None and term.horizon is None:
                raise ValidationFailedError("kernel terms need a horizon")

    def max_lookback(self, t_nodes) -> float:
        """Largest delay plus horizon over the sample nodes."""
        if self.kind == "periodic":
            return 0.0
        t = np.asarray(t_nodes, dtype=float)
        worst = 0.0
        for term in self.terms:
            d = 0.0
            if term.theta is not None:
                d = float(np.max(expr.evaluate(term.theta, {"t": t})))
            h = 0.0
            if term.horizon is not None:
                h = float(np.max(expr.evaluate(term.horizon, {"t": t})))
            worst = max(worst, max(d, 0.0) + max(h, 0.0))
        return worst


def periodic_boundary(n: int) -> BoundaryOperatorSpec:
    return BoundaryOperatorSpec("periodic", n)


def general_boundary(n: int, terms) -> BoundaryOperatorSpec:
    """Build a general spec from ReflectionTerms or dicts with expression
    strings (keys j, k, r, theta, kernel, horizon; indices 0-based)."""

    def conv(e):
        if e is None:
            return None
        return expr.parse(e) if isinstance(e, str) else e

    packed = []
    for t in terms:
        if isinstance(t, ReflectionTerm):
            packed.append(ReflectionTerm(t.j, t.k, conv(t.r), conv(t.theta),
                                         conv(t.kernel), conv(t.horizon)))
        else:
            packed.append(ReflectionTerm(t["j"], t["k"], conv(t.get("r")),
                                         conv(t.get("theta")), conv(t.get("kernel")),
                                         conv(t.get("horizon"))))
    return BoundaryOperatorSpec("general", n, tuple(packed))


def _dt(e):
    return expr.differentiate(e, "t")


def _mul(a, b):
    return expr.BinOp("*", a, b)


def _one_minus(e):
    return expr.BinOp("-", expr.constant(1.0), e)


def derived_spec(spec: BoundaryOperatorSpec, which: str) -> BoundaryOperatorSpec:
    """Build R', Rtilde, Rtilde', or Rhat as another operator of the family.

    The primed operators pick up a point term at the moving kernel horizon
    (coefficient p(t, horizon(t)) * horizon'(t), delay horizon(t)) and the
    kernel differentiates in its first argument.
    """
    if which not in ("Rprime", "Rtilde", "RtildePrime", "Rhat"):
        raise ValidationFailedError(f"unknown derived operator {which!r}")
    if spec.kind == "periodic":
        if which in ("Rtilde", "Rhat"):
            return spec
        return BoundaryOperatorSpec("general", spec.n, ())

    if which == "RtildePrime":
        return derived_spec(derived_spec(spec, "Rtilde"), "Rprime")
    if which == "Rhat":
        return derived_spec(derived_spec(spec, "Rtilde"), "Rtilde")

    out: List[ReflectionTerm] = []
    for term in spec.terms:
        theta = term.theta or _ZERO
        if which == "Rtilde":
            r = _mul(term.r, _one_minus(_dt(theta))) if term.r is not None else None
            out.append(ReflectionTerm(term.j, term.k, r, term.theta,
                                      term.kernel, term.horizon))
        else:  # Rprime
            if term.r is not None:
                out.append(ReflectionTerm(term.j, term.k, _dt(term.r), term.theta))
            if term.kernel is not None:
                endpoint = _mul(
                    expr.substitute(term.kernel, "tau", term.horizon),
                    _dt(term.horizon),
                )
                out.append(ReflectionTerm(term.j, term.k, endpoint, term.horizon))
                out.append(ReflectionTerm(term.j, term.k, None, None,
                                          _dt(term.kernel), term.horizon))
    return BoundaryOperatorSpec("general", spec.n, tuple(out))


class TraceSet:
    """Component traces on a time grid with an interpolation rule.

    With ``clamp`` (the solver default) window lookbacks clamp to the stored
    range and the truncation error decays through the spin-up margin; the
    strict mode raises LookbackOutOfWindowError instead.
    """

    def __init__(self, grid: Grid, values: np.ndarray, interp="linear", clamp=True):
        self.grid = grid
        self.values = np.asarray(values, dtype=float)
        self.interp = interp
        self.clamp = clamp

    def __call__(self, k: int, tau):
        tau = np.asarray(tau, dtype=float)
        if not self.clamp and isinstance(self.grid.topology, Window):
            if np.any(tau < self.grid.topology.t_lo - 1e-12):
                raise LookbackOutOfWindowError(
                    "boundary lookback before the start of the window"
                )
        if self.interp == "cubic":
            return self.grid.sample_series_cubic(self.values[k], tau)
        return self.grid.sample_series(self.values[k], tau)


def _term_delay(term, t):
    theta = term.theta or _ZERO
    return np.broadcast_to(expr.evaluate(theta, {"t": t}), np.shape(t)).astype(float)


def _term_horizon(term, t):
    horizon = np.broadcast_to(
        expr.evaluate(term.horizon, {"t": t}), np.shape(t)
    ).astype(float)
    if np.any(horizon < -1e-12):
        raise ValidationFailedError("kernel horizon evaluated negative")
    return np.maximum(horizon, 0.0)


def validate_nonnegative_lookbacks(spec: BoundaryOperatorSpec, t_nodes):
    """Delays and horizons must evaluate nonnegative on the time grid; on
    windows the total lookback must also fit the spin-up margin (checked by
    the caller, which knows the topology)."""
    if spec.kind == "periodic":
        return
    t = np.asarray(t_nodes, dtype=float)
    for term in spec.terms:
        if term.theta is not None and np.any(
            expr.evaluate(term.theta, {"t": t}) < -1e-12
        ):
            raise ValidationFailedError("boundary delay evaluated negative on the grid")
        if term.horizon is not None and np.any(
            expr.evaluate(term.horizon, {"t": t}) < -1e-12
        ):
            raise ValidationFailedError("kernel horizon evaluated negative on the grid")


def _kernel_quadrature(kernel, horizon, z_k, t, dt_step):
    """Trapezoid of kernel(t,tau) z_k(t-tau) over tau in [0, horizon(t)].

    Uses full steps of dt_step plus an exact partial last cell, vectorized
    over a 1-D array of evaluation times.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    hmax = float(horizon.max(initial=0.0))
    out = np.zeros(t.shape)
    if hmax <= 0.0:
        return out
    nfull = int(np.floor(hmax / dt_step + 1e-12))
    taus = dt_step * np.arange(nfull + 1)
    pv = np.broadcast_to(
        expr.evaluate(kernel, {"t": t[:, None], "tau": taus[None, :]}),
        (t.size, taus.size),
    ).astype(float)
    fv = pv * z_k(t[:, None] - taus[None, :])
    full = np.floor(horizon / dt_step + 1e-12).astype(int)
    cover = np.where(np.arange(nfull + 1)[None, :] < full[:, None], dt_step, 0.0)
    w = 0.5 * (np.concatenate([np.zeros((t.size, 1)), cover[:, :-1]], axis=1) + cover)
    out = np.einsum("ls,ls->l", w, fv)
    rem = horizon - full * dt_step
    has_rem = rem > 1e-14
    if np.any(has_rem):
        f_lo = np.take_along_axis(fv, full[:, None], axis=1)[:, 0]
        p_end = np.broadcast_to(
            expr.evaluate(kernel, {"t": t, "tau": horizon}), t.shape
        ).astype(float)
        f_end = p_end * z_k(t - horizon)
        out = out + np.where(has_rem, 0.5 * rem * (f_lo + f_end), 0.0)
    return out


def apply_R(spec: BoundaryOperatorSpec, Z, t, dt_step=None):
    """Apply the boundary operator to traces at time(s) t.

    ``Z`` is a TraceSet (or any callable (k, tau) -> values).  Kernel
    integrals use composite trapezoid at ``dt_step``, defaulting to the
    trace grid step.  Returns an array of shape (n,) + shape(t).
    """
    t_in = np.asarray(t, dtype=float)
    scalar = t_in.ndim == 0
    t = np.atleast_1d(t_in)
    if dt_step is None and isinstance(Z, TraceSet):
        dt_step = Z.grid.dt
    if spec.kind == "periodic":
        out = np.stack([np.asarray(Z(k, t), dtype=float) for k in range(spec.n)])
        return out[:, 0] if scalar else out
    out = np.zeros((spec.n, t.size))
    for term in spec.terms:
        if term.r is not None:
            delay = _term_delay(term, t)
            rv = expr.evaluate(term.r, {"t": t})
            out[term.j] += rv * Z(term.k, t - delay)
        if term.kernel is not None:
            if dt_step is None:
                raise ValidationFailedError("kernel terms need a quadrature step")
            horizon = _term_horizon(term, t)
            out[term.j] += _kernel_quadrature(
                term.kernel, horizon, lambda tau, k=term.k: Z(k, tau), t, dt_step
            )
    return out[:, 0] if scalar else out


def apply_derived(spec: BoundaryOperatorSpec, which: str, Z, t, dt_step=None):
    """Apply one of R', Rtilde, Rtilde', Rhat (see derived_spec)."""
    return apply_R(derived_spec(spec, which), Z, t, dt_step=dt_step)


def row_norm(spec: BoundaryOperatorSpec, j: int, t_nodes=None, dt_step=None, which="R"):
    """Row bound sup_t sum_k ( |r_jk(t)| + int_0^{horizon} |p_jk| dtau ).

    For this operator family the bound is attained by sign-aligned traces,
    up to sampling of the sup over the time nodes, so it doubles as the row
    operator norm.  ``which`` selects R or a derived operator.
    """
    if which != "R":
        spec = derived_spec(spec, which)
    if spec.kind == "periodic":
        return 1.0
    if t_nodes is None:
        raise ValidationFailedError("row_norm needs time sample nodes")
    t = np.atleast_1d(np.asarray(t_nodes, dtype=float))
    if dt_step is None:
        dt_step = float(t[1] - t[0]) if t.size > 1 else 1e-2
    total = np.zeros_like(t)
    ones = lambda tau: np.ones(np.shape(tau))
    for term in spec.terms:
        if term.j != j:
            continue
        if term.r is not None:
            total += np.abs(np.broadcast_to(expr.evaluate(term.r, {"t": t}), t.shape))
        if term.kernel is not None:
            horizon = _term_horizon(term, t)
            total += _kernel_quadrature(
                expr.Call("abs", term.kernel), horizon, ones, t, dt_step
            )
    return float(total.max(initial=0.0))


class BoundaryPlan:
    """Precompiled application of a boundary spec on a fixed time grid.

    Delay lookups and kernel quadrature data depend only on the spec and the
    grid, so they are evaluated once; every subsequent application is a few
    gathers and a weighted sum per term.  Window lookbacks clamp.
    """

    def __init__(self, spec: BoundaryOperatorSpec, grid: Grid):
        self.spec = spec
        self.grid = grid
        self.n = spec.n
        self._plans = []
        if spec.kind == "periodic":
            return
        t = grid.t_nodes()
        dt_step = grid.dt
        for term in spec.terms:
            entry = {"j": term.j, "k": term.k}
            if term.r is not None:
                delay = _term_delay(term, t)
                entry["r"] = np.broadcast_to(
                    expr.evaluate(term.r, {"t": t}), t.shape).astype(float)
                entry["idx"], entry["frac"] = grid.t_index(t - delay)
            if term.kernel is not None:
                horizon = _term_horizon(term, t)
                nfull = int(np.floor(float(horizon.max(initial=0.0)) / dt_step + 1e-12))
                taus = dt_step * np.arange(nfull + 1)
                pv = np.broadcast_to(
                    expr.evaluate(term.kernel, {"t": t[:, None], "tau": taus[None, :]}),
                    (t.size, taus.size),
                ).astype(float)
                full = np.floor(horizon / dt_step + 1e-12).astype(int)
                cover = np.where(
                    np.arange(nfull + 1)[None, :] < full[:, None], dt_step, 0.0
                )
                w = 0.5 * (
                    np.concatenate([np.zeros((t.size, 1)), cover[:, :-1]], axis=1) + cover
                )
                entry["kw"] = w * pv
                entry["kidx"], entry["kfrac"] = grid.t_index(t[:, None] - taus[None, :])
                rem = horizon - full * dt_step
                entry["rem"] = np.where(rem > 1e-14, rem, 0.0)
                entry["p_lo"] = np.take_along_axis(pv, full[:, None], axis=1)[:, 0]
                entry["loidx"], entry["lofrac"] = grid.t_index(t - full * dt_step)
                entry["p_end"] = np.broadcast_to(
                    expr.evaluate(term.kernel, {"t": t, "tau": horizon}), t.shape
                ).astype(float)
                entry["eidx"], entry["efrac"] = grid.t_index(t - horizon)
            self._plans.append(entry)

    def _gather(self, series, idx, frac):
        if self.grid.periodic:
            nxt = np.mod(idx + 1, self.grid.nt)
        else:
            nxt = np.minimum(idx + 1, self.grid.nt - 1)
        return series[idx] * (1.0 - frac) + series[nxt] * frac

    def apply(self, z_values: np.ndarray) -> np.ndarray:
        """Apply to trace samples of shape (n, nt); returns (n, nt)."""
        if self.spec.kind == "periodic":
            return np.array(z_values, dtype=float)
        out = np.zeros((self.n, self.grid.nt))
        for entry in self._plans:
            zk = z_values[entry["k"]]
            if "r" in entry:
                out[entry["j"]] += entry["r"] * self._gather(zk, entry["idx"], entry["frac"])
            if "kw" in entry:
                zvals = self._gather(zk, entry["kidx"], entry["kfrac"])
                out[entry["j"]] += np.einsum("ls,ls->l", entry["kw"], zvals)
                z_lo = self._gather(zk, entry["loidx"], entry["lofrac"])
                z_end = self._gather(zk, entry["eidx"], entry["efrac"])
                out[entry["j"]] += 0.5 * entry["rem"] * (
                    entry["p_lo"] * z_lo + entry["p_end"] * z_end
                )
        return out
