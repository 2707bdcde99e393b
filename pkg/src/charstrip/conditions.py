"""Dissipativity conditions certifying the fixed-point solves.

Three per-row rates summarize how strongly the diagonal damping beats the
off-diagonal coupling relative to the transport speeds:

    damping_rate(j)      = inf  b_jj / |a_j|
    abs_damping_rate(j)  = inf |b_jj / a_j|
    coupling_rate(j)     = sup  sum_{k != j} |b_jk / a_j|

Together with the boundary row norms they decide three solvability routes:

  * "direct":   the combined transport+coupling map contracts outright
                (three-way split on the sign of inf b_jj);
  * "presolve": positive damping lets a boundary-trace equation be solved
                first, allowing reflection norms at or above one;
  * "periodic": for identity coupling of the ends, damping of definite sign
                per row (either sign) gives a two-sided contraction.

On top of solvability, the level-1 and level-2 trace-transfer norms decide
whether the bounded solution is once/twice differentiable; they are strict
inequalities on true suprema, so the verdicts apply a configurable safety
margin against grid sampling error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .boundary import BoundaryOperatorSpec, row_norm
from .errors import MixedSignDampingError
from .fields import Grid
from .operators import OperatorAssembly, estimate_operator_norms

__all__ = [
    "DampingRates",
    "ConditionReport",
    "compute_damping_rates",
    "check_direct",
    "check_presolve",
    "check_periodic_two_sided",
    "check_norm_conditions",
    "evaluate_conditions",
]

_SIGN_DEADBAND = 1e-9


@dataclass
class DampingRates:
    damping: np.ndarray       # inf b_jj/|a_j| per row
    abs_damping: np.ndarray   # inf |b_jj/a_j|
    coupling: np.ndarray      # sup sum_{k!=j} |b_jk/a_j|
    inf_bjj: np.ndarray
    sup_bjj: np.ndarray


def compute_damping_rates(system, resolution, topology=None) -> DampingRates:
    """Grid infima/suprema of the damping and coupling rates.

    ``resolution`` is a Grid or an (nx, nt) pair with an explicit topology.
    """
    if isinstance(resolution, Grid):
        xs = resolution.x_nodes()
        ts = resolution.t_nodes()
    else:
        nx, nt = resolution
        xs = np.linspace(0.0, 1.0, nx + 1)
        ts = (np.linspace(0.0, topology.period, nt, endpoint=False)
              if hasattr(topology, "period")
              else np.linspace(topology.t_lo, topology.t_hi, nt))
    n = system.n
    damping = np.empty(n)
    abs_damping = np.empty(n)
    coupling = np.empty(n)
    inf_bjj = np.empty(n)
    sup_bjj = np.empty(n)
    for j in range(n):
        ratios = []
        couplings = []
        bvals = []
        for x in xs:
            a = system.a_at(j, float(x), ts)
            bjj = np.broadcast_to(system.b_at(j, j, float(x), ts), ts.shape)
            ratios.append(bjj / np.abs(a))
            bvals.append(bjj)
            total = np.zeros_like(ts)
            for k in range(n):
                if k != j:
                    total = total + np.abs(system.b_at(j, k, float(x), ts) / a)
            couplings.append(total)
        ratios = np.concatenate(ratios)
        bvals = np.concatenate(bvals)
        damping[j] = ratios.min()
        abs_damping[j] = np.abs(ratios).min()
        coupling[j] = np.concatenate(couplings).max()
        inf_bjj[j] = bvals.min()
        sup_bjj[j] = bvals.max()
    return DampingRates(damping, abs_damping, coupling, inf_bjj, sup_bjj)


def _decayed(rate):
    """(1 - e^{-rate}) / rate, continuously extended through rate = 0."""
    if abs(rate) < 1e-12:
        return 1.0
    return (1.0 - math.exp(-rate)) / rate


@dataclass
class RowVerdict:
    passed: bool
    margin: float  # 1 - left-hand side of the governing inequality
    branch: str = ""


def check_direct(rates: DampingRates, r_norms) -> list:
    """Row-wise contraction of the direct fixed-point map.

    Branches on the sign of inf b_jj: positive damping keeps the full
    reflection norm, negative damping discounts it exponentially, and a
    vanishing infimum falls back to the undamped bound.
    """
    out = []
    for j in range(len(r_norms)):
        g = rates.damping[j]
        beta = rates.coupling[j]
        if rates.inf_bjj[j] > _SIGN_DEADBAND:
            lhs = r_norms[j] + beta * _decayed(g)
            branch = "positive"
        elif rates.inf_bjj[j] < -_SIGN_DEADBAND:
            lhs = math.exp(-g) * r_norms[j] + beta * _decayed(g)
            branch = "negative"
        else:
            lhs = r_norms[j] + beta
            branch = "zero"
        out.append(RowVerdict(lhs < 1.0, 1.0 - lhs, branch))
    return out


def check_presolve(rates: DampingRates, r_norms) -> list:
    """Boundary-trace presolve route; needs positive damping everywhere but
    tolerates reflection norms at or above one."""
    n = len(r_norms)
    worst = max(math.exp(-rates.damping[j]) * r_norms[j] for j in range(n))
    r_max = max(r_norms)
    out = []
    for j in range(n):
        if rates.inf_bjj[j] <= _SIGN_DEADBAND:
            out.append(RowVerdict(False, -math.inf, "needs positive damping"))
            continue
        if worst >= 1.0:
            out.append(RowVerdict(False, 1.0 - worst, "trace map not contracting"))
            continue
        lhs = (1.0 + r_max / (1.0 - worst)) * rates.coupling[j] * _decayed(rates.damping[j])
        out.append(RowVerdict(lhs < 1.0, 1.0 - lhs, "composite"))
    return out


def check_periodic_two_sided(rates: DampingRates) -> list:
    """Two-sided route for identity end coupling; each row needs damping of
    definite sign and modest coupling."""
    out = []
    for j in range(len(rates.damping)):
        if abs(rates.inf_bjj[j]) <= _SIGN_DEADBAND and abs(rates.sup_bjj[j]) <= _SIGN_DEADBAND:
            raise MixedSignDampingError(
                f"row {j}: diagonal damping vanishes identically"
            )
        if rates.inf_bjj[j] <= _SIGN_DEADBAND and rates.sup_bjj[j] >= -_SIGN_DEADBAND:
            raise MixedSignDampingError(
                f"row {j}: diagonal damping changes sign or touches zero"
            )
        gt = rates.abs_damping[j]
        lhs = rates.coupling[j] / gt * (2.0 - math.exp(-gt))
        out.append(RowVerdict(lhs < 1.0, 1.0 - lhs, "two-sided"))
    return out


def check_norm_conditions(norms: dict, margin: float = 0.01) -> dict:
    """Strict-inequality verdicts for the level-1 and level-2 transfer
    norms, with a safety margin against grid sampling of the sup."""
    level1 = norms.get("G1", norms.get("H1"))["max"]
    level2 = norms.get("G2", norms.get("H2"))["max"]
    return {
        "level1": {"estimate": level1, "passed": bool(level1 + margin < 1.0),
                   "margin": 1.0 - margin - level1},
        "level2": {"estimate": level2, "passed": bool(level2 + margin < 1.0),
                   "margin": 1.0 - margin - level2},
        "safety_margin": margin,
    }


@dataclass
class ConditionReport:
    rates: DampingRates
    r_norms: list
    direct: list
    presolve: list
    periodic: Optional[list]
    norms: dict
    norm_verdicts: dict
    route: str
    solvable: bool
    c1_regular: bool
    c2_regular: bool
    notes: list = field(default_factory=list)

    def as_dict(self):
        def rows(vs):
            return [{"passed": v.passed, "margin": v.margin, "branch": v.branch}
                    for v in vs]

        payload = {
            "rates": {
                "damping": list(map(float, self.rates.damping)),
                "abs_damping": list(map(float, self.rates.abs_damping)),
                "coupling": list(map(float, self.rates.coupling)),
                "inf_diagonal": list(map(float, self.rates.inf_bjj)),
                "sup_diagonal": list(map(float, self.rates.sup_bjj)),
            },
            "reflection_row_norms": list(map(float, self.r_norms)),
            "direct": rows(self.direct),
            "presolve": rows(self.presolve),
            "transfer_norms": {k: v for k, v in self.norms.items() if k != "resolution"},
            "resolution": self.norms.get("resolution"),
            "norm_verdicts": self.norm_verdicts,
            "route": self.route,
            "solvable": self.solvable,
            "c1_regular": self.c1_regular,
            "c2_regular": self.c2_regular,
            "notes": self.notes,
        }
        if self.periodic is not None:
            payload["periodic_two_sided"] = rows(self.periodic)
        return payload


def evaluate_conditions(system, spec: BoundaryOperatorSpec, grid: Grid,
                        margin: float = 0.01,
                        assembly: OperatorAssembly | None = None) -> ConditionReport:
    """Run every applicable solvability and regularity check.

    The solvability verdict is monotone: twice-differentiable implies
    once-differentiable implies solvable, by construction of the checks.
    """
    rates = compute_damping_rates(system, grid)
    t_nodes = grid.t_nodes()
    r_norms = [row_norm(spec, j, t_nodes, grid.dt) for j in range(system.n)]
    direct = check_direct(rates, r_norms)
    presolve = check_presolve(rates, r_norms)
    notes = []
    periodic = None
    if spec.kind == "periodic":
        try:
            periodic = check_periodic_two_sided(rates)
        except MixedSignDampingError as exc:
            notes.append(str(exc))

    if assembly is None:
        assembly = OperatorAssembly(system, spec, grid)
    try:
        norms = estimate_operator_norms(assembly)
    except MixedSignDampingError as exc:
        # periodic spec with sign-indefinite damping: the two-sided bounds do
        # not apply, but the one-sided general estimates stay valid
        notes.append(str(exc))
        norms = estimate_operator_norms(assembly, force_general=True)

    norm_verdicts = check_norm_conditions(norms, margin)

    direct_ok = all(v.passed for v in direct)
    presolve_ok = all(v.passed for v in presolve)
    periodic_ok = periodic is not None and all(v.passed for v in periodic)
    if direct_ok:
        route = "direct"
    elif presolve_ok:
        route = "presolve"
    elif periodic_ok:
        route = "periodic"
    else:
        route = "none"
    solvable = route != "none"
    c1 = solvable and norm_verdicts["level1"]["passed"]
    c2 = c1 and norm_verdicts["level2"]["passed"]
    return ConditionReport(rates, r_norms, direct, presolve, periodic, norms,
                           norm_verdicts, route, solvable, c1, c2, notes)
