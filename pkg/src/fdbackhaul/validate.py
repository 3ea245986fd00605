"""Ground-truth feasibility checking against the exact nonlinear model.

Everything here evaluates true log-capacities, never the linearized
surrogate, so a passing report means the plan survives the physics and not
merely the approximation. Violations are normalized by each constraint's
right-hand magnitude (or 1 when that is zero) so a single relative
tolerance applies across watts, seconds, and bits per second.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import formulation, model
from .errors import DimensionMismatchError, TooManyBinariesError
from .formulation import AS_PRINTED
from .model import Plan, Scenario


@dataclass(frozen=True)
class FamilyCheck:
    """Worst case over one constraint family. `worst` is signed: negative
    values are slack, positive values are violation."""

    family: str
    worst: float
    index: tuple | None
    satisfied: bool

    def to_dict(self) -> dict:
        return {"family": self.family, "worst": self.worst,
                "index": list(self.index) if self.index is not None else None,
                "satisfied": self.satisfied}


@dataclass(frozen=True)
class FeasibilityReport:
    tolerance: float
    families: tuple[FamilyCheck, ...]
    feasible: bool

    def to_dict(self) -> dict:
        return {"tolerance": self.tolerance, "feasible": self.feasible,
                "families": [f.to_dict() for f in self.families]}

    def __str__(self) -> str:
        lines = [f"feasible: {self.feasible} (tolerance {self.tolerance:g})"]
        for f in self.families:
            mark = "ok " if f.satisfied else "BAD"
            where = f" at {f.index}" if f.index is not None else ""
            lines.append(f"  {mark} {f.family}: worst {f.worst:+.3e}{where}")
        return "\n".join(lines)


class _Worst:
    """Tracks the most violated entry of a family."""

    def __init__(self, family: str):
        self.family = family
        self.worst = -np.inf
        self.index: tuple | None = None
        self.any = False

    def note(self, value: float, index: tuple | None = None) -> None:
        self.any = True
        if value > self.worst:
            self.worst = float(value)
            self.index = index

    def check(self, tol: float) -> FamilyCheck:
        worst = self.worst if self.any else 0.0
        return FamilyCheck(self.family, worst, self.index, worst <= tol)


def _norm(lhs: float, rhs: float) -> float:
    return (lhs - rhs) / max(abs(rhs), 1.0)


def check_feasibility(s: Scenario, p: Plan, tol: float = 1e-9,
                      c5_dl_direction: str = AS_PRINTED) -> FeasibilityReport:
    """Check every model constraint with exact capacities."""
    nl, nf = s.num_links, s.num_subchannels
    x = p.powers.watts
    if x.shape != (nl, nf):
        raise DimensionMismatchError(
            f"plan powers {x.shape} do not match the scenario ({nl}, {nf})")
    if p.flow_ul.shape != (nl,) or p.flow_dl.shape != (nl,):
        raise DimensionMismatchError("plan flow vectors do not match link count")

    p_net = s.network_power_cap
    exact = model.capacity_matrix(s, p.powers) if nl else np.zeros((0, nf))
    families: list[FamilyCheck] = []

    dom = _Worst("power_domain")
    for l in range(nl):
        for f in range(nf):
            v = x[l, f]
            dom.note(np.inf if not np.isfinite(v) else -v, (l, f))
    families.append(dom.check(tol))

    fdom = _Worst("flow_domain")
    for l in range(nl):
        fdom.note(-float(p.flow_ul[l]), (l, "ul"))
        fdom.note(-float(p.flow_dl[l]), (l, "dl"))
    families.append(fdom.check(tol))

    link_act = _Worst("link_activation")
    for l in range(nl):
        j = 1.0 if l in p.active_links else 0.0
        link_act.note(_norm(float(x[l, :].sum()), j * p_net), (l,))
    families.append(link_act.check(tol))

    sub_act = _Worst("subchannel_activation")
    for f in range(nf):
        j = 1.0 if f in p.active_subchannels else 0.0
        sub_act.note(_norm(float(x[:, f].sum()), j * p_net), (f,))
    families.append(sub_act.check(tol))

    link_cap = _Worst("link_power_cap")
    for l, link in enumerate(s.links):
        link_cap.note(_norm(float(x[l, :].sum()), link.p_max_link), (l,))
    families.append(link_cap.check(tol))

    budget = _Worst("node_power_budget")
    for n, node in enumerate(s.nodes):
        used = float(sum(x[l, :].sum() for l in s.out_links[n]))
        budget.note(_norm(used, node.power_budget), (n,))
    families.append(budget.check(tol))

    d_ul = _Worst("delay_ul")
    lhs = sum(s.nodes[n].proc_delay * float(sum(p.flow_ul[l] for l in s.out_links[n]))
              for n in range(s.num_nodes))
    d_ul.note(_norm(lhs, s.limits.delay_ul * s.total_rate_ul), None)
    families.append(d_ul.check(tol))

    d_dl = _Worst("delay_dl")
    side = (lambda n: s.out_links[n]) if c5_dl_direction == AS_PRINTED \
        else (lambda n: s.in_links[n])
    lhs = sum(s.nodes[n].proc_delay * float(sum(p.flow_dl[l] for l in side(n)))
              for n in range(s.num_nodes))
    d_dl.note(_norm(lhs, s.limits.delay_dl * s.total_rate_dl), None)
    families.append(d_dl.check(tol))

    access = _Worst("access_interference")
    for f in sorted(s.spectrum.access_subchannels):
        for n in range(s.num_nodes):
            leak = float(s.gains.to_access[:, n, f] @ x[:, f]) if nl else 0.0
            access.note(_norm(leak, float(s.limits.interference_limit[n, f])),
                        (f, n))
    families.append(access.check(tol))

    flow_cap = _Worst("flow_capacity")
    for l, link in enumerate(s.links):
        lhs = float(p.flow_ul[l] + p.flow_dl[l])
        rhs = link.wired_capacity + float(exact[l, :].sum())
        flow_cap.note(_norm(lhs, rhs), (l,))
    families.append(flow_cap.check(tol))

    bal_ul = _Worst("flow_balance_ul")
    for n in s.nonroot_indices:
        net = (float(sum(p.flow_ul[l] for l in s.out_links[n]))
               - float(sum(p.flow_ul[l] for l in s.in_links[n])))
        bal_ul.note(abs(_norm(net, s.nodes[n].rate_ul)), (n,))
    families.append(bal_ul.check(tol))

    bal_dl = _Worst("flow_balance_dl")
    for n in s.nonroot_indices:
        net = (float(sum(p.flow_dl[l] for l in s.in_links[n]))
               - float(sum(p.flow_dl[l] for l in s.out_links[n])))
        bal_dl.note(abs(_norm(net, s.nodes[n].rate_dl)), (n,))
    families.append(bal_dl.check(tol))

    col = _Worst("root_collection_ul")
    inflow = float(sum(p.flow_ul[l] for r in s.root_indices
                       for l in s.in_links[r]))
    col.note(abs(_norm(inflow, s.total_rate_ul)), None)
    families.append(col.check(tol))

    inj = _Worst("root_injection_dl")
    outflow = float(sum(p.flow_dl[l] for r in s.root_indices
                        for l in s.out_links[r]))
    inj.note(abs(_norm(outflow, s.total_rate_dl)), None)
    families.append(inj.check(tol))

    cons = _Worst("activation_consistency")
    for l in range(nl):
        if l not in p.active_links:
            cons.note(float(x[l, :].sum()), (l,))
    for f in range(nf):
        if f not in p.active_subchannels:
            cons.note(float(x[:, f].sum()), (f,))
    families.append(cons.check(tol))

    feasible = all(f.satisfied for f in families)
    return FeasibilityReport(tolerance=tol, families=tuple(families),
                             feasible=feasible)


def hd_variant(s: Scenario, si_gamma: float = 1e6) -> Scenario:
    """Variant where co-located transmit/receive is effectively forbidden:
    residual self-interference is set so high that any co-channel reuse at
    a shared node kills the capacity, forcing half-duplex behavior."""
    cross = np.array(s.gains.cross, dtype=float, copy=True)
    for aggressor, victim in model.self_interference_pairs(s):
        cross[victim, aggressor, :] = si_gamma
    gains = model.Gains(direct=np.array(s.gains.direct, copy=True),
                        cross=cross,
                        to_access=np.array(s.gains.to_access, copy=True))
    return Scenario(nodes=s.nodes, links=s.links, spectrum=s.spectrum,
                    gains=gains, costs=s.costs, limits=s.limits)


@dataclass(frozen=True)
class ComparisonReport:
    """First-iteration MILP vs the exhaustive oracle on one instance."""

    status_solver: str
    status_brute: str
    objective_solver: float
    objective_brute: float
    delta_rel: float
    fixings_match: bool
    num_binaries: int

    def to_dict(self) -> dict:
        return {"status_solver": self.status_solver,
                "status_brute": self.status_brute,
                "objective_solver": self.objective_solver,
                "objective_brute": self.objective_brute,
                "delta_rel": self.delta_rel,
                "fixings_match": self.fixings_match,
                "num_binaries": self.num_binaries}


def cross_check_small(s: Scenario, opts=None) -> ComparisonReport:
    """Solve the first planning subproblem with both the branch-and-bound
    solver and brute-force enumeration and compare."""
    from . import approx as approx_mod
    from . import planner, solver

    opts = opts or planner.PlanOptions()
    p0 = planner.initial_point(s)
    ap = approx_mod.build(s, p0, segments=opts.segments)
    lp, _vi = formulation.build_milp(s, ap, opts.formulation)
    if len(lp.integral) > 10:
        raise TooManyBinariesError(
            f"{len(lp.integral)} binaries exceed the cross-check limit of 10")

    sol, _stats = solver.solve_milp(lp, opts.solver)
    brute = solver.brute_force_milp(lp, opts.solver)

    if sol.status != solver.OPTIMAL or brute.status != solver.OPTIMAL:
        return ComparisonReport(
            status_solver=sol.status, status_brute=brute.status,
            objective_solver=sol.objective, objective_brute=brute.objective,
            delta_rel=0.0 if sol.status == brute.status else float("inf"),
            fixings_match=sol.status == brute.status,
            num_binaries=len(lp.integral))

    delta = abs(sol.objective - brute.objective) / max(1.0, abs(brute.objective))
    idx = sorted(lp.integral)
    fix = all(round(sol.x[j]) == round(brute.x[j]) for j in idx)
    return ComparisonReport(
        status_solver=sol.status, status_brute=brute.status,
        objective_solver=sol.objective, objective_brute=brute.objective,
        delta_rel=float(delta), fixings_match=bool(fix),
        num_binaries=len(lp.integral))
