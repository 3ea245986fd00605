"""Successive inner-approximation power re-tuning on a fixed topology.

The activation decisions from an existing plan are kept bit-identical;
only transmit powers move, minimizing total radiated power under the same
exact-model constraints the planner enforces. Each subproblem is a plain
LP, so the loop is cheap enough to run on live gain updates.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sparse

from . import approx as approx_mod
from . import formulation, model, solver, validate
from .errors import (DimensionMismatchError, RetuneInfeasibleError,
                     ScenarioFormatError, SolverStalledError)
from .formulation import FormulationOptions, LinearProgram
from .model import Plan, PowerVector, Scenario
from .planner import IterationRecord, IterationTrace
from .solver import SolverOptions

logger = logging.getLogger("fdbackhaul.retuner")


@dataclass(frozen=True)
class RetuneOptions:
    segments: int = 32
    max_outer_iters: int = 50
    rel_power_tol: float = 1e-5
    stationarity_tol: float = 1e-4
    solver: SolverOptions = field(default_factory=SolverOptions)
    formulation: FormulationOptions = field(default_factory=FormulationOptions)


def _elastic(lp: LinearProgram) -> LinearProgram:
    """Relax the flow/capacity coupling rows with violation columns and
    minimize total violation; quantifies the capacity shortfall in bit/s."""
    rows = [i for i, lbl in enumerate(lp.le_labels)
            if lbl.startswith("flow_within_capacity")]
    k = len(rows)
    n = lp.num_vars
    relief = sparse.csr_matrix(
        (-np.ones(k), (rows, np.arange(k))), shape=(lp.b_le.size, k))
    return LinearProgram(
        c=np.concatenate([np.zeros(n), np.ones(k)]),
        a_le=sparse.hstack([lp.a_le, relief], format="csr"),
        b_le=lp.b_le,
        a_eq=sparse.hstack(
            [lp.a_eq, sparse.csr_matrix((lp.b_eq.size, k))], format="csr"),
        b_eq=lp.b_eq,
        lower=np.concatenate([lp.lower, np.zeros(k)]),
        upper=np.concatenate([lp.upper, np.full(k, math.inf)]),
        integral=frozenset(),
        le_labels=lp.le_labels,
        eq_labels=lp.eq_labels,
    )


def retune(s: Scenario, current: Plan, opts: RetuneOptions | None = None,
           trace_path=None) -> tuple[Plan, IterationTrace]:
    """Re-tune the powers of `current` for (possibly drifted) scenario `s`.

    The scenario may differ from the one that produced `current`; the
    current powers are projected onto the new bounds as the starting
    point. Raises RetuneInfeasibleError when the fixed topology cannot
    carry the demand, which is the signal to run the planner again.
    """
    opts = opts or RetuneOptions()
    violations = model.validate_scenario(s)
    if violations:
        raise ScenarioFormatError(
            "invalid scenario: " + "; ".join(str(v) for v in violations[:5]))
    nl, nf = s.num_links, s.num_subchannels
    if current.powers.watts.shape != (nl, nf):
        raise DimensionMismatchError(
            f"plan powers {current.powers.watts.shape} do not match the "
            f"scenario ({nl}, {nf})")
    if not current.active_links or not current.active_subchannels:
        raise ValueError("re-tuning needs a plan with active links and "
                         "subchannels; plan from scratch instead")
    fixed_links = frozenset(current.active_links)
    fixed_subs = frozenset(current.active_subchannels)
    for l in fixed_links:
        if not 0 <= l < nl:
            raise DimensionMismatchError(f"active link {l} is out of range")
    for f in fixed_subs:
        if not 0 <= f < nf:
            raise DimensionMismatchError(f"active subchannel {f} is out of range")

    pairs = [(l, f) for l in range(nl) for f in range(nf)
             if current.powers.watts[l, f] > 0.0]
    for (l, f) in pairs:
        if l not in fixed_links or f not in fixed_subs:
            raise ValueError(f"plan carries power on inactive pair ({l},{f})")

    caps = np.asarray(s.link_power_caps)
    p_cur = np.clip(current.powers.watts, 0.0, caps[:, None])
    p_net = s.network_power_cap
    demand_scale = max(1.0, s.total_rate_ul + s.total_rate_dl)

    records: list[IterationRecord] = []
    restored = False
    plan_it: Plan | None = None
    best_valid: Plan | None = None
    iteration = 0
    while iteration < opts.max_outer_iters:
        iteration += 1
        ap = approx_mod.build(s, PowerVector(p_cur), segments=opts.segments)
        lp, vi = formulation.build_retune_lp(s, fixed_links, fixed_subs, ap,
                                             active_pairs=pairs,
                                             opts=opts.formulation)
        sol = solver.solve_lp(lp, opts.solver)

        if sol.status == solver.INFEASIBLE:
            if iteration == 1 and not restored:
                relaxed = solver.solve_lp(_elastic(lp), opts.solver)
                if relaxed.status != solver.OPTIMAL:
                    raise RetuneInfeasibleError(
                        "fixed topology rejected even with relaxed capacity "
                        "coupling; full re-planning is required")
                shortfall = float(relaxed.objective)
                if shortfall > 1e-9 * demand_scale:
                    raise RetuneInfeasibleError(
                        f"fixed topology cannot carry the demand: capacity "
                        f"shortfall of about {shortfall:.6g} bit/s; full "
                        f"re-planning is required")
                # Within numerical noise of feasible: restart the loop from
                # the restored powers.
                p_cur = np.asarray(relaxed.x[:vi.total][:nl * nf],
                                   dtype=float).reshape(nl, nf)
                p_cur = np.clip(p_cur, 0.0, caps[:, None])
                records.append(IterationRecord(
                    iteration=iteration, cost=math.nan, status="restored",
                    max_power_delta=math.nan, nodes_explored=0,
                    best_bound=math.nan, gap=math.nan))
                restored = True
                continue
            raise RetuneInfeasibleError(
                f"re-tune subproblem infeasible at iteration {iteration}; "
                "full re-planning is required")
        if sol.status != solver.OPTIMAL:
            raise SolverStalledError(
                f"re-tune subproblem ended {sol.status} at iteration {iteration}")

        plan_it = formulation.extract_plan(s, vi, sol.x,
                                           active_links=fixed_links,
                                           active_subchannels=fixed_subs)
        delta = float(np.max(np.abs(plan_it.powers.watts - p_cur), initial=0.0))
        total = float(plan_it.powers.total)
        records.append(IterationRecord(
            iteration=iteration, cost=total, status=sol.status,
            max_power_delta=delta, nodes_explored=0,
            best_bound=sol.objective, gap=0.0))
        logger.info("re-tune iteration %d: total power %.9g W, "
                    "max change %.3g", iteration, total, delta)
        # Iterates can dip below the exact feasible set by solver slack on
        # badly-ranged capacity rows; return the best one that verifies.
        report = validate.check_feasibility(
            s, plan_it, c5_dl_direction=opts.formulation.c5_dl_direction)
        if report.feasible and (best_valid is None
                                or total <= best_valid.powers.total):
            best_valid = replace(plan_it, feasible=True)
        p_cur = plan_it.powers.watts
        if delta < opts.rel_power_tol * p_net:
            break

    if plan_it is None:
        raise SolverStalledError("re-tune loop produced no iterate")
    plan_out = best_valid if best_valid is not None else replace(
        plan_it, feasible=False)
    trace = IterationTrace(tuple(records))
    if trace_path is not None:
        trace.write_csv(trace_path)
    return plan_out, trace
