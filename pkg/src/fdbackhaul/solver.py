"""In-repo LP and MILP engines.

A revised simplex method with bounded variables solves the LP relaxations; a
deterministic branch-and-bound layer handles binaries; an exhaustive
enumerator acts as an oracle on small instances. No external solver is used
anywhere, so identical inputs reproduce identical outputs bit for bit.

Numerical conditioning matters here: capacity rows mix channel-gain
coefficients near 1e-12 with rate coefficients near 1e7, so the constraint
system is equilibrated (rows, then columns, both restricted to powers of two
so the scaling is exact) before the simplex ever sees it.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
import scipy.sparse as sparse

from .errors import TooManyBinariesError

if TYPE_CHECKING:  # pragma: no cover
    from .formulation import LinearProgram

logger = logging.getLogger("fdbackhaul.solver")

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
STALLED = "stalled"
NOT_PROVEN = "not_proven"

# Variable states inside the simplex.
_AT_LOWER, _AT_UPPER, _BASIC, _FREE, _FIXED = 0, 1, 2, 3, 4

_PIVOT_TOL = 1e-10
_PIVOT_ACCEPT = 1e-6
# Absolute floor for last-resort pivots once every improving column has been
# rejected at the comfortable threshold; each such pivot is followed by an
# immediate refactorization to contain the inverse growth.
_PIVOT_FLOOR = 1e-8
# A pivot divides the leaving variable's value error across every basic
# variable, so one below this is taken only on a freshly refactored basis,
# where that error is at rounding level rather than accumulated drift.
_PIVOT_SAFE = 1e-3
_DEGEN_TOL = 1e-12


@dataclass(frozen=True)
class SolverOptions:
    """All numerical knobs in one place."""

    feas_tol: float = 1e-7
    opt_tol: float = 1e-9
    int_tol: float = 1e-6
    gap_tol: float = 1e-6
    max_simplex_iters: int = 50000
    degenerate_streak: int = 40
    refactor_every: int = 64
    max_nodes: int = 200000


@dataclass(frozen=True, eq=False)
class LpSolution:
    status: str
    x: np.ndarray | None
    objective: float
    iterations: int
    dual_objective: float | None = None


@dataclass(frozen=True)
class BnbStats:
    nodes_explored: int
    incumbent_updates: int
    best_bound: float
    gap: float


@dataclass(eq=False)
class _Standard:
    """Equilibrated equality-form system: structural columns then one slack
    per inequality row. Artificials are appended later, per solve."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    lo: np.ndarray
    up: np.ndarray
    slack_of_row: np.ndarray
    n_struct: int
    col_scale: np.ndarray
    c_orig: np.ndarray
    integral: tuple[int, ...]


def _to_dense(mat, rows: int, cols: int) -> np.ndarray:
    if mat is None:
        return np.zeros((rows, cols))
    if sparse.issparse(mat):
        return np.asarray(mat.todense(), dtype=float)
    arr = np.asarray(mat, dtype=float)
    if arr.size == 0:
        return np.zeros((rows, cols))
    return arr.reshape(rows, cols)


def _pow2_scale(values: np.ndarray) -> np.ndarray:
    """Nearest power of two for each positive entry, 1 elsewhere. Power-of-two
    scaling changes only exponents, never mantissas, so it is exact."""
    out = np.ones_like(values, dtype=float)
    pos = values > 0
    out[pos] = np.exp2(np.round(np.log2(values[pos])))
    return out


def _standardize(lp: "LinearProgram") -> _Standard:
    c_orig = np.asarray(lp.c, dtype=float)
    n = c_orig.size
    b_le = np.asarray(lp.b_le, dtype=float)
    b_eq = np.asarray(lp.b_eq, dtype=float)
    m_le, m_eq = b_le.size, b_eq.size
    a = np.vstack([_to_dense(lp.a_le, m_le, n), _to_dense(lp.a_eq, m_eq, n)])
    b = np.concatenate([b_le, b_eq])
    lo = np.asarray(lp.lower, dtype=float).copy()
    up = np.asarray(lp.upper, dtype=float).copy()
    integral = tuple(sorted(int(j) for j in lp.integral))
    m = m_le + m_eq

    # Three passes, all exact powers of two. First scale each variable by
    # its finite bound so coefficient size reflects term size (powers sit
    # near 1e-3 W while capacities sit near 1e8 bit/s; max-equilibration
    # alone cannot see that). Then equilibrate rows, then polish columns.
    bound_mag = np.where(np.isfinite(up) & (up > 0), up,
                         np.where(np.isfinite(lo) & (lo < 0), -lo, 1.0))
    cs_bound = 1.0 / _pow2_scale(bound_mag)
    if integral:
        cs_bound[list(integral)] = 1.0
    a = a / cs_bound[None, :]

    row_scale = _pow2_scale(np.abs(a).max(axis=1, initial=0.0)) if n else np.ones(m)
    a = a / row_scale[:, None]
    b = b / row_scale

    # With rows equilibrated and variables near [0, 1], an entry this small
    # contributes less than 1e-9 of any row; keeping it only breeds
    # near-dependent columns.
    a[np.abs(a) < 1e-11] = 0.0

    cs_polish = _pow2_scale(np.abs(a).max(axis=0, initial=0.0)) if m else np.ones(n)
    if integral:
        cs_polish[list(integral)] = 1.0
    col_scale = cs_bound * cs_polish
    a = a / cs_polish[None, :]
    c = c_orig / col_scale
    lo = lo * col_scale
    up = up * col_scale

    slack_block = np.zeros((m, m_le))
    slack_block[np.arange(m_le), np.arange(m_le)] = 1.0
    return _Standard(
        a=np.hstack([a, slack_block]),
        b=b,
        c=np.concatenate([c, np.zeros(m_le)]),
        lo=np.concatenate([lo, np.zeros(m_le)]),
        up=np.concatenate([up, np.full(m_le, np.inf)]),
        slack_of_row=np.concatenate([np.arange(m_le) + n,
                                     np.full(m_eq, -1)]).astype(int),
        n_struct=n,
        col_scale=col_scale,
        c_orig=c_orig,
        integral=integral,
    )


def _bound_only_min(c, lo, up):
    """Minimize c over a box: the no-rows special case."""
    default = np.where(np.isfinite(lo), lo, np.where(np.isfinite(up), up, 0.0))
    x = np.where(c > 0, lo, np.where(c < 0, up, default))
    if not np.all(np.isfinite(x)):
        return UNBOUNDED, None, -math.inf, 0, None
    obj = float(c @ x)
    return OPTIMAL, x, obj, 0, obj


def _simplex(std: _Standard, lo_in: np.ndarray, up_in: np.ndarray,
             opts: SolverOptions):
    """Two-phase revised simplex on the standardized system.

    Bounds are passed separately so branch-and-bound can pin binaries
    without rebuilding anything. Returns (status, x, objective, iterations,
    dual_objective); x covers structural plus slack columns, still scaled.
    """
    a0, b = std.a, std.b
    m, n0 = a0.shape
    if np.any(lo_in > up_in + 1e-12):
        return INFEASIBLE, None, math.inf, 0, None
    if m == 0:
        return _bound_only_min(std.c, lo_in, up_in)
    try:
        out = _simplex_attempt(std, lo_in, up_in, opts, force_bland=False)
        # A stall below the iteration cap is the final polish rejecting a
        # drifted point, not exhaustion; only that case is worth a retry.
        if out[0] != STALLED or out[3] >= opts.max_simplex_iters:
            return out
    except np.linalg.LinAlgError:
        # A singular basis slipped past the pivot guards.
        pass
    # Restart with Bland's rule, which walks a different pivot sequence.
    try:
        return _simplex_attempt(std, lo_in, up_in, opts, force_bland=True)
    except np.linalg.LinAlgError:
        return STALLED, None, math.nan, 0, None


def _simplex_attempt(std: _Standard, lo_in: np.ndarray, up_in: np.ndarray,
                     opts: SolverOptions, force_bland: bool):
    a0, b = std.a, std.b
    m, n0 = a0.shape

    # Nonbasic start at a finite bound, then one artificial per row whose
    # slack cannot absorb the residual.
    lo = np.concatenate([lo_in, np.zeros(m)])
    up = np.concatenate([up_in, np.full(m, np.inf)])
    x = np.where(np.isfinite(lo_in), lo_in, np.where(np.isfinite(up_in), up_in, 0.0))
    vstat = np.where(lo_in == up_in, _FIXED,
                     np.where(np.isfinite(lo_in), _AT_LOWER,
                              np.where(np.isfinite(up_in), _AT_UPPER, _FREE))).astype(np.int8)
    x = np.where(vstat == _FREE, 0.0, x)

    resid = b - a0 @ x
    art_sign = np.where(resid >= 0, 1.0, -1.0)
    art_block = np.zeros((m, m))
    art_block[np.arange(m), np.arange(m)] = art_sign
    a = np.hstack([a0, art_block])
    x = np.concatenate([x, np.zeros(m)])
    vstat = np.concatenate([vstat, np.full(m, _FIXED, dtype=np.int8)])
    basis = np.empty(m, dtype=int)
    need_art = np.zeros(m, dtype=bool)
    for i in range(m):
        si = std.slack_of_row[i]
        if si >= 0 and resid[i] >= 0:
            basis[i] = si
            x[si] = resid[i]
            vstat[si] = _BASIC
        else:
            basis[i] = n0 + i
            x[n0 + i] = abs(resid[i])
            vstat[n0 + i] = _BASIC
            need_art[i] = True
    # Unused artificial columns stay pinned at zero.
    up[n0 + np.arange(m)] = np.where(need_art, np.inf, 0.0)

    b_inv = np.eye(m)
    for i in range(m):
        if basis[i] >= n0 and art_sign[i] < 0:
            b_inv[i, i] = -1.0
    iters = 0
    n_tot = n0 + m

    def refactor():
        nonlocal b_inv
        b_inv = np.linalg.inv(a[:, basis])
        xn = x.copy()
        xn[basis] = 0.0
        x[basis] = b_inv @ (b - a @ xn)

    def run_phase(cost: np.ndarray) -> str:
        nonlocal iters, b_inv
        weights = np.ones(n_tot)
        banned = np.zeros(n_tot, dtype=bool)
        bland = force_bland
        streak = 0
        since_refactor = 0
        # Wedge-escape ladder for the empty-candidate exit. Bound flips can
        # stale a ban without any basis change, so the first retry just
        # clears bans; the second drops the pivot threshold to the floor.
        wedge_retries = 0
        desperate = False
        d_tol = opts.opt_tol * (1.0 + np.abs(cost).max(initial=0.0))
        while True:
            if iters >= opts.max_simplex_iters:
                return STALLED
            iters += 1
            # One step of iterative refinement after any eta update keeps
            # pricing and the pivot column consistent with the true basis
            # matrix even when the product-form inverse has drifted.
            y = cost[basis] @ b_inv
            if since_refactor:
                bmat = a[:, basis]
                y += (cost[basis] - y @ bmat) @ b_inv
            d = cost - y @ a
            d[basis] = 0.0
            cand = (((vstat == _AT_LOWER) & (d < -d_tol))
                    | ((vstat == _AT_UPPER) & (d > d_tol))
                    | ((vstat == _FREE) & (np.abs(d) > d_tol))) & ~banned
            idxs = np.nonzero(cand)[0]
            if idxs.size == 0:
                if banned.any():
                    if since_refactor > 0:
                        refactor()
                        since_refactor = 0
                    if wedge_retries < 2:
                        wedge_retries += 1
                        desperate = wedge_retries >= 2
                        banned[:] = False
                        continue
                # Any improving column left is numerically unusable even
                # at the last-resort pivot floor; stop here.
                return OPTIMAL
            if bland:
                q = int(idxs[0])
            else:
                q = int(idxs[np.argmax(d[idxs] ** 2 / weights[idxs])])
            sigma = 1.0 if (vstat[q] == _AT_LOWER
                            or (vstat[q] == _FREE and d[q] < 0)) else -1.0
            alpha = b_inv @ a[:, q]
            if since_refactor:
                alpha += b_inv @ (a[:, q] - bmat @ alpha)

            xb = x[basis]
            delta = sigma * alpha
            lo_b = lo[basis]
            up_b = up[basis]
            t_strict = np.full(m, np.inf)
            t_relax = np.full(m, np.inf)
            pos = delta > _PIVOT_TOL
            t_strict[pos] = (xb[pos] - lo_b[pos]) / delta[pos]
            t_relax[pos] = (xb[pos] - lo_b[pos] + opts.feas_tol) / delta[pos]
            neg = delta < -_PIVOT_TOL
            t_strict[neg] = (up_b[neg] - xb[neg]) / (-delta[neg])
            t_relax[neg] = (up_b[neg] - xb[neg] + opts.feas_tol) / (-delta[neg])
            t_strict = np.maximum(t_strict, 0.0)
            t_relax = np.maximum(t_relax, 0.0)
            t_block = float(t_strict.min()) if m else math.inf
            t_flip = float(up[q] - lo[q])
            if not math.isfinite(min(t_block, t_flip)):
                return UNBOUNDED

            do_flip = t_flip <= t_block
            r = -1
            t = t_flip
            if not do_flip:
                # Harris two-pass ratio test: any row whose strict ratio
                # fits under the relaxed minimum may leave, so take the
                # best-conditioned pivot among them. The leaving variable
                # lands exactly on its bound; others stray at most feas_tol.
                t_cap = float(t_relax.min())
                blockers = np.nonzero(t_strict <= t_cap)[0]
                if bland:
                    r = int(blockers[np.argmin(basis[blockers])])
                else:
                    r = int(blockers[np.argmax(np.abs(alpha[blockers]))])
                t = float(t_strict[r])
                if t >= t_flip:
                    do_flip = True
                    t = t_flip
                elif abs(alpha[r]) < (_PIVOT_FLOOR if desperate
                                      else _PIVOT_ACCEPT):
                    if since_refactor > 0:
                        # A borderline pivot out of a drifted inverse may be
                        # phantom; reprice against a fresh factorization.
                        refactor()
                        since_refactor = 0
                        continue
                    # Tiny even when fresh: this entering column cannot be
                    # pivoted safely on the current basis.
                    banned[q] = True
                    continue
                elif abs(alpha[r]) < _PIVOT_SAFE and since_refactor > 0:
                    # Small enough to amplify accumulated drift into the
                    # next basis; redo the step on exact values.
                    refactor()
                    since_refactor = 0
                    continue

            if do_flip:
                # The entering variable reaches its opposite bound first:
                # no basis change, just a flip.
                x[basis] = xb - t * delta
                x[q] = up[q] if sigma > 0 else lo[q]
                vstat[q] = _AT_UPPER if sigma > 0 else _AT_LOWER
            else:
                start = lo[q] if vstat[q] == _AT_LOWER else (
                    up[q] if vstat[q] == _AT_UPPER else 0.0)
                x[basis] = xb - t * delta
                x[q] = start + sigma * t
                p = int(basis[r])
                if delta[r] > 0:
                    x[p] = lo[p]
                    vstat[p] = _AT_LOWER
                else:
                    x[p] = up[p]
                    vstat[p] = _AT_UPPER
                if lo[p] == up[p]:
                    vstat[p] = _FIXED
                vstat[q] = _BASIC
                basis[r] = q
                banned[:] = False

                # Devex weight maintenance, reference reset on overflow.
                if not bland:
                    beta = b_inv[r] @ a
                    beta_q = alpha[r]
                    w_q = weights[q]
                    cand_w = (beta / beta_q) ** 2 * w_q
                    np.maximum(weights, cand_w, out=weights)
                    weights[p] = max(w_q / beta_q ** 2, 1.0)
                    if weights.max() > 1e8:
                        weights[:] = 1.0

                pivot = alpha[r]
                row = b_inv[r] / pivot
                b_inv -= np.outer(alpha, row)
                b_inv[r] = row
                since_refactor += 1
                # Floor-level pivots only happen in desperate mode and get
                # their inverse rebuilt on the spot.
                if (since_refactor >= opts.refactor_every
                        or abs(pivot) < _PIVOT_ACCEPT):
                    refactor()
                    since_refactor = 0
                wedge_retries = 0
                desperate = False

            if t <= _DEGEN_TOL:
                streak += 1
                if streak >= opts.degenerate_streak:
                    bland = True
            else:
                streak = 0
                bland = force_bland

    # Phase 1: drive artificial usage to zero.
    if np.any(need_art):
        c1 = np.zeros(n_tot)
        c1[n0 + np.arange(m)[need_art]] = 1.0
        status = run_phase(c1)
        if status == STALLED:
            return STALLED, None, math.nan, iters, None
        infeas = float(c1 @ x)
        if status == UNBOUNDED or infeas > opts.feas_tol * (1.0 + np.abs(b).max(initial=0.0)):
            logger.debug(
                "phase 1 ended %s with residual %.3e against threshold %.3e "
                "after %d iterations", status, infeas,
                opts.feas_tol * (1.0 + np.abs(b).max(initial=0.0)), iters)
            return INFEASIBLE, None, math.inf, iters, None
        up[n0:] = 0.0
        nonbasic_art = vstat[n0:] != _BASIC
        vstat[n0:][nonbasic_art] = _FIXED
        x[n0:][nonbasic_art] = 0.0

    c2 = np.concatenate([std.c, np.zeros(m)])
    status = run_phase(c2)
    if status == UNBOUNDED:
        return UNBOUNDED, None, -math.inf, iters, None
    if status == STALLED:
        return STALLED, None, math.nan, iters, None

    # Final polish: recompute basic values against the factorization from
    # scratch so eta-update drift cannot leak into the answer.
    try:
        xn = x.copy()
        xn[basis] = 0.0
        x[basis] = np.linalg.solve(a[:, basis], b - a @ xn)
    except np.linalg.LinAlgError:  # pragma: no cover - defensive
        pass

    feas_scale = opts.feas_tol * (1.0 + np.abs(b).max(initial=0.0))
    if (np.abs(a @ x - b).max(initial=0.0) > 10 * feas_scale
            or np.any(x < lo - 10 * feas_scale)
            or np.any(x > up + 10 * feas_scale)):
        logger.debug(
            "polish rejected the final point: row residual %.3e, bound "
            "breach %.3e, threshold %.3e after %d iterations",
            np.abs(a @ x - b).max(initial=0.0),
            max(np.max(lo - x, initial=0.0), np.max(x - up, initial=0.0)),
            10 * feas_scale, iters)
        return STALLED, None, math.nan, iters, None

    y = c2[basis] @ b_inv
    d = c2 - y @ a
    d[np.abs(d) <= 10 * opts.opt_tol * (1.0 + np.abs(c2).max(initial=0.0))] = 0.0
    dual = float(y @ b)
    pos = d > 0
    neg = d < 0
    dual += float(np.sum(d[pos] * lo[pos])) if pos.any() else 0.0
    dual += float(np.sum(d[neg] * up[neg])) if neg.any() else 0.0
    if not math.isfinite(dual):
        dual = None
    return OPTIMAL, x[:n0], float(c2[:n0] @ x[:n0]), iters, dual


def _finish(std: _Standard, status: str, xw, iters: int, dual) -> LpSolution:
    if status != OPTIMAL or xw is None:
        obj = math.inf if status in (INFEASIBLE, NOT_PROVEN) else (
            -math.inf if status == UNBOUNDED else math.nan)
        return LpSolution(status, None, obj, iters, None)
    x = xw[:std.n_struct] / std.col_scale
    return LpSolution(OPTIMAL, x, float(std.c_orig @ x), iters, dual)


def solve_lp(lp: "LinearProgram", opts: SolverOptions | None = None) -> LpSolution:
    """Solve the continuous relaxation (integrality flags are ignored)."""
    opts = opts or SolverOptions()
    std = _standardize(lp)
    status, xw, _obj, iters, dual = _simplex(std, std.lo, std.up, opts)
    return _finish(std, status, xw, iters, dual)


def _check_binary_bounds(std: _Standard) -> None:
    for j in std.integral:
        if std.lo[j] < -1e-12 or std.up[j] > 1.0 + 1e-12:
            raise ValueError(f"integral variable {j} must have bounds within [0, 1]")


def solve_milp(lp: "LinearProgram", opts: SolverOptions | None = None,
               warm_start=None) -> tuple[LpSolution, BnbStats]:
    """Branch and bound over the binary variables.

    warm_start, when given, is a 0/1 sequence aligned with sorted(integral);
    that fixing is solved first so a known-good configuration becomes the
    incumbent before the tree opens. Node order is deterministic: depth-first
    plunging toward the LP rounding until a first incumbent exists, then
    best-bound with insertion order breaking ties.
    """
    opts = opts or SolverOptions()
    std = _standardize(lp)
    _check_binary_bounds(std)
    ints = np.asarray(std.integral, dtype=int)
    total_iters = 0

    if ints.size == 0:
        status, xw, _obj, iters, dual = _simplex(std, std.lo, std.up, opts)
        sol = _finish(std, status, xw, iters, dual)
        bound = sol.objective if sol.status == OPTIMAL else -math.inf
        return sol, BnbStats(1, int(sol.status == OPTIMAL), bound, 0.0)

    incumbent = None
    inc_obj = math.inf
    nodes_explored = 0
    incumbent_updates = 0

    def prune_eps() -> float:
        if not math.isfinite(inc_obj):
            return 0.0
        return 1e-9 * max(1.0, abs(inc_obj))

    def prune_margin() -> float:
        # Nodes that cannot beat the incumbent by more than the gap
        # tolerance are not worth proving out.
        if not math.isfinite(inc_obj):
            return 0.0
        return opts.gap_tol * abs(inc_obj)

    def node_solve(lo, up):
        nonlocal nodes_explored, total_iters
        nodes_explored += 1
        status, xw, obj, iters, _dual = _simplex(std, lo, up, opts)
        total_iters += iters
        return status, xw, obj

    if warm_start is not None:
        warm = np.round(np.asarray(warm_start, dtype=float))
        if warm.size != ints.size:
            raise ValueError("warm start length must match the binary count")
        lo_w, up_w = std.lo.copy(), std.up.copy()
        lo_w[ints] = warm
        up_w[ints] = warm
        status, xw, obj, = node_solve(lo_w, up_w)
        if status == STALLED:
            return LpSolution(STALLED, None, math.nan, total_iters, None), \
                BnbStats(nodes_explored, 0, -math.inf, math.inf)
        if status == OPTIMAL:
            incumbent, inc_obj = xw, obj
            incumbent_updates += 1

    # Open nodes: (bound estimate, insertion counter, lo, up).
    open_nodes = [(-math.inf, 0, std.lo.copy(), std.up.copy())]
    counter = 1
    budget_hit = False
    unbounded = False
    stalled = False

    while open_nodes:
        if nodes_explored >= opts.max_nodes:
            budget_hit = True
            break
        if incumbent is None:
            node = open_nodes.pop()
        else:
            pick = min(range(len(open_nodes)),
                       key=lambda i: (open_nodes[i][0], open_nodes[i][1]))
            node = open_nodes.pop(pick)
        est, _cnt, lo_n, up_n = node
        if est >= inc_obj - prune_margin():
            continue
        status, xw, obj = node_solve(lo_n, up_n)
        if status == INFEASIBLE:
            continue
        if status == UNBOUNDED:
            unbounded = True
            break
        if status == STALLED:
            stalled = True
            break
        if obj >= inc_obj - prune_margin():
            continue
        vals = xw[ints]
        frac = np.abs(vals - np.round(vals))
        if frac.max(initial=0.0) <= opts.int_tol:
            # Candidate incumbent; re-solve with binaries pinned so the
            # stored solution carries exact 0/1 values.
            lo_c, up_c = lo_n.copy(), up_n.copy()
            lo_c[ints] = np.round(vals)
            up_c[ints] = np.round(vals)
            status_c, xw_c, obj_c = node_solve(lo_c, up_c)
            if status_c == OPTIMAL and obj_c < inc_obj - prune_eps():
                incumbent, inc_obj = xw_c, obj_c
                incumbent_updates += 1
            elif status_c != OPTIMAL and obj < inc_obj - prune_eps():
                incumbent, inc_obj = xw, obj
                incumbent_updates += 1
            continue
        # Branch on the fractional binary with the largest cost stake;
        # activation decisions with real price move the bound fastest.
        score = frac * (1.0 + np.abs(std.c_orig[ints]))
        score[frac <= opts.int_tol] = -1.0
        j_pos = int(np.argmax(score))
        j = int(ints[j_pos])
        up_child = (obj, counter, lo_n.copy(), up_n.copy())
        up_child[3][j] = 0.0
        counter += 1
        lo_child = (obj, counter, lo_n.copy(), up_n.copy())
        lo_child[2][j] = 1.0
        counter += 1
        # Push the LP-suggested side last so stack plunging explores it first.
        if vals[j_pos] >= 0.5:
            open_nodes.append(up_child)
            open_nodes.append(lo_child)
        else:
            open_nodes.append(lo_child)
            open_nodes.append(up_child)

    if unbounded:
        return LpSolution(UNBOUNDED, None, -math.inf, total_iters, None), \
            BnbStats(nodes_explored, incumbent_updates, -math.inf, math.inf)
    if stalled:
        return LpSolution(STALLED, None, math.nan, total_iters, None), \
            BnbStats(nodes_explored, incumbent_updates, -math.inf, math.inf)

    if budget_hit:
        open_bounds = [nd[0] for nd in open_nodes]
        best_bound = min(open_bounds + [inc_obj])
        status = NOT_PROVEN
    else:
        best_bound = inc_obj
        status = OPTIMAL if incumbent is not None else INFEASIBLE

    if incumbent is None:
        sol = LpSolution(status if budget_hit else INFEASIBLE, None, math.inf,
                         total_iters, None)
        return sol, BnbStats(nodes_explored, 0, best_bound, math.inf)

    x = incumbent[:std.n_struct] / std.col_scale
    objective = float(std.c_orig @ x)
    gap = (objective - best_bound) / max(1.0, abs(objective))
    sol = LpSolution(status, x, objective, total_iters, None)
    return sol, BnbStats(nodes_explored, incumbent_updates, best_bound, gap)


def brute_force_milp(lp: "LinearProgram",
                     opts: SolverOptions | None = None) -> LpSolution:
    """Enumerate every binary fixing and keep the best LP outcome.

    Fixings are visited in lexicographic order over the sorted binary
    indices and a new optimum must win by a clear margin, so ties resolve
    to the lexicographically smallest fixing.
    """
    opts = opts or SolverOptions()
    std = _standardize(lp)
    _check_binary_bounds(std)
    ints = np.asarray(std.integral, dtype=int)
    if ints.size > 20:
        raise TooManyBinariesError(
            f"{ints.size} binaries; the exhaustive oracle is capped at 20")

    best_x = None
    best_obj = math.inf
    total_iters = 0
    for assignment in itertools.product((0.0, 1.0), repeat=int(ints.size)):
        lo_n, up_n = std.lo.copy(), std.up.copy()
        if ints.size:
            vals = np.asarray(assignment)
            lo_n[ints] = vals
            up_n[ints] = vals
        status, xw, obj, iters, _dual = _simplex(std, lo_n, up_n, opts)
        total_iters += iters
        if status == UNBOUNDED:
            return LpSolution(UNBOUNDED, None, -math.inf, total_iters, None)
        if status == STALLED:
            return LpSolution(STALLED, None, math.nan, total_iters, None)
        if status == OPTIMAL and (best_x is None
                                  or obj < best_obj - 1e-9 * (1.0 + abs(best_obj))):
            best_x, best_obj = xw, obj
    if best_x is None:
        return LpSolution(INFEASIBLE, None, math.inf, total_iters, None)
    x = best_x[:std.n_struct] / std.col_scale
    return LpSolution(OPTIMAL, x, float(std.c_orig @ x), total_iters, None)
