"""Builds the planning MILP and the re-tuning LP from a scenario plus a
capacity linearization, and maps solver vectors back into plans.

Variable layout (dense, per VarIndex): transmit powers per (link,
subchannel); uplink and downlink flow per link; a capacity variable per
(link, subchannel); an interference-aggregate variable per (link,
subchannel); then, in the planning problem only, link activation binaries,
subchannel activation binaries, and one pair-activity binary per (link,
subchannel).

The pair-activity binaries and the interference-aggregate variables are not
strictly part of the textbook formulation but are load-bearing here. The
chord-minus-tangent capacity rows are only valid approximations near the
expansion point; at a pair that carries no power of its own they would force
the capacity variable below zero, contradicting its domain and making every
mixed activation pattern infeasible. Gating each pair's capacity rows behind
its activity binary (with a big-M relief sized in bits per second, not
watts-to-bits coupling) restores exactly the intended semantics: an active
pair gets its conservative capacity credit, an inactive pair gets zero. The
aggregate variable keeps the big-M small: the tangent slope is bits per watt
at noise scale, so multiplying it into a watts-sized relief term would drag
1e17-scale coefficients through the rows; carrying the aggregate as its own
bounded variable keeps every capacity row at bits scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sparse

from . import model
from .approx import CapacityApprox
from .errors import DimensionMismatchError, IntegralityError
from .model import Plan, PowerVector, Scenario

AS_PRINTED = "as-printed"
INCOMING = "incoming"


@dataclass(frozen=True)
class FormulationOptions:
    """Knobs shared by the planning MILP and the re-tuning LP.

    c5_dl_direction: whether the downlink delay row sums outgoing link
        capacity (as the constraint is conventionally written) or incoming.
    capacity_margin: multiplicative headroom on flows in the link-capacity
        coupling row, so plans carry real slack against the exact
        nonlinear capacities after floating-point noise.
    capacity_pad: additive padding on capacity rows, relative to subchannel
        bandwidth; keeps the previous iterate feasible when rows are
        rebuilt at a new expansion point.
    tangent_trust: cap on the interference aggregate as a multiple of its
        value at the expansion point; limits how far the tangent may be
        extrapolated in one step. Any value >= 1 preserves the previous
        iterate's feasibility.
    """

    c5_dl_direction: str = AS_PRINTED
    capacity_margin: float = 1e-4
    capacity_pad: float = 1e-8
    tangent_trust: float = 16.0


@dataclass(frozen=True)
class VarIndex:
    """Dense index ranges for the decision variables."""

    num_links: int
    num_subchannels: int
    with_activity: bool = True

    @property
    def _lf(self) -> int:
        return self.num_links * self.num_subchannels

    def x(self, l: int, f: int) -> int:
        return l * self.num_subchannels + f

    def c_ul(self, l: int) -> int:
        return self._lf + l

    def c_dl(self, l: int) -> int:
        return self._lf + self.num_links + l

    def c_cap(self, l: int, f: int) -> int:
        return self._lf + 2 * self.num_links + l * self.num_subchannels + f

    def tau(self, l: int, f: int) -> int:
        return 2 * self._lf + 2 * self.num_links + l * self.num_subchannels + f

    def _activity_base(self) -> int:
        if not self.with_activity:
            raise ValueError("re-tune index has no activation variables")
        return 3 * self._lf + 2 * self.num_links

    def j_link(self, l: int) -> int:
        return self._activity_base() + l

    def j_sub(self, f: int) -> int:
        return self._activity_base() + self.num_links + f

    def z(self, l: int, f: int) -> int:
        return (self._activity_base() + self.num_links + self.num_subchannels
                + l * self.num_subchannels + f)

    @property
    def total(self) -> int:
        base = 3 * self._lf + 2 * self.num_links
        if self.with_activity:
            base += self.num_links + self.num_subchannels + self._lf
        return base

    def name(self, j: int) -> str:
        nl, nf = self.num_links, self.num_subchannels
        lf = self._lf
        if j < lf:
            return f"p[{j // nf},{j % nf}]"
        j -= lf
        if j < nl:
            return f"flow_ul[{j}]"
        j -= nl
        if j < nl:
            return f"flow_dl[{j}]"
        j -= nl
        if j < lf:
            return f"cap[{j // nf},{j % nf}]"
        j -= lf
        if j < lf:
            return f"iagg[{j // nf},{j % nf}]"
        j -= lf
        if self.with_activity:
            if j < nl:
                return f"use_link[{j}]"
            j -= nl
            if j < nf:
                return f"use_sub[{j}]"
            j -= nf
            if j < lf:
                return f"pair[{j // nf},{j % nf}]"
        raise IndexError("variable index out of range")


@dataclass(frozen=True, eq=False)
class LinearProgram:
    """Sparse standard-form carrier: minimize c@x subject to a_le@x <= b_le,
    a_eq@x == b_eq, lower <= x <= upper, with `integral` columns binary."""

    c: np.ndarray
    a_le: sparse.csr_matrix
    b_le: np.ndarray
    a_eq: sparse.csr_matrix
    b_eq: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    integral: frozenset[int]
    le_labels: tuple[str, ...]
    eq_labels: tuple[str, ...]

    @property
    def num_vars(self) -> int:
        return self.c.size


class _Rows:
    """Accumulates labeled sparse rows in deterministic order."""

    def __init__(self):
        self.coeffs: list[dict[int, float]] = []
        self.rhs: list[float] = []
        self.labels: list[str] = []

    def add(self, label: str, coeffs: dict[int, float], rhs: float) -> None:
        self.coeffs.append(coeffs)
        self.rhs.append(float(rhs))
        self.labels.append(label)

    def to_csr(self, ncols: int) -> sparse.csr_matrix:
        rows, cols, vals = [], [], []
        for i, cf in enumerate(self.coeffs):
            for j, v in cf.items():
                if v != 0.0:
                    rows.append(i)
                    cols.append(j)
                    vals.append(v)
        return sparse.csr_matrix((vals, (rows, cols)),
                                 shape=(len(self.coeffs), ncols))


def _check_approx(s: Scenario, approx: CapacityApprox) -> None:
    if approx.shape != (s.num_links, s.num_subchannels):
        raise DimensionMismatchError(
            f"approximation shape {approx.shape} does not match scenario "
            f"({s.num_links}, {s.num_subchannels})")
    if approx.bandwidth != s.spectrum.bandwidth:
        raise DimensionMismatchError("approximation bandwidth differs from scenario")


def _cap_upper_bounds(approx: CapacityApprox) -> np.ndarray:
    """Largest capacity any pair can claim: the chord value at the top of
    the aggregate range minus the smallest possible interference estimate."""
    with np.errstate(divide="ignore", invalid="ignore"):
        u = approx.bandwidth * (np.log2(approx.s_max) - np.log2(approx.noise))
    return np.maximum(u, 0.0)


def _tau_upper_bounds(approx: CapacityApprox, trust: float) -> np.ndarray:
    return np.maximum(approx.noise, np.minimum(approx.t_max, trust * approx.t0))


def _delay_rows(s: Scenario, vi: VarIndex, rows: _Rows, opts: FormulationOptions) -> None:
    # Average-delay bounds: processing delay at each transmitting node,
    # weighted by the capacity routed through it, against the tolerable
    # delay times total demand.
    ul: dict[int, float] = {}
    for n, node in enumerate(s.nodes):
        for l in s.out_links[n]:
            ul[vi.c_ul(l)] = ul.get(vi.c_ul(l), 0.0) + node.proc_delay
    rows.add("delay_ul", ul, s.limits.delay_ul * s.total_rate_ul)

    dl: dict[int, float] = {}
    for n, node in enumerate(s.nodes):
        links = s.out_links[n] if opts.c5_dl_direction == AS_PRINTED else s.in_links[n]
        for l in links:
            dl[vi.c_dl(l)] = dl.get(vi.c_dl(l), 0.0) + node.proc_delay
    rows.add("delay_dl", dl, s.limits.delay_dl * s.total_rate_dl)


def _access_rows(s: Scenario, vi: VarIndex, rows: _Rows) -> None:
    for f in sorted(s.spectrum.access_subchannels):
        for n in range(s.num_nodes):
            coeffs = {vi.x(l, f): float(s.gains.to_access[l, n, f])
                      for l in range(s.num_links)}
            rows.add(f"access_interference[{f},{n}]", coeffs,
                     s.limits.interference_limit[n, f])


def _flow_rows(s: Scenario, vi: VarIndex, rows: _Rows, margin: float) -> None:
    for l, link in enumerate(s.links):
        coeffs = {vi.c_ul(l): 1.0 + margin, vi.c_dl(l): 1.0 + margin}
        for f in range(s.num_subchannels):
            coeffs[vi.c_cap(l, f)] = -1.0
        rows.add(f"flow_within_capacity[{l}]", coeffs, link.wired_capacity)


def _balance_rows(s: Scenario, vi: VarIndex) -> _Rows:
    eq = _Rows()
    for n in s.nonroot_indices:
        coeffs: dict[int, float] = {}
        for l in s.out_links[n]:
            coeffs[vi.c_ul(l)] = coeffs.get(vi.c_ul(l), 0.0) + 1.0
        for l in s.in_links[n]:
            coeffs[vi.c_ul(l)] = coeffs.get(vi.c_ul(l), 0.0) - 1.0
        eq.add(f"flow_balance_ul[{n}]", coeffs, s.nodes[n].rate_ul)
    for n in s.nonroot_indices:
        coeffs = {}
        for l in s.in_links[n]:
            coeffs[vi.c_dl(l)] = coeffs.get(vi.c_dl(l), 0.0) + 1.0
        for l in s.out_links[n]:
            coeffs[vi.c_dl(l)] = coeffs.get(vi.c_dl(l), 0.0) - 1.0
        eq.add(f"flow_balance_dl[{n}]", coeffs, s.nodes[n].rate_dl)
    col: dict[int, float] = {}
    for r in s.root_indices:
        for l in s.in_links[r]:
            col[vi.c_ul(l)] = col.get(vi.c_ul(l), 0.0) + 1.0
    eq.add("root_collection_ul", col, s.total_rate_ul)
    inj: dict[int, float] = {}
    for r in s.root_indices:
        for l in s.out_links[r]:
            inj[vi.c_dl(l)] = inj.get(vi.c_dl(l), 0.0) + 1.0
    eq.add("root_injection_dl", inj, s.total_rate_dl)
    return eq


def _capacity_rows(s: Scenario, vi: VarIndex, rows: _Rows,
                   approx: CapacityApprox, opts: FormulationOptions,
                   pairs, gated: bool) -> None:
    """Chord-minus-tangent capacity rows plus the aggregate definition.

    With gating, rows are relieved by big-M terms on the pair binary; the
    re-tune LP passes gated=False and emits the bare rows on its fixed
    pair set.
    """
    pad = opts.capacity_pad * approx.bandwidth
    t_allow = _tau_upper_bounds(approx, opts.tangent_trust)
    for (l, f) in pairs:
        w = float(approx.noise[l, f])
        t_span = float(approx.t_max[l, f] - w)
        if t_span > 0.0:
            coeffs = {}
            for a in range(s.num_links):
                g = float(approx.interference_coeffs[l, a, f])
                if g != 0.0:
                    coeffs[vi.x(a, f)] = g
            coeffs[vi.tau(l, f)] = -1.0
            if gated:
                coeffs[vi.z(l, f)] = t_span
                rows.add(f"interference_aggregate[{l},{f}]", coeffs, t_span - w)
            else:
                rows.add(f"interference_aggregate[{l},{f}]", coeffs, -w)

        slope_t = float(approx.tangent_slope[l, f])
        tan_int = float(approx.tangent_intercept[l, f])
        relief = slope_t * float(t_allow[l, f])
        for k in range(int(approx.num_pieces[l, f])):
            a_k = float(approx.piece_slopes[l, f, k])
            b_k = float(approx.piece_intercepts[l, f, k])
            rhs = b_k + a_k * w - tan_int + pad
            coeffs = {vi.c_cap(l, f): 1.0}
            for a in range(s.num_links):
                g = float(approx.signal_coeffs[l, a, f])
                if g != 0.0:
                    coeffs[vi.x(a, f)] = -a_k * g
            coeffs[vi.tau(l, f)] = slope_t
            if gated:
                big_m = max(0.0, relief - rhs) + 1.0
                coeffs[vi.z(l, f)] = big_m
                rows.add(f"capacity_chord[{l},{f},{k}]", coeffs, rhs + big_m)
            else:
                rows.add(f"capacity_chord[{l},{f},{k}]", coeffs, rhs)


def build_milp(s: Scenario, approx: CapacityApprox,
               opts: FormulationOptions | None = None) -> tuple[LinearProgram, VarIndex]:
    """The minimum-cost planning MILP around the given linearization."""
    opts = opts or FormulationOptions()
    _check_approx(s, approx)
    nl, nf = s.num_links, s.num_subchannels
    vi = VarIndex(nl, nf, with_activity=True)
    p_net = s.network_power_cap
    caps = np.asarray(s.link_power_caps)
    u_cap = _cap_upper_bounds(approx)
    t_allow = _tau_upper_bounds(approx, opts.tangent_trust)

    rows = _Rows()
    for l in range(nl):
        coeffs = {vi.x(l, f): 1.0 for f in range(nf)}
        coeffs[vi.j_link(l)] = -p_net
        rows.add(f"link_power_gate[{l}]", coeffs, 0.0)
    for f in range(nf):
        coeffs = {vi.x(l, f): 1.0 for l in range(nl)}
        coeffs[vi.j_sub(f)] = -p_net
        rows.add(f"subchannel_power_gate[{f}]", coeffs, 0.0)
    for l, link in enumerate(s.links):
        rows.add(f"link_power_cap[{l}]",
                 {vi.x(l, f): 1.0 for f in range(nf)}, link.p_max_link)
    for n, node in enumerate(s.nodes):
        coeffs = {vi.x(l, f): 1.0 for l in s.out_links[n] for f in range(nf)}
        rows.add(f"node_power_budget[{n}]", coeffs, node.power_budget)
    _delay_rows(s, vi, rows, opts)
    _access_rows(s, vi, rows)

    for l in range(nl):
        for f in range(nf):
            rows.add(f"pair_needs_link[{l},{f}]",
                     {vi.z(l, f): 1.0, vi.j_link(l): -1.0}, 0.0)
    for l in range(nl):
        for f in range(nf):
            rows.add(f"pair_needs_subchannel[{l},{f}]",
                     {vi.z(l, f): 1.0, vi.j_sub(f): -1.0}, 0.0)
    for l in range(nl):
        for f in range(nf):
            rows.add(f"power_needs_pair[{l},{f}]",
                     {vi.x(l, f): 1.0, vi.z(l, f): -float(caps[l])}, 0.0)
    for l in range(nl):
        for f in range(nf):
            rows.add(f"capacity_needs_pair[{l},{f}]",
                     {vi.c_cap(l, f): 1.0, vi.z(l, f): -float(u_cap[l, f])}, 0.0)

    all_pairs = [(l, f) for l in range(nl) for f in range(nf)]
    _capacity_rows(s, vi, rows, approx, opts, all_pairs, gated=True)
    _flow_rows(s, vi, rows, opts.capacity_margin)
    eq = _balance_rows(s, vi)

    n = vi.total
    lower = np.zeros(n)
    upper = np.zeros(n)
    for l in range(nl):
        for f in range(nf):
            upper[vi.x(l, f)] = caps[l]
            upper[vi.c_cap(l, f)] = u_cap[l, f]
            lower[vi.tau(l, f)] = approx.noise[l, f]
            upper[vi.tau(l, f)] = t_allow[l, f]
    for l in range(nl):
        upper[vi.c_ul(l)] = s.total_rate_ul
        upper[vi.c_dl(l)] = s.total_rate_dl
    integral = []
    for l in range(nl):
        upper[vi.j_link(l)] = 1.0
        integral.append(vi.j_link(l))
    for f in range(nf):
        upper[vi.j_sub(f)] = 1.0
        integral.append(vi.j_sub(f))
    for l in range(nl):
        for f in range(nf):
            upper[vi.z(l, f)] = 1.0
            integral.append(vi.z(l, f))

    c = np.zeros(n)
    for l in range(nl):
        for f in range(nf):
            c[vi.x(l, f)] = s.costs.per_watt
    for l in range(nl):
        c[vi.j_link(l)] = s.costs.per_link
    for f in range(nf):
        if f not in s.spectrum.access_subchannels:
            c[vi.j_sub(f)] = s.costs.per_subchannel

    lp = LinearProgram(
        c=c,
        a_le=rows.to_csr(n), b_le=np.asarray(rows.rhs),
        a_eq=eq.to_csr(n), b_eq=np.asarray(eq.rhs),
        lower=lower, upper=upper,
        integral=frozenset(integral),
        le_labels=tuple(rows.labels), eq_labels=tuple(eq.labels),
    )
    return lp, vi


def build_retune_lp(s: Scenario, fixed_links, fixed_subchannels,
                    approx: CapacityApprox, active_pairs=None,
                    opts: FormulationOptions | None = None) -> tuple[LinearProgram, VarIndex]:
    """The power re-tuning LP on a fixed topology.

    Transmission is confined to active_pairs (defaulting to every pair in
    fixed_links x fixed_subchannels); everything else has its power and
    capacity variables pinned to zero. No activation variables exist, so
    each subproblem is a plain LP.
    """
    opts = opts or FormulationOptions()
    _check_approx(s, approx)
    nl, nf = s.num_links, s.num_subchannels
    fixed_links = frozenset(int(l) for l in fixed_links)
    fixed_subchannels = frozenset(int(f) for f in fixed_subchannels)
    for l in fixed_links:
        if not 0 <= l < nl:
            raise ValueError(f"fixed link {l} is not a link index")
    for f in fixed_subchannels:
        if not 0 <= f < nf:
            raise ValueError(f"fixed subchannel {f} is not a subchannel index")
    if active_pairs is None:
        pairs = [(l, f) for l in sorted(fixed_links) for f in sorted(fixed_subchannels)]
    else:
        pairs = sorted((int(l), int(f)) for (l, f) in active_pairs)
        for (l, f) in pairs:
            if l not in fixed_links or f not in fixed_subchannels:
                raise ValueError(f"active pair ({l},{f}) lies outside the fixed sets")
    pair_set = set(pairs)

    vi = VarIndex(nl, nf, with_activity=False)
    caps = np.asarray(s.link_power_caps)
    u_cap = _cap_upper_bounds(approx)
    t_allow = _tau_upper_bounds(approx, opts.tangent_trust)

    rows = _Rows()
    for l, link in enumerate(s.links):
        rows.add(f"link_power_cap[{l}]",
                 {vi.x(l, f): 1.0 for f in range(nf)}, link.p_max_link)
    for n, node in enumerate(s.nodes):
        coeffs = {vi.x(l, f): 1.0 for l in s.out_links[n] for f in range(nf)}
        rows.add(f"node_power_budget[{n}]", coeffs, node.power_budget)
    _delay_rows(s, vi, rows, opts)
    _access_rows(s, vi, rows)
    _capacity_rows(s, vi, rows, approx, opts, pairs, gated=False)
    _flow_rows(s, vi, rows, opts.capacity_margin)
    eq = _balance_rows(s, vi)

    n = vi.total
    lower = np.zeros(n)
    upper = np.zeros(n)
    for l in range(nl):
        for f in range(nf):
            active = (l, f) in pair_set
            upper[vi.x(l, f)] = caps[l] if active else 0.0
            upper[vi.c_cap(l, f)] = u_cap[l, f] if active else 0.0
            lower[vi.tau(l, f)] = approx.noise[l, f]
            upper[vi.tau(l, f)] = t_allow[l, f] if active else approx.noise[l, f]
    for l in range(nl):
        upper[vi.c_ul(l)] = s.total_rate_ul
        upper[vi.c_dl(l)] = s.total_rate_dl

    c = np.zeros(n)
    for l in range(nl):
        for f in range(nf):
            c[vi.x(l, f)] = 1.0

    lp = LinearProgram(
        c=c,
        a_le=rows.to_csr(n), b_le=np.asarray(rows.rhs),
        a_eq=eq.to_csr(n), b_eq=np.asarray(eq.rhs),
        lower=lower, upper=upper,
        integral=frozenset(),
        le_labels=tuple(rows.labels), eq_labels=tuple(eq.labels),
    )
    return lp, vi


def extract_plan(s: Scenario, vi: VarIndex, x, int_tol: float = 1e-6,
                 active_links=None, active_subchannels=None) -> Plan:
    """Turn a solver vector into a Plan with exact capacities and costs.

    For the planning index the activation sets come from the binaries,
    which must sit within int_tol of 0 or 1. For the re-tune index the
    caller supplies the fixed activation sets.
    """
    x = np.asarray(x, dtype=float)
    if x.size != vi.total:
        raise DimensionMismatchError(
            f"solution length {x.size} does not match variable count {vi.total}")
    nl, nf = vi.num_links, vi.num_subchannels

    if vi.with_activity:
        active_links = set()
        active_subchannels = set()
        flat = [(vi.j_link(l), f"use_link[{l}]") for l in range(nl)]
        flat += [(vi.j_sub(f), f"use_sub[{f}]") for f in range(nf)]
        flat += [(vi.z(l, f), f"pair[{l},{f}]")
                 for l in range(nl) for f in range(nf)]
        for j, name in flat:
            v = x[j]
            if abs(v - round(v)) > int_tol:
                raise IntegralityError(f"{name} = {v!r} is not within "
                                       f"{int_tol} of an integer")
        for l in range(nl):
            if round(x[vi.j_link(l)]) == 1:
                active_links.add(l)
        for f in range(nf):
            if round(x[vi.j_sub(f)]) == 1:
                active_subchannels.add(f)
    elif active_links is None or active_subchannels is None:
        raise ValueError("re-tune extraction needs the fixed activation sets")

    powers = x[:nl * nf].reshape(nl, nf).copy()
    caps = np.asarray(s.link_power_caps)
    snap = 1e-11 * caps[:, None] if nl else 0.0
    powers[powers < snap] = 0.0
    np.clip(powers, 0.0, None, out=powers)
    for l in range(nl):
        if l not in active_links:
            powers[l, :] = 0.0
    for f in range(nf):
        if f not in active_subchannels:
            powers[:, f] = 0.0

    flow_ul = np.maximum(x[vi.c_ul(0):vi.c_ul(0) + nl] if nl else np.zeros(0), 0.0)
    flow_dl = np.maximum(x[vi.c_dl(0):vi.c_dl(0) + nl] if nl else np.zeros(0), 0.0)
    return model.assemble_plan(s, PowerVector(powers), flow_ul, flow_dl,
                               active_links, active_subchannels)


def write_lp_text(lp: LinearProgram, vi: VarIndex | None = None) -> str:
    """Plain-text dump of the program, one labeled row per line, for
    eyeballing or feeding to an external solver when cross-checking."""
    def vname(j: int) -> str:
        return vi.name(j) if vi is not None else f"x{j}"

    def term(coef: float, j: int) -> str:
        return f"{coef:+.17g} {vname(j)}"

    out = ["Minimize", " obj: " + " ".join(
        term(lp.c[j], j) for j in range(lp.num_vars) if lp.c[j] != 0.0)]
    out.append("Subject To")
    a_le = lp.a_le.tocsr()
    for i, label in enumerate(lp.le_labels):
        start, end = a_le.indptr[i], a_le.indptr[i + 1]
        terms = " ".join(term(a_le.data[k], a_le.indices[k])
                         for k in range(start, end))
        out.append(f" {label}: {terms} <= {lp.b_le[i]:.17g}")
    a_eq = lp.a_eq.tocsr()
    for i, label in enumerate(lp.eq_labels):
        start, end = a_eq.indptr[i], a_eq.indptr[i + 1]
        terms = " ".join(term(a_eq.data[k], a_eq.indices[k])
                         for k in range(start, end))
        out.append(f" {label}: {terms} = {lp.b_eq[i]:.17g}")
    out.append("Bounds")
    for j in range(lp.num_vars):
        up = f"{lp.upper[j]:.17g}" if math.isfinite(lp.upper[j]) else "+inf"
        out.append(f" {lp.lower[j]:.17g} <= {vname(j)} <= {up}")
    ints = sorted(lp.integral)
    if ints:
        out.append("Binaries")
        out.append(" " + " ".join(vname(j) for j in ints))
    out.append("End")
    return "\n".join(out) + "\n"
