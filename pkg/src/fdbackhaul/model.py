"""Domain model for wireless backhaul planning.

A Scenario bundles the physical-layer data: nodes, candidate directed links,
spectrum, channel gains, cost weights, and operating limits. PowerVector and
Plan are the decision objects. The functions in this module evaluate the
exact nonlinear SINR, capacity, and cost expressions; everything downstream
is an approximation that gets checked against these.

Units are SI throughout: watts, Hz, bits/s, seconds. Gains are linear power
ratios; dB is accepted only at the file-format boundary and converted on
parse.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DimensionMismatchError

ROOT = "root"
NONROOT = "nonroot"

#: Thermal noise density in W/Hz, roughly -174 dBm/Hz. Used to fill in noise
#: power (density times subchannel bandwidth) when a scenario omits it.
DEFAULT_NOISE_DENSITY = 4e-21


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Node:
    """A backhaul node. Roots reach the core over fiber, the rest by radio.

    Rate demands on root nodes are meaningless (roots sink and source
    traffic via their wired side); the parser zeroes them out.
    """

    id: int
    kind: str
    position: tuple[float, float, float] = (0.0, 0.0, 0.0)
    proc_delay: float = 0.0
    power_budget: float = 1.0
    rate_ul: float = 0.0
    rate_dl: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(v) for v in self.position))


@dataclass(frozen=True)
class Link:
    """A directed candidate wireless link, possibly with a wired component."""

    from_node: int
    to_node: int
    p_max_link: float
    wired_capacity: float = 0.0


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Frequency plan: equal-bandwidth subchannels, some shared with access.

    noise_power is the receiver noise in watts per (link, subchannel).
    Subchannels listed in access_subchannels are shared with the access
    network: they carry no spectrum cost but are subject to the
    interference limit.
    """

    num_subchannels: int
    bandwidth: float
    access_subchannels: frozenset[int]
    noise_power: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "access_subchannels", frozenset(int(f) for f in self.access_subchannels))
        object.__setattr__(self, "noise_power", _frozen_array(self.noise_power))


@dataclass(frozen=True, eq=False)
class Gains:
    """Linear channel power gains.

    direct[link][f]: desired-path gain of each link.
    cross[victim][aggressor][f]: interference gain from the aggressor link's
        transmitter into the victim link's receiver. Entries where the
        aggressor transmits at the node where the victim receives encode
        residual self-interference after cancellation. The diagonal
        cross[l][l][f] is unused; the desired path is always direct[l][f].
    to_access[link][node][f]: gain from each link's transmitter into the
        access network around each node, used for the interference limit.
    """

    direct: np.ndarray
    cross: np.ndarray
    to_access: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "direct", _frozen_array(self.direct))
        object.__setattr__(self, "cross", _frozen_array(self.cross))
        object.__setattr__(self, "to_access", _frozen_array(self.to_access))


@dataclass(frozen=True)
class CostWeights:
    """Prices for the three cost components."""

    per_watt: float
    per_link: float
    per_subchannel: float


@dataclass(frozen=True, eq=False)
class Limits:
    """Operating limits: access interference ceiling and delay bounds.

    interference_limit is indexed [node][subchannel]; only the columns of
    subchannels shared with the access network are enforced.
    """

    interference_limit: np.ndarray
    delay_ul: float
    delay_dl: float

    def __post_init__(self):
        object.__setattr__(self, "interference_limit", _frozen_array(self.interference_limit))


@dataclass(frozen=True, eq=False)
class Scenario:
    """A complete planning instance. Immutable; helpers are cached."""

    nodes: tuple[Node, ...]
    links: tuple[Link, ...]
    spectrum: Spectrum
    gains: Gains
    costs: CostWeights
    limits: Limits

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "links", tuple(self.links))

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_links(self) -> int:
        return len(self.links)

    @property
    def num_subchannels(self) -> int:
        return self.spectrum.num_subchannels

    @cached_property
    def root_indices(self) -> tuple[int, ...]:
        return tuple(i for i, n in enumerate(self.nodes) if n.kind == ROOT)

    @cached_property
    def nonroot_indices(self) -> tuple[int, ...]:
        return tuple(i for i, n in enumerate(self.nodes) if n.kind != ROOT)

    @cached_property
    def out_links(self) -> tuple[tuple[int, ...], ...]:
        """Link indices leaving each node, indexed by node position."""
        out: list[list[int]] = [[] for _ in self.nodes]
        for l, link in enumerate(self.links):
            out[link.from_node].append(l)
        return tuple(tuple(ls) for ls in out)

    @cached_property
    def in_links(self) -> tuple[tuple[int, ...], ...]:
        inc: list[list[int]] = [[] for _ in self.nodes]
        for l, link in enumerate(self.links):
            inc[link.to_node].append(l)
        return tuple(tuple(ls) for ls in inc)

    @cached_property
    def link_power_caps(self) -> np.ndarray:
        """Largest power any single (link, subchannel) variable may carry:
        the link's own limit or its transmitter's budget, whichever binds."""
        caps = [min(lk.p_max_link, self.nodes[lk.from_node].power_budget) for lk in self.links]
        return _frozen_array(caps)

    @cached_property
    def network_power_cap(self) -> float:
        """Sum of all node budgets; upper bound on total network power."""
        return float(sum(n.power_budget for n in self.nodes))

    @cached_property
    def total_rate_ul(self) -> float:
        return float(sum(self.nodes[i].rate_ul for i in self.nonroot_indices))

    @cached_property
    def total_rate_dl(self) -> float:
        return float(sum(self.nodes[i].rate_dl for i in self.nonroot_indices))


@dataclass(frozen=True, eq=False)
class PowerVector:
    """Transmit power in watts per (link, subchannel)."""

    watts: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "watts", _frozen_array(self.watts))

    @classmethod
    def zeros(cls, num_links: int, num_subchannels: int) -> "PowerVector":
        return cls(np.zeros((num_links, num_subchannels)))

    @property
    def total(self) -> float:
        return float(self.watts.sum())


@dataclass(frozen=True, eq=False)
class Plan:
    """A full decision assignment plus its exact evaluation.

    exact_capacities comes from the nonlinear capacity expression, not from
    any solver approximation, so flows can be checked against reality.
    feasible is None until a validation pass stamps it.
    """

    powers: PowerVector
    flow_ul: np.ndarray
    flow_dl: np.ndarray
    active_links: frozenset[int]
    active_subchannels: frozenset[int]
    exact_capacities: np.ndarray
    cost_power: float
    cost_link: float
    cost_spectrum: float
    cost_total: float
    feasible: bool | None = None

    def __post_init__(self):
        object.__setattr__(self, "flow_ul", _frozen_array(self.flow_ul))
        object.__setattr__(self, "flow_dl", _frozen_array(self.flow_dl))
        object.__setattr__(self, "exact_capacities", _frozen_array(self.exact_capacities))
        object.__setattr__(self, "active_links", frozenset(int(l) for l in self.active_links))
        object.__setattr__(self, "active_subchannels", frozenset(int(f) for f in self.active_subchannels))


@dataclass(frozen=True)
class Violation:
    """One broken invariant, reported as data rather than an exception."""

    field: str
    index: tuple
    rule: str

    def __str__(self) -> str:
        where = "".join(f"[{i}]" for i in self.index)
        return f"{self.field}{where}: {self.rule}"


def default_noise(num_links: int, num_subchannels: int, bandwidth: float,
                  density: float = DEFAULT_NOISE_DENSITY) -> np.ndarray:
    """Noise power matrix from a flat spectral density."""
    return np.full((num_links, num_subchannels), density * bandwidth)


def _check_power_shape(s: Scenario, p: PowerVector) -> None:
    expected = (s.num_links, s.num_subchannels)
    if p.watts.shape != expected:
        raise DimensionMismatchError(
            f"power vector shape {p.watts.shape} does not match scenario shape {expected}")


def sinr(s: Scenario, p: PowerVector, link: int, f: int) -> float:
    """Exact signal to interference-plus-noise ratio of one link on one
    subchannel. Interference sums over every other link transmitting on the
    same subchannel; residual self-interference rides along through the
    cross-gain entries of co-located links."""
    _check_power_shape(s, p)
    if not 0 <= link < s.num_links:
        raise IndexError(f"link index {link} out of range for {s.num_links} links")
    if not 0 <= f < s.num_subchannels:
        raise IndexError(f"subchannel index {f} out of range for {s.num_subchannels} subchannels")
    x = p.watts
    signal = s.gains.direct[link, f] * x[link, f]
    row = s.gains.cross[link, :, f]
    interference = float(row @ x[:, f]) - float(row[link] * x[link, f])
    return float(signal / (interference + s.spectrum.noise_power[link, f]))


def link_capacity(s: Scenario, p: PowerVector, link: int, f: int) -> float:
    """Achievable rate of one link on one subchannel, bits/s."""
    return float(s.spectrum.bandwidth * np.log2(1.0 + sinr(s, p, link, f)))


def capacity_matrix(s: Scenario, p: PowerVector) -> np.ndarray:
    """Exact capacities for all (link, subchannel) pairs at once."""
    _check_power_shape(s, p)
    x = p.watts
    if s.num_links == 0:
        return np.zeros((0, s.num_subchannels))
    received = np.einsum("vaf,af->vf", s.gains.cross, x)
    own = np.einsum("llf->lf", s.gains.cross) * x
    interference = received - own
    gamma = (s.gains.direct * x) / (interference + s.spectrum.noise_power)
    return s.spectrum.bandwidth * np.log2(1.0 + gamma)


def self_interference_pairs(s: Scenario) -> tuple[tuple[int, int], ...]:
    """All ordered (aggressor, victim) link-index pairs where the aggressor
    transmits at the node where the victim receives. These are the entries
    of the cross-gain tensor that model residual self-interference."""
    pairs = []
    for a, agg in enumerate(s.links):
        for b, vic in enumerate(s.links):
            if a != b and agg.from_node == vic.to_node:
                pairs.append((a, b))
    return tuple(pairs)


def network_cost(s: Scenario, plan: Plan) -> float:
    """Deployment cost: power price plus per-link and per-subchannel fees.
    Subchannels shared with the access network are free of the spectrum fee."""
    _check_power_shape(s, plan.powers)
    exclusive = sum(1 for f in plan.active_subchannels
                    if f not in s.spectrum.access_subchannels)
    return (s.costs.per_watt * plan.powers.total
            + s.costs.per_link * len(plan.active_links)
            + s.costs.per_subchannel * exclusive)


def assemble_plan(s: Scenario, powers: PowerVector, flow_ul, flow_dl,
                  active_links, active_subchannels,
                  feasible: bool | None = None) -> Plan:
    """Build a Plan with exact capacities and the cost breakdown filled in."""
    _check_power_shape(s, powers)
    active_links = frozenset(int(l) for l in active_links)
    active_subchannels = frozenset(int(f) for f in active_subchannels)
    exclusive = sum(1 for f in active_subchannels
                    if f not in s.spectrum.access_subchannels)
    cost_power = s.costs.per_watt * powers.total
    cost_link = s.costs.per_link * len(active_links)
    cost_spectrum = s.costs.per_subchannel * exclusive
    return Plan(
        powers=powers,
        flow_ul=np.asarray(flow_ul, dtype=float),
        flow_dl=np.asarray(flow_dl, dtype=float),
        active_links=active_links,
        active_subchannels=active_subchannels,
        exact_capacities=capacity_matrix(s, powers),
        cost_power=float(cost_power),
        cost_link=float(cost_link),
        cost_spectrum=float(cost_spectrum),
        cost_total=float(cost_power + cost_link + cost_spectrum),
        feasible=feasible,
    )


def empty_plan(s: Scenario, feasible: bool | None = None) -> Plan:
    """The all-zero plan: nothing transmits, nothing is activated."""
    return assemble_plan(
        s, PowerVector.zeros(s.num_links, s.num_subchannels),
        np.zeros(s.num_links), np.zeros(s.num_links),
        frozenset(), frozenset(), feasible=feasible)


def _flag_entries(violations: list[Violation], field: str, arr: np.ndarray,
                  bad_mask: np.ndarray, rule: str, limit: int = 8) -> None:
    # Cap the number of reported entries so a malformed large array does not
    # flood the report.
    idx = np.argwhere(bad_mask)
    for where in idx[:limit]:
        violations.append(Violation(field, tuple(int(i) for i in where), rule))
    if len(idx) > limit:
        violations.append(Violation(field, (), f"... {len(idx) - limit} more entries break the same rule"))


def validate_scenario(s: Scenario) -> list[Violation]:
    """Check every structural invariant of a scenario.

    Returns an empty list when the scenario is well formed. Demand
    satisfiability is deliberately not checked here; infeasibility is a
    legal solver outcome, not a type error.
    """
    v: list[Violation] = []
    n_nodes = len(s.nodes)
    n_links = len(s.links)
    nf = s.spectrum.num_subchannels

    if not any(n.kind == ROOT for n in s.nodes):
        v.append(Violation("nodes", (), "at least one root node is required"))
    for i, node in enumerate(s.nodes):
        if node.id != i:
            v.append(Violation("nodes", (i,), f"id {node.id} must equal list position {i}"))
        if node.kind not in (ROOT, NONROOT):
            v.append(Violation("nodes", (i,), f"kind must be {ROOT!r} or {NONROOT!r}, got {node.kind!r}"))
        if len(node.position) != 3:
            v.append(Violation("nodes", (i,), "position must have 3 coordinates"))
        if node.proc_delay < 0:
            v.append(Violation("nodes", (i,), "proc_delay must be >= 0"))
        if node.power_budget <= 0:
            v.append(Violation("nodes", (i,), "power_budget must be > 0"))
        if node.rate_ul < 0:
            v.append(Violation("nodes", (i,), "rate_ul must be >= 0"))
        if node.rate_dl < 0:
            v.append(Violation("nodes", (i,), "rate_dl must be >= 0"))

    seen_pairs = set()
    for l, link in enumerate(s.links):
        if link.from_node == link.to_node:
            v.append(Violation("links", (l,), "from_node and to_node must differ"))
        for end in (link.from_node, link.to_node):
            if not 0 <= end < n_nodes:
                v.append(Violation("links", (l,), f"endpoint {end} is not a node index"))
        if link.p_max_link <= 0:
            v.append(Violation("links", (l,), "p_max_link must be > 0"))
        if link.wired_capacity < 0:
            v.append(Violation("links", (l,), "wired_capacity must be >= 0"))
        pair = (link.from_node, link.to_node)
        if pair in seen_pairs:
            v.append(Violation("links", (l,), f"duplicate directed link {pair}"))
        seen_pairs.add(pair)

    sp = s.spectrum
    if sp.bandwidth <= 0:
        v.append(Violation("spectrum", (), "bandwidth must be > 0"))
    for f in sorted(sp.access_subchannels):
        if not 0 <= f < nf:
            v.append(Violation("spectrum", (f,), "access subchannel index out of range"))
    if sp.noise_power.shape != (n_links, nf):
        v.append(Violation("noise_power", (),
                           f"shape {sp.noise_power.shape} must be ({n_links}, {nf})"))
    else:
        _flag_entries(v, "noise_power", sp.noise_power, sp.noise_power <= 0, "must be > 0")

    g = s.gains
    shapes = (("direct", g.direct, (n_links, nf)),
              ("cross", g.cross, (n_links, n_links, nf)),
              ("to_access", g.to_access, (n_links, n_nodes, nf)))
    for name, arr, want in shapes:
        if arr.shape != want:
            v.append(Violation(name, (), f"shape {arr.shape} must be {want}"))
            continue
        _flag_entries(v, name, arr, arr < 0, "must be >= 0")
        if name == "direct":
            _flag_entries(v, name, arr, arr <= 0, "must be > 0 on every candidate link")

    if s.costs.per_watt < 0:
        v.append(Violation("costs", (), "per_watt must be >= 0"))
    if s.costs.per_link < 0:
        v.append(Violation("costs", (), "per_link must be >= 0"))
    if s.costs.per_subchannel < 0:
        v.append(Violation("costs", (), "per_subchannel must be >= 0"))

    lim = s.limits
    if lim.interference_limit.shape != (n_nodes, nf):
        v.append(Violation("interference_limit", (),
                           f"shape {lim.interference_limit.shape} must be ({n_nodes}, {nf})"))
    else:
        _flag_entries(v, "interference_limit", lim.interference_limit,
                      lim.interference_limit <= 0, "must be > 0")
    if lim.delay_ul <= 0:
        v.append(Violation("limits", (), "delay_ul must be > 0"))
    if lim.delay_dl <= 0:
        v.append(Violation("limits", (), "delay_dl must be > 0"))

    return v
