"""Scenario and plan documents, plus the synthetic scenario generator.

Documents are JSON with unit-suffixed field names. Dimensionless gain
entries may be given either as plain linear ratios or as strings like
"-110 dB"; they are always written back in linear form. Serialization is
canonical (sorted keys, two-space indent, no timestamps), so identical
inputs produce byte-identical documents.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass

import numpy as np

from . import model
from .errors import GenerationError, ScenarioFormatError
from .model import (CostWeights, Gains, Limits, Link, Node, Plan, PowerVector,
                    Scenario, Spectrum)

SPEED_OF_LIGHT = 299792458.0

_DB_RE = re.compile(r"^\s*([-+]?[0-9.]+(?:[eE][-+]?[0-9]+)?)\s*dB\s*$")


def _fail(path: str, msg: str) -> None:
    raise ScenarioFormatError(f"{path}: {msg}")


def _get(obj, key: str, path: str):
    if not isinstance(obj, dict):
        _fail(path, "expected an object")
    if key not in obj:
        _fail(path, f"missing key {key!r}")
    return obj[key]


def _number(v, path: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        _fail(path, f"expected a number, got {type(v).__name__}")
    out = float(v)
    if not math.isfinite(out):
        _fail(path, "expected a finite number")
    return out


def _integer(v, path: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        _fail(path, f"expected an integer, got {type(v).__name__}")
    return v


def _gain_value(v, path: str) -> float:
    """Linear ratio, or a '<value> dB' string converted to linear."""
    if isinstance(v, str):
        m = _DB_RE.match(v)
        if not m:
            _fail(path, f"expected a number or '<value> dB', got {v!r}")
        return 10.0 ** (float(m.group(1)) / 10.0)
    return _number(v, path)


def _gain_array(v, path: str, shape: tuple[int, ...]) -> np.ndarray:
    if not isinstance(v, list):
        _fail(path, "expected a list")
    if len(v) != shape[0]:
        _fail(path, f"expected {shape[0]} entries, got {len(v)}")
    if len(shape) == 1:
        out = np.array([_gain_value(e, f"{path}[{i}]") for i, e in enumerate(v)])
    else:
        out = np.array([_gain_array(e, f"{path}[{i}]", shape[1:])
                        for i, e in enumerate(v)])
    # an empty leading axis loses the trailing dimensions
    return out.reshape(shape) if out.size == 0 else out


def _float_array(v, path: str, shape: tuple[int, ...]) -> np.ndarray:
    if not isinstance(v, list):
        _fail(path, "expected a list")
    if len(v) != shape[0]:
        _fail(path, f"expected {shape[0]} entries, got {len(v)}")
    if len(shape) == 1:
        out = np.array([_number(e, f"{path}[{i}]") for i, e in enumerate(v)])
    else:
        out = np.array([_float_array(e, f"{path}[{i}]", shape[1:])
                        for i, e in enumerate(v)])
    return out.reshape(shape) if out.size == 0 else out


def _loads(data) -> dict:
    if isinstance(data, bytes):
        data = data.decode("utf-8", errors="replace")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ScenarioFormatError(
            f"malformed document at byte {exc.pos}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ScenarioFormatError("top level: expected an object")
    return doc


def parse_scenario(data, validate: bool = True) -> Scenario:
    """Parse a scenario document, enforcing model invariants by default.

    Demand fields on root nodes are forced to zero: roots terminate the
    wired side and never source or sink over-the-air demand themselves.
    With validate=False only the schema is enforced, so callers can run
    validate_scenario themselves and report violations as data.
    """
    doc = _loads(data)

    raw_nodes = _get(doc, "nodes", "scenario")
    if not isinstance(raw_nodes, list) or not raw_nodes:
        _fail("nodes", "expected a non-empty list")
    nodes = []
    for i, nd in enumerate(raw_nodes):
        path = f"nodes[{i}]"
        kind = _get(nd, "kind", path)
        if kind not in (model.ROOT, model.NONROOT):
            _fail(f"{path}.kind", f"expected 'root' or 'nonroot', got {kind!r}")
        pos = _float_array(_get(nd, "position_m", path), f"{path}.position_m", (3,))
        is_root = kind == model.ROOT
        nodes.append(Node(
            id=_integer(_get(nd, "id", path), f"{path}.id"),
            kind=kind,
            position=tuple(float(p) for p in pos),
            proc_delay=_number(_get(nd, "proc_delay_s", path), f"{path}.proc_delay_s"),
            power_budget=_number(_get(nd, "power_budget_w", path),
                                 f"{path}.power_budget_w"),
            rate_ul=0.0 if is_root else _number(_get(nd, "rate_ul_bps", path),
                                                f"{path}.rate_ul_bps"),
            rate_dl=0.0 if is_root else _number(_get(nd, "rate_dl_bps", path),
                                                f"{path}.rate_dl_bps"),
        ))

    raw_links = _get(doc, "links", "scenario")
    if not isinstance(raw_links, list):
        _fail("links", "expected a list")
    links = []
    for i, lk in enumerate(raw_links):
        path = f"links[{i}]"
        links.append(Link(
            from_node=_integer(_get(lk, "from", path), f"{path}.from"),
            to_node=_integer(_get(lk, "to", path), f"{path}.to"),
            p_max_link=_number(_get(lk, "p_max_link_w", path), f"{path}.p_max_link_w"),
            wired_capacity=_number(_get(lk, "wired_capacity_bps", path),
                                   f"{path}.wired_capacity_bps"),
        ))

    nl, nn = len(links), len(nodes)
    raw_spec = _get(doc, "spectrum", "scenario")
    nf = _integer(_get(raw_spec, "num_subchannels", "spectrum"),
                  "spectrum.num_subchannels")
    if nf <= 0:
        _fail("spectrum.num_subchannels", "expected a positive count")
    bandwidth = _number(_get(raw_spec, "bandwidth_hz", "spectrum"),
                        "spectrum.bandwidth_hz")
    raw_access = _get(raw_spec, "access_subchannels", "spectrum")
    if not isinstance(raw_access, list):
        _fail("spectrum.access_subchannels", "expected a list")
    access = frozenset(_integer(f, f"spectrum.access_subchannels[{i}]")
                       for i, f in enumerate(raw_access))
    if "noise_power_w" in raw_spec:
        noise = _float_array(raw_spec["noise_power_w"],
                             "spectrum.noise_power_w", (nl, nf))
    else:
        noise = model.default_noise(nl, nf, bandwidth)
    spectrum = Spectrum(num_subchannels=nf, bandwidth=bandwidth,
                        access_subchannels=access, noise_power=noise)

    raw_gains = _get(doc, "gains", "scenario")
    gains = Gains(
        direct=_gain_array(_get(raw_gains, "direct", "gains"),
                           "gains.direct", (nl, nf)),
        cross=_gain_array(_get(raw_gains, "cross", "gains"),
                          "gains.cross", (nl, nl, nf)),
        to_access=_gain_array(_get(raw_gains, "to_access", "gains"),
                              "gains.to_access", (nl, nn, nf)),
    )

    raw_costs = _get(doc, "costs", "scenario")
    costs = CostWeights(
        per_watt=_number(_get(raw_costs, "per_watt", "costs"), "costs.per_watt"),
        per_link=_number(_get(raw_costs, "per_link", "costs"), "costs.per_link"),
        per_subchannel=_number(_get(raw_costs, "per_subchannel", "costs"),
                               "costs.per_subchannel"),
    )

    raw_limits = _get(doc, "limits", "scenario")
    limits = Limits(
        interference_limit=_float_array(
            _get(raw_limits, "interference_limit_w", "limits"),
            "limits.interference_limit_w", (nn, nf)),
        delay_ul=_number(_get(raw_limits, "delay_ul_s", "limits"), "limits.delay_ul_s"),
        delay_dl=_number(_get(raw_limits, "delay_dl_s", "limits"), "limits.delay_dl_s"),
    )

    s = Scenario(nodes=tuple(nodes), links=tuple(links), spectrum=spectrum,
                 gains=gains, costs=costs, limits=limits)
    if validate:
        violations = model.validate_scenario(s)
        if violations:
            shown = "; ".join(str(v) for v in violations[:5])
            more = (f" (and {len(violations) - 5} more)"
                    if len(violations) > 5 else "")
            raise ScenarioFormatError(f"invalid scenario: {shown}{more}")
    return s


def _nested(arr: np.ndarray):
    if arr.ndim == 1:
        return [float(v) for v in arr]
    return [_nested(row) for row in arr]


def _dump(doc: dict) -> bytes:
    return (json.dumps(doc, sort_keys=True, indent=2) + "\n").encode("utf-8")


def write_scenario(s: Scenario) -> bytes:
    doc = {
        "nodes": [{
            "id": n.id,
            "kind": n.kind,
            "position_m": [float(p) for p in n.position],
            "proc_delay_s": float(n.proc_delay),
            "power_budget_w": float(n.power_budget),
            "rate_ul_bps": float(n.rate_ul),
            "rate_dl_bps": float(n.rate_dl),
        } for n in s.nodes],
        "links": [{
            "from": lk.from_node,
            "to": lk.to_node,
            "p_max_link_w": float(lk.p_max_link),
            "wired_capacity_bps": float(lk.wired_capacity),
        } for lk in s.links],
        "spectrum": {
            "num_subchannels": s.spectrum.num_subchannels,
            "bandwidth_hz": float(s.spectrum.bandwidth),
            "access_subchannels": sorted(s.spectrum.access_subchannels),
            "noise_power_w": _nested(s.spectrum.noise_power),
        },
        "gains": {
            "direct": _nested(s.gains.direct),
            "cross": _nested(s.gains.cross),
            "to_access": _nested(s.gains.to_access),
        },
        "costs": {
            "per_watt": float(s.costs.per_watt),
            "per_link": float(s.costs.per_link),
            "per_subchannel": float(s.costs.per_subchannel),
        },
        "limits": {
            "interference_limit_w": _nested(s.limits.interference_limit),
            "delay_ul_s": float(s.limits.delay_ul),
            "delay_dl_s": float(s.limits.delay_dl),
        },
    }
    return _dump(doc)


def write_plan(p: Plan, trace=None, validation=None) -> bytes:
    doc = {
        "powers": _nested(p.powers.watts),
        "flow_ul": _nested(p.flow_ul),
        "flow_dl": _nested(p.flow_dl),
        "active_links": sorted(p.active_links),
        "active_subchannels": sorted(p.active_subchannels),
        "exact_capacities": _nested(p.exact_capacities),
        "cost_breakdown": {
            "power": float(p.cost_power),
            "link": float(p.cost_link),
            "spectrum": float(p.cost_spectrum),
            "total": float(p.cost_total),
        },
    }
    if p.feasible is not None:
        doc["feasible"] = bool(p.feasible)
    if trace is not None:
        doc["trace"] = trace
    if validation is not None:
        doc["validation"] = validation
    return _dump(doc)


def parse_plan(data, scenario: Scenario | None = None) -> Plan:
    """Parse a plan document; with a scenario, cross-check dimensions and
    index ranges and recompute capacities and costs from the powers."""
    doc = _loads(data)
    raw_powers = _get(doc, "powers", "plan")
    if not isinstance(raw_powers, list):
        _fail("plan.powers", "expected a list")
    nl = len(raw_powers)
    nf = len(raw_powers[0]) if nl and isinstance(raw_powers[0], list) else 0
    if scenario is not None:
        if nl != scenario.num_links:
            _fail("plan.powers", f"expected {scenario.num_links} link rows, got {nl}")
        nf = scenario.num_subchannels
    powers = (_float_array(raw_powers, "plan.powers", (nl, nf))
              if nl else np.zeros((0, max(nf, 0))))

    flow_ul = _float_array(_get(doc, "flow_ul", "plan"), "plan.flow_ul", (nl,))
    flow_dl = _float_array(_get(doc, "flow_dl", "plan"), "plan.flow_dl", (nl,))
    raw_al = _get(doc, "active_links", "plan")
    raw_af = _get(doc, "active_subchannels", "plan")
    if not isinstance(raw_al, list) or not isinstance(raw_af, list):
        _fail("plan.active_links", "expected lists of indices")
    active_links = {_integer(v, f"plan.active_links[{i}]")
                    for i, v in enumerate(raw_al)}
    active_subchannels = {_integer(v, f"plan.active_subchannels[{i}]")
                          for i, v in enumerate(raw_af)}
    for l in active_links:
        if not 0 <= l < nl:
            _fail("plan.active_links", f"link {l} is out of range")
    for f in active_subchannels:
        if not 0 <= f < nf:
            _fail("plan.active_subchannels", f"subchannel {f} is out of range")

    feasible = doc.get("feasible")
    if feasible is not None and not isinstance(feasible, bool):
        _fail("plan.feasible", "expected a boolean")

    if scenario is not None:
        return model.assemble_plan(scenario, PowerVector(powers), flow_ul,
                                   flow_dl, active_links, active_subchannels,
                                   feasible=feasible)

    cb = _get(doc, "cost_breakdown", "plan")
    caps = _float_array(_get(doc, "exact_capacities", "plan"),
                        "plan.exact_capacities", (nl, nf))
    return Plan(
        powers=PowerVector(powers),
        flow_ul=model._frozen_array(flow_ul),
        flow_dl=model._frozen_array(flow_dl),
        active_links=frozenset(active_links),
        active_subchannels=frozenset(active_subchannels),
        exact_capacities=model._frozen_array(caps),
        cost_power=_number(_get(cb, "power", "plan.cost_breakdown"),
                           "plan.cost_breakdown.power"),
        cost_link=_number(_get(cb, "link", "plan.cost_breakdown"),
                          "plan.cost_breakdown.link"),
        cost_spectrum=_number(_get(cb, "spectrum", "plan.cost_breakdown"),
                              "plan.cost_breakdown.spectrum"),
        cost_total=_number(_get(cb, "total", "plan.cost_breakdown"),
                           "plan.cost_breakdown.total"),
        feasible=feasible,
    )


@dataclass(frozen=True)
class GeneratorParams:
    """Parametric stand-in for site-specific propagation data.

    Path gain on the desired path uses boresight antenna gains at both
    ends; interference paths between distinct links use sidelobe gains;
    residual self-interference entries are a flat attenuation ratio.
    """

    num_nonroot: int
    num_root: int = 1
    area_side: float = 500.0
    max_link_distance: float = 200.0
    carrier_freq: float = 60e9
    pathloss_exponent: float = 2.5
    tx_antenna_gain_boresight: float = 1000.0
    antenna_gain_sidelobe: float = 0.01
    sic_attenuation: float = 1e-10
    seed: int = 0
    num_subchannels: int = 4
    num_access_subchannels: int = 1
    bandwidth: float = 1e7
    demand_low: float = 2e7
    demand_high: float = 1e8
    budget_low: float = 0.5
    budget_high: float = 2.0
    p_max_link: float = 1.0
    wired_capacity: float = 0.0
    proc_delay: float = 1e-3
    delay_ul: float = 2e-2
    delay_dl: float = 2e-2
    interference_limit: float = 1e-9
    w_power: float = 1.0
    w_link: float = 10.0
    w_spectrum: float = 100.0


def path_gain(distance: float, carrier_freq: float, pathloss_exponent: float,
              gain_product: float) -> float:
    """Free-space gain at the carrier, extended beyond one meter with the
    configured path-loss exponent. Distances are clamped to one meter so
    co-located antennas do not produce unbounded gain."""
    d = max(float(distance), 1.0)
    friis = (SPEED_OF_LIGHT / (4.0 * math.pi * d * carrier_freq)) ** 2
    return gain_product * friis * d ** (2.0 - pathloss_exponent)


def generate_synthetic(params: GeneratorParams) -> Scenario:
    """Deterministic synthetic scenario from a seeded PCG64 stream.

    Draw order (documented so fixtures can be reproduced elsewhere):
    positions as a (num_nodes, 2) uniform block over the square, then
    power budgets, then uplink demands, then downlink demands.
    """
    if params.num_root < 1:
        raise ValueError("at least one root node is required")
    if params.num_nonroot < 0:
        raise ValueError("num_nonroot must be non-negative")
    if not params.max_link_distance > 0:
        raise ValueError("max_link_distance must be positive")
    if params.pathloss_exponent < 2.0:
        raise ValueError("pathloss_exponent must be at least 2")
    if not 0.0 <= params.sic_attenuation <= 1.0:
        raise ValueError("sic_attenuation must lie in [0, 1]")
    if params.num_access_subchannels > params.num_subchannels:
        raise ValueError("more access subchannels than subchannels")

    rng = np.random.Generator(np.random.PCG64(params.seed))
    nn = params.num_root + params.num_nonroot
    xy = rng.uniform(0.0, params.area_side, size=(nn, 2))
    budgets = rng.uniform(params.budget_low, params.budget_high, size=nn)
    dem_ul = rng.uniform(params.demand_low, params.demand_high,
                         size=params.num_nonroot)
    dem_dl = rng.uniform(params.demand_low, params.demand_high,
                         size=params.num_nonroot)

    nodes = []
    for i in range(nn):
        is_root = i < params.num_root
        nodes.append(Node(
            id=i,
            kind=model.ROOT if is_root else model.NONROOT,
            position=(float(xy[i, 0]), float(xy[i, 1]), 0.0),
            proc_delay=params.proc_delay,
            power_budget=float(budgets[i]),
            rate_ul=0.0 if is_root else float(dem_ul[i - params.num_root]),
            rate_dl=0.0 if is_root else float(dem_dl[i - params.num_root]),
        ))

    def dist(i: int, j: int) -> float:
        return float(np.hypot(xy[i, 0] - xy[j, 0], xy[i, 1] - xy[j, 1]))

    links = []
    for i in range(nn):
        for j in range(nn):
            if i != j and dist(i, j) <= params.max_link_distance:
                links.append(Link(from_node=i, to_node=j,
                                  p_max_link=params.p_max_link,
                                  wired_capacity=params.wired_capacity))
    if nn >= 2 and not links:
        raise GenerationError(
            f"no node pair within max_link_distance={params.max_link_distance} m; "
            "retry with a larger limit or a smaller area")

    nl, nf = len(links), params.num_subchannels
    bore2 = params.tx_antenna_gain_boresight ** 2
    side2 = params.antenna_gain_sidelobe ** 2

    direct = np.zeros((nl, nf))
    for l, lk in enumerate(links):
        direct[l, :] = path_gain(dist(lk.from_node, lk.to_node),
                                 params.carrier_freq,
                                 params.pathloss_exponent, bore2)

    cross = np.zeros((nl, nl, nf))
    for v, victim in enumerate(links):
        for a, aggressor in enumerate(links):
            if a == v:
                continue
            cross[v, a, :] = path_gain(dist(aggressor.from_node, victim.to_node),
                                       params.carrier_freq,
                                       params.pathloss_exponent, side2)
    # A receiver sharing its node with another link's transmitter hears the
    # cancelled residual, not a propagated path.
    for a, la in enumerate(links):
        for v, lv in enumerate(links):
            if a != v and la.from_node == lv.to_node:
                cross[v, a, :] = params.sic_attenuation

    to_access = np.zeros((nl, nn, nf))
    for l, lk in enumerate(links):
        for n in range(nn):
            to_access[l, n, :] = path_gain(dist(lk.from_node, n),
                                           params.carrier_freq,
                                           params.pathloss_exponent,
                                           params.antenna_gain_sidelobe)

    s = Scenario(
        nodes=tuple(nodes),
        links=tuple(links),
        spectrum=Spectrum(
            num_subchannels=nf,
            bandwidth=params.bandwidth,
            access_subchannels=frozenset(range(params.num_access_subchannels)),
            noise_power=model.default_noise(nl, nf, params.bandwidth)),
        gains=Gains(direct=direct, cross=cross, to_access=to_access),
        costs=CostWeights(per_watt=params.w_power, per_link=params.w_link,
                          per_subchannel=params.w_spectrum),
        limits=Limits(
            interference_limit=np.full((nn, nf), params.interference_limit),
            delay_ul=params.delay_ul, delay_dl=params.delay_dl),
    )
    violations = model.validate_scenario(s)
    if violations:
        raise GenerationError(f"generated scenario failed validation: "
                              f"{'; '.join(str(v) for v in violations[:3])}")
    return s
