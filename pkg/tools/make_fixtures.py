"""Regenerates the scenario fixtures under fixtures/.

Each fixture is hand-specified (no RNG) so the expected optima can be
worked out in closed form where the tests need them. Run from the repo
root: python3 tools/make_fixtures.py
"""

from __future__ import annotations

import pathlib
import sys

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from fdbackhaul.model import (CostWeights, Gains, Limits, Link, Node,  # noqa: E402
                              Scenario, Spectrum, validate_scenario)
from fdbackhaul.scenario_io import write_scenario  # noqa: E402

OUT = pathlib.Path(__file__).resolve().parents[1] / "fixtures"


def single_link(rate_ul: float = 2e7) -> Scenario:
    """One non-root uplinking to one root over a single clean subchannel.

    With direct gain 1e-6 and noise 1e-10 W the minimum power for a rate
    R is 1e-10*(2**(R/1e7)-1)/1e-6, i.e. 3e-4 W at the default demand.
    """
    nodes = (
        Node(id=0, kind="root", position=(0.0, 0.0, 0.0), proc_delay=1e-3,
             power_budget=1.0),
        Node(id=1, kind="nonroot", position=(100.0, 0.0, 0.0),
             proc_delay=1e-3, power_budget=1.0, rate_ul=rate_ul, rate_dl=0.0),
    )
    links = (Link(from_node=1, to_node=0, p_max_link=0.01, wired_capacity=0.0),)
    return Scenario(
        nodes=nodes, links=links,
        spectrum=Spectrum(num_subchannels=1, bandwidth=1e7,
                          access_subchannels=frozenset(),
                          noise_power=np.full((1, 1), 1e-10)),
        gains=Gains(direct=np.full((1, 1), 1e-6),
                    cross=np.zeros((1, 1, 1)),
                    to_access=np.zeros((1, 2, 1))),
        costs=CostWeights(per_watt=1.0, per_link=1.0, per_subchannel=1.0),
        limits=Limits(interference_limit=np.full((2, 1), 1.0),
                      delay_ul=2e-2, delay_dl=2e-2),
    )


def two_node() -> Scenario:
    """Canonical two-node document: 1 root, 1 non-root, both directions.

    Subchannel 0 is shared with the access network (free of spectrum
    cost but interference-limited); subchannel 1 is backhaul-exclusive.
    """
    nodes = (
        Node(id=0, kind="root", position=(0.0, 0.0, 0.0), proc_delay=1e-3,
             power_budget=0.5),
        Node(id=1, kind="nonroot", position=(80.0, 0.0, 0.0),
             proc_delay=1e-3, power_budget=0.8, rate_ul=1.5e7, rate_dl=2.5e7),
    )
    links = (
        Link(from_node=0, to_node=1, p_max_link=0.05, wired_capacity=0.0),
        Link(from_node=1, to_node=0, p_max_link=0.05, wired_capacity=0.0),
    )
    cross = np.zeros((2, 2, 2))
    # Residual self-interference: link 0 transmits at node 0 where link 1
    # receives, and vice versa.
    cross[1, 0, :] = 1e-13
    cross[0, 1, :] = 1e-13
    return Scenario(
        nodes=nodes, links=links,
        spectrum=Spectrum(num_subchannels=2, bandwidth=1e7,
                          access_subchannels=frozenset({0}),
                          noise_power=np.full((2, 2), 4e-14)),
        gains=Gains(direct=np.full((2, 2), 1e-7),
                    cross=cross,
                    to_access=np.full((2, 2, 2), 1e-12)),
        costs=CostWeights(per_watt=1.0, per_link=2.0, per_subchannel=5.0),
        limits=Limits(interference_limit=np.full((2, 2), 1e-9),
                      delay_ul=2e-2, delay_dl=2e-2),
    )


def relay_fd() -> Scenario:
    """Root(0) <- M1(1) <- M2(2) uplink chain with perfect cancellation.

    Node 1 forwards node 2's traffic while transmitting its own, so with
    zero residual self-interference a single subchannel suffices; the
    spectrum weight (100) dwarfs link and power costs, making the
    full-duplex reuse the whole game.
    """
    nodes = (
        Node(id=0, kind="root", position=(0.0, 0.0, 0.0), proc_delay=1e-3,
             power_budget=1.0),
        Node(id=1, kind="nonroot", position=(100.0, 0.0, 0.0),
             proc_delay=1e-3, power_budget=1.0, rate_ul=1e7, rate_dl=0.0),
        Node(id=2, kind="nonroot", position=(200.0, 0.0, 0.0),
             proc_delay=1e-3, power_budget=1.0, rate_ul=1e7, rate_dl=0.0),
    )
    links = (
        Link(from_node=1, to_node=0, p_max_link=0.01, wired_capacity=0.0),
        Link(from_node=2, to_node=1, p_max_link=0.01, wired_capacity=0.0),
    )
    return Scenario(
        nodes=nodes, links=links,
        spectrum=Spectrum(num_subchannels=2, bandwidth=1e7,
                          access_subchannels=frozenset(),
                          noise_power=np.full((2, 2), 1e-10)),
        gains=Gains(direct=np.full((2, 2), 1e-6),
                    cross=np.zeros((2, 2, 2)),
                    to_access=np.zeros((2, 3, 2))),
        costs=CostWeights(per_watt=1.0, per_link=1.0, per_subchannel=100.0),
        limits=Limits(interference_limit=np.full((3, 2), 1.0),
                      delay_ul=2e-2, delay_dl=2e-2),
    )


def zero_demand() -> Scenario:
    nodes = (
        Node(id=0, kind="root", position=(0.0, 0.0, 0.0), proc_delay=1e-3,
             power_budget=1.0),
        Node(id=1, kind="nonroot", position=(60.0, 0.0, 0.0),
             proc_delay=1e-3, power_budget=1.0, rate_ul=0.0, rate_dl=0.0),
    )
    links = (
        Link(from_node=0, to_node=1, p_max_link=0.01, wired_capacity=0.0),
        Link(from_node=1, to_node=0, p_max_link=0.01, wired_capacity=0.0),
    )
    return Scenario(
        nodes=nodes, links=links,
        spectrum=Spectrum(num_subchannels=1, bandwidth=1e7,
                          access_subchannels=frozenset(),
                          noise_power=np.full((2, 1), 1e-10)),
        gains=Gains(direct=np.full((2, 1), 1e-6),
                    cross=np.zeros((2, 2, 1)),
                    to_access=np.zeros((2, 2, 1))),
        costs=CostWeights(per_watt=1.0, per_link=1.0, per_subchannel=1.0),
        limits=Limits(interference_limit=np.full((2, 1), 1.0),
                      delay_ul=2e-2, delay_dl=2e-2),
    )


def over_demand() -> Scenario:
    # Max achievable on the one link is B*log2(1 + 1e-6*0.01/1e-10),
    # about 1.66e8 bit/s; 1e9 is far beyond any cut.
    return single_link(rate_ul=1e9)


FIXTURES = {
    "single_link": single_link,
    "two_node": two_node,
    "relay_fd": relay_fd,
    "zero_demand": zero_demand,
    "over_demand": over_demand,
}


def main() -> int:
    OUT.mkdir(exist_ok=True)
    for name, builder in FIXTURES.items():
        s = builder()
        violations = validate_scenario(s)
        if violations and name != "over_demand":
            raise SystemExit(f"{name}: {violations}")
        path = OUT / f"{name}.json"
        path.write_bytes(write_scenario(s))
        print(f"wrote {path} ({s.num_nodes} nodes, {s.num_links} links, "
              f"{s.num_subchannels} subchannels)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
