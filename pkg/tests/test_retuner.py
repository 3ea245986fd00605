"""Power re-tuning on a fixed topology.

The closed-form single-link fixture gives sharp targets: halving the
direct gain (a 3 dB loss) must roughly double the transmit power, and
the re-tuned point must sit against the capacity constraint, not above
it.
"""

import math
import re
from dataclasses import replace

import numpy as np
import pytest

from fdbackhaul import (
    DimensionMismatchError,
    PowerVector,
    RetuneInfeasibleError,
    RetuneOptions,
    check_feasibility,
    retune,
)
from fdbackhaul.model import assemble_plan, empty_plan

from conftest import load_scenario


def planned(plans, name):
    return plans.get(name)[0]

# Minimum power for the single-link demand: W * (2^(R/B) - 1) / gain.
X_STAR = 1e-10 * (2.0 ** (2e7 / 1e7) - 1.0) / 1e-6


def degraded_single_link(db: float = 3.0):
    """single_link with the direct gain knocked down by `db` decibels."""
    s = load_scenario("single_link")
    worse = np.asarray(s.gains.direct) * 10.0 ** (-db / 10.0)
    return replace(s, gains=replace(s.gains, direct=worse))


def all_on_plan(s, fraction: float = 1.0):
    """Every link and subchannel active, powers at `fraction` of cap."""
    nl, nf = s.num_links, s.num_subchannels
    caps = np.asarray(s.link_power_caps)
    watts = np.repeat(caps[:, None] * fraction / nf, nf, axis=1)
    return assemble_plan(
        s, PowerVector(watts),
        flow_ul=np.zeros(nl), flow_dl=np.zeros(nl),
        active_links=range(nl), active_subchannels=range(nf))


class TestUnchangedScenario:
    def test_total_power_is_preserved(self, plans):
        s = load_scenario("single_link")
        base = planned(plans, "single_link")
        tuned, trace = retune(s, base)
        # Nothing drifted, so there is nothing to gain and nothing to lose.
        assert tuned.powers.total == pytest.approx(
            base.powers.total, rel=1e-6)
        assert tuned.powers.total >= X_STAR
        assert len(trace.records) <= 5

    def test_topology_is_never_touched(self, plans):
        s = load_scenario("relay_fd")
        base = planned(plans, "relay_fd")
        tuned, _ = retune(s, base)
        assert tuned.active_links == base.active_links
        assert tuned.active_subchannels == base.active_subchannels
        inactive_subs = [f for f in range(s.num_subchannels)
                         if f not in tuned.active_subchannels]
        assert not np.any(tuned.powers.watts[:, inactive_subs])

    def test_result_verifies_exactly(self, plans):
        s = load_scenario("relay_fd")
        tuned, _ = retune(s, planned(plans, "relay_fd"))
        assert tuned.feasible is True
        assert check_feasibility(s, tuned).feasible


class TestGainDrift:
    def test_three_db_loss_doubles_the_power(self, plans):
        s = degraded_single_link(3.0)
        tuned, trace = retune(s, planned(plans, "single_link"))
        # 3 dB is a factor of 10^0.3 ~ 1.995, so the capacity-matching
        # power lands just shy of twice the nominal optimum.
        assert abs(tuned.powers.total / (2.0 * X_STAR) - 1.0) < 0.01
        assert tuned.powers.total == pytest.approx(5.9871006719e-4, rel=1e-6)
        assert len(trace.records) <= 10
        assert tuned.active_links == planned(plans, "single_link").active_links
        assert tuned.active_subchannels == \
            planned(plans, "single_link").active_subchannels
        assert check_feasibility(s, tuned).feasible

    def test_gain_boost_releases_power(self, plans):
        s = load_scenario("single_link")
        better = replace(
            s, gains=replace(s.gains, direct=np.asarray(s.gains.direct) * 10))
        tuned, _ = retune(better, planned(plans, "single_link"))
        assert tuned.powers.total < 0.2 * planned(plans, "single_link").powers.total
        assert check_feasibility(better, tuned).feasible

    def test_total_power_never_increases_between_iterations(self, plans):
        _, trace = retune(degraded_single_link(3.0), planned(plans, "single_link"))
        totals = [r.cost for r in trace.records if not math.isnan(r.cost)]
        assert totals
        for a, b in zip(totals, totals[1:]):
            assert b <= a * (1.0 + 1e-9) + 1e-15

    def test_records_describe_single_lp_solves(self, plans):
        _, trace = retune(degraded_single_link(3.0), planned(plans, "single_link"))
        for r in trace.records:
            if math.isnan(r.cost):
                continue
            assert r.nodes_explored == 0
            assert r.gap == 0.0
            assert math.isfinite(r.best_bound)

    def test_stationarity_of_the_final_point(self, plans):
        # Shrinking any single coordinate by the probe radius must break
        # an exact constraint, otherwise the point was not minimal.
        s = degraded_single_link(3.0)
        tuned, _ = retune(s, planned(plans, "single_link"))
        radius = RetuneOptions().stationarity_tol * s.network_power_cap
        probed = 0
        for (l, f) in np.argwhere(tuned.powers.watts > 0.0):
            watts = tuned.powers.watts.copy()
            watts[l, f] = max(0.0, watts[l, f] - radius)
            poke = assemble_plan(s, PowerVector(watts),
                                 tuned.flow_ul, tuned.flow_dl,
                                 tuned.active_links, tuned.active_subchannels)
            assert not check_feasibility(s, poke).feasible
            probed += 1
        assert probed >= 1


class TestEntryValidation:
    def test_plan_without_topology_is_rejected(self):
        s = load_scenario("single_link")
        with pytest.raises(ValueError, match="plan from scratch instead"):
            retune(s, empty_plan(s))

    def test_power_on_inactive_pair_is_rejected(self, plans):
        s = load_scenario("two_node")
        base = planned(plans, "two_node")
        watts = base.powers.watts.copy()
        off = next(f for f in range(s.num_subchannels)
                   if f not in base.active_subchannels)
        watts[0, off] = 1e-6
        bad = assemble_plan(s, PowerVector(watts),
                            base.flow_ul, base.flow_dl,
                            base.active_links, base.active_subchannels)
        with pytest.raises(ValueError, match=r"inactive pair \(0,%d\)" % off):
            retune(s, bad)

    def test_wrong_power_shape_is_rejected(self, plans):
        with pytest.raises(DimensionMismatchError, match="do not match"):
            retune(load_scenario("two_node"), planned(plans, "single_link"))

    def test_invalid_scenario_is_rejected(self, plans):
        s = load_scenario("single_link")
        bad = replace(s, costs=replace(s.costs, per_watt=-1.0))
        from fdbackhaul import ScenarioFormatError
        with pytest.raises(ScenarioFormatError, match="invalid scenario"):
            retune(bad, planned(plans, "single_link"))

    def test_powers_above_caps_are_projected(self, plans):
        # Drift can shrink link caps below the stored powers; the starting
        # point is the projection, and the result still respects the caps.
        s = load_scenario("single_link")
        base = planned(plans, "single_link")
        inflated = assemble_plan(
            s, PowerVector(base.powers.watts * 100.0),
            base.flow_ul, base.flow_dl,
            base.active_links, base.active_subchannels)
        tuned, _ = retune(s, inflated)
        caps = np.asarray(s.link_power_caps)
        assert np.all(tuned.powers.watts <= caps[:, None] + 1e-15)
        # Starting 33x above the optimum, the loop stops on the power-delta
        # tolerance a hair later than the nominal run does.
        assert tuned.powers.total == pytest.approx(
            base.powers.total, rel=1e-3)
        assert tuned.powers.total >= X_STAR


class TestInfeasibleTopology:
    def test_demand_beyond_capacity_names_the_shortfall(self):
        s = load_scenario("over_demand")
        with pytest.raises(RetuneInfeasibleError,
                           match="re-planning is required") as exc:
            retune(s, all_on_plan(s))
        m = re.search(r"shortfall of about ([0-9.e+-]+) bit/s", str(exc.value))
        assert m is not None
        assert 1e8 < float(m.group(1)) < 5e9

    def test_trace_csv_is_written(self, plans, tmp_path):
        out = tmp_path / "trace.csv"
        retune(degraded_single_link(3.0), planned(plans, "single_link"),
               trace_path=out)
        header = out.read_text().splitlines()[0]
        assert header == ("iteration,cost,status,max_power_delta,"
                          "nodes_explored,best_bound,gap")
