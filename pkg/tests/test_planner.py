"""Outer planning loop: iterated linearization, restarts, traces, and the
infeasibility screen."""

import csv
import math
from dataclasses import replace

import numpy as np
import pytest

from fdbackhaul import (
    CostWeights,
    InfeasibleScenarioError,
    IterationRecord,
    IterationTrace,
    PlanOptions,
    ScenarioFormatError,
    check_feasibility,
)
from fdbackhaul.planner import diagnose_infeasibility, initial_point, plan
from fdbackhaul.scenario_io import write_plan

from conftest import load_scenario

# closed form for the single-link fixture: power that yields SINR 2^(R/B)-1
X_STAR = 1e-10 * (2.0 ** (2e7 / 1e7) - 1.0) / 1e-6  # 3e-4 W


class TestInitialPoint:
    def test_single_link_split_across_subchannels(self):
        s = load_scenario("single_link")
        p0 = initial_point(s)
        # cap = min(p_max 0.01, budget 1.0), one subchannel
        np.testing.assert_allclose(p0.watts, [[0.01]])

    def test_budget_split_across_out_links(self):
        s = load_scenario("zero_demand")
        p0 = initial_point(s)
        for l, link in enumerate(s.links):
            outdeg = len(s.out_links[link.from_node])
            share = min(link.p_max_link,
                        s.nodes[link.from_node].power_budget / outdeg)
            np.testing.assert_allclose(p0.watts[l, :],
                                       share / s.num_subchannels)

    def test_empty_network(self):
        s = load_scenario("two_node")
        bare = replace(s, links=(),
                       gains=replace(s.gains,
                                     direct=np.zeros((0, 2)),
                                     cross=np.zeros((0, 0, 2)),
                                     to_access=np.zeros((0, 2, 2))),
                       spectrum=replace(s.spectrum,
                                        noise_power=np.zeros((0, 2))))
        assert initial_point(bare).watts.shape == (0, 2)


class TestDiagnosis:
    def test_over_demand_names_the_cut(self):
        msg = diagnose_infeasibility(load_scenario("over_demand"))
        assert msg is not None
        assert "uplink demand" in msg
        assert "exceeds the best-case interference-free cut" in msg

    def test_satisfiable_demand_is_silent(self):
        assert diagnose_infeasibility(load_scenario("single_link")) is None
        assert diagnose_infeasibility(load_scenario("zero_demand")) is None


class TestPlan:
    def test_single_link_hits_closed_form(self, plans):
        p, trace = plans.get("single_link")
        assert p.feasible is True
        assert p.active_links == frozenset({0})
        assert p.active_subchannels == frozenset({0})
        x = p.powers.watts[0, 0]
        assert abs(x - X_STAR) / X_STAR < 0.01
        # cost = per-link 1 + per-subchannel 1 + per-watt * X
        assert p.cost_total == pytest.approx(2.0 + x, rel=1e-9)

    def test_zero_demand_is_free(self, plans):
        p, trace = plans.get("zero_demand")
        assert p.feasible is True
        assert p.cost_total == 0.0
        assert p.powers.total == 0.0
        assert p.active_links == frozenset()
        assert len(trace.records) == 1

    def test_full_duplex_reuses_one_subchannel(self, plans):
        p, _ = plans.get("relay_fd")
        assert p.feasible is True
        assert len(p.active_subchannels) == 1
        assert p.active_links == frozenset({0, 1})
        assert p.cost_total == pytest.approx(102.0, abs=0.01)

    def test_plans_verify_at_tight_tolerance(self, plans):
        for name in ("single_link", "two_node", "relay_fd", "zero_demand"):
            p, _ = plans.get(name)
            report = check_feasibility(load_scenario(name), p, tol=1e-9)
            assert report.feasible, f"{name}: {report}"

    def test_trace_costs_never_increase(self, plans):
        for name in ("single_link", "two_node", "relay_fd"):
            _, trace = plans.get(name)
            costs = [r.cost for r in trace.records if math.isfinite(r.cost)]
            assert costs, name
            for a, b in zip(costs, costs[1:]):
                assert b <= a * (1.0 + 1e-6) + 1e-9, f"{name}: {costs}"

    def test_deterministic_documents(self):
        s = load_scenario("two_node")
        a, _ = plan(s)
        b, _ = plan(s)
        assert write_plan(a) == write_plan(b)

    def test_over_demand_raises_with_diagnosis(self):
        with pytest.raises(InfeasibleScenarioError,
                           match="unreachable on this topology"):
            plan(load_scenario("over_demand"))

    def test_invalid_scenario_rejected(self):
        s = load_scenario("single_link")
        bad = replace(s, costs=CostWeights(-1.0, 1.0, 1.0))
        with pytest.raises(ScenarioFormatError):
            plan(bad)

    def test_segment_counts_agree_after_refit(self):
        # the re-anchoring pass drives every segment count to the same
        # margin-limited operating point on the closed-form fixture
        s = load_scenario("single_link")
        totals = []
        for segments in (4, 16):
            p, _ = plan(s, PlanOptions(segments=segments))
            totals.append(p.powers.total)
        assert totals[1] <= totals[0] * (1 + 1e-6)
        for t in totals:
            assert abs(t - X_STAR) / X_STAR < 0.01

    def test_trace_csv(self, tmp_path, plans):
        s = load_scenario("single_link")
        out = tmp_path / "trace.csv"
        p, trace = plan(s, trace_path=out)
        with open(out, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == len(trace.records)
        assert rows[0]["iteration"] == "1"
        assert float(rows[0]["cost"]) == pytest.approx(trace.records[0].cost)
        assert rows[0]["status"] == "optimal"


class TestIterationTrace:
    def test_rows_blank_out_non_numbers(self):
        trace = IterationTrace(records=(
            IterationRecord(iteration=1, cost=math.nan, status="restored",
                            max_power_delta=math.nan, nodes_explored=0,
                            best_bound=-math.inf, gap=math.inf),
            IterationRecord(iteration=2, cost=1.5, status="optimal",
                            max_power_delta=0.1, nodes_explored=3,
                            best_bound=1.5, gap=0.0),
        ))
        rows = trace.rows()
        assert rows[0]["cost"] is None
        assert rows[0]["best_bound"] is None
        assert rows[0]["gap"] is None
        assert rows[1]["cost"] == 1.5
        assert trace.final_status == "optimal"

    def test_csv_renders_none_as_empty(self, tmp_path):
        trace = IterationTrace(records=(
            IterationRecord(iteration=1, cost=math.nan, status="restored",
                            max_power_delta=math.nan, nodes_explored=0,
                            best_bound=-math.inf, gap=math.inf),
        ))
        out = tmp_path / "t.csv"
        trace.write_csv(out)
        with open(out, newline="") as fh:
            row = next(csv.DictReader(fh))
        assert row["cost"] == ""
        assert row["best_bound"] == ""

    def test_empty_trace_status(self):
        assert IterationTrace(records=()).final_status == "empty"
