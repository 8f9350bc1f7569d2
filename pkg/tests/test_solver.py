"""Built-in branch and bound, verification, and warm-start plumbing."""

import math

import numpy as np
import pytest

from netsleep.backends import BranchAndBoundBackend, HighsBackend
from netsleep.builder import ModelConfig, build_model
from netsleep.milp import BINARY, CONTINUOUS, INTEGER, MilpInstance
from netsleep.sndlib import ProblemInstance, ScenarioSpec, TimePeriod, \
    build_scenarios
from netsleep.solver import (SolveRequest, best_warm_start, relative_gap,
                             solve, verify_solution)
from netsleep.testbed import random_tiny_instance

from helpers import day, demand, enumerate_optimum, six_node


def _tiny_setup(rng, eta):
    raw = random_tiny_instance(rng)
    pi = ProblemInstance.from_raw(raw, "eta", len(raw.demands), seed=0)
    topo = pi.topology(eta)
    demands, scen = build_scenarios(
        pi.demands,
        ScenarioSpec(profile=(1.0,), kind="aver",
                     periods=(TimePeriod(0, 24.0),)),
        scale=1.0)
    return topo, demands, scen


def test_branch_and_bound_matches_device_state_enumeration(eta):
    rng = np.random.default_rng(11)
    backend = BranchAndBoundBackend()
    checked = 0
    while checked < 8:
        topo, demands, scen = _tiny_setup(rng, eta)
        expected = enumerate_optimum(topo, eta, demands, scen)
        if expected is None:
            continue
        inst = build_model(topo, eta, demands, scen, ModelConfig())
        res = backend.solve(SolveRequest(inst, time_limit=60, gap_target=0.0))
        assert res.status == "optimal"
        assert res.objective == pytest.approx(expected, rel=1e-12)
        checked += 1


def test_backends_agree_on_random_instances(eta):
    rng = np.random.default_rng(23)
    bnb, highs = BranchAndBoundBackend(), HighsBackend()
    for _ in range(5):
        topo, demands, scen = _tiny_setup(rng, eta)
        inst_a = build_model(topo, eta, demands, scen, ModelConfig())
        inst_b = build_model(topo, eta, demands, scen, ModelConfig())
        res_a = bnb.solve(SolveRequest(inst_a, time_limit=60, gap_target=0.0))
        res_b = highs.solve(SolveRequest(inst_b, time_limit=60, gap_target=0.0))
        assert res_a.status == "optimal" and res_b.status == "optimal"
        assert res_a.objective == pytest.approx(res_b.objective, rel=1e-9)


def test_pure_lp_solves_at_the_root():
    inst = MilpInstance("lp")
    a = inst.add_variable("a", CONTINUOUS, 0.0, 10.0)
    b = inst.add_variable("b", CONTINUOUS, 0.0, 10.0)
    inst.add_objective_term(a, 1.0)
    inst.add_objective_term(b, 2.0)
    inst.add_constraint("floor", [(a, 1.0), (b, 1.0)], ">=", 4.0)
    res = solve(SolveRequest(inst))
    assert res.status == "optimal"
    assert res.gap == 0.0
    assert res.node_count <= 1
    assert res.objective == pytest.approx(4.0)


def test_contradictory_rows_report_infeasible():
    inst = MilpInstance("bad")
    a = inst.add_variable("a", INTEGER, 0.0, 5.0)
    inst.add_constraint("hi", [(a, 1.0)], ">=", 2.0)
    inst.add_constraint("lo", [(a, 1.0)], "<=", 1.0)
    res = solve(SolveRequest(inst))
    assert res.status == "infeasible"
    assert res.incumbent is None


def test_bound_never_exceeds_incumbent(eta):
    topo = six_node(eta)
    demands = [demand("d0", "A", "C", 500.0), demand("d1", "B", "C", 500.0)]
    inst = build_model(topo, eta, demands, day(), ModelConfig())
    res = solve(SolveRequest(inst, time_limit=60, gap_target=1e-6))
    assert res.ok
    assert res.best_bound <= res.objective + 1e-9
    assert res.gap <= 1e-6


def test_loose_gap_target_stops_early_but_reports_honestly(eta):
    topo = six_node(eta)
    demands = [demand("d0", "A", "C", 500.0), demand("d1", "B", "C", 500.0)]
    inst = build_model(topo, eta, demands, day(), ModelConfig())
    res = solve(SolveRequest(inst, time_limit=60, gap_target=0.5))
    assert res.status == "optimal"
    assert res.gap <= 0.5
    exact = solve(SolveRequest(build_model(topo, eta, demands, day(),
                                           ModelConfig()),
                               time_limit=60, gap_target=1e-9))
    # the loose run may stop on a worse incumbent, never a better one
    assert res.objective >= exact.objective - 1e-9
    assert res.best_bound <= exact.objective + 1e-9


def test_timeout_without_incumbent_is_an_error(eta):
    topo = six_node(eta)
    demands = [demand("d0", "A", "C", 500.0), demand("d1", "B", "C", 500.0)]
    inst = build_model(topo, eta, demands, day(),
                       ModelConfig(protection="dedicated"))
    res = solve(SolveRequest(inst, time_limit=1e-4))
    assert res.status == "error"
    assert res.incumbent is None
    assert "time limit" in res.message


def test_feasible_warm_start_bounds_the_result(eta, backend):
    topo = six_node(eta)
    demands = [demand("d0", "A", "C", 500.0), demand("d1", "B", "C", 500.0)]
    inst = build_model(topo, eta, demands, day(), ModelConfig())
    first = solve(SolveRequest(inst, time_limit=60, gap_target=1e-6))
    warm = dict(first.incumbent)
    again = build_model(topo, eta, demands, day(), ModelConfig())
    res = solve(SolveRequest(again, time_limit=60, gap_target=0.99,
                             warm_start=warm))
    assert res.ok
    assert res.objective <= first.objective + 1e-9


def test_infeasible_warm_start_is_ignored_with_a_warning(eta):
    topo = six_node(eta)
    demands = [demand("d0", "A", "C", 500.0)]
    inst = build_model(topo, eta, demands, day(), ModelConfig())
    bogus = {name: 0.0 for name in inst.variable_names}
    with pytest.warns(UserWarning, match="warm start infeasible"):
        res = solve(SolveRequest(inst, time_limit=60, warm_start=bogus))
    assert res.ok
    assert res.objective > 0.0


def test_best_warm_start_prefers_the_cheapest_feasible(eta):
    topo = six_node(eta)
    demands = [demand("d0", "A", "C", 500.0), demand("d1", "B", "C", 500.0)]
    inst = build_model(topo, eta, demands, day(), ModelConfig())
    good = solve(SolveRequest(inst, time_limit=60, gap_target=1e-6)).incumbent
    pinned = build_model(topo, eta, demands, day(), ModelConfig(),
                         fully_active=True)
    worse = solve(SolveRequest(pinned, time_limit=60,
                               gap_target=1e-6)).incumbent
    assert inst.objective_value(inst.assignment_from_map(worse)) > \
        inst.objective_value(inst.assignment_from_map(good))
    bogus = {name: 0.0 for name in inst.variable_names}
    pick = best_warm_start(inst, [None, bogus, worse, good])
    assert pick is good
    assert best_warm_start(inst, [bogus, None]) is None


def test_verify_flags_each_violation_kind():
    inst = MilpInstance("v")
    a = inst.add_variable("a", BINARY)
    b = inst.add_variable("b", CONTINUOUS, 0.0, 2.0)
    inst.add_constraint("cap", [(a, 1.0), (b, 1.0)], "<=", 2.0)
    report = verify_solution(inst, {"a": 0.4, "b": 3.0})
    kinds = {v.kind for v in report.violations}
    assert kinds == {"integrality", "bound", "constraint"}
    assert not report.ok
    assert report.worst() == pytest.approx(1.4)
    assert verify_solution(inst, {"a": 1.0, "b": 1.0}).ok


def test_relative_gap_degenerate_cases():
    assert relative_gap(None, 1.0) is None
    assert relative_gap(1.0, None) is None
    assert relative_gap(5.0, 5.0) == 0.0
    assert relative_gap(0.0, -1.0) == math.inf
    assert relative_gap(10.0, 8.0) == pytest.approx(0.2)
