"""Energy accounting and device-catalog arithmetic."""

import dataclasses

import numpy as np
import pytest

from netsleep.model import (NetworkSolution, energy_of_solution,
                            full_active_consumption, validate_topology)
from netsleep.testbed import catalog

from helpers import day, demand, periods, ring, topology


def _all_off_solution(topo, S):
    A, N = len(topo.arcs), len(topo.nodes)
    return NetworkSolution(
        topology=topo,
        chassis_on=np.zeros((S, N)),
        active_cards=np.zeros((S, A)),
        switch_cost=np.zeros((S, N)),
        primary=np.zeros((S, 0, A)),
    )


def test_everything_off_consumes_nothing(eta):
    topo = ring(list("ABCD"), edge_nodes=(), catalog=eta)
    sol = _all_off_solution(topo, 6)
    metrics = energy_of_solution(sol, eta, periods(*([4.0] * 6)))
    assert metrics.absolute_energy == 0.0


def test_single_chassis_full_day(eta):
    topo = ring(list("ABCD"), edge_nodes=(), catalog=eta)
    sol = _all_off_solution(topo, 1)
    sol.chassis_on[0, 0] = 1.0
    metrics = energy_of_solution(sol, eta, day())
    assert metrics.absolute_energy == pytest.approx(2073.6)


def test_one_reactivation_charges_quarter_of_chassis_power(eta):
    topo = ring(list("ABCD"), edge_nodes=(), catalog=eta)
    sol = _all_off_solution(topo, 2)
    sol.chassis_on[1, 2] = 1.0   # off in the first half, on in the second
    sol.recompute_switch_costs(eta, cyclic=True)
    assert sol.switch_cost.sum() == pytest.approx(0.25 * 86.4)
    metrics = energy_of_solution(sol, eta, periods(12.0, 12.0))
    assert metrics.absolute_energy == pytest.approx(86.4 * 12 + 21.6)


def test_cyclic_wraparound_charges_first_period_rise(eta):
    topo = ring(list("ABCD"), edge_nodes=(), catalog=eta)
    sol = _all_off_solution(topo, 2)
    sol.chassis_on[0, 1] = 1.0   # on, then off: the rise happens at wrap
    sol.recompute_switch_costs(eta, cyclic=True)
    assert sol.switch_cost[0, 1] == pytest.approx(21.6)
    sol.recompute_switch_costs(eta, cyclic=False)
    assert sol.switch_cost.sum() == 0.0


def test_full_active_closed_form(alfa):
    ids = [f"n{i}" for i in range(12)]
    chords = [("n0", "n2"), ("n1", "n3"), ("n4", "n6"),
              ("n5", "n7"), ("n8", "n10"), ("n9", "n11")]
    topo = ring(ids, edge_nodes=(), catalog=alfa, chords=chords)
    assert len(topo.arcs) == 36
    value = full_active_consumption(topo, alfa, day())
    assert value == pytest.approx(24 * (12 * 86.4 + 72 * 6.8))


def test_full_active_percent_is_exactly_one(eta):
    topo = ring(list("ABCD"), edge_nodes=list("ABCD"), catalog=eta)
    S = 3
    sol = _all_off_solution(topo, S)
    sol.chassis_on[:] = 1.0
    sol.active_cards = np.full((S, len(topo.arcs)), 2.0)
    metrics = energy_of_solution(sol, eta, periods(8.0, 8.0, 8.0))
    assert metrics.percent_of_full == pytest.approx(1.0)


def test_energy_is_linear_in_power(eta):
    topo = ring(list("ABCD"), edge_nodes=(), catalog=eta)
    doubled_cat = dataclasses.replace(eta, chassis_power=2 * eta.chassis_power)
    # cards draw their power from the arcs, so double those too
    doubled_topo = NetworkSolution  # placeholder to keep names close
    arcs = tuple(dataclasses.replace(a, card_power=2 * a.card_power)
                 for a in topo.arcs)
    doubled_topo = dataclasses.replace(topo, arcs=arcs)

    sol = _all_off_solution(topo, 1)
    sol.chassis_on[0, :2] = 1.0
    sol.active_cards[0, :3] = 1.0
    base = energy_of_solution(sol, eta, day()).absolute_energy

    sol2 = _all_off_solution(doubled_topo, 1)
    sol2.chassis_on[0, :2] = 1.0
    sol2.active_cards[0, :3] = 1.0
    assert energy_of_solution(sol2, doubled_cat, day()).absolute_energy \
        == pytest.approx(2 * base)


def test_one_extra_card_costs_duration_times_card_power(eta):
    topo = ring(list("ABCD"), edge_nodes=(), catalog=eta)
    scen = periods(5.0, 19.0)
    sol = _all_off_solution(topo, 2)
    sol.chassis_on[:, :] = 1.0
    base = energy_of_solution(sol, eta, scen).absolute_energy
    sol.active_cards[0, 3] = 1.0
    bumped = energy_of_solution(sol, eta, scen).absolute_energy
    assert bumped - base == pytest.approx(5.0 * eta.card_power)


def test_full_active_dominates_any_solution(eta):
    topo = ring(list("ABCDE"), edge_nodes=("A",), catalog=eta)
    scen = periods(10.0, 14.0)
    full = full_active_consumption(topo, eta, scen)
    rng = np.random.default_rng(11)
    for _ in range(20):
        sol = _all_off_solution(topo, 2)
        sol.chassis_on = rng.integers(0, 2, sol.chassis_on.shape).astype(float)
        sol.active_cards = rng.integers(0, 3, sol.active_cards.shape).astype(float)
        sol.recompute_switch_costs(eta)
        assert energy_of_solution(sol, eta, scen).absolute_energy <= full + 1e-9


def test_topology_validation_catches_asymmetry(eta):
    topo = ring(list("ABCD"), edge_nodes=(), catalog=eta)
    assert validate_topology(topo).ok
    broken = dataclasses.replace(topo, arcs=topo.arcs[:-1])
    report = validate_topology(broken)
    assert not report.ok
    assert any("reverse" in issue for issue in report.issues)


def test_catalog_registry_rejects_unknown_names():
    with pytest.raises(KeyError):
        catalog("omega")


def test_demand_period_values():
    d = demand("d0", "A", "B", 200.0, profile=(1.0, 0.5), deviation=0.1)
    assert d.value(1) == 100.0
    assert d.expected_value(0) == 200.0
    assert d.deviation_value(1) == pytest.approx(20.0)
