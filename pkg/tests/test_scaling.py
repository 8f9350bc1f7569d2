"""Traffic-scaling search against closed-form single-link and square-ring
oracles.

Two nodes joined by one link of n cards of capacity gamma admit a load of
mu_a * n * gamma, so a raw demand of v scales by exactly mu_a * n * gamma / v.
"""

import pytest

from netsleep.builder import StructuralInfeasibility
from netsleep.scaling import ScalingSpec, compute_scaling_factor, scale_instance
from netsleep.sndlib import (ProblemInstance, RawDemand, RawLink,
                             RawNode)

from helpers import topology

TOL = 2e-3   # the search stops at 1e-3 relative width


def _two_node(alfa):
    topo = topology([("a", "b")], edge_nodes=("a", "b"), catalog=alfa)
    return topo, [RawDemand("d0", "a", "b", 100.0)]


def _square(alfa):
    topo = topology([("a", "b"), ("b", "c"), ("c", "d"), ("d", "a")],
                    edge_nodes=("a", "b", "c", "d"), catalog=alfa)
    return topo


def test_single_link_closed_form(alfa, backend):
    topo, raw = _two_node(alfa)
    got = compute_scaling_factor(topo, alfa, raw, ScalingSpec(), backend)
    # 0.5 * 2 * 400 / 100
    assert got == pytest.approx(4.0, rel=TOL)
    assert got <= 4.0 + 1e-9    # the search must stay on the feasible side


def test_scale_grows_with_mu_a(alfa, backend):
    topo, raw = _two_node(alfa)
    tight = compute_scaling_factor(topo, alfa, raw,
                                   ScalingSpec(mu_a=0.25), backend)
    assert tight == pytest.approx(2.0, rel=TOL)
    loose = compute_scaling_factor(topo, alfa, raw,
                                   ScalingSpec(mu_a=0.5), backend)
    assert tight < loose


def test_robust_probes_reserve_deviation_headroom(alfa, backend):
    topo, raw = _two_node(alfa)
    got = compute_scaling_factor(
        topo, alfa, raw,
        ScalingSpec(robust_budget=1, r_hat=0.2), backend)
    # the single demand deviates fully: 100 * w * 1.2 <= 400
    assert got == pytest.approx(10.0 / 3.0, rel=TOL)


def test_square_ring_protected_closed_forms(alfa, backend):
    topo = _square(alfa)
    one = [RawDemand("d0", "a", "c", 100.0)]
    # primary on one two-hop side: 100 * w <= 0.5 * 2 * 400
    assert compute_scaling_factor(
        topo, alfa, one, ScalingSpec(protection="dedicated"),
        backend) == pytest.approx(4.0, rel=TOL)
    # with mu_b = 0.1 the backup reservation binds first: 100 * w <= 80
    assert compute_scaling_factor(
        topo, alfa, one, ScalingSpec(protection="dedicated", mu_b=0.1),
        backend) == pytest.approx(0.8, rel=TOL)

    # Two crossing demands. Capacity is per directed arc, so the primaries
    # dodge each other (a-b-c and b-a-d), but each backup is then forced
    # onto the other's primary: arc (a,d) carries d1's primary plus d0's
    # backup, and the failure-state row binds at 200 * w <= 0.85 * 800.
    two = [RawDemand("d0", "a", "c", 100.0), RawDemand("d1", "b", "d", 100.0)]
    for protection in ("dedicated", "shared"):
        assert compute_scaling_factor(
            topo, alfa, two, ScalingSpec(protection=protection),
            backend) == pytest.approx(3.4, rel=TOL)


def test_protection_never_increases_the_scale(alfa, backend):
    topo = _square(alfa)
    raw = [RawDemand("d0", "a", "c", 100.0), RawDemand("d1", "b", "d", 90.0)]
    simple = compute_scaling_factor(topo, alfa, raw, ScalingSpec(), backend)
    dedicated = compute_scaling_factor(
        topo, alfa, raw, ScalingSpec(protection="dedicated"), backend)
    shared = compute_scaling_factor(
        topo, alfa, raw, ScalingSpec(protection="shared"), backend)
    assert dedicated <= shared + TOL * shared
    assert shared <= simple + TOL * simple


def test_unreachable_demand_is_rejected(alfa, backend):
    topo = topology([("a", "b"), ("c", "d")], edge_nodes=("a", "b", "c", "d"),
                    catalog=alfa)
    raw = [RawDemand("d0", "a", "d", 10.0)]
    with pytest.raises(ValueError, match="unreachable"):
        compute_scaling_factor(topo, alfa, raw, ScalingSpec(), backend)


def test_unprotectable_demand_is_rejected(alfa, backend):
    topo, raw = _two_node(alfa)
    with pytest.raises(StructuralInfeasibility):
        compute_scaling_factor(topo, alfa, raw,
                               ScalingSpec(protection="dedicated"), backend)


def test_no_demands_is_rejected(alfa, backend):
    topo, _ = _two_node(alfa)
    with pytest.raises(ValueError, match="no demands"):
        compute_scaling_factor(topo, alfa, [], ScalingSpec(), backend)


def test_spec_validation():
    with pytest.raises(ValueError):
        ScalingSpec(mu_a=0.0)
    with pytest.raises(ValueError):
        ScalingSpec(mu_b=1.5)
    with pytest.raises(ValueError):
        ScalingSpec(tolerance=0.0)
    with pytest.raises(ValueError):
        ScalingSpec(robust_budget=-1)


def test_scale_instance_records_the_factor(alfa, backend):
    _, raw = _two_node(alfa)
    inst = ProblemInstance(name="pair",
                           nodes=(RawNode("a"), RawNode("b")),
                           links=(RawLink("l0", "a", "b"),),
                           demands=tuple(raw), catalog_name="alfa",
                           core_nodes=frozenset())
    scaled = scale_instance(inst, alfa, ScalingSpec(), backend)
    assert scaled.scale == pytest.approx(4.0, rel=TOL)
    assert inst.scale is None
