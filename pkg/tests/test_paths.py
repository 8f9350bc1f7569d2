"""Candidate-path generation and its serialization."""

import itertools

import networkx as nx
import pytest

from netsleep.paths import Path, PathSet, generate_paths, max_flow_value

from helpers import demand, six_node, topology


def _edge_disjoint_route_count(topo, origin, destination):
    """Count link-disjoint undirected routes by trying every subset size."""
    g = nx.Graph()
    for arc in topo.arcs:
        g.add_edge(arc.tail, arc.head)
    best = 0
    paths = list(nx.all_simple_paths(g, origin, destination))
    for k in range(1, len(paths) + 1):
        for combo in itertools.combinations(paths, k):
            used = set()
            ok = True
            for p in combo:
                links = {frozenset(e) for e in zip(p, p[1:])}
                if links & used:
                    ok = False
                    break
                used |= links
            if ok:
                best = max(best, k)
    return best


def test_path_rejects_degenerate_sequences():
    with pytest.raises(ValueError):
        Path(("A",))
    with pytest.raises(ValueError):
        Path(("A", "B", "A"))
    p = Path(("A", "E", "C"))
    assert p.arc_pairs() == (("A", "E"), ("E", "C"))
    assert frozenset({"A", "E"}) in p.links


def test_max_flow_matches_exhaustive_disjoint_count(eta):
    topo = six_node(eta)
    for o, t in (("A", "C"), ("A", "B"), ("D", "F"), ("A", "F")):
        assert max_flow_value(topo, o, t) == \
            _edge_disjoint_route_count(topo, o, t)


def test_single_route_pair_has_unit_flow(eta):
    topo = topology([("a", "b"), ("b", "c")], edge_nodes=("a", "c"),
                    catalog=eta)
    assert max_flow_value(topo, "a", "c") == 1


def test_generation_respects_the_count_budget(eta):
    topo = six_node(eta)
    demands = [demand("d0", "A", "C", 10.0), demand("d1", "B", "F", 10.0),
               demand("d2", "D", "F", 10.0)]
    for omega in (1, 3, 7):
        ps = generate_paths(topo, demands, omega, seed=4)
        assert ps.counts_ok()
        for d in demands:
            assert 1 <= len(ps.paths_for(d.id)) <= \
                omega * (ps.max_flow[d.id] + 1)


def test_generated_paths_connect_their_endpoints(eta):
    topo = six_node(eta)
    demands = [demand("d0", "A", "C", 10.0), demand("d1", "B", "F", 10.0)]
    ps = generate_paths(topo, demands, 4, seed=9)
    links = {frozenset((arc.tail, arc.head)) for arc in topo.arcs}
    for d in demands:
        for p in ps.paths_for(d.id):
            assert p.nodes[0] == d.origin
            assert p.nodes[-1] == d.destination
            assert p.links <= links


def test_disjoint_pair_is_available_when_flow_allows(eta):
    # omega rounds must surface at least one disjoint pair for protection
    topo = six_node(eta)
    demands = [demand("d0", "A", "C", 10.0)]
    ps = generate_paths(topo, demands, 3, seed=0)
    assert ps.max_flow["d0"] >= 2
    pairs = itertools.permutations(ps.paths_for("d0"), 2)
    assert any(not (p.links & q.links) for p, q in pairs)


def test_same_seed_same_paths_different_seed_often_not(eta):
    topo = six_node(eta)
    demands = [demand("d0", "A", "C", 10.0), demand("d1", "B", "F", 10.0)]
    a = generate_paths(topo, demands, 5, seed=11)
    b = generate_paths(topo, demands, 5, seed=11)
    assert a == b
    variants = {tuple(generate_paths(topo, demands, 1, seed=s).paths["d0"])
                for s in range(8)}
    assert len(variants) > 1


def test_round_count_only_grows_the_pool(eta):
    topo = six_node(eta)
    demands = [demand("d0", "A", "F", 10.0)]
    small = generate_paths(topo, demands, 2, seed=3)
    large = generate_paths(topo, demands, 6, seed=3)
    assert set(small.paths["d0"]) <= set(large.paths["d0"])


def test_text_round_trip(eta):
    topo = six_node(eta)
    demands = [demand("d0", "A", "C", 10.0), demand("d1", "B", "F", 10.0)]
    ps = generate_paths(topo, demands, 3, seed=7)
    again = PathSet.from_text(ps.to_text())
    assert again.omega == ps.omega
    assert again.max_flow == dict(ps.max_flow)
    for d in demands:
        assert set(again.paths_for(d.id)) == set(ps.paths_for(d.id))


def test_bad_text_is_rejected():
    with pytest.raises(ValueError):
        PathSet.from_text("  A B C\n")


def test_omega_must_be_positive(eta):
    topo = six_node(eta)
    with pytest.raises(ValueError):
        generate_paths(topo, [demand("d0", "A", "C", 1.0)], 0)
