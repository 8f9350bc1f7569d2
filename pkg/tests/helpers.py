"""Shared fixture builders and brute-force oracles for the test suite."""

from __future__ import annotations

import math
from itertools import product
from typing import Sequence

import networkx as nx
import numpy as np

from netsleep.model import (Arc, Demand, DeviceCatalog, NetworkTopology, Node,
                            ScenarioSet, TimePeriod)


def day() -> ScenarioSet:
    return ScenarioSet((TimePeriod(0, 24.0, "day"),))


def periods(*durations: float) -> ScenarioSet:
    return ScenarioSet(tuple(TimePeriod(i, d, f"p{i}")
                             for i, d in enumerate(durations)))


def demand(did: str, origin: str, destination: str, value: float,
           profile: Sequence[float] = (1.0,),
           deviation: float = 0.0) -> Demand:
    frac = tuple(float(f) for f in profile)
    return Demand(did, origin, destination, float(value),
                  expected_fractions=frac,
                  deviation_fractions=(float(deviation),) * len(frac),
                  realized_fractions=frac)


def topology(links: Sequence[tuple[str, str]], edge_nodes: Sequence[str],
             catalog: DeviceCatalog, cards: int | None = None,
             ) -> NetworkTopology:
    """Symmetric topology over the given undirected links; nodes not listed
    as edge nodes are core (allowed to sleep)."""
    ids = sorted({n for link in links for n in link})
    edge = set(edge_nodes)
    n = cards if cards is not None else catalog.cards_per_link
    nodes = [Node(i, is_core=i not in edge) for i in ids]
    arcs = []
    for a, b in links:
        arcs.append(Arc(a, b, n, catalog.card_capacity, catalog.card_power))
        arcs.append(Arc(b, a, n, catalog.card_capacity, catalog.card_power))
    return NetworkTopology.build(nodes, arcs)


def ring(ids: Sequence[str], edge_nodes: Sequence[str],
         catalog: DeviceCatalog, chords: Sequence[tuple[str, str]] = (),
         ) -> NetworkTopology:
    links = [(ids[i], ids[(i + 1) % len(ids)]) for i in range(len(ids))]
    return topology(links + list(chords), edge_nodes, catalog)


def six_node(catalog: DeviceCatalog) -> NetworkTopology:
    """Two demands A->C / B->C with forced primaries and a common backup
    transit E; D and F are idle spurs whose chassis should sleep."""
    links = [("A", "C"), ("B", "C"), ("A", "E"), ("B", "E"), ("C", "E"),
             ("D", "E"), ("E", "F")]
    return topology(links, edge_nodes=("A", "B", "C"), catalog=catalog)


# ---------------------------------------------------------------------------
# Brute-force optimum by device-state / path enumeration (single period)
# ---------------------------------------------------------------------------

def enumerate_optimum(topo: NetworkTopology, catalog: DeviceCatalog,
                      demands: Sequence[Demand], scenarios: ScenarioSet,
                      ) -> float | None:
    """Single-period optimum by trying every combination of simple paths and
    pricing the cheapest device states that carry it. None when infeasible.

    Valid because the model's energy is monotone in card and chassis counts:
    some optimal solution uses per-demand simple paths and the minimal
    device states they imply.
    """
    assert len(scenarios) == 1, "oracle only covers one period"
    hours = scenarios.periods[0].duration
    g = nx.Graph()
    for arc in topo.arcs:
        g.add_edge(arc.tail, arc.head)
    choices = []
    for d in demands:
        paths = list(nx.all_simple_paths(g, d.origin, d.destination))
        if not paths:
            return None
        choices.append(paths)

    arc_idx = topo.arc_index
    best = None
    for combo in product(*choices):
        load = np.zeros(len(topo.arcs))
        for d, path in zip(demands, combo):
            for u, v in zip(path, path[1:]):
                load[arc_idx[(u, v)]] += d.value(0)
        w = np.zeros(len(topo.arcs), dtype=int)
        feasible = True
        for i, arc in enumerate(topo.arcs):
            need = math.ceil(load[i] / (catalog.mu_a * arc.card_capacity)
                             - 1e-12)
            if need > arc.cards:
                feasible = False
                break
            w[i] = need
        if not feasible:
            continue
        for fwd, rev in topo.links:
            w[fwd] = w[rev] = max(w[fwd], w[rev])
        on = np.zeros(len(topo.nodes))
        for j, node in enumerate(topo.nodes):
            incident = list(topo.out_arcs[j]) + list(topo.in_arcs[j])
            used = any(w[a] > 0 for a in incident)
            if not node.is_core or used:
                on[j] = 1.0
            if sum(topo.arcs[a].card_capacity * w[a] for a in incident) \
                    > catalog.chassis_capacity * on[j] + 1e-9:
                feasible = False
                break
        if not feasible:
            continue
        cost = hours * (catalog.chassis_power * on.sum()
                        + sum(topo.arcs[i].card_power * w[i]
                              for i in range(len(topo.arcs))))
        if best is None or cost < best:
            best = cost
    return best


def exhaustive_worst_case(routed_deviations: np.ndarray, budget: int) -> float:
    """Adversary optimum by literally trying every subset of at most
    ``budget`` demands."""
    from itertools import combinations

    values = [float(v) for v in routed_deviations]
    best = 0.0
    for size in range(0, min(budget, len(values)) + 1):
        for subset in combinations(values, size):
            best = max(best, sum(subset))
    return best
