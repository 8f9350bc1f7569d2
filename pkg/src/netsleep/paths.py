"""Candidate-path generation for the restricted-path models.

For each demand, the unit-capacity max-flow value m sizes the candidate pool.
Each of the Omega rounds draws random link weights, extracts m successively
link-disjoint-if-possible shortest paths plus the minimum-spanning-tree path,
and the union is deduplicated, giving at most Omega*(m+1) paths per demand.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import networkx as nx
import numpy as np

from .model import Demand, NetworkTopology

__all__ = ["Path", "PathSet", "generate_paths", "max_flow_value"]

_INFLATION = 1000.0


@dataclass(frozen=True)
class Path:
    """A simple directed path as a node sequence."""

    nodes: tuple[str, ...]

    def __post_init__(self):
        if len(self.nodes) < 2:
            raise ValueError("a path needs at least two nodes")
        if len(set(self.nodes)) != len(self.nodes):
            raise ValueError("path repeats a node")

    def arc_pairs(self) -> tuple[tuple[str, str], ...]:
        return tuple(zip(self.nodes, self.nodes[1:]))

    @property
    def links(self) -> frozenset[frozenset[str]]:
        return frozenset(frozenset(pair) for pair in self.arc_pairs())


@dataclass(frozen=True)
class PathSet:
    """Candidate paths per demand id, with the per-demand max-flow values and
    the generation parameter that produced them."""

    paths: Mapping[str, tuple[Path, ...]]
    max_flow: Mapping[str, int]
    omega: int

    def paths_for(self, demand_id: str) -> tuple[Path, ...]:
        return self.paths[demand_id]

    def counts_ok(self) -> bool:
        return all(len(ps) <= self.omega * (self.max_flow[d] + 1)
                   for d, ps in self.paths.items())

    def to_text(self) -> str:
        lines = [f"# omega={self.omega}"]
        for d in sorted(self.paths):
            lines.append(f"{d} m={self.max_flow[d]}")
            for p in self.paths[d]:
                lines.append("  " + " ".join(p.nodes))
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_text(text: str) -> "PathSet":
        omega = 0
        paths: dict[str, list[Path]] = {}
        flows: dict[str, int] = {}
        current: str | None = None
        for raw in text.splitlines():
            if raw.startswith("#"):
                if "omega=" in raw:
                    omega = int(raw.split("omega=")[1])
                continue
            if not raw.strip():
                continue
            if raw.startswith("  "):
                if current is None:
                    raise ValueError("path line before any demand header")
                paths[current].append(Path(tuple(raw.split())))
            else:
                name, m_part = raw.split()
                current = name
                paths[current] = []
                flows[current] = int(m_part.split("=")[1])
        return PathSet({d: tuple(ps) for d, ps in paths.items()}, flows, omega)


def _undirected_graph(topology: NetworkTopology) -> nx.Graph:
    g = nx.Graph()
    g.add_nodes_from(n.id for n in topology.nodes)
    for fwd, _ in topology.links:
        arc = topology.arcs[fwd]
        g.add_edge(arc.tail, arc.head)
    return g


def max_flow_value(topology: NetworkTopology, origin: str, destination: str) -> int:
    """Max number of link-disjoint routes when every link carries one unit."""
    g = _undirected_graph(topology).to_directed()
    nx.set_edge_attributes(g, 1, "capacity")
    return int(nx.maximum_flow_value(g, origin, destination))


def generate_paths(topology: NetworkTopology, demands: Sequence[Demand],
                   omega: int, seed: int = 0) -> PathSet:
    """Seed-deterministic candidate paths for every demand."""
    if omega < 1:
        raise ValueError("omega must be at least 1")
    base = _undirected_graph(topology)
    edges = sorted(tuple(sorted(e)) for e in base.edges)
    flows = {d.id: max_flow_value(topology, d.origin, d.destination)
             for d in demands}
    collected: dict[str, dict[tuple[str, ...], None]] = {d.id: {} for d in demands}

    for rnd in range(omega):
        rng = np.random.default_rng(np.random.SeedSequence((seed, 0xA1B2, rnd)))
        weight = {e: float(w) for e, w in
                  zip(edges, rng.uniform(0.05, 1.0, size=len(edges)))}
        for d in demands:
            local = dict(weight)
            for _ in range(flows[d.id]):
                _apply_weights(base, local)
                try:
                    nodes = nx.shortest_path(base, d.origin, d.destination,
                                             weight="weight")
                except nx.NetworkXNoPath:
                    break
                collected[d.id].setdefault(tuple(nodes))
                for u, v in zip(nodes, nodes[1:]):
                    local[tuple(sorted((u, v)))] *= _INFLATION
        _apply_weights(base, weight)
        tree = nx.minimum_spanning_tree(base, weight="weight", algorithm="kruskal")
        for d in demands:
            if nx.has_path(tree, d.origin, d.destination):
                nodes = nx.shortest_path(tree, d.origin, d.destination)
                collected[d.id].setdefault(tuple(nodes))

    return PathSet(
        paths={did: tuple(Path(nodes) for nodes in ordered)
               for did, ordered in collected.items()},
        max_flow=flows,
        omega=omega,
    )


def _apply_weights(g: nx.Graph, weight: Mapping[tuple[str, str], float]) -> None:
    for (u, v), w in weight.items():
        g[u][v]["weight"] = w
