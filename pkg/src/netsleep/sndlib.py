"""Network data plumbing: the plain-text topology/traffic format, demand
subset selection, core/edge node splits, multi-period scenario generation,
and a self-contained instance file for reproducible experiments.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .model import (Arc, Demand, DeviceCatalog, NetworkTopology, Node,
                    ScenarioSet, TimePeriod)

__all__ = [
    "RawNode",
    "RawLink",
    "RawDemand",
    "RawSndInstance",
    "SndSyntaxError",
    "parse_sndlib",
    "serialize_sndlib",
    "ScenarioSpec",
    "DEFAULT_PROFILE",
    "default_periods",
    "build_scenarios",
    "select_largest_demands",
    "core_edge_split",
    "ProblemInstance",
    "topology_from_raw",
]


# ---------------------------------------------------------------------------
# Raw network data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RawNode:
    id: str
    x: float = 0.0
    y: float = 0.0


@dataclass(frozen=True)
class RawLink:
    id: str
    source: str
    target: str


@dataclass(frozen=True)
class RawDemand:
    id: str
    source: str
    target: str
    value: float


@dataclass(frozen=True)
class RawSndInstance:
    name: str
    nodes: tuple[RawNode, ...]
    links: tuple[RawLink, ...]
    demands: tuple[RawDemand, ...]

    def validate(self) -> None:
        ids = {n.id for n in self.nodes}
        if len(ids) != len(self.nodes):
            raise ValueError("duplicate node ids")
        for link in self.links:
            for end in (link.source, link.target):
                if end not in ids:
                    raise ValueError(
                        f"link {link.id!r} references unknown node {end!r}")
        for dem in self.demands:
            for end in (dem.source, dem.target):
                if end not in ids:
                    raise ValueError(
                        f"demand {dem.id!r} references unknown node {end!r}")
            if dem.value < 0:
                raise ValueError(f"demand {dem.id!r} has negative value")


class SndSyntaxError(ValueError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


_SECTION_RE = re.compile(r"^(NODES|LINKS|DEMANDS)\s*\(\s*$")


def parse_sndlib(text: str, name: str = "network") -> RawSndInstance:
    """Parse the plain-text network format with NODES/LINKS/DEMANDS sections.

    Link capacities/costs and demand routing attributes present in the file
    are ignored; the device catalog supplies capacities.
    """
    nodes: list[RawNode] = []
    links: list[RawLink] = []
    demands: list[RawDemand] = []
    section: str | None = None
    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line or line.startswith("?"):
            continue
        m = _SECTION_RE.match(line)
        if m:
            if section is not None:
                raise SndSyntaxError(line_no, f"unterminated {section} section")
            section = m.group(1)
            continue
        if line == ")":
            if section is None:
                raise SndSyntaxError(line_no, "stray closing parenthesis")
            section = None
            continue
        if section is None:
            raise SndSyntaxError(line_no, f"content outside any section: {line!r}")
        tokens = line.replace("(", " ( ").replace(")", " ) ").split()
        try:
            if section == "NODES":
                nodes.append(_parse_node(tokens))
            elif section == "LINKS":
                links.append(_parse_link(tokens))
            else:
                demands.append(_parse_demand(tokens))
        except (IndexError, ValueError) as exc:
            raise SndSyntaxError(line_no, f"malformed {section} entry: {exc}") \
                from None
    if section is not None:
        raise SndSyntaxError(line_no, f"unterminated {section} section")
    inst = RawSndInstance(name, tuple(nodes), tuple(links), tuple(demands))
    inst.validate()
    return inst


def _parse_node(tokens: list[str]) -> RawNode:
    # id ( x y )
    if len(tokens) >= 5 and tokens[1] == "(" and tokens[4] == ")":
        return RawNode(tokens[0], float(tokens[2]), float(tokens[3]))
    if len(tokens) == 1:
        return RawNode(tokens[0])
    raise ValueError("expected 'id ( x y )'")


def _parse_link(tokens: list[str]) -> RawLink:
    # id ( source target ) [capacities/costs ignored]
    if len(tokens) >= 5 and tokens[1] == "(" and tokens[4] == ")":
        return RawLink(tokens[0], tokens[2], tokens[3])
    raise ValueError("expected 'id ( source target ) ...'")


def _parse_demand(tokens: list[str]) -> RawDemand:
    # id ( source target ) routing_unit value [max_path_length]
    if len(tokens) >= 7 and tokens[1] == "(" and tokens[4] == ")":
        return RawDemand(tokens[0], tokens[2], tokens[3], float(tokens[6]))
    raise ValueError("expected 'id ( source target ) unit value ...'")


def serialize_sndlib(instance: RawSndInstance) -> str:
    out = ["?network format; type: network; version: 1.0", ""]
    out.append("NODES (")
    for n in instance.nodes:
        out.append(f"  {n.id} ( {n.x:.2f} {n.y:.2f} )")
    out.append(")")
    out.append("")
    out.append("LINKS (")
    for l in instance.links:
        out.append(f"  {l.id} ( {l.source} {l.target} ) 0.00 0.00 ( 0.00 0.00 )")
    out.append(")")
    out.append("")
    out.append("DEMANDS (")
    for d in instance.demands:
        out.append(f"  {d.id} ( {d.source} {d.target} ) 1 {d.value:.2f} UNLIMITED")
    out.append(")")
    out.append("")
    return "\n".join(out)


# ---------------------------------------------------------------------------
# Demand subset and core/edge split
# ---------------------------------------------------------------------------

def select_largest_demands(demands: Sequence[RawDemand], count: int) -> tuple[RawDemand, ...]:
    """The ``count`` largest-value demands, ties broken by id, in id order."""
    chosen = sorted(demands, key=lambda d: (-d.value, d.id))[:count]
    return tuple(sorted(chosen, key=lambda d: d.id))


def core_edge_split(node_ids: Sequence[str], seed: int) -> tuple[frozenset[str], frozenset[str]]:
    """Split nodes into (core, edge) halves at random; the edge half gets the
    odd node. Core nodes may sleep, edge nodes stay on."""
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xC0DE)))
    order = list(node_ids)
    rng.shuffle(order)
    half = len(order) // 2
    core = frozenset(order[:half])
    edge = frozenset(order[half:])
    return core, edge


def topology_from_raw(raw: RawSndInstance, catalog: DeviceCatalog,
                      core_nodes: Iterable[str]) -> NetworkTopology:
    """Symmetrize undirected links into arc pairs equipped from the catalog."""
    core = set(core_nodes)
    nodes = tuple(Node(n.id, is_core=n.id in core) for n in raw.nodes)
    arcs: list[Arc] = []
    for link in raw.links:
        for tail, head in ((link.source, link.target), (link.target, link.source)):
            arcs.append(Arc(tail, head, catalog.cards_per_link,
                            catalog.card_capacity, catalog.card_power))
    return NetworkTopology(nodes, tuple(arcs))


# ---------------------------------------------------------------------------
# Scenarios
# ---------------------------------------------------------------------------

DEFAULT_PROFILE: tuple[float, ...] = (0.7, 1.0, 0.9, 1.0, 0.9, 0.3)

_DEFAULT_SPANS = ((3.0, "8-11"), (2.0, "11-13"), (1.5, "13-14:30"),
                  (4.0, "14:30-18:30"), (4.0, "18:30-22:30"), (9.5, "22:30-8"))


def default_periods() -> tuple[TimePeriod, ...]:
    return tuple(TimePeriod(i, dur, label)
                 for i, (dur, label) in enumerate(_DEFAULT_SPANS))


@dataclass(frozen=True)
class ScenarioSpec:
    """How per-period traffic fractions are produced.

    ``kind='aver'`` realizes the profile exactly; ``kind='random'`` draws each
    fraction uniformly from [profile - deviation, profile + deviation],
    truncated at zero.
    """

    profile: tuple[float, ...] = DEFAULT_PROFILE
    deviation: float = 0.2
    kind: str = "aver"
    seed: int = 0
    periods: tuple[TimePeriod, ...] = field(default_factory=default_periods)

    def __post_init__(self):
        if self.kind not in ("aver", "random"):
            raise ValueError(f"unknown scenario kind {self.kind!r}")
        if len(self.profile) != len(self.periods):
            raise ValueError("profile length must match the number of periods")
        if self.deviation < 0:
            raise ValueError("deviation must be nonnegative")


def build_scenarios(demands: Sequence[RawDemand], spec: ScenarioSpec,
                    scale: float = 1.0) -> tuple[tuple[Demand, ...], ScenarioSet]:
    """Turn raw demand values into multi-period demands.

    The nominal volume is ``scale`` times the raw value; each period's volume
    is the realized fraction times the nominal. Identical seeds give
    bit-identical fractions.
    """
    if scale <= 0:
        raise ValueError("scale must be positive")
    S = len(spec.periods)
    profile = np.asarray(spec.profile, dtype=float)
    if spec.kind == "aver" or spec.deviation == 0.0:
        realized = np.tile(profile, (len(demands), 1))
    else:
        rng = np.random.default_rng(np.random.SeedSequence((spec.seed, 0x5CE9)))
        noise = rng.uniform(-spec.deviation, spec.deviation, size=(len(demands), S))
        realized = np.maximum(0.0, profile[None, :] + noise)
    out = []
    for i, raw in enumerate(demands):
        out.append(Demand(
            id=raw.id,
            origin=raw.source,
            destination=raw.target,
            nominal_value=scale * raw.value,
            expected_fractions=tuple(float(v) for v in profile),
            deviation_fractions=(spec.deviation,) * S,
            realized_fractions=tuple(float(v) for v in realized[i]),
        ))
    return tuple(out), ScenarioSet(spec.periods, cyclic=True)


# ---------------------------------------------------------------------------
# Self-contained instance files
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProblemInstance:
    """Everything needed to rebuild an experiment bit-exactly: the selected
    network and demand subset, the catalog name, the core/edge split, the seed
    used to derive it, and the traffic scaling factor once computed."""

    name: str
    nodes: tuple[RawNode, ...]
    links: tuple[RawLink, ...]
    demands: tuple[RawDemand, ...]
    catalog_name: str
    core_nodes: frozenset[str]
    seed: int = 0
    scale: float | None = None

    @staticmethod
    def from_raw(raw: RawSndInstance, catalog_name: str, demand_count: int,
                 seed: int) -> "ProblemInstance":
        subset = select_largest_demands(raw.demands, demand_count)
        core, _ = core_edge_split([n.id for n in raw.nodes], seed)
        return ProblemInstance(raw.name, raw.nodes, raw.links, subset,
                               catalog_name, core, seed, None)

    def raw(self) -> RawSndInstance:
        return RawSndInstance(self.name, self.nodes, self.links, self.demands)

    def topology(self, catalog: DeviceCatalog) -> NetworkTopology:
        return topology_from_raw(self.raw(), catalog, self.core_nodes)

    def with_scale(self, scale: float) -> "ProblemInstance":
        return replace(self, scale=scale)

    def to_json(self) -> str:
        payload = {
            "name": self.name,
            "nodes": [[n.id, n.x, n.y] for n in self.nodes],
            "links": [[l.id, l.source, l.target] for l in self.links],
            "demands": [[d.id, d.source, d.target, d.value] for d in self.demands],
            "catalog": self.catalog_name,
            "core_nodes": sorted(self.core_nodes),
            "seed": self.seed,
            "scale": self.scale,
        }
        return json.dumps(payload, indent=1, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "ProblemInstance":
        payload = json.loads(text)
        return ProblemInstance(
            name=payload["name"],
            nodes=tuple(RawNode(i, x, y) for i, x, y in payload["nodes"]),
            links=tuple(RawLink(i, s, t) for i, s, t in payload["links"]),
            demands=tuple(RawDemand(i, s, t, v) for i, s, t, v in payload["demands"]),
            catalog_name=payload["catalog"],
            core_nodes=frozenset(payload["core_nodes"]),
            seed=payload["seed"],
            scale=payload["scale"],
        )

    def save(self, path) -> None:
        from pathlib import Path
        Path(path).write_text(self.to_json() + "\n")

    @staticmethod
    def load(path) -> "ProblemInstance":
        from pathlib import Path
        return ProblemInstance.from_json(Path(path).read_text())
