"""Core domain types: device catalogs, topologies, demands, time periods,
solutions, and the energy accounting shared by every other module.

All types are plain value objects. Anything derivable (demand incidence,
per-arc loads, joint routing indicators) is computed on demand rather than
stored.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "DeviceCatalog",
    "Node",
    "Arc",
    "NetworkTopology",
    "Demand",
    "TimePeriod",
    "ScenarioSet",
    "NetworkSolution",
    "EnergyMetrics",
    "ValidationReport",
    "validate_topology",
    "validate_demands",
    "energy_of_solution",
    "full_active_consumption",
]


# ---------------------------------------------------------------------------
# Device parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DeviceCatalog:
    """Power and capacity parameters shared by all devices of an instance.

    Bandwidth is in Mbps, power in W. ``switch_on_factor`` is the fraction of
    the chassis hourly consumption charged each time a chassis wakes up.
    ``max_card_activations`` caps how many times a single card may be switched
    on over the daily horizon. ``mu_a`` / ``mu_b`` are the maximum link
    utilization fractions in normal operation and under failure.
    """

    name: str
    chassis_capacity: float
    chassis_power: float
    card_capacity: float
    card_power: float
    cards_per_link: int = 2
    switch_on_factor: float = 0.25
    max_card_activations: int = 1
    mu_a: float = 0.5
    mu_b: float = 0.85

    def validate(self) -> "ValidationReport":
        issues = []
        if self.chassis_capacity <= 0:
            issues.append("chassis_capacity must be positive")
        if self.card_capacity <= 0:
            issues.append("card_capacity must be positive")
        if self.cards_per_link < 1:
            issues.append("cards_per_link must be at least 1")
        if not (0.0 < self.mu_a <= self.mu_b <= 1.0):
            issues.append("utilization fractions must satisfy 0 < mu_a <= mu_b <= 1")
        if self.switch_on_factor < 0:
            issues.append("switch_on_factor must be nonnegative")
        if self.max_card_activations < 1:
            issues.append("max_card_activations must be at least 1")
        return ValidationReport(tuple(issues))


# ---------------------------------------------------------------------------
# Topology
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Node:
    id: str
    is_core: bool = True


@dataclass(frozen=True)
class Arc:
    """One direction of a bidirectional link, equipped with its own cards."""

    tail: str
    head: str
    cards: int
    card_capacity: float
    card_power: float


@dataclass(frozen=True)
class NetworkTopology:
    """Symmetric directed graph: every arc has a reverse twin with identical
    card count and capacity, so undirected links appear as arc pairs."""

    nodes: tuple[Node, ...]
    arcs: tuple[Arc, ...]

    @staticmethod
    def build(nodes: Iterable[Node], arcs: Iterable[Arc]) -> "NetworkTopology":
        return NetworkTopology(tuple(nodes), tuple(arcs))

    @cached_property
    def node_index(self) -> dict[str, int]:
        return {n.id: i for i, n in enumerate(self.nodes)}

    @cached_property
    def arc_index(self) -> dict[tuple[str, str], int]:
        return {(a.tail, a.head): i for i, a in enumerate(self.arcs)}

    @cached_property
    def reverse_arc(self) -> tuple[int, ...]:
        """Index of the anti-parallel twin of each arc."""
        idx = self.arc_index
        return tuple(idx[(a.head, a.tail)] for a in self.arcs)

    @cached_property
    def links(self) -> tuple[tuple[int, int], ...]:
        """Arc-index pairs (forward, reverse), one per undirected link, with
        the forward arc chosen as the lexicographically smaller endpoint pair."""
        out = []
        for i, a in enumerate(self.arcs):
            if (a.tail, a.head) < (a.head, a.tail):
                out.append((i, self.reverse_arc[i]))
        return tuple(out)

    @cached_property
    def out_arcs(self) -> tuple[tuple[int, ...], ...]:
        buckets: list[list[int]] = [[] for _ in self.nodes]
        for i, a in enumerate(self.arcs):
            buckets[self.node_index[a.tail]].append(i)
        return tuple(tuple(b) for b in buckets)

    @cached_property
    def in_arcs(self) -> tuple[tuple[int, ...], ...]:
        buckets: list[list[int]] = [[] for _ in self.nodes]
        for i, a in enumerate(self.arcs):
            buckets[self.node_index[a.head]].append(i)
        return tuple(tuple(b) for b in buckets)

    @property
    def core_nodes(self) -> tuple[int, ...]:
        return tuple(i for i, n in enumerate(self.nodes) if n.is_core)

    @property
    def edge_nodes(self) -> tuple[int, ...]:
        return tuple(i for i, n in enumerate(self.nodes) if not n.is_core)


def validate_topology(topology: NetworkTopology) -> "ValidationReport":
    """Collect every structural violation: duplicate ids, self-loops, missing
    or mismatched reverse arcs, dangling endpoints."""
    issues: list[str] = []
    seen_nodes: set[str] = set()
    for n in topology.nodes:
        if n.id in seen_nodes:
            issues.append(f"duplicate node id {n.id!r}")
        seen_nodes.add(n.id)

    pair_index: dict[tuple[str, str], Arc] = {}
    for a in topology.arcs:
        if a.tail == a.head:
            issues.append(f"self-loop at {a.tail!r}")
        for endpoint in (a.tail, a.head):
            if endpoint not in seen_nodes:
                issues.append(f"arc ({a.tail},{a.head}) references unknown node {endpoint!r}")
        if (a.tail, a.head) in pair_index:
            issues.append(f"duplicate arc ({a.tail},{a.head})")
        pair_index[(a.tail, a.head)] = a
        if a.cards < 1:
            issues.append(f"arc ({a.tail},{a.head}) has no card slots")
        if a.card_capacity <= 0:
            issues.append(f"arc ({a.tail},{a.head}) has nonpositive card capacity")

    for (tail, head), a in pair_index.items():
        rev = pair_index.get((head, tail))
        if rev is None:
            issues.append(f"arc ({tail},{head}) has no reverse twin")
        elif rev.cards != a.cards or rev.card_capacity != a.card_capacity:
            issues.append(f"arc ({tail},{head}) and its reverse disagree on cards or capacity")
    return ValidationReport(tuple(issues))


# ---------------------------------------------------------------------------
# Demands and time periods
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Demand:
    """A single origin-destination traffic demand.

    ``nominal_value`` is the scaled full-load volume. The three fraction
    tuples give, per period: the expected fraction of nominal traffic, the
    maximum deviation around it, and the realized fraction actually used when
    building deterministic models. Realized fractions are clamped at zero.
    """

    id: str
    origin: str
    destination: str
    nominal_value: float
    expected_fractions: tuple[float, ...]
    deviation_fractions: tuple[float, ...]
    realized_fractions: tuple[float, ...]

    def value(self, period: int) -> float:
        return self.realized_fractions[period] * self.nominal_value

    def expected_value(self, period: int) -> float:
        return self.expected_fractions[period] * self.nominal_value

    def deviation_value(self, period: int) -> float:
        return self.deviation_fractions[period] * self.nominal_value


def validate_demands(demands: Sequence[Demand], topology: NetworkTopology,
                     n_periods: int) -> "ValidationReport":
    issues: list[str] = []
    known = set(topology.node_index)
    seen: set[str] = set()
    for d in demands:
        if d.id in seen:
            issues.append(f"duplicate demand id {d.id!r}")
        seen.add(d.id)
        if d.origin == d.destination:
            issues.append(f"demand {d.id}: origin equals destination")
        for endpoint in (d.origin, d.destination):
            if endpoint not in known:
                issues.append(f"demand {d.id}: unknown node {endpoint!r}")
        if d.nominal_value <= 0:
            issues.append(f"demand {d.id}: nominal value must be positive")
        for name, fr in (("expected", d.expected_fractions),
                         ("deviation", d.deviation_fractions),
                         ("realized", d.realized_fractions)):
            if len(fr) != n_periods:
                issues.append(f"demand {d.id}: {name} fractions length != period count")
            if any(v < 0 for v in fr):
                issues.append(f"demand {d.id}: negative {name} fraction")
    return ValidationReport(tuple(issues))


@dataclass(frozen=True)
class TimePeriod:
    index: int
    duration: float  # hours
    label: str = ""


@dataclass(frozen=True)
class ScenarioSet:
    """Ordered daily time periods. When ``cyclic`` the period preceding the
    first one is the last one, so the profile repeats day after day."""

    periods: tuple[TimePeriod, ...]
    cyclic: bool = True

    def __len__(self) -> int:
        return len(self.periods)

    @property
    def durations(self) -> tuple[float, ...]:
        return tuple(p.duration for p in self.periods)

    def previous(self, period: int) -> int | None:
        """Index of the preceding period, wrapping when cyclic."""
        if period > 0:
            return period - 1
        return len(self.periods) - 1 if self.cyclic else None

    def validate(self) -> "ValidationReport":
        issues = []
        if not self.periods:
            issues.append("scenario set has no periods")
        if any(p.duration <= 0 for p in self.periods):
            issues.append("all period durations must be positive")
        return ValidationReport(tuple(issues))


# ---------------------------------------------------------------------------
# Solutions and energy accounting
# ---------------------------------------------------------------------------

@dataclass
class NetworkSolution:
    """Device states and routings for a full horizon.

    Array shapes: chassis_on (S,N), active_cards (S,A), switch_cost (S,N),
    primary (S,D,A), backup (S,D,A) when protection is on. Card activation
    indicators and joint primary/backup indicators are derivable and only
    stored when a solver produced them explicitly.
    """

    topology: NetworkTopology
    chassis_on: np.ndarray
    active_cards: np.ndarray
    switch_cost: np.ndarray
    primary: np.ndarray
    backup: np.ndarray | None = None
    card_activation: np.ndarray | None = None
    total_energy: float | None = None
    objective_bound: float | None = None
    gap: float | None = None

    @property
    def n_periods(self) -> int:
        return self.chassis_on.shape[0]

    @property
    def n_demands(self) -> int:
        return self.primary.shape[1]

    def routing_loads(self, demands: Sequence[Demand],
                      include_backup: bool = False) -> np.ndarray:
        """Per-period per-arc traffic volume (S,A) under realized fractions."""
        values = np.array([[d.value(s) for d in demands]
                           for s in range(self.n_periods)])
        routing = self.primary.astype(float)
        if include_backup and self.backup is not None:
            routing = routing + self.backup
        # (S,D) x (S,D,A) -> (S,A)
        return np.einsum("sd,sda->sa", values, routing)

    def recompute_switch_costs(self, catalog: DeviceCatalog,
                               cyclic: bool = True) -> None:
        """Overwrite switch_cost with the exact reactivation energy implied by
        the chassis trajectory: waking a chassis costs a fixed fraction of its
        hourly consumption."""
        y = self.chassis_on.astype(float)
        prev = np.roll(y, 1, axis=0)
        if not cyclic:
            prev[0] = y[0]  # no charge for the first period
        self.switch_cost = catalog.switch_on_factor * catalog.chassis_power * \
            np.maximum(0.0, y - prev)


@dataclass(frozen=True)
class EnergyMetrics:
    """Absolute consumption plus the ratios used throughout the benchmark."""

    absolute_energy: float          # Wh over the horizon
    full_active_energy: float       # Wh with every device on
    percent_of_full: float          # absolute / full-active, in (0, 1]
    gap_simple: float | None = None  # relative increase over the unprotected run


def energy_of_solution(solution: NetworkSolution, catalog: DeviceCatalog,
                       scenarios: ScenarioSet) -> EnergyMetrics:
    """Daily energy of a solution: per period, duration times the power of
    active chassis and cards, plus the (already energy-valued) chassis
    switch-on costs."""
    topology = solution.topology
    S = len(scenarios)
    if solution.chassis_on.shape != (S, len(topology.nodes)):
        raise ValueError("chassis state dimensions do not match topology/scenarios")
    if solution.active_cards.shape != (S, len(topology.arcs)):
        raise ValueError("card state dimensions do not match topology/scenarios")
    card_power = np.array([a.card_power for a in topology.arcs])
    hours = np.array(scenarios.durations)
    chassis = catalog.chassis_power * solution.chassis_on.sum(axis=1)
    cards = solution.active_cards @ card_power
    absolute = float(hours @ (chassis + cards) + solution.switch_cost.sum())
    full = full_active_consumption(topology, catalog, scenarios)
    percent = absolute / full if full > 0 else 0.0
    return EnergyMetrics(absolute, full, percent)


def full_active_consumption(topology: NetworkTopology, catalog: DeviceCatalog,
                            scenarios: ScenarioSet) -> float:
    """Energy of the always-on network: every chassis and every card slot of
    every directed arc active in all periods, no switch-on costs."""
    card_power = sum(a.card_power * a.cards for a in topology.arcs)
    chassis_power = catalog.chassis_power * len(topology.nodes)
    return float(sum(scenarios.durations) * (chassis_power + card_power))


# ---------------------------------------------------------------------------
# Validation plumbing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ValidationReport:
    issues: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.issues

    def merged(self, other: "ValidationReport") -> "ValidationReport":
        return ValidationReport(self.issues + other.issues)

    def raise_if_failed(self) -> None:
        if self.issues:
            raise ValueError("; ".join(self.issues))
