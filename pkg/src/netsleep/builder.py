"""Construction of the optimization models.

One parametric builder covers every variant: the base sleep-mode model,
dedicated and shared protection, their smart-consumption versions, the robust
counterpart of the capacity constraints, and the restricted-path
reformulation. Thin wrappers expose the common configurations.

Variable names are structured and zero-padded (``x_s0_d03_a05``) so that runs
are reproducible and solutions can be decoded from an assignment map alone.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .milp import BINARY, CONTINUOUS, INTEGER, MilpInstance
from .model import (Demand, DeviceCatalog, NetworkSolution, NetworkTopology,
                    ScenarioSet, validate_demands, validate_topology)

__all__ = [
    "ModelConfig",
    "RobustConfig",
    "CarriedState",
    "ModelSizeError",
    "StructuralInfeasibility",
    "build_model",
    "build_base",
    "build_dedicated",
    "build_shared",
    "build_robust",
    "extract_solution",
    "solution_assignment",
    "translate_dedicated_to_shared",
    "project_routing_only",
]

PROTECTIONS = ("none", "dedicated", "shared")


class ModelSizeError(ValueError):
    """Raised when a model would exceed the configured size budget."""


class StructuralInfeasibility(ValueError):
    """Raised when no feasible routing can exist regardless of device states."""


@dataclass(frozen=True)
class RobustConfig:
    """Cardinality-budgeted uncertainty: at most ``budget`` demands per arc and
    period deviate to their maximum simultaneously. ``budget`` is either one
    integer or a per-(period, arc) nested tuple."""

    budget: int | tuple[tuple[int, ...], ...] = 0

    def budget_at(self, period: int, arc: int) -> int:
        if isinstance(self.budget, int):
            return self.budget
        return self.budget[period][arc]


@dataclass(frozen=True)
class ModelConfig:
    protection: str = "none"
    smart: bool = False
    robust: RobustConfig | None = None
    restricted_paths: "object | None" = None  # PathSet, kept loose to avoid cycles
    free_first_period: bool = False
    binary_joint: bool = False
    strengthen: bool = False   # redundant routing->chassis cuts, same optimum
    size_guard_nonzeros: int = 5_000_000

    def validated(self) -> "ModelConfig":
        if self.protection not in PROTECTIONS:
            raise ValueError(f"unknown protection {self.protection!r}")
        if self.smart and self.protection == "none":
            raise ValueError("smart consumption requires protection")
        if self.robust is not None and self.protection == "shared":
            raise ValueError("robust shared protection is not supported")
        return self


@dataclass(frozen=True)
class CarriedState:
    """Previous-period device states carried into a single-period model:
    constant chassis states for the reactivation rows, constant card counts
    for the activation-linking rows, and per-arc card bounds (cards locked on
    raise the floor, exhausted activation budgets cap the ceiling)."""

    prev_chassis_on: np.ndarray   # (N,) in {0,1}
    prev_cards: np.ndarray        # (A,)
    min_cards: np.ndarray         # (A,)
    max_cards: np.ndarray         # (A,)


def _pad(count: int) -> int:
    return max(1, len(str(max(0, count - 1))))


@dataclass(frozen=True)
class _Names:
    """Zero-padded structured variable names."""

    s: int
    n: int
    a: int
    d: int
    k: int
    p: int

    @staticmethod
    def for_sizes(n_periods: int, n_nodes: int, n_arcs: int, n_demands: int,
                  n_cards: int, n_paths: int) -> "_Names":
        return _Names(_pad(n_periods), _pad(n_nodes), _pad(n_arcs),
                      _pad(n_demands), _pad(n_cards), _pad(n_paths))

    def y(self, s: int, j: int) -> str:
        return f"y_s{s:0{self.s}d}_n{j:0{self.n}d}"

    def z(self, s: int, j: int) -> str:
        return f"z_s{s:0{self.s}d}_n{j:0{self.n}d}"

    def w(self, s: int, a: int) -> str:
        return f"w_s{s:0{self.s}d}_a{a:0{self.a}d}"

    def u(self, s: int, a: int, k: int) -> str:
        return f"u_s{s:0{self.s}d}_a{a:0{self.a}d}_k{k:0{self.k}d}"

    def x(self, s: int, d: int, a: int) -> str:
        return f"x_s{s:0{self.s}d}_d{d:0{self.d}d}_a{a:0{self.a}d}"

    def xi(self, s: int, d: int, a: int) -> str:
        return f"xi_s{s:0{self.s}d}_d{d:0{self.d}d}_a{a:0{self.a}d}"

    def g(self, s: int, d: int, p: int, b: int) -> str:
        return (f"g_s{s:0{self.s}d}_d{d:0{self.d}d}"
                f"_p{p:0{self.a}d}_b{b:0{self.a}d}")

    def eps(self, s: int, a: int, failover: bool) -> str:
        stem = "epsb" if failover else "eps"
        return f"{stem}_s{s:0{self.s}d}_a{a:0{self.a}d}"

    def dev(self, s: int, d: int, a: int, failover: bool) -> str:
        stem = "lb" if failover else "l"
        return f"{stem}_s{s:0{self.s}d}_d{d:0{self.d}d}_a{a:0{self.a}d}"

    def chi(self, s: int, d: int, p: int) -> str:
        return f"chi_s{s:0{self.s}d}_d{d:0{self.d}d}_p{p:0{self.p}d}"

    def lam(self, s: int, d: int, p: int) -> str:
        return f"lam_s{s:0{self.s}d}_d{d:0{self.d}d}_p{p:0{self.p}d}"


def _tag(family: str, *parts: object) -> str:
    return family + "".join(f"_{p}" for p in parts)


# ---------------------------------------------------------------------------
# The parametric builder
# ---------------------------------------------------------------------------

def build_model(topology: NetworkTopology, catalog: DeviceCatalog,
                demands: Sequence[Demand], scenarios: ScenarioSet,
                config: ModelConfig, *, period: int | None = None,
                carried: CarriedState | None = None,
                fully_active: bool = False,
                name: str | None = None) -> MilpInstance:
    """Build the MILP for the requested variant.

    ``period=None`` builds the full cyclic multi-period model. Passing a
    period index builds the single-period model used by the sequential
    heuristic, with ``carried`` providing the previous-period states (default:
    everything previously on, all card activations still available).
    ``fully_active`` pins every chassis on and every card active, turning the
    model into a pure routing-feasibility check.
    """
    config = config.validated()
    validate_topology(topology).raise_if_failed()
    validate_demands(demands, topology, len(scenarios)).raise_if_failed()
    if len(scenarios) < 1:
        raise ValueError("at least one period is required")

    arcs = topology.arcs
    nodes = topology.nodes
    A, N, D = len(arcs), len(nodes), len(demands)
    node_of = topology.node_index
    reverse = topology.reverse_arc
    paths = config.restricted_paths
    periods = list(range(len(scenarios))) if period is None else [int(period)]
    if period is not None and not (0 <= period < len(scenarios)):
        raise ValueError("period index out of range")
    single = period is not None
    if single and carried is None:
        carried = CarriedState(
            prev_chassis_on=np.ones(N),
            prev_cards=np.array([a.cards for a in arcs], dtype=float),
            min_cards=np.zeros(A),
            max_cards=np.array([a.cards for a in arcs], dtype=float),
        )

    protected = config.protection != "none"
    shared = config.protection == "shared"
    robust = config.robust

    if shared:
        _shared_size_guard(config, len(periods), A, D)

    max_cards_global = max(a.cards for a in arcs)
    n_paths_max = 0
    path_arcs: list[list[tuple[int, ...]]] | None = None
    if paths is not None:
        path_arcs = [[tuple(topology.arc_index[hop] for hop in p.arc_pairs())
                      for p in paths.paths_for(d.id)] for d in demands]
        n_paths_max = max((len(ps) for ps in path_arcs), default=0)
        _check_paths_cover(demands, path_arcs, protected, reverse)
    else:
        _check_routability(topology, demands, protected)

    nm = _Names.for_sizes(len(scenarios), N, A, D, max_cards_global, n_paths_max)
    inst = MilpInstance(name or _model_name(config, single, periods))

    q = np.array([[d.value(s) for d in demands] for s in periods])       # local s
    q_bar = np.array([[d.expected_value(s) for d in demands] for s in periods])
    q_hat = np.array([[d.deviation_value(s) for d in demands] for s in periods])
    # robust models work on expected volumes; a zero budget with zero
    # deviations degenerates to exactly the nominal matrix on those volumes
    chassis_load = q_bar if robust is not None else q
    card_load = chassis_load
    use_duals = robust is not None and not (
        np.all(q_hat == 0.0)
        and all(robust.budget_at(s, a) == 0 for s in periods for a in range(A)))

    # -- variables ----------------------------------------------------------
    y = np.empty((len(periods), N), dtype=np.int64)
    z = np.empty((len(periods), N), dtype=np.int64)
    w = np.empty((len(periods), A), dtype=np.int64)
    u: dict[tuple[int, int, int], int] = {}
    for si, s in enumerate(periods):
        for j in range(N):
            fixed = fully_active or not nodes[j].is_core
            y[si, j] = inst.add_variable(nm.y(s, j), BINARY,
                                         lb=1.0 if fixed else 0.0, ub=1.0)
        for j in range(N):
            z[si, j] = inst.add_variable(nm.z(s, j), CONTINUOUS, 0.0)
        for a in range(A):
            lo = float(carried.min_cards[a]) if single else 0.0
            hi = float(min(arcs[a].cards, carried.max_cards[a])) if single \
                else float(arcs[a].cards)
            if fully_active:
                lo = hi
            if lo > hi:
                raise ValueError("carried state forces more cards than allowed")
            w[si, a] = inst.add_variable(nm.w(s, a), INTEGER, lo, hi)
        for a in range(A):
            for k in range(arcs[a].cards):
                u[(si, a, k)] = inst.add_variable(nm.u(s, a, k), BINARY)

    # routing expressions: x_expr[si][d][a] is the list of variable indices
    # whose sum plays the role of the primary-routing indicator on arc a
    if paths is None:
        x_var = np.empty((len(periods), D, A), dtype=np.int64)
        for si, s in enumerate(periods):
            for d in range(D):
                for a in range(A):
                    x_var[si, d, a] = inst.add_variable(nm.x(s, d, a), BINARY)
        xi_var = None
        if protected:
            xi_var = np.empty((len(periods), D, A), dtype=np.int64)
            for si, s in enumerate(periods):
                for d in range(D):
                    for a in range(A):
                        xi_var[si, d, a] = inst.add_variable(nm.xi(s, d, a), BINARY)
        x_expr = [[[ [int(x_var[si, d, a])] for a in range(A)]
                   for d in range(D)] for si in range(len(periods))]
        xi_expr = None if xi_var is None else \
            [[[ [int(xi_var[si, d, a])] for a in range(A)]
              for d in range(D)] for si in range(len(periods))]
    else:
        chi: list[list[list[int]]] = []
        lam: list[list[list[int]]] = []
        for si, s in enumerate(periods):
            chi.append([[inst.add_variable(nm.chi(s, d, p), BINARY)
                         for p in range(len(path_arcs[d]))] for d in range(D)])
            if protected:
                lam.append([[inst.add_variable(nm.lam(s, d, p), BINARY)
                             for p in range(len(path_arcs[d]))] for d in range(D)])
        x_expr = [[_arc_membership(path_arcs[d], chi[si][d], A)
                   for d in range(D)] for si in range(len(periods))]
        xi_expr = None if not protected else \
            [[_arc_membership(path_arcs[d], lam[si][d], A)
              for d in range(D)] for si in range(len(periods))]

    g: dict[tuple[int, int, int, int], int] = {}
    if shared:
        g_kind = BINARY if config.binary_joint else CONTINUOUS
        for si, s in enumerate(periods):
            for d in range(D):
                for p in range(A):
                    for b in range(A):
                        if b == p or b == reverse[p]:
                            continue  # disjointness forces these to zero
                        g[(si, d, p, b)] = inst.add_variable(
                            nm.g(s, d, p, b), g_kind, 0.0, 1.0)

    eps: dict[tuple[int, int, bool], int] = {}
    dev: dict[tuple[int, int, int, bool], int] = {}
    if use_duals:
        layers = [False] + ([True] if protected else [])
        for failover in layers:
            for si, s in enumerate(periods):
                for a in range(A):
                    eps[(si, a, failover)] = inst.add_variable(
                        nm.eps(s, a, failover), CONTINUOUS, 0.0)
                for d in range(D):
                    for a in range(A):
                        dev[(si, d, a, failover)] = inst.add_variable(
                            nm.dev(s, d, a, failover), CONTINUOUS, 0.0)

    # -- objective: per-period power weighted by duration, plus switch-on ----
    for si, s in enumerate(periods):
        hours = scenarios.periods[s].duration
        for j in range(N):
            inst.add_objective_term(int(y[si, j]), hours * catalog.chassis_power)
            inst.add_objective_term(int(z[si, j]), 1.0)
        for a in range(A):
            inst.add_objective_term(int(w[si, a]), hours * arcs[a].card_power)

    # -- routing structure ---------------------------------------------------
    if paths is None:
        _flow_balance(inst, "flow_balance", x_var, demands, topology, periods, nm)
        if protected:
            _flow_balance(inst, "backup_flow_balance", xi_var, demands,
                          topology, periods, nm)
    else:
        for si, s in enumerate(periods):
            for d in range(D):
                inst.add_constraint(_tag("choose_primary_path", f"s{s}", f"d{d}"),
                                    [(v, 1.0) for v in chi[si][d]], "=", 1.0)
                if protected:
                    inst.add_constraint(_tag("choose_backup_path", f"s{s}", f"d{d}"),
                                        [(v, 1.0) for v in lam[si][d]], "=", 1.0)

    if protected:
        for si, s in enumerate(periods):
            for d in range(D):
                for a in range(A):
                    both = [(v, 1.0) for v in x_expr[si][d][a]] + \
                           [(v, 1.0) for v in xi_expr[si][d][a]]
                    inst.add_constraint(_tag("link_disjoint", f"s{s}", f"d{d}", f"a{a}"),
                                        both, "<=", 1.0)
                    mixed = [(v, 1.0) for v in x_expr[si][d][a]] + \
                            [(v, 1.0) for v in xi_expr[si][d][reverse[a]]]
                    inst.add_constraint(_tag("reverse_link_disjoint",
                                             f"s{s}", f"d{d}", f"a{a}"),
                                        mixed, "<=", 1.0)

    # -- chassis capacity ----------------------------------------------------
    chassis_family = "chassis_capacity_protected" if protected else "chassis_capacity"
    for si, s in enumerate(periods):
        for j in range(N):
            terms: dict[int, float] = {}
            for a in list(topology.out_arcs[j]) + list(topology.in_arcs[j]):
                for d in range(D):
                    load = chassis_load[si, d]
                    for v in x_expr[si][d][a]:
                        terms[v] = terms.get(v, 0.0) + load
                    if protected:
                        for v in xi_expr[si][d][a]:
                            terms[v] = terms.get(v, 0.0) + load
            terms[int(y[si, j])] = terms.get(int(y[si, j]), 0.0) - catalog.chassis_capacity
            inst.add_constraint(_tag(chassis_family, f"s{s}", f"n{j}"),
                                sorted(terms.items()), "<=", 0.0)

    if config.strengthen:
        # redundant by the capacity rows, but tighten the relaxation: routing
        # a demand over an arc forces both endpoint chassis on
        node_of = topology.node_index
        ends = [(node_of[arc.tail], node_of[arc.head]) for arc in arcs]
        for si, s in enumerate(periods):
            for d in range(D):
                for a in range(A):
                    users = [(v, 1.0) for v in x_expr[si][d][a]]
                    if protected:
                        users += [(v, 1.0) for v in xi_expr[si][d][a]]
                    if not users:
                        continue
                    for label, j in zip(("tail", "head"), ends[a]):
                        if fully_active or not nodes[j].is_core:
                            continue
                        inst.add_constraint(
                            _tag("chassis_indicator", f"s{s}", f"d{d}",
                                 f"a{a}", label),
                            users + [(int(y[si, j]), -1.0)], "<=", 0.0)

    # -- primary card capacity (possibly robust) ------------------------------
    for si, s in enumerate(periods):
        for a in range(A):
            cap = catalog.mu_a * arcs[a].card_capacity
            if not use_duals:
                terms = {}
                for d in range(D):
                    for v in x_expr[si][d][a]:
                        terms[v] = terms.get(v, 0.0) + card_load[si, d]
                terms[int(w[si, a])] = -cap
                inst.add_constraint(_tag("card_capacity_primary", f"s{s}", f"a{a}"),
                                    sorted(terms.items()), "<=", 0.0)
            else:
                _robust_capacity_rows(
                    inst, nm, si, s, a, demands=range(D),
                    routing=lambda d: x_expr[si][d][a],
                    q_bar=q_bar, q_hat=q_hat,
                    budget=robust.budget_at(s, a),
                    eps_var=eps[(si, a, False)],
                    dev_var=lambda d: dev[(si, d, a, False)],
                    capacity_terms=[(int(w[si, a]), -cap)],
                    family="robust_card_capacity",
                    dev_family="robust_deviation")

    # -- failure capacity ----------------------------------------------------
    if protected and not shared:
        for si, s in enumerate(periods):
            for a in range(A):
                head = node_of[arcs[a].head]
                if config.smart:
                    gate = [(int(y[si, head]),
                             -catalog.mu_b * arcs[a].card_capacity * arcs[a].cards)]
                    family = "smart_failover_capacity"
                else:
                    gate = [(int(w[si, a]), -catalog.mu_b * arcs[a].card_capacity)]
                    family = "card_capacity_failover"
                if not use_duals:
                    terms = {}
                    for d in range(D):
                        for v in x_expr[si][d][a]:
                            terms[v] = terms.get(v, 0.0) + card_load[si, d]
                        for v in xi_expr[si][d][a]:
                            terms[v] = terms.get(v, 0.0) + card_load[si, d]
                    for idx, coef in gate:
                        terms[idx] = terms.get(idx, 0.0) + coef
                    inst.add_constraint(_tag(family, f"s{s}", f"a{a}"),
                                        sorted(terms.items()), "<=", 0.0)
                else:
                    _robust_capacity_rows(
                        inst, nm, si, s, a, demands=range(D),
                        routing=lambda d: x_expr[si][d][a] + xi_expr[si][d][a],
                        q_bar=q_bar, q_hat=q_hat,
                        budget=robust.budget_at(s, a),
                        eps_var=eps[(si, a, True)],
                        dev_var=lambda d: dev[(si, d, a, True)],
                        capacity_terms=gate,
                        family="robust_" + family,
                        dev_family="robust_failover_deviation")

    if shared:
        for key, gv in g.items():
            si, d, p, b = key
            s = periods[si]
            terms = [(gv, 1.0)] + [(v, -1.0) for v in x_expr[si][d][p]] + \
                    [(v, -1.0) for v in xi_expr[si][d][b]]
            inst.add_constraint(_tag("joint_lb", f"s{s}", f"d{d}", f"p{p}", f"b{b}"),
                                terms, ">=", -1.0)
        for si, s in enumerate(periods):
            for a in range(A):
                head = node_of[arcs[a].head]
                if config.smart:
                    gate = (int(y[si, head]),
                            -catalog.mu_b * arcs[a].card_capacity * arcs[a].cards)
                    family = "smart_failure_capacity"
                else:
                    gate = (int(w[si, a]), -catalog.mu_b * arcs[a].card_capacity)
                    family = "card_capacity_failure"
                for f in range(A):
                    if f == a:
                        continue
                    terms = {}
                    for d in range(D):
                        for v in x_expr[si][d][a]:
                            terms[v] = terms.get(v, 0.0) + q[si, d]
                        gv = g.get((si, d, f, a))
                        if gv is not None:
                            terms[gv] = terms.get(gv, 0.0) + q[si, d]
                    terms[gate[0]] = terms.get(gate[0], 0.0) + gate[1]
                    inst.add_constraint(_tag(family, f"s{s}", f"a{a}", f"f{f}"),
                                        sorted(terms.items()), "<=", 0.0)

    # -- chassis/card state dynamics ------------------------------------------
    delta_pw = catalog.switch_on_factor * catalog.chassis_power
    if single:
        si, s = 0, periods[0]
        for j in range(N):
            rhs = -delta_pw * float(carried.prev_chassis_on[j])
            inst.add_constraint(_tag("chassis_switch_energy", f"s{s}", f"n{j}"),
                                [(int(z[si, j]), 1.0), (int(y[si, j]), -delta_pw)],
                                ">=", rhs)
        for a in range(A):
            terms = [(u[(si, a, k)], 1.0) for k in range(arcs[a].cards)]
            terms.append((int(w[si, a]), -1.0))
            inst.add_constraint(_tag("card_activation_link", f"s{s}", f"a{a}"),
                                terms, ">=", -float(carried.prev_cards[a]))
    else:
        for si, s in enumerate(periods):
            prev = scenarios.previous(s)
            if prev is None or (config.free_first_period and si == 0):
                continue
            pi = periods.index(prev)
            for j in range(N):
                inst.add_constraint(_tag("chassis_switch_energy", f"s{s}", f"n{j}"),
                                    [(int(z[si, j]), 1.0),
                                     (int(y[si, j]), -delta_pw),
                                     (int(y[pi, j]), delta_pw)], ">=", 0.0)
            for a in range(A):
                terms = [(u[(si, a, k)], 1.0) for k in range(arcs[a].cards)]
                terms.append((int(w[si, a]), -1.0))
                terms.append((int(w[pi, a]), 1.0))
                inst.add_constraint(_tag("card_activation_link", f"s{s}", f"a{a}"),
                                    terms, ">=", 0.0)

    for a in range(A):
        for k in range(arcs[a].cards):
            terms = [(u[(si, a, k)], 1.0) for si in range(len(periods))]
            inst.add_constraint(_tag("card_activation_limit", f"a{a}", f"k{k}"),
                                terms, "<=", float(catalog.max_card_activations))

    for si, s in enumerate(periods):
        for fwd, rev in topology.links:
            inst.add_constraint(_tag("card_symmetry", f"s{s}", f"a{fwd}"),
                                [(int(w[si, fwd]), 1.0), (int(w[si, rev]), -1.0)],
                                "=", 0.0)

    return inst.freeze()


def _model_name(config: ModelConfig, single: bool, periods: list[int]) -> str:
    bits = [config.protection]
    if config.smart:
        bits.append("smart")
    if config.robust is not None:
        bits.append("robust")
    if config.restricted_paths is not None:
        bits.append("paths")
    if single:
        bits.append(f"period{periods[0]}")
    return "-".join(bits)


def _arc_membership(arc_paths: list[tuple[int, ...]], variables: list[int],
                    n_arcs: int) -> list[list[int]]:
    """For each arc, the path-choice variables whose path crosses it."""
    member: list[list[int]] = [[] for _ in range(n_arcs)]
    for p, arcs_of_p in enumerate(arc_paths):
        for a in arcs_of_p:
            member[a].append(variables[p])
    return member


def _check_routability(topology: NetworkTopology, demands: Sequence[Demand],
                       protected: bool) -> None:
    """Refuse demands the topology cannot carry before building any rows.

    A protected demand needs two link-disjoint routes, an unprotected one
    needs a single route; both are max-flow questions on the undirected
    link graph.
    """
    from .paths import max_flow_value

    need = 2 if protected else 1
    for dem in demands:
        if max_flow_value(topology, dem.origin, dem.destination) < need:
            what = ("no link-disjoint primary/backup pair exists"
                    if protected else "origin and destination are disconnected")
        else:
            continue
        raise StructuralInfeasibility(f"demand {dem.id}: {what}")


def _check_paths_cover(demands: Sequence[Demand],
                       path_arcs: list[list[tuple[int, ...]]],
                       protected: bool, reverse: tuple[int, ...]) -> None:
    for d, dem in enumerate(demands):
        if not path_arcs[d]:
            raise StructuralInfeasibility(f"demand {dem.id}: no candidate path")
        if protected:
            if not _has_disjoint_pair(path_arcs[d], reverse):
                raise StructuralInfeasibility(
                    f"demand {dem.id}: no link-disjoint primary/backup pair "
                    "in the path set")


def _has_disjoint_pair(arc_paths: list[tuple[int, ...]],
                       reverse: tuple[int, ...]) -> bool:
    sets = [frozenset(p) | frozenset(reverse[a] for a in p) for p in arc_paths]
    plain = [frozenset(p) for p in arc_paths]
    for i in range(len(arc_paths)):
        for j in range(len(arc_paths)):
            if i != j and not (sets[i] & plain[j]):
                return True
    return False


def _flow_balance(inst: MilpInstance, family: str, var: np.ndarray,
                  demands: Sequence[Demand], topology: NetworkTopology,
                  periods: list[int], nm: _Names) -> None:
    node_of = topology.node_index
    for si, s in enumerate(periods):
        for d, dem in enumerate(demands):
            for j in range(len(topology.nodes)):
                terms = [(int(var[si, d, a]), 1.0) for a in topology.out_arcs[j]]
                terms += [(int(var[si, d, a]), -1.0) for a in topology.in_arcs[j]]
                rhs = 1.0 if j == node_of[dem.origin] else \
                    (-1.0 if j == node_of[dem.destination] else 0.0)
                inst.add_constraint(_tag(family, f"s{s}", f"d{d}", f"n{j}"),
                                    terms, "=", rhs)


def _robust_capacity_rows(inst: MilpInstance, nm: _Names, si: int, s: int, a: int,
                          demands, routing, q_bar, q_hat, budget: int,
                          eps_var: int, dev_var, capacity_terms, family: str,
                          dev_family: str) -> None:
    """Dualized worst-case capacity: expected load plus the budgeted deviation
    bound, with one deviation row per demand."""
    terms: dict[int, float] = {}
    for d in demands:
        for v in routing(d):
            terms[v] = terms.get(v, 0.0) + q_bar[si, d]
        terms[dev_var(d)] = terms.get(dev_var(d), 0.0) + 1.0
    terms[eps_var] = terms.get(eps_var, 0.0) + float(budget)
    for idx, coef in capacity_terms:
        terms[idx] = terms.get(idx, 0.0) + coef
    inst.add_constraint(_tag(family, f"s{s}", f"a{a}"),
                        sorted(terms.items()), "<=", 0.0)
    for d in demands:
        row = {eps_var: 1.0, dev_var(d): 1.0}
        for v in routing(d):
            row[v] = row.get(v, 0.0) - q_hat[si, d]
        inst.add_constraint(_tag(dev_family, f"s{s}", f"d{d}", f"a{a}"),
                            sorted(row.items()), ">=", 0.0)


def _shared_size_guard(config: ModelConfig, n_periods: int, A: int, D: int) -> None:
    joint_vars = n_periods * D * A * (A - 2)
    linearization_nnz = 3 * joint_vars
    capacity_nnz = n_periods * A * (A - 1) * (2 * D + 1)
    estimate = linearization_nnz + capacity_nnz
    if estimate > config.size_guard_nonzeros:
        raise ModelSizeError(
            f"shared model would need about {estimate:,} nonzeros, above the "
            f"guard of {config.size_guard_nonzeros:,}; reduce the instance or "
            "raise size_guard_nonzeros")


# ---------------------------------------------------------------------------
# Convenience wrappers
# ---------------------------------------------------------------------------

def build_base(topology, catalog, demands, scenarios, **kwargs) -> MilpInstance:
    return build_model(topology, catalog, demands, scenarios, ModelConfig(), **kwargs)


def build_dedicated(topology, catalog, demands, scenarios, smart: bool = False,
                    robust: RobustConfig | None = None, **kwargs) -> MilpInstance:
    cfg = ModelConfig(protection="dedicated", smart=smart, robust=robust)
    return build_model(topology, catalog, demands, scenarios, cfg, **kwargs)


def build_shared(topology, catalog, demands, scenarios, smart: bool = False,
                 **kwargs) -> MilpInstance:
    cfg = ModelConfig(protection="shared", smart=smart)
    return build_model(topology, catalog, demands, scenarios, cfg, **kwargs)


def build_robust(topology, catalog, demands, scenarios, budget: int,
                 protection: str = "none", smart: bool = False,
                 **kwargs) -> MilpInstance:
    cfg = ModelConfig(protection=protection, smart=smart,
                      robust=RobustConfig(budget=budget))
    return build_model(topology, catalog, demands, scenarios, cfg, **kwargs)


# ---------------------------------------------------------------------------
# Solution encoding/decoding
# ---------------------------------------------------------------------------

def extract_solution(topology: NetworkTopology, demands: Sequence[Demand],
                     scenarios: ScenarioSet,
                     assignment: Mapping[str, float],
                     paths: "object | None" = None) -> NetworkSolution:
    """Decode a variable-assignment map into a NetworkSolution.

    Works for any variant and any subset of periods (missing periods stay
    zero). Path-choice variables are expanded back to arc routings.
    """
    S, N, A, D = len(scenarios), len(topology.nodes), len(topology.arcs), len(demands)
    sol = NetworkSolution(
        topology=topology,
        chassis_on=np.zeros((S, N), dtype=np.int64),
        active_cards=np.zeros((S, A), dtype=np.int64),
        switch_cost=np.zeros((S, N)),
        primary=np.zeros((S, D, A), dtype=np.int64),
        backup=None,
        card_activation=None,
    )
    backup = np.zeros((S, D, A), dtype=np.int64)
    max_cards = max(a.cards for a in topology.arcs) if A else 0
    activation = np.zeros((S, A, max_cards), dtype=np.int64)
    saw_backup = saw_activation = False
    demand_paths: list[list[tuple[int, ...]]] | None = None
    if paths is not None:
        demand_paths = [[tuple(topology.arc_index[hop] for hop in p.arc_pairs())
                         for p in paths.paths_for(d.id)] for d in demands]

    for raw_name, value in assignment.items():
        fields = raw_name.split("_")
        kind = fields[0]
        idx = {f[0]: int(f[1:]) for f in fields[1:]}
        if kind == "y":
            sol.chassis_on[idx["s"], idx["n"]] = round(value)
        elif kind == "z":
            sol.switch_cost[idx["s"], idx["n"]] = value
        elif kind == "w":
            sol.active_cards[idx["s"], idx["a"]] = round(value)
        elif kind == "u":
            saw_activation = True
            activation[idx["s"], idx["a"], idx["k"]] = round(value)
        elif kind == "x":
            sol.primary[idx["s"], idx["d"], idx["a"]] = round(value)
        elif kind == "xi":
            saw_backup = True
            backup[idx["s"], idx["d"], idx["a"]] = round(value)
        elif kind == "chi":
            if round(value) and demand_paths is not None:
                for a in demand_paths[idx["d"]][idx["p"]]:
                    sol.primary[idx["s"], idx["d"], a] = 1
        elif kind == "lam":
            saw_backup = True
            if round(value) and demand_paths is not None:
                for a in demand_paths[idx["d"]][idx["p"]]:
                    backup[idx["s"], idx["d"], a] = 1
        # g/eps/l are derivable and not stored
    if saw_backup:
        sol.backup = backup
    if saw_activation:
        sol.card_activation = activation
    return sol


def solution_assignment(solution: NetworkSolution, demands: Sequence[Demand],
                        scenarios: ScenarioSet, config: ModelConfig,
                        periods: Sequence[int] | None = None) -> dict[str, float]:
    """Encode a NetworkSolution as the assignment map of the given variant's
    variables, deriving joint indicators and robust duals as needed. The
    result can warm-start any model built with the same shapes."""
    topology = solution.topology
    A, N, D = len(topology.arcs), len(topology.nodes), len(demands)
    S = len(scenarios)
    reverse = topology.reverse_arc
    period_list = list(range(S)) if periods is None else list(periods)
    max_cards_global = max(a.cards for a in topology.arcs)
    paths = config.restricted_paths
    path_arcs: list[list[frozenset[int]]] | None = None
    n_paths = 0
    if paths is not None:
        path_arcs = [[frozenset(topology.arc_index[hop] for hop in p.arc_pairs())
                      for p in paths.paths_for(d.id)] for d in demands]
        n_paths = max((len(ps) for ps in path_arcs), default=0)
    nm = _Names.for_sizes(S, N, A, D, max_cards_global, n_paths)
    out: dict[str, float] = {}
    protected = config.protection != "none"
    backup = solution.backup if solution.backup is not None else \
        np.zeros_like(solution.primary)

    activation = solution.card_activation
    if activation is None:
        activation = derive_card_activation(solution, scenarios, period_list)

    for s in period_list:
        for j in range(N):
            out[nm.y(s, j)] = float(solution.chassis_on[s, j])
            out[nm.z(s, j)] = float(solution.switch_cost[s, j])
        for a in range(A):
            out[nm.w(s, a)] = float(solution.active_cards[s, a])
            for k in range(topology.arcs[a].cards):
                out[nm.u(s, a, k)] = float(activation[s, a, k])
        if path_arcs is not None:
            for d in range(D):
                _fill_path_choice(out, nm.chi, path_arcs[d], s, d,
                                  solution.primary[s, d])
                if protected:
                    _fill_path_choice(out, nm.lam, path_arcs[d], s, d,
                                      backup[s, d])
        else:
            for d in range(D):
                for a in range(A):
                    out[nm.x(s, d, a)] = float(solution.primary[s, d, a])
                    if protected:
                        out[nm.xi(s, d, a)] = float(backup[s, d, a])
        if config.protection == "shared":
            for d in range(D):
                primary_arcs = set(np.nonzero(solution.primary[s, d])[0].tolist())
                backup_arcs = set(np.nonzero(backup[s, d])[0].tolist())
                for p in range(A):
                    for b in range(A):
                        if b == p or b == reverse[p]:
                            continue
                        hit = 1.0 if (p in primary_arcs and b in backup_arcs) else 0.0
                        out[nm.g(s, d, p, b)] = hit
        if config.robust is not None:
            _fill_robust_duals(out, nm, solution, demands, s, config,
                               protected, backup)
    return out


def _fill_path_choice(out: dict[str, float], name, demand_paths, s: int,
                      d: int, routing_row: np.ndarray) -> None:
    """Select the path whose arcs match the routing exactly; any other
    routing cannot be encoded in the restricted formulation."""
    used = frozenset(np.nonzero(routing_row)[0].tolist())
    match = None
    for p, arcs in enumerate(demand_paths):
        out[name(s, d, p)] = 0.0
        if arcs == used:
            match = p
    if match is None:
        raise ValueError(f"demand {d} period {s}: routing is not one of the "
                         "candidate paths")
    out[name(s, d, match)] = 1.0


def _fill_robust_duals(out: dict[str, float], nm: _Names,
                       solution: NetworkSolution, demands: Sequence[Demand],
                       s: int, config: ModelConfig, protected: bool,
                       backup: np.ndarray) -> None:
    """Closed-form optimal duals for a fixed routing: the threshold is the
    budget-th largest routed deviation, each excess goes into the per-demand
    slack."""
    A = len(solution.topology.arcs)
    D = len(demands)
    q_hat = np.array([d.deviation_value(s) for d in demands])
    layers = [(False, solution.primary[s])]
    if protected:
        layers.append((True, solution.primary[s] + backup[s]))
    for failover, routing in layers:
        for a in range(A):
            routed = q_hat * (routing[:, a] > 0)
            budget = config.robust.budget_at(s, a)
            eps_val = _budget_threshold(routed, budget)
            out[nm.eps(s, a, failover)] = eps_val
            for d in range(D):
                out[nm.dev(s, d, a, failover)] = max(0.0, routed[d] - eps_val)


def _budget_threshold(routed_deviations: np.ndarray, budget: int) -> float:
    """The budget-th largest routed deviation (0 when the budget saturates)."""
    positive = np.sort(routed_deviations[routed_deviations > 0])[::-1]
    if budget <= 0:
        return float(positive[0]) if positive.size else 0.0
    if budget >= positive.size:
        return 0.0
    return float(positive[budget - 1])


def derive_card_activation(solution: NetworkSolution, scenarios: ScenarioSet,
                           periods: Sequence[int] | None = None) -> np.ndarray:
    """A card-activation schedule consistent with the card-count trajectory:
    every net increase of active cards is charged to the cards with the fewest
    activations so far (deterministic round-robin), which by a counting
    argument respects the global per-card cap whenever one exists."""
    topology = solution.topology
    S = solution.chassis_on.shape[0]
    A = len(topology.arcs)
    period_list = list(range(S)) if periods is None else list(periods)
    max_cards = max(a.cards for a in topology.arcs) if A else 0
    u = np.zeros((S, A, max_cards), dtype=np.int64)
    counts = np.zeros((A, max_cards), dtype=np.int64)
    for pos, s in enumerate(period_list):
        prev = period_list[pos - 1] if pos > 0 else \
            (period_list[-1] if scenarios.cyclic and len(period_list) > 1 else None)
        for a in range(A):
            w_now = int(solution.active_cards[s, a])
            w_prev = int(solution.active_cards[prev, a]) if prev is not None \
                else int(w_now)
            rise = w_now - w_prev
            if pos == 0:
                rise = 0  # the wrap charge is accounted when closing the cycle
            if rise > 0:
                order = np.argsort(counts[a][:topology.arcs[a].cards], kind="stable")
                for k in order[:rise]:
                    u[s, a, k] = 1
                    counts[a, k] += 1
    # close the cycle: charge the wrap increase onto the first listed period
    if scenarios.cyclic and len(period_list) > 1:
        first, last = period_list[0], period_list[-1]
        for a in range(A):
            rise = int(solution.active_cards[first, a]) - \
                int(solution.active_cards[last, a])
            if rise > 0:
                order = np.argsort(counts[a][:topology.arcs[a].cards], kind="stable")
                for k in order[:rise]:
                    u[first, a, k] = 1
                    counts[a, k] += 1
    return u


# ---------------------------------------------------------------------------
# Scheme-to-scheme solution reuse
# ---------------------------------------------------------------------------

def translate_dedicated_to_shared(solution: NetworkSolution) -> NetworkSolution:
    """A dedicated-protection solution reused verbatim for the shared model;
    device states and routings carry over unchanged (the joint indicators are
    derived when encoding)."""
    return solution


def project_routing_only(solution: NetworkSolution) -> NetworkSolution:
    """Drop backup routing: the primary part of any protected solution is a
    feasible unprotected solution with the same device states."""
    return replace(solution, backup=None)
