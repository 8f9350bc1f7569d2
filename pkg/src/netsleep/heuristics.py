"""Sequential single-period matheuristic (with starting-period rotation and
restricted-path variant) and the dedicated-to-shared warm-start pipeline.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .backends import SolverBackend, default_backend
from .builder import (CarriedState, ModelConfig, build_model,
                      derive_card_activation, extract_solution,
                      solution_assignment, translate_dedicated_to_shared)
from .model import (Demand, DeviceCatalog, NetworkSolution, NetworkTopology,
                    ScenarioSet, energy_of_solution)
from .paths import PathSet, generate_paths
from .solver import SolveRequest, best_warm_start

__all__ = ["InterPeriodState", "StphOptions", "stph", "stph_rp",
           "warm_start_shared"]

log = logging.getLogger(__name__)


class InterPeriodState:
    """Device states carried between sequentially optimized periods.

    Tracks, per card slot, whether it is on and how many times it has been
    switched on. A slot that has spent its activation budget is locked on
    (never deactivated), which keeps the assembled horizon within the global
    per-card budget: rises are only ever charged to slots with budget left.
    """

    def __init__(self, topology: NetworkTopology, n_nodes: int,
                 max_activations: int):
        cards = np.array([a.cards for a in topology.arcs])
        self.max_activations = max_activations
        self.slot_exists = np.arange(cards.max())[None, :] < cards[:, None]
        self.on = self.slot_exists.copy()              # all on initially
        self.counts = np.zeros_like(self.slot_exists, dtype=np.int64)
        self.prev_chassis_on = np.ones(n_nodes)
        self.cards_per_arc = cards

    @property
    def prev_cards(self) -> np.ndarray:
        return self.on.sum(axis=1)

    @property
    def cards_locked_on(self) -> np.ndarray:
        """Boolean (arc, slot): on with no activations left."""
        return self.on & (self.counts >= self.max_activations)

    def carried(self) -> CarriedState:
        return CarriedState(
            prev_chassis_on=self.prev_chassis_on.copy(),
            prev_cards=self.prev_cards.astype(float),
            min_cards=self.cards_locked_on.sum(axis=1).astype(float),
            max_cards=self.cards_per_arc.astype(float),
        )

    def update(self, chassis_on: np.ndarray, active_cards: np.ndarray) -> None:
        self.prev_chassis_on = np.asarray(chassis_on, dtype=float).copy()
        for a in range(len(self.cards_per_arc)):
            delta = int(active_cards[a]) - int(self.on[a].sum())
            if delta > 0:
                off = np.nonzero(~self.on[a] & self.slot_exists[a])[0]
                order = off[np.argsort(self.counts[a][off], kind="stable")]
                chosen = order[:delta]
                if len(chosen) < delta:
                    raise RuntimeError("period solution activates more cards "
                                       "than the arc has")
                self.on[a][chosen] = True
                self.counts[a][chosen] += 1
            elif delta < 0:
                movable = np.nonzero(self.on[a] &
                                     (self.counts[a] < self.max_activations))[0]
                order = movable[np.argsort(-self.counts[a][movable],
                                           kind="stable")]
                chosen = order[:-delta]
                if len(chosen) < -delta:
                    raise RuntimeError("period solution deactivates locked cards")
                self.on[a][chosen] = False


@dataclass(frozen=True)
class StphOptions:
    per_period_time_limit: float = 60.0
    gap_target: float = 1e-4
    rotations: tuple[int, ...] | None = None   # default: every starting period
    cyclic_closure: bool = False
    shared_warm_split: float | None = None     # fraction of the period budget
    seed: int = 0


def stph(topology: NetworkTopology, catalog: DeviceCatalog,
         demands: Sequence[Demand], scenarios: ScenarioSet,
         config: ModelConfig, options: StphOptions = StphOptions(),
         backend: SolverBackend | None = None) -> NetworkSolution:
    """Solve each period separately in cyclic order, once per starting period,
    and return the best assembled full-horizon solution."""
    backend = backend or default_backend()
    S = len(scenarios)
    starts = options.rotations if options.rotations is not None else tuple(range(S))
    best: NetworkSolution | None = None
    failures: list[str] = []
    for start in starts:
        try:
            candidate = _run_rotation(topology, catalog, demands, scenarios,
                                      config, options, backend, start)
        except _RotationInfeasible as exc:
            failures.append(str(exc))
            log.warning("rotation starting at period %d abandoned: %s", start, exc)
            continue
        if best is None or candidate.total_energy < best.total_energy:
            best = candidate
    if best is None:
        raise RuntimeError("every rotation failed: " + "; ".join(failures))
    return best


class _RotationInfeasible(RuntimeError):
    pass


def _run_rotation(topology, catalog, demands, scenarios, config, options,
                  backend, start: int) -> NetworkSolution:
    S = len(scenarios)
    state = InterPeriodState(topology, len(topology.nodes),
                             catalog.max_card_activations)
    period_solutions: dict[int, NetworkSolution] = {}
    order = [(start + k) % S for k in range(S)]
    for sigma in order:
        sol = _solve_period(topology, catalog, demands, scenarios, config,
                            options, backend, sigma, state,
                            period_solutions.get((sigma - 1) % S))
        period_solutions[sigma] = sol
        state.update(sol.chassis_on[sigma], sol.active_cards[sigma])

    assembled = _assemble(topology, catalog, demands, scenarios,
                          period_solutions)
    if options.cyclic_closure:
        # revisit the first period now that the end-of-horizon state is known
        try:
            refined = _solve_period(topology, catalog, demands, scenarios,
                                    config, options, backend, start, state,
                                    period_solutions.get((start - 1) % S))
        except _RotationInfeasible:
            refined = None
        if refined is not None:
            trial = dict(period_solutions)
            trial[start] = refined
            retry = _assemble(topology, catalog, demands, scenarios, trial)
            if retry is not None and (assembled is None or
                                      retry.total_energy < assembled.total_energy):
                return retry
    if assembled is None:
        raise _RotationInfeasible(
            f"assembled rotation from period {start} exceeds the card "
            "activation budget")
    return assembled


def _solve_period(topology, catalog, demands, scenarios, config, options,
                  backend, sigma: int, state: InterPeriodState,
                  prev_solution: NetworkSolution | None) -> NetworkSolution:
    carried = state.carried()
    time_limit = options.per_period_time_limit
    warm = None
    if config.protection == "shared" and options.shared_warm_split:
        split = min(max(options.shared_warm_split, 0.0), 1.0)
        warm = _dedicated_phase_warm_start(
            topology, catalog, demands, scenarios, config, backend, sigma,
            carried, time_limit * split)
        time_limit = time_limit * (1.0 - split)
    inst = build_model(topology, catalog, demands, scenarios, config,
                       period=sigma, carried=carried)
    candidates = []
    if warm is not None:
        candidates.append(warm)
    if prev_solution is not None:
        candidates.append(_shift_periods(prev_solution, sigma, demands,
                                         scenarios, config, carried, catalog))
    warm_map = best_warm_start(inst, candidates)
    if warm_map is not None:
        inst.set_warm_start(warm_map)
    res = backend.solve(SolveRequest(inst, time_limit=time_limit,
                                     gap_target=options.gap_target,
                                     seed=options.seed))
    if res.incumbent is None:
        raise _RotationInfeasible(f"period {sigma}: {res.status}")
    return extract_solution(topology, demands, scenarios, res.incumbent,
                            paths=config.restricted_paths)


def _dedicated_phase_warm_start(topology, catalog, demands, scenarios, config,
                                backend, sigma, carried, budget):
    """Solve the period under dedicated protection and translate the result
    into an assignment for the shared-protection period model."""
    ded_cfg = replace(config, protection="dedicated")
    inst = build_model(topology, catalog, demands, scenarios, ded_cfg,
                       period=sigma, carried=carried)
    res = backend.solve(SolveRequest(inst, time_limit=budget, gap_target=0.05))
    if res.incumbent is None:
        return None
    ded = extract_solution(topology, demands, scenarios, res.incumbent,
                           paths=config.restricted_paths)
    shared_sol = translate_dedicated_to_shared(ded)
    return solution_assignment(shared_sol, demands, scenarios, config,
                               periods=[sigma])


def _shift_periods(solution: NetworkSolution, sigma: int, demands, scenarios,
                   config, carried: CarriedState,
                   catalog: DeviceCatalog) -> dict[str, float]:
    """Reuse the previous period's device states and routing for period sigma,
    with switch costs and card activations recomputed against the carried
    state so the encoding satisfies the period model exactly."""
    src = _single_filled_period(solution)
    chassis_on = _move(solution.chassis_on, src, sigma)
    active_cards = _move(solution.active_cards, src, sigma)
    switch_cost = np.zeros_like(solution.switch_cost)
    switch_cost[sigma] = catalog.switch_on_factor * catalog.chassis_power * \
        np.maximum(0.0, chassis_on[sigma] - carried.prev_chassis_on)
    n_slots = int(carried.max_cards.max())
    activation = np.zeros(
        (solution.n_periods, active_cards.shape[1], n_slots))
    rises = np.maximum(active_cards[sigma] - carried.prev_cards, 0).astype(int)
    for a, rise in enumerate(rises):
        activation[sigma, a, :rise] = 1.0
    shifted = NetworkSolution(
        topology=solution.topology,
        chassis_on=chassis_on,
        active_cards=active_cards,
        switch_cost=switch_cost,
        primary=_move(solution.primary, src, sigma),
        backup=None if solution.backup is None
        else _move(solution.backup, src, sigma),
        card_activation=activation,
    )
    return solution_assignment(shifted, demands, scenarios, config,
                               periods=[sigma])


def _single_filled_period(solution: NetworkSolution) -> int:
    filled = np.nonzero(solution.chassis_on.sum(axis=1))[0]
    return int(filled[0]) if len(filled) else 0


def _move(array: np.ndarray, src: int, dst: int) -> np.ndarray:
    out = np.zeros_like(array)
    out[dst] = array[src]
    return out


def _assemble(topology, catalog, demands, scenarios,
              period_solutions: dict[int, NetworkSolution]) -> NetworkSolution | None:
    S = len(scenarios)
    merged = NetworkSolution(
        topology=topology,
        chassis_on=np.zeros_like(period_solutions[0].chassis_on),
        active_cards=np.zeros_like(period_solutions[0].active_cards),
        switch_cost=np.zeros_like(period_solutions[0].switch_cost),
        primary=np.zeros_like(period_solutions[0].primary),
        backup=None,
        card_activation=None,
    )
    has_backup = any(sol.backup is not None for sol in period_solutions.values())
    backup = np.zeros_like(merged.primary)
    for sigma in range(S):
        sol = period_solutions[sigma]
        merged.chassis_on[sigma] = sol.chassis_on[sigma]
        merged.active_cards[sigma] = sol.active_cards[sigma]
        merged.primary[sigma] = sol.primary[sigma]
        if sol.backup is not None:
            backup[sigma] = sol.backup[sigma]
    if has_backup:
        merged.backup = backup
    # the per-card budget must hold over the true cyclic horizon
    cards = np.array([a.cards for a in topology.arcs])
    prev = np.roll(merged.active_cards, 1, axis=0)
    rises = np.maximum(merged.active_cards - prev, 0).sum(axis=0)
    if np.any(rises > cards * catalog.max_card_activations):
        return None
    merged.card_activation = derive_card_activation(merged, scenarios)
    merged.recompute_switch_costs(catalog, cyclic=True)
    metrics = energy_of_solution(merged, catalog, scenarios)
    merged.total_energy = metrics.absolute_energy
    return merged


def stph_rp(topology: NetworkTopology, catalog: DeviceCatalog,
            demands: Sequence[Demand], scenarios: ScenarioSet,
            config: ModelConfig, omega: int,
            options: StphOptions = StphOptions(),
            backend: SolverBackend | None = None,
            paths: PathSet | None = None) -> NetworkSolution:
    """The sequential heuristic on the restricted-path reformulation."""
    if paths is None:
        paths = generate_paths(topology, demands, omega, seed=options.seed)
    cfg = replace(config, restricted_paths=paths)
    return stph(topology, catalog, demands, scenarios, cfg, options, backend)


def warm_start_shared(topology: NetworkTopology, catalog: DeviceCatalog,
                      demands: Sequence[Demand], scenarios: ScenarioSet,
                      smart: bool = False, time_limit: float = 3600.0,
                      split: float = 0.5,
                      backend: SolverBackend | None = None,
                      gap_target: float = 1e-4):
    """Exact shared-protection solve warm started from a quick dedicated solve.

    The time budget is split between the dedicated phase and the shared phase;
    the dedicated solution is reused verbatim as a shared-feasible incumbent.
    Returns the shared solve result and the decoded solution.
    """
    backend = backend or default_backend()
    ded_cfg = ModelConfig(protection="dedicated", smart=smart)
    shared_cfg = ModelConfig(protection="shared", smart=smart)
    ded_inst = build_model(topology, catalog, demands, scenarios, ded_cfg)
    ded_res = backend.solve(SolveRequest(ded_inst, time_limit=time_limit * split,
                                         gap_target=max(gap_target, 0.01)))
    shared_inst = build_model(topology, catalog, demands, scenarios, shared_cfg)
    if ded_res.incumbent is not None:
        ded_sol = extract_solution(topology, demands, scenarios, ded_res.incumbent)
        warm = solution_assignment(translate_dedicated_to_shared(ded_sol),
                                   demands, scenarios, shared_cfg)
        shared_inst.set_warm_start(warm)
    else:
        log.warning("dedicated phase found no incumbent; solving shared cold")
    res = backend.solve(SolveRequest(shared_inst,
                                     time_limit=time_limit * (1.0 - split),
                                     gap_target=gap_target))
    if res.incumbent is None:
        raise RuntimeError(f"shared solve failed: {res.status}")
    solution = extract_solution(topology, demands, scenarios, res.incumbent)
    solution.total_energy = res.objective
    solution.objective_bound = res.best_bound
    solution.gap = res.gap
    return res, solution
