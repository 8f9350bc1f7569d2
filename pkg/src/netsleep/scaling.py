"""Traffic scaling: the largest multiplier under which the raw demand matrix
is routable on the fully active network at the given utilization thresholds
and protection mode.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

from .backends import SolverBackend, default_backend
from .builder import ModelConfig, RobustConfig, build_model
from .model import DeviceCatalog, NetworkTopology, ScenarioSet, TimePeriod
from .sndlib import ProblemInstance, RawDemand, build_scenarios, ScenarioSpec
from .solver import SolveRequest

__all__ = ["ScalingSpec", "compute_scaling_factor", "scale_instance"]


@dataclass(frozen=True)
class ScalingSpec:
    """Parameters of the feasibility probes. With ``robust_budget`` > 0 the
    probes include the budgeted-deviation capacity rows (at ``r_hat`` relative
    deviation), so the result leaves headroom for robust runs."""

    mu_a: float = 0.5
    mu_b: float = 0.85
    protection: str = "none"
    robust_budget: int = 0
    r_hat: float = 0.0
    tolerance: float = 1e-3
    probe_time_limit: float = 120.0

    def __post_init__(self):
        if not (0.0 < self.mu_a <= 1.0 and 0.0 < self.mu_b <= 1.0):
            raise ValueError("utilization thresholds must lie in (0, 1]")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.robust_budget < 0 or self.r_hat < 0:
            raise ValueError("robust parameters must be nonnegative")


def _reachable(topology: NetworkTopology, origin: str, destination: str) -> bool:
    index = topology.node_index
    seen = {index[origin]}
    stack = [index[origin]]
    target = index[destination]
    while stack:
        j = stack.pop()
        if j == target:
            return True
        for a in topology.out_arcs[j]:
            head = index[topology.arcs[a].head]
            if head not in seen:
                seen.add(head)
                stack.append(head)
    return False


def compute_scaling_factor(topology: NetworkTopology, catalog: DeviceCatalog,
                           raw_demands: Sequence[RawDemand], spec: ScalingSpec,
                           backend: SolverBackend | None = None) -> float:
    """Binary search for the largest feasible traffic multiplier.

    Each probe solves the routing model of the requested protection mode on a
    single period with every chassis on and every card active. A probe that
    times out without a feasibility proof counts as infeasible, keeping the
    result conservative. The search stops at ``spec.tolerance`` relative width.
    """
    if not raw_demands:
        raise ValueError("no demands to scale")
    for d in raw_demands:
        if not _reachable(topology, d.source, d.target):
            raise ValueError(f"demand {d.id!r}: {d.target!r} unreachable "
                             f"from {d.source!r}")
    backend = backend or default_backend()
    cat = replace(catalog, mu_a=spec.mu_a, mu_b=spec.mu_b)
    robust = RobustConfig(budget=spec.robust_budget) if spec.robust_budget \
        else None
    config = ModelConfig(protection=spec.protection, robust=robust)

    def feasible(scale: float) -> bool:
        demands, scenarios = build_scenarios(
            raw_demands,
            ScenarioSpec(profile=(1.0,), deviation=spec.r_hat, kind="aver",
                         periods=(TimePeriod(0, 24.0, "probe"),)),
            scale=scale)
        inst = build_model(topology, cat, demands, scenarios, config,
                           fully_active=True)
        result = backend.solve(SolveRequest(inst, time_limit=spec.probe_time_limit,
                                            gap_target=0.99))
        return result.status in ("optimal", "feasible")

    lo = _initial_feasible_scale(topology, cat, raw_demands, spec, feasible)
    hi = lo
    for _ in range(80):
        hi = hi * 2.0
        if not feasible(hi):
            break
        lo = hi
    else:
        raise RuntimeError("scaling search failed to bracket an upper bound")
    while (hi - lo) > spec.tolerance * max(lo, 1e-12):
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return lo


def _initial_feasible_scale(topology, catalog, raw_demands, spec, feasible) -> float:
    # start from a scale that routes the largest demand over one card
    largest = max(d.value for d in raw_demands)
    guess = spec.mu_a * catalog.card_capacity / largest / 1000.0
    for _ in range(40):
        if feasible(guess):
            return guess
        guess /= 8.0
    raise ValueError("infeasible even at vanishing scale "
                     "(protection may be structurally impossible)")


def scale_instance(instance: ProblemInstance, catalog: DeviceCatalog,
                   spec: ScalingSpec,
                   backend: SolverBackend | None = None) -> ProblemInstance:
    """The instance with its scaling factor computed and stored."""
    topology = instance.topology(catalog)
    factor = compute_scaling_factor(topology, catalog, instance.demands, spec,
                                    backend)
    return instance.with_scale(factor)
