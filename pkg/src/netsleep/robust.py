"""Monte-Carlo robustness evaluation of fixed solutions and the brute-force
worst-case load oracle that cross-checks the dualized capacity rows.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .builder import RobustConfig
from .model import Demand, DeviceCatalog, NetworkSolution, ScenarioSet

__all__ = ["RobustnessReport", "evaluate", "worst_case_oracle",
           "duality_check", "csv_row", "CSV_HEADER"]


@dataclass(frozen=True)
class RobustnessReport:
    """Outcome of sampling random traffic against a fixed solution.

    ``pct_infeasible`` is the fraction of samples with at least one violated
    link capacity; ``max_dev`` the largest positive excess of observed link
    utilization over the allowed maximum, in percentage points.
    """

    samples: int
    pct_infeasible: float
    max_dev: float
    violation_counts: tuple[int, ...]   # per arc, number of violating samples
    chassis_violations: int = 0         # only counted when the check is enabled

    def __post_init__(self):
        if not 0.0 <= self.pct_infeasible <= 1.0:
            raise ValueError("pct_infeasible must be a fraction")
        if self.max_dev < 0.0:
            raise ValueError("max_dev is a nonnegative excess")
        if self.max_dev == 0.0 and self.pct_infeasible > 0.0:
            raise ValueError("violations imply a positive excess")


def evaluate(solution: NetworkSolution, demands: Sequence[Demand],
             scenarios: ScenarioSet, catalog: DeviceCatalog,
             samples: int = 10_000, seed: int = 0,
             check_chassis: bool = False) -> RobustnessReport:
    """Sample traffic fractions uniformly within the deviation band, route
    them on the solution's fixed primary paths, and count capacity violations.

    Sample k always draws from its own seed derived from (seed, k), so
    enlarging ``samples`` extends the run without reshuffling earlier draws.
    """
    if solution.primary is None:
        raise ValueError("solution has no routing to evaluate")
    topology = solution.topology
    S, D, A = solution.primary.shape
    nominal = np.array([d.nominal_value for d in demands])
    r_bar = np.array([d.expected_fractions for d in demands]).T    # (S,D)
    r_hat = np.array([d.deviation_fractions for d in demands]).T
    gamma = np.array([a.card_capacity for a in topology.arcs])
    routing = solution.primary.astype(float)                       # (S,D,A)
    link_cap = catalog.mu_a * gamma[None, :] * solution.active_cards  # (S,A)
    chassis_cap = catalog.chassis_capacity * solution.chassis_on   # (S,N)
    incidence = _node_arc_incidence(topology)                      # (N,A)

    lo = r_bar - r_hat
    hi = r_bar + r_hat
    violation_counts = np.zeros(A, dtype=np.int64)
    infeasible = 0
    max_dev = 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        utilization_cap = np.where(solution.active_cards > 0,
                                   gamma[None, :] * solution.active_cards,
                                   np.inf)
    chassis_hits = 0
    for k in range(samples):
        rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence((seed, k))))
        fractions = np.maximum(rng.uniform(lo, hi), 0.0)
        volumes = fractions * nominal[None, :]                     # (S,D)
        loads = np.einsum("sd,sda->sa", volumes, routing)
        over = loads > link_cap + 1e-9
        if over.any():
            infeasible += 1
            violation_counts += over.any(axis=0)
            excess = loads / utilization_cap - catalog.mu_a
            max_dev = max(max_dev, 100.0 * float(excess.max()))
        if check_chassis:
            node_loads = np.einsum("sa,na->sn", loads, incidence)
            if np.any(node_loads > chassis_cap + 1e-9):
                chassis_hits += 1
    return RobustnessReport(samples=samples,
                            pct_infeasible=infeasible / samples,
                            max_dev=max_dev,
                            violation_counts=tuple(int(c) for c in
                                                   violation_counts),
                            chassis_violations=chassis_hits)


def _node_arc_incidence(topology) -> np.ndarray:
    N, A = len(topology.nodes), len(topology.arcs)
    out = np.zeros((N, A))
    for j in range(N):
        for a in list(topology.out_arcs[j]) + list(topology.in_arcs[j]):
            out[j, a] = 1.0
    return out


def worst_case_oracle(routing_on_arc: np.ndarray, q_hat: np.ndarray,
                      budget: int) -> float:
    """Largest total deviation an adversary can place on one arc: the sum of
    the ``budget`` largest deviations among demands routed there."""
    routed = np.asarray(q_hat, dtype=float) * \
        (np.asarray(routing_on_arc, dtype=float) > 0)
    if budget <= 0:
        return 0.0
    return float(np.sort(routed)[::-1][:budget].sum())


def dual_value(routing_on_arc: np.ndarray, q_hat: np.ndarray,
               budget: int) -> float:
    """Optimal value of the dual protection program for one arc and a fixed
    routing, found by scanning every candidate threshold."""
    routed = np.asarray(q_hat, dtype=float) * \
        (np.asarray(routing_on_arc, dtype=float) > 0)
    best = np.inf
    for eps in np.append(routed, 0.0):
        value = budget * eps + np.maximum(routed - eps, 0.0).sum()
        best = min(best, float(value))
    return best


def duality_check(solution: NetworkSolution, demands: Sequence[Demand],
                  budget: "int | RobustConfig",
                  include_backup: bool = False) -> float:
    """Max absolute gap between the adversary's best load and the dual bound,
    over every arc and period; zero (to tolerance) certifies the dualization."""
    if isinstance(budget, int):
        budget = RobustConfig(budget=budget)
    S, D, A = solution.primary.shape
    routing = solution.primary.astype(float)
    if include_backup and solution.backup is not None:
        routing = routing + solution.backup
    worst = 0.0
    for s in range(S):
        q_hat = np.array([d.deviation_value(s) for d in demands])
        for a in range(A):
            b = budget.budget_at(s, a)
            primal = worst_case_oracle(routing[s, :, a], q_hat, b)
            dual = dual_value(routing[s, :, a], q_hat, b)
            worst = max(worst, abs(primal - dual))
    return worst


CSV_HEADER = "scheme,gamma,r_hat,pct_full_energy,pct_infeasible,max_dev"


def csv_row(scheme: str, gamma: int, r_hat: float, pct_full_energy: float,
            report: RobustnessReport) -> str:
    return (f"{scheme},{gamma},{r_hat:g},{pct_full_energy:.2f},"
            f"{100.0 * report.pct_infeasible:.2f},{report.max_dev:.2f}")
