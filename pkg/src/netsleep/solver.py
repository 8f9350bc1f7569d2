"""Solving MilpInstance objects.

Two routes exist and are kept deliberately independent:

* :func:`solve` — a built-in exact best-first branch-and-bound intended for
  desk-scale instances and for cross-checking other solvers. Only its LP
  relaxations are delegated (to scipy's linear programming routine).
* the pluggable backends in :mod:`netsleep.backends`, which satisfy the same
  request/result contract and carry the heavy benchmark runs.

Both report incumbents, dual bounds, and relative gaps the same way, and both
are fully deterministic for a fixed request.
"""

from __future__ import annotations

import heapq
import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .milp import CONTINUOUS, MilpInstance

__all__ = [
    "SolveRequest",
    "SolveResult",
    "Violation",
    "ViolationReport",
    "solve",
    "verify_solution",
    "relative_gap",
]

INTEGRALITY_TOL = 1e-6
FEASIBILITY_TOL = 1e-6


@dataclass(frozen=True)
class SolveRequest:
    """What to solve and under which budget.

    ``gap_target`` is the relative optimality gap at which the search may stop
    and still report status ``optimal``. ``seed`` is accepted for interface
    stability; the built-in search is deterministic regardless.
    """

    instance: MilpInstance
    time_limit: float = 3600.0
    gap_target: float = 1e-4
    warm_start: Mapping[str, float] | Mapping[int, float] | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.time_limit <= 0:
            raise ValueError("time_limit must be positive")
        if not (0.0 <= self.gap_target < 1.0):
            raise ValueError("gap_target must be in [0, 1)")


@dataclass
class SolveResult:
    status: str  # optimal | feasible | infeasible | unbounded | error
    incumbent: dict[str, float] | None
    objective: float | None
    best_bound: float | None
    gap: float | None
    wall_time: float
    node_count: int = 0
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status in ("optimal", "feasible") and self.incumbent is not None


def relative_gap(objective: float | None, bound: float | None) -> float | None:
    """(objective - bound) / |objective|, with the degenerate cases pinned."""
    if objective is None or bound is None:
        return None
    if objective == bound:
        return 0.0
    if abs(objective) < 1e-12:
        return math.inf
    return (objective - bound) / abs(objective)


# ---------------------------------------------------------------------------
# Feasibility checking
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    tag: str
    kind: str  # constraint | bound | integrality
    amount: float
    detail: str


@dataclass(frozen=True)
class ViolationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def worst(self) -> float:
        return max((v.amount for v in self.violations), default=0.0)


def verify_solution(instance: MilpInstance,
                    assignment: Mapping[str, float] | Mapping[int, float] | np.ndarray,
                    tolerance: float = FEASIBILITY_TOL) -> ViolationReport:
    """Evaluate every constraint, bound, and integrality requirement of the
    instance against a full assignment; list each violation with its slack."""
    if isinstance(assignment, np.ndarray):
        x = assignment.astype(float)
        if x.shape != (instance.n_variables,):
            raise ValueError("assignment length does not match variable count")
    else:
        x = instance.assignment_from_map(assignment)
    mats = instance.matrices()
    out: list[Violation] = []

    below = mats["lb"] - x
    above = x - mats["ub"]
    names = instance.variable_names
    for i in np.nonzero(below > tolerance)[0]:
        out.append(Violation(names[i], "bound", float(below[i]),
                             f"{names[i]} below lower bound by {below[i]:.3g}"))
    for i in np.nonzero(above > tolerance)[0]:
        out.append(Violation(names[i], "bound", float(above[i]),
                             f"{names[i]} above upper bound by {above[i]:.3g}"))
    frac = np.abs(x - np.round(x))
    bad = np.nonzero((mats["integrality"] == 1) & (frac > tolerance))[0]
    for i in bad:
        out.append(Violation(names[i], "integrality", float(frac[i]),
                             f"{names[i]} = {x[i]!r} is not integral"))

    if instance.n_constraints:
        row_values = mats["A"] @ x
        low_slack = mats["row_lb"] - row_values
        high_slack = row_values - mats["row_ub"]
        rows = np.nonzero((low_slack > tolerance) | (high_slack > tolerance))[0]
        for r in rows:
            con = instance._constraints[r]
            amount = float(max(low_slack[r], high_slack[r]))
            out.append(Violation(con.tag, "constraint", amount,
                                 f"{con.tag}: row value {row_values[r]:.6g} "
                                 f"violates {con.sense} {con.rhs:.6g} by {amount:.3g}"))
    return ViolationReport(tuple(out))


def best_warm_start(instance: MilpInstance,
                    candidates) -> dict[str, float] | None:
    """The verified-feasible candidate assignment with the lowest objective,
    or None when no candidate passes. Candidates that do not even map onto
    the instance's variables are skipped silently."""
    best = None
    best_obj = None
    for cand in candidates:
        if cand is None:
            continue
        try:
            vec = instance.assignment_from_map(cand)
        except (KeyError, ValueError):
            continue
        if not verify_solution(instance, vec).ok:
            continue
        obj = instance.objective_value(vec)
        if best_obj is None or obj < best_obj:
            best, best_obj = cand, obj
    return best


# ---------------------------------------------------------------------------
# Built-in branch and bound
# ---------------------------------------------------------------------------

def _lp_pieces(instance: MilpInstance):
    """Split two-sided rows into the inequality/equality blocks the LP routine
    expects. Done once per solve; nodes only change variable bounds."""
    mats = instance.matrices()
    a = mats["A"].tocsr()
    row_lb, row_ub = mats["row_lb"], mats["row_ub"]
    eq_mask = row_lb == row_ub
    ub_mask = np.isfinite(row_ub) & ~eq_mask
    lb_mask = np.isfinite(row_lb) & ~eq_mask
    blocks = []
    rhs = []
    if ub_mask.any():
        blocks.append(a[ub_mask])
        rhs.append(row_ub[ub_mask])
    if lb_mask.any():
        blocks.append(-a[lb_mask])
        rhs.append(-row_lb[lb_mask])
    a_ub = sp.vstack(blocks, format="csr") if blocks else None
    b_ub = np.concatenate(rhs) if rhs else None
    a_eq = a[eq_mask] if eq_mask.any() else None
    b_eq = row_lb[eq_mask] if eq_mask.any() else None
    return mats, a_ub, b_ub, a_eq, b_eq


def solve(request: SolveRequest) -> SolveResult:
    """Exact best-first branch-and-bound with LP relaxation bounds.

    Branching picks the most fractional integer variable, breaking ties by
    lexicographic variable name. A feasible warm start becomes the initial
    incumbent; an infeasible one is ignored with a warning.
    """
    start = time.monotonic()
    instance = request.instance
    mats, a_ub, b_ub, a_eq, b_eq = _lp_pieces(instance)
    c = mats["c"]
    names = instance.variable_names
    int_vars = np.nonzero(mats["integrality"] == 1)[0]
    # lexicographic tie-break ranks
    name_rank = np.empty(len(names), dtype=np.int64)
    name_rank[np.argsort(np.array(names))] = np.arange(len(names))

    incumbent_x: np.ndarray | None = None
    incumbent_obj = math.inf
    if request.warm_start is not None:
        ws = instance.assignment_from_map(request.warm_start)
        report = verify_solution(instance, ws)
        if report.ok:
            incumbent_x = ws
            incumbent_obj = float(c @ ws)
        else:
            warnings.warn(f"warm start infeasible ({report.violations[0].detail}); ignored")

    def lp(lb: np.ndarray, ub: np.ndarray):
        return linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq,
                       bounds=np.column_stack((lb, ub)), method="highs")

    root = lp(mats["lb"], mats["ub"])
    nodes = 0
    if root.status == 3:
        return SolveResult("unbounded", None, None, -math.inf, None,
                           time.monotonic() - start, 1, "LP relaxation unbounded")
    if root.status == 2:
        return SolveResult("infeasible", None, None, None, None,
                           time.monotonic() - start, 1, "LP relaxation infeasible")
    if root.status != 0:
        return SolveResult("error", None, None, None, None,
                           time.monotonic() - start, 1,
                           f"LP relaxation failed: {root.message}")

    counter = 0
    heap: list[tuple[float, int, np.ndarray, np.ndarray, np.ndarray]] = []
    heapq.heappush(heap, (float(root.fun), counter, mats["lb"].copy(),
                          mats["ub"].copy(), root.x))
    timed_out = False

    def prune_eps() -> float:
        return 1e-7 * max(1.0, abs(incumbent_obj)) if incumbent_obj < math.inf else 0.0

    best_open_bound = float(root.fun)
    while heap:
        best_open_bound = heap[0][0]
        if incumbent_obj < math.inf:
            gap_now = relative_gap(incumbent_obj, best_open_bound)
            if gap_now is not None and gap_now <= request.gap_target:
                break
        if time.monotonic() - start > request.time_limit:
            timed_out = True
            break
        bound, _, lb, ub, x = heapq.heappop(heap)
        if bound >= incumbent_obj - prune_eps():
            # best-first order: every remaining node is at least as bad
            heap.clear()
            best_open_bound = incumbent_obj
            break
        nodes += 1
        frac = np.abs(x[int_vars] - np.round(x[int_vars]))
        fractional = int_vars[frac > INTEGRALITY_TOL]
        if fractional.size == 0:
            candidate = x.copy()
            candidate[int_vars] = np.round(candidate[int_vars])
            obj = float(c @ candidate)
            if obj < incumbent_obj - 1e-12:
                incumbent_obj = obj
                incumbent_x = candidate
            continue
        # most fractional first, ties by name
        distance = np.abs(x[fractional] - np.floor(x[fractional]) - 0.5)
        order = np.lexsort((name_rank[fractional], distance))
        branch_var = int(fractional[order[0]])
        split = math.floor(x[branch_var])
        for child_lb_val, child_ub_val in ((None, split), (split + 1, None)):
            child_lb, child_ub = lb.copy(), ub.copy()
            if child_lb_val is not None:
                child_lb[branch_var] = max(child_lb[branch_var], child_lb_val)
            if child_ub_val is not None:
                child_ub[branch_var] = min(child_ub[branch_var], child_ub_val)
            if child_lb[branch_var] > child_ub[branch_var]:
                continue
            res = lp(child_lb, child_ub)
            if res.status != 0:
                continue  # infeasible or failed child: fathomed
            if res.fun >= incumbent_obj - prune_eps():
                continue
            counter += 1
            heapq.heappush(heap, (float(res.fun), counter, child_lb, child_ub, res.x))

    wall = time.monotonic() - start
    if heap:
        best_open_bound = min(best_open_bound, heap[0][0])
    else:
        best_open_bound = incumbent_obj if incumbent_obj < math.inf else best_open_bound
    if incumbent_x is None:
        if timed_out:
            return SolveResult("error", None, None, float(best_open_bound), None,
                               wall, nodes, "time limit reached without incumbent")
        return SolveResult("infeasible", None, None, None, None, wall, nodes,
                           "search exhausted without integer-feasible point")
    bound = min(float(best_open_bound), incumbent_obj)
    gap = relative_gap(incumbent_obj, bound)
    status = "optimal" if gap is not None and gap <= request.gap_target else "feasible"
    return SolveResult(status, instance.assignment_to_map(incumbent_x),
                       incumbent_obj, bound, gap, wall, nodes)
