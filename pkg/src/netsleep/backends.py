"""Pluggable MILP backends.

The bundled backend drives the HiGHS solver shipped with scipy. External
solvers plug in through a single-function contract: a callable taking
(LP-format text, time limit in seconds, warm-start text or None) and
returning (status string, assignment mapping or None, dual bound or None).

Neither backend can inject a starting incumbent into its solver, so warm
starts are honoured at this level: a feasible warm start is verified against
the instance and the reported incumbent is whichever of {solver result, warm
start} is better. That preserves the two guarantees callers rely on — the
result is never worse than the warm start, and a timeout still yields the
warm start as incumbent.
"""

from __future__ import annotations

import math
import time
import warnings
from typing import Callable, Mapping, Protocol

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp

from .milp import MilpInstance, read_warm_start, write_lp, write_warm_start
from .solver import (FEASIBILITY_TOL, SolveRequest, SolveResult, relative_gap,
                     solve as branch_and_bound_solve, verify_solution)

__all__ = [
    "SolverBackend",
    "HighsBackend",
    "BranchAndBoundBackend",
    "ExternalBackend",
    "default_backend",
]


class SolverBackend(Protocol):
    name: str

    def solve(self, request: SolveRequest) -> SolveResult:  # pragma: no cover
        ...


def _resolve_warm_start(request: SolveRequest) -> tuple[np.ndarray | None, float | None]:
    """Verified warm-start vector and objective, or (None, None)."""
    if request.warm_start is None:
        return None, None
    instance = request.instance
    ws = instance.assignment_from_map(request.warm_start)
    report = verify_solution(instance, ws)
    if not report.ok:
        warnings.warn("warm start infeasible "
                      f"({report.violations[0].detail}); ignored")
        return None, None
    return ws, instance.objective_value(ws)


def _combine(instance: MilpInstance, status: str,
             solver_x: np.ndarray | None, bound: float | None,
             ws_x: np.ndarray | None, ws_obj: float | None,
             wall: float, nodes: int, message: str = "") -> SolveResult:
    """Merge solver output with the warm start and normalize the report."""
    best_x, best_obj = None, math.inf
    if solver_x is not None:
        obj = instance.objective_value(solver_x)
        best_x, best_obj = solver_x, obj
    if ws_x is not None and (ws_obj is not None and ws_obj < best_obj):
        best_x, best_obj = ws_x, ws_obj
    if best_x is None:
        if status in ("infeasible", "unbounded"):
            return SolveResult(status, None, None, bound, None, wall, nodes, message)
        return SolveResult("error", None, None, bound, None, wall, nodes,
                           message or "no incumbent produced")
    if status == "infeasible":
        # the verified warm start contradicts the claim; trust the evidence
        status = "feasible"
        message = message or "solver reported infeasible but a verified incumbent exists"
    gap = relative_gap(best_obj, bound)
    if status == "optimal" and solver_x is not None and ws_obj is not None \
            and ws_obj < instance.objective_value(solver_x) - 1e-9:
        # warm start strictly better than the "optimal" solver answer: the
        # claim of optimality no longer covers the reported incumbent
        status = "feasible"
    return SolveResult(status, instance.assignment_to_map(best_x), best_obj,
                       bound, gap, wall, nodes, message)


class HighsBackend:
    """MILP solving through scipy's HiGHS bindings."""

    name = "highs"

    def solve(self, request: SolveRequest) -> SolveResult:
        start = time.monotonic()
        instance = request.instance
        mats = instance.matrices()
        ws_x, ws_obj = _resolve_warm_start(request)
        constraints = []
        if instance.n_constraints:
            constraints.append(LinearConstraint(mats["A"], mats["row_lb"],
                                                mats["row_ub"]))
        options = {
            "time_limit": float(request.time_limit),
            "mip_rel_gap": float(request.gap_target),
            "presolve": True,
            "disp": False,
        }
        res = milp(c=mats["c"], constraints=constraints,
                   integrality=mats["integrality"],
                   bounds=Bounds(mats["lb"], mats["ub"]), options=options)
        wall = time.monotonic() - start
        nodes = int(getattr(res, "mip_node_count", 0) or 0)
        bound = getattr(res, "mip_dual_bound", None)
        if bound is None and res.status == 0:
            bound = res.fun
        solver_x = None
        if res.x is not None:
            x = np.asarray(res.x, dtype=float)
            x[mats["integrality"] == 1] = np.round(x[mats["integrality"] == 1])
            # clip rounding spill outside the box
            x = np.clip(x, mats["lb"], mats["ub"])
            if verify_solution(instance, x, tolerance=1e-5).ok:
                solver_x = x
            else:
                warnings.warn("solver returned a point violating tolerances; dropped")
        status = {0: "optimal", 1: "feasible", 2: "infeasible",
                  3: "unbounded"}.get(res.status, "error")
        if status == "optimal" and solver_x is None:
            status = "error"
        return _combine(instance, status, solver_x, bound, ws_x, ws_obj,
                        wall, nodes, res.message or "")


class BranchAndBoundBackend:
    """The built-in exact solver exposed through the backend interface."""

    name = "branch-and-bound"

    def solve(self, request: SolveRequest) -> SolveResult:
        return branch_and_bound_solve(request)


ExternalSolverFn = Callable[[str, float, str | None],
                            tuple[str, Mapping[str, float] | None, float | None]]


class ExternalBackend:
    """Adapter for user-supplied solvers.

    The wrapped function receives the instance as LP-format text, the time
    limit, and an optional warm-start file ("variable value" lines), and
    returns (status, assignment-by-name, dual bound). Assignments are
    verified before being trusted.
    """

    def __init__(self, fn: ExternalSolverFn, name: str = "external") -> None:
        self._fn = fn
        self.name = name

    def solve(self, request: SolveRequest) -> SolveResult:
        start = time.monotonic()
        instance = request.instance
        ws_x, ws_obj = _resolve_warm_start(request)
        ws_text = None
        if ws_x is not None:
            ws_text = write_warm_start(instance, instance.assignment_to_map(ws_x))
        lp_text = write_lp(instance)
        try:
            status, assignment, bound = self._fn(lp_text, request.time_limit, ws_text)
        except Exception as exc:  # solver crash becomes a reportable error
            return SolveResult("error", None, None, None, None,
                               time.monotonic() - start, 0, f"backend raised: {exc}")
        wall = time.monotonic() - start
        solver_x = None
        if assignment is not None:
            x = instance.assignment_from_map(assignment)
            ints = instance.matrices()["integrality"] == 1
            x[ints] = np.round(x[ints])
            if verify_solution(instance, x, tolerance=1e-5).ok:
                solver_x = x
            else:
                warnings.warn(f"backend {self.name!r} returned an infeasible "
                              "assignment; dropped")
        return _combine(instance, status, solver_x,
                        None if bound is None else float(bound),
                        ws_x, ws_obj, wall, 0)


def default_backend() -> SolverBackend:
    """The backend used by the benchmark harness unless told otherwise."""
    return HighsBackend()
