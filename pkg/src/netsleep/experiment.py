"""Benchmark harness: experiment configuration files, single runs, scheme
sweeps with warm-start chaining, and plot-ready CSV emission.
"""

from __future__ import annotations

import configparser
import json
import logging
import time
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import robust as robust_eval
from .backends import SolverBackend, default_backend
from .builder import (ModelConfig, RobustConfig, build_model, extract_solution,
                      project_routing_only, solution_assignment,
                      translate_dedicated_to_shared)
from .heuristics import StphOptions, stph, stph_rp, warm_start_shared
from .model import (DeviceCatalog, NetworkSolution, NetworkTopology,
                    ScenarioSet, energy_of_solution, full_active_consumption)
from .scaling import ScalingSpec, compute_scaling_factor
from .sndlib import (DEFAULT_PROFILE, ProblemInstance, ScenarioSpec,
                     build_scenarios)
from .solver import SolveRequest, best_warm_start
from .testbed import CATALOGS, INSTANCE_CLASSES, catalog as make_catalog, \
    make_instance

__all__ = ["SCHEMES", "METHODS", "ExperimentConfig", "ExperimentResult",
           "scheme_config", "run_experiment", "run_sweep", "emit_plot_data",
           "solution_to_json", "solution_from_json", "METRIC_COLUMNS"]

log = logging.getLogger(__name__)

SCHEMES = ("simple", "robust", "dedicated-classic", "dedicated-smart",
           "shared-classic", "shared-smart", "robust-dedicated-classic",
           "robust-dedicated-smart")
METHODS = ("exact", "stph", "stph-rp")
SCENARIO_KINDS = ("a", "b", "c", "aver")

METRIC_COLUMNS = ("instance", "scheme", "method", "gamma", "r_hat",
                  "pct_full_energy", "gap_opt_pct", "gap_simple_pct",
                  "delta_smart_pct", "wall_time_s")


def scheme_config(scheme: str, gamma: int = 0,
                  strengthen: bool = False) -> ModelConfig:
    """The model configuration a named scheme stands for."""
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    robust = RobustConfig(budget=gamma) if scheme.startswith("robust") else None
    protection = "none"
    if "dedicated" in scheme:
        protection = "dedicated"
    elif "shared" in scheme:
        protection = "shared"
    return ModelConfig(protection=protection, smart=scheme.endswith("-smart"),
                       robust=robust, strengthen=strengthen).validated()


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one benchmark run depends on, loadable from an INI file."""

    instance_file: str | None = None
    instance_class: str | None = None
    catalog: str = "eta"
    scenario: str = "aver"
    seed: int = 7
    scheme: str = "simple"
    method: str = "exact"
    gamma: int = 0
    r_hat: float = 0.2
    mu_a: float = 0.5
    mu_b: float = 0.85
    omega: int = 5
    scale: float | None = None
    scaling_protection: str = "dedicated"
    scaling_robust: bool = False
    strengthen: bool = False
    warm_shared: bool = True
    time_limit: float = 3600.0
    per_period_time_limit: float = 60.0
    gap_target: float = 0.01
    rotations: int | None = None
    samples: int = 10_000
    evaluate_robustness: bool = False
    output_dir: str = "out"

    def validated(self) -> "ExperimentConfig":
        if (self.instance_file is None) == (self.instance_class is None):
            raise ValueError("exactly one of instance_file / instance_class "
                             "must be set")
        if self.instance_class is not None and \
                self.instance_class not in INSTANCE_CLASSES:
            raise ValueError(f"unknown instance class {self.instance_class!r}")
        if self.catalog not in CATALOGS:
            raise ValueError(f"unknown catalog {self.catalog!r}")
        if self.scenario not in SCENARIO_KINDS:
            raise ValueError(f"scenario kind must be one of {SCENARIO_KINDS}")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        scheme_config(self.scheme, self.gamma)   # validates the combination
        return self

    @classmethod
    def from_ini(cls, path: str | Path,
                 overrides: dict | None = None) -> "ExperimentConfig":
        parser = configparser.ConfigParser()
        read = parser.read(str(path))
        if not read:
            raise FileNotFoundError(path)
        known = {f.name: f for f in fields(cls)}
        values: dict = {}
        for section in parser.sections():
            if section not in ("instance", "model", "run"):
                raise ValueError(f"unknown config section [{section}]")
            for key, raw in parser.items(section):
                if key not in known:
                    raise ValueError(f"unknown config key {key!r} in [{section}]")
                values[key] = _coerce(cls, key, raw)
        if overrides:
            values.update(overrides)
        return cls(**values).validated()

    def to_ini(self, path: str | Path) -> None:
        parser = configparser.ConfigParser()
        groups = {
            "instance": ("instance_file", "instance_class", "catalog",
                         "scenario", "seed", "scale", "scaling_protection",
                         "scaling_robust"),
            "model": ("scheme", "method", "gamma", "r_hat", "mu_a", "mu_b",
                      "omega", "strengthen", "warm_shared"),
            "run": ("time_limit", "per_period_time_limit", "gap_target",
                    "rotations", "samples", "evaluate_robustness",
                    "output_dir"),
        }
        for section, keys in groups.items():
            parser[section] = {}
            for key in keys:
                value = getattr(self, key)
                if value is not None:
                    parser[section][key] = str(value)
        with open(path, "w", encoding="utf-8") as fh:
            parser.write(fh)


_BOOL_FIELDS = {"scaling_robust", "strengthen", "warm_shared",
                "evaluate_robustness"}
_INT_FIELDS = {"seed", "gamma", "omega", "samples", "rotations"}
_FLOAT_FIELDS = {"r_hat", "mu_a", "mu_b", "scale", "time_limit",
                 "per_period_time_limit", "gap_target"}


def _coerce(cls, key: str, raw: str):
    raw = raw.strip()
    if raw.lower() in ("none", ""):
        return None
    if key in _BOOL_FIELDS:
        if raw.lower() in ("true", "yes", "1", "on"):
            return True
        if raw.lower() in ("false", "no", "0", "off"):
            return False
        raise ValueError(f"{key}: not a boolean: {raw!r}")
    if key in _INT_FIELDS:
        return int(raw)
    if key in _FLOAT_FIELDS:
        return float(raw)
    return raw


@dataclass
class PreparedInstance:
    """An instance made concrete: scaled demands, scenario set, catalog."""

    instance: ProblemInstance
    catalog: DeviceCatalog
    topology: NetworkTopology
    demands: tuple
    scenarios: ScenarioSet
    full_active: float


@dataclass
class ExperimentResult:
    metrics: dict
    solution: NetworkSolution
    solution_path: Path | None = None
    metrics_path: Path | None = None
    log_path: Path | None = None


def load_instance(config: ExperimentConfig) -> ProblemInstance:
    if config.instance_file is not None:
        return ProblemInstance.load(config.instance_file)
    return make_instance(config.instance_class, config.catalog,
                         seed=config.seed)


def _scenario_spec(config: ExperimentConfig) -> ScenarioSpec:
    if config.scenario == "aver":
        return ScenarioSpec(profile=DEFAULT_PROFILE, deviation=config.r_hat,
                            kind="aver")
    realization = SCENARIO_KINDS.index(config.scenario) + 1
    return ScenarioSpec(profile=DEFAULT_PROFILE, deviation=config.r_hat,
                        kind="random", seed=config.seed * 4 + realization)


def prepare(config: ExperimentConfig,
            backend: SolverBackend | None = None) -> PreparedInstance:
    """Load or synthesize the instance, resolve its traffic scale, and build
    the scenario set the run will use."""
    config = config.validated()
    instance = load_instance(config)
    cat = make_catalog(config.catalog, mu_a=config.mu_a, mu_b=config.mu_b)
    topology = instance.topology(cat)
    scale = config.scale if config.scale is not None else instance.scale
    if scale is None:
        spec = ScalingSpec(
            mu_a=config.mu_a, mu_b=config.mu_b,
            protection=config.scaling_protection,
            robust_budget=config.gamma if config.scaling_robust else 0,
            r_hat=config.r_hat if config.scaling_robust else 0.0)
        scale = compute_scaling_factor(topology, cat, instance.demands, spec,
                                       backend)
        log.info("computed traffic scale %.4f", scale)
    demands, scenarios = build_scenarios(instance.demands,
                                         _scenario_spec(config), scale)
    full_active = full_active_consumption(topology, cat, scenarios)
    return PreparedInstance(instance=instance.with_scale(scale), catalog=cat,
                            topology=topology, demands=demands,
                            scenarios=scenarios, full_active=full_active)


def _fully_active_incumbent(prep: PreparedInstance, model_cfg: ModelConfig,
                            backend: SolverBackend,
                            config: ExperimentConfig) -> dict[str, float] | None:
    """Solve the variant with every device pinned on and encode the result as
    a warm-start assignment for the free model. Returns None if even the
    pinned model yields nothing within the probe budget."""
    inst = build_model(prep.topology, prep.catalog, prep.demands,
                       prep.scenarios, model_cfg, fully_active=True)
    budget = min(120.0, config.time_limit)
    res = backend.solve(SolveRequest(inst, time_limit=budget, gap_target=0.5))
    if res.incumbent is None:
        log.warning("fully active probe found no incumbent (%s)", res.status)
        return None
    sol = extract_solution(prep.topology, prep.demands, prep.scenarios,
                           res.incumbent, paths=model_cfg.restricted_paths)
    return solution_assignment(sol, prep.demands, prep.scenarios, model_cfg)


def _solve_scheme(prep: PreparedInstance, config: ExperimentConfig,
                  backend: SolverBackend,
                  warm_candidates: Sequence[dict] = ()) -> tuple[NetworkSolution, dict]:
    """Run one scheme with the configured method; returns the solution and
    raw run facts (status, gap, wall time)."""
    model_cfg = scheme_config(config.scheme, config.gamma, config.strengthen)
    started = time.perf_counter()
    if config.method == "exact":
        if model_cfg.protection == "shared" and config.warm_shared and \
                not warm_candidates:
            res, solution = warm_start_shared(
                prep.topology, prep.catalog, prep.demands, prep.scenarios,
                smart=model_cfg.smart, time_limit=config.time_limit,
                backend=backend, gap_target=config.gap_target)
        else:
            inst = build_model(prep.topology, prep.catalog, prep.demands,
                               prep.scenarios, model_cfg)
            candidates = list(warm_candidates)
            if model_cfg.robust is not None and not candidates:
                # the dualized models are hard to seed cold; a fully active
                # probe is feasible whenever the traffic scale is, and solves
                # in seconds because every device variable is pinned
                probe = _fully_active_incumbent(prep, model_cfg, backend,
                                                config)
                if probe is not None:
                    candidates.append(probe)
            warm = best_warm_start(inst, candidates)
            if warm is not None:
                inst.set_warm_start(warm)
            res = backend.solve(SolveRequest(inst,
                                             time_limit=config.time_limit,
                                             gap_target=config.gap_target))
            if res.incumbent is None:
                raise RuntimeError(f"{config.scheme}: solver returned "
                                   f"{res.status}: {res.message}")
            solution = extract_solution(prep.topology, prep.demands,
                                        prep.scenarios, res.incumbent)
            solution.total_energy = res.objective
            solution.objective_bound = res.best_bound
            solution.gap = res.gap
        facts = {"status": res.status, "gap": res.gap,
                 "bound": res.best_bound}
    else:
        options = StphOptions(
            per_period_time_limit=config.per_period_time_limit,
            gap_target=config.gap_target,
            rotations=None if config.rotations is None
            else tuple(range(config.rotations)),
            seed=config.seed)
        if config.method == "stph":
            solution = stph(prep.topology, prep.catalog, prep.demands,
                            prep.scenarios, model_cfg, options, backend)
        else:
            solution = stph_rp(prep.topology, prep.catalog, prep.demands,
                               prep.scenarios, model_cfg, config.omega,
                               options, backend)
        facts = {"status": "heuristic", "gap": None, "bound": None}
    facts["wall_time"] = time.perf_counter() - started
    return solution, facts


def _metrics_row(config: ExperimentConfig, prep: PreparedInstance,
                 solution: NetworkSolution, facts: dict) -> dict:
    metrics = energy_of_solution(solution, prep.catalog, prep.scenarios)
    row = {
        "instance": prep.instance.name,
        "scheme": config.scheme,
        "method": config.method,
        "gamma": config.gamma if config.scheme.startswith("robust") else "",
        "r_hat": config.r_hat if config.scheme.startswith("robust") else "",
        "pct_full_energy": 100.0 * metrics.percent_of_full,
        "gap_opt_pct": "" if facts.get("gap") is None
        else 100.0 * facts["gap"],
        "gap_simple_pct": "",
        "delta_smart_pct": "",
        "wall_time_s": facts["wall_time"],
    }
    return row


def format_metric(value) -> str:
    if value == "" or value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


def write_metrics_csv(rows: Sequence[dict], path: str | Path) -> None:
    lines = [",".join(METRIC_COLUMNS)]
    for row in rows:
        lines.append(",".join(format_metric(row.get(c, "")) for c in METRIC_COLUMNS))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def run_experiment(config: ExperimentConfig,
                   backend: SolverBackend | None = None,
                   prepared: PreparedInstance | None = None) -> ExperimentResult:
    """One scheme, one method: solve, score, and persist the outcome."""
    config = config.validated()
    backend = backend or default_backend()
    prep = prepared or prepare(config, backend)

    out_dir = Path(config.output_dir) / \
        f"{prep.instance.name}-{config.scheme}-{config.method}"
    out_dir.mkdir(parents=True, exist_ok=True)
    log_path = out_dir / "run.log"
    handler = logging.FileHandler(log_path, mode="w", encoding="utf-8")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
    root = logging.getLogger("netsleep")
    root.addHandler(handler)
    old_level = root.level
    root.setLevel(logging.INFO)
    try:
        log.info("run: %s", {f.name: getattr(config, f.name)
                             for f in fields(config)})
        solution, facts = _solve_scheme(prep, config, backend)
        row = _metrics_row(config, prep, solution, facts)
        log.info("finished: status=%s energy=%.1f Wh (%.1f%% of full active) "
                 "wall=%.1fs", facts["status"],
                 solution.total_energy or -1.0,
                 row["pct_full_energy"], facts["wall_time"])
        solution_path = out_dir / "solution.json"
        solution_path.write_text(solution_to_json(solution, prep.demands),
                                 encoding="utf-8")
        metrics_path = out_dir / "metrics.csv"
        write_metrics_csv([row], metrics_path)
        if config.evaluate_robustness:
            report = robust_eval.evaluate(solution, prep.demands,
                                          prep.scenarios, prep.catalog,
                                          samples=config.samples,
                                          seed=config.seed)
            line = robust_eval.csv_row(config.scheme, config.gamma,
                                       config.r_hat, row["pct_full_energy"],
                                       report)
            (out_dir / "robustness.csv").write_text(
                robust_eval.CSV_HEADER + "\n" + line + "\n", encoding="utf-8")
            log.info("robustness: %s", line)
    finally:
        root.removeHandler(handler)
        root.setLevel(old_level)
        handler.close()
    return ExperimentResult(metrics=row, solution=solution,
                            solution_path=solution_path,
                            metrics_path=metrics_path, log_path=log_path)


# -- scheme sweep with warm-start chaining -----------------------------------

_CHAIN_ORDER = ("robust-dedicated-classic", "robust-dedicated-smart",
                "dedicated-classic", "dedicated-smart",
                "shared-classic", "shared-smart", "robust", "simple")


def _chain_candidates(scheme: str, solved: dict[str, NetworkSolution],
                      prep: PreparedInstance,
                      config: ExperimentConfig) -> list[dict]:
    """Feasible warm starts for a scheme, translated from already-solved ones.

    Containments used: a robust solution satisfies the nominal rows; a
    dedicated solution reused verbatim is shared-feasible; a classic solution
    is feasible under smart failover accounting; any routing without its
    backup fits the unprotected model.
    """
    target_cfg = scheme_config(scheme, config.gamma)
    sources: list[NetworkSolution] = []
    if scheme == "robust-dedicated-smart":
        sources = [solved.get("robust-dedicated-classic")]
    elif scheme == "dedicated-classic":
        sources = [solved.get("robust-dedicated-classic")]
    elif scheme == "dedicated-smart":
        sources = [solved.get("dedicated-classic"),
                   solved.get("robust-dedicated-smart")]
    elif scheme == "shared-classic":
        src = solved.get("dedicated-classic")
        sources = [translate_dedicated_to_shared(src) if src else None]
    elif scheme == "shared-smart":
        src = solved.get("dedicated-smart")
        sources = [translate_dedicated_to_shared(src) if src else None,
                   solved.get("shared-classic")]
    elif scheme == "robust":
        src = solved.get("robust-dedicated-classic")
        sources = [project_routing_only(src) if src else None]
    elif scheme == "simple":
        src = solved.get("dedicated-classic")
        sources = [project_routing_only(src) if src else None,
                   solved.get("robust")]
    out = []
    for sol in sources:
        if sol is None:
            continue
        try:
            out.append(solution_assignment(sol, prep.demands, prep.scenarios,
                                           target_cfg))
        except (KeyError, ValueError, IndexError):
            log.warning("warm-start translation into %s failed", scheme)
    return out


def run_sweep(config: ExperimentConfig,
              schemes: Sequence[str] | None = None,
              backend: SolverBackend | None = None,
              prepared: PreparedInstance | None = None,
              write: bool = True) -> list[dict]:
    """Run several schemes on one prepared instance, chaining warm starts in
    a fixed order, then fill the cross-scheme metric columns."""
    config = config.validated()
    backend = backend or default_backend()
    prep = prepared or prepare(config, backend)
    wanted = set(schemes if schemes is not None else SCHEMES)
    unknown = wanted.difference(SCHEMES)
    if unknown:
        raise ValueError(f"unknown schemes: {sorted(unknown)}")

    rows: list[dict] = []
    solved: dict[str, NetworkSolution] = {}
    for scheme in _CHAIN_ORDER:
        if scheme not in wanted:
            continue
        run_cfg = replace(config, scheme=scheme)
        candidates = _chain_candidates(scheme, solved, prep, config)
        solution, facts = _solve_scheme(prep, run_cfg, backend,
                                        warm_candidates=candidates)
        solved[scheme] = solution
        rows.append(_metrics_row(run_cfg, prep, solution, facts))
        log.info("sweep %s: %.2f%% of full active", scheme,
                 rows[-1]["pct_full_energy"])

    by_scheme = {r["scheme"]: r for r in rows}
    simple = by_scheme.get("simple")
    for row in rows:
        if simple and row is not simple:
            base = simple["pct_full_energy"]
            row["gap_simple_pct"] = 100.0 * (row["pct_full_energy"] - base) / base
        classic = row["scheme"].replace("-smart", "-classic")
        if row["scheme"].endswith("-smart") and classic in by_scheme:
            row["delta_smart_pct"] = row["pct_full_energy"] - \
                by_scheme[classic]["pct_full_energy"]
    if write:
        out_dir = Path(config.output_dir) / f"{prep.instance.name}-sweep"
        out_dir.mkdir(parents=True, exist_ok=True)
        write_metrics_csv(rows, out_dir / "metrics.csv")
        emit_plot_data(rows, "scheme", out_dir / "schemes.csv")
    return rows


def emit_plot_data(rows: Sequence[dict], axis: str, path: str | Path) -> None:
    """Plot-ready CSV over one sweep axis; every row must carry the axis."""
    for row in rows:
        if axis not in row or row[axis] in ("", None):
            raise ValueError(f"row lacks sweep axis {axis!r}: {row}")
    value_cols = [c for c in METRIC_COLUMNS
                  if c not in ("instance", "wall_time_s") and c != axis]
    header = [axis] + value_cols
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join([format_metric(row[axis])] +
                              [format_metric(row.get(c, "")) for c in value_cols]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# -- solution serialization ---------------------------------------------------

def solution_to_json(solution: NetworkSolution, demands) -> str:
    payload = {
        "nodes": [n.id for n in solution.topology.nodes],
        "arcs": [[a.tail, a.head] for a in solution.topology.arcs],
        "demands": [d.id for d in demands],
        "chassis_on": solution.chassis_on.astype(int).tolist(),
        "active_cards": solution.active_cards.astype(int).tolist(),
        "switch_cost": np.round(solution.switch_cost, 9).tolist(),
        "primary": solution.primary.astype(int).tolist(),
        "backup": None if solution.backup is None
        else solution.backup.astype(int).tolist(),
        "card_activation": None if solution.card_activation is None
        else solution.card_activation.astype(int).tolist(),
        "total_energy": solution.total_energy,
        "objective_bound": solution.objective_bound,
        "gap": solution.gap,
    }
    return json.dumps(payload, sort_keys=True, indent=1)


def solution_from_json(text: str, topology: NetworkTopology) -> NetworkSolution:
    payload = json.loads(text)
    stored = [tuple(pair) for pair in payload["arcs"]]
    actual = [(a.tail, a.head) for a in topology.arcs]
    if stored != actual:
        raise ValueError("solution was saved for a different topology")
    return NetworkSolution(
        topology=topology,
        chassis_on=np.array(payload["chassis_on"], dtype=float),
        active_cards=np.array(payload["active_cards"], dtype=float),
        switch_cost=np.array(payload["switch_cost"], dtype=float),
        primary=np.array(payload["primary"], dtype=float),
        backup=None if payload["backup"] is None
        else np.array(payload["backup"], dtype=float),
        card_activation=None if payload["card_activation"] is None
        else np.array(payload["card_activation"], dtype=float),
        total_energy=payload.get("total_energy"),
        objective_bound=payload.get("objective_bound"),
        gap=payload.get("gap"),
    )
