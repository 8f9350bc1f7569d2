"""Energy-aware IP network management: multi-period sleep-mode optimization
with protection, robustness, and matheuristics, plus a benchmark harness.

The library models a network of router chassis and line cards that can be
put to sleep per time period while all traffic demands stay routed, optionally
with dedicated or shared single-link failure protection, robustness against
demand deviations, and several solution methods (exact MILP, sequential
per-period matheuristic, restricted-path reformulation).
"""

from .builder import (CarriedState, ModelConfig, ModelSizeError, RobustConfig,
                      StructuralInfeasibility, build_base, build_dedicated,
                      build_model, build_robust, build_shared,
                      extract_solution, project_routing_only,
                      solution_assignment, translate_dedicated_to_shared)
from .backends import (BranchAndBoundBackend, ExternalBackend, HighsBackend,
                       SolverBackend, default_backend)
from .experiment import (ExperimentConfig, ExperimentResult, METHODS, SCHEMES,
                         emit_plot_data, run_experiment, run_sweep,
                         scheme_config)
from .heuristics import (InterPeriodState, StphOptions, stph, stph_rp,
                         warm_start_shared)
from .milp import BINARY, CONTINUOUS, INTEGER, Constraint, MilpInstance
from .model import (Arc, Demand, DeviceCatalog, EnergyMetrics, NetworkSolution,
                    NetworkTopology, Node, ScenarioSet, TimePeriod,
                    energy_of_solution, full_active_consumption,
                    validate_demands, validate_topology)
from .paths import Path, PathSet, generate_paths, max_flow_value
from .robust import (RobustnessReport, duality_check, evaluate,
                     worst_case_oracle)
from .scaling import ScalingSpec, compute_scaling_factor, scale_instance
from .sndlib import (DEFAULT_PROFILE, ProblemInstance, RawSndInstance,
                     ScenarioSpec, SndSyntaxError, build_scenarios,
                     core_edge_split, default_periods, parse_sndlib,
                     select_largest_demands, serialize_sndlib)
from .solver import (SolveRequest, SolveResult, ViolationReport,
                     best_warm_start, relative_gap, solve, verify_solution)
from .testbed import (CATALOGS, INSTANCE_CLASSES, catalog, make_instance,
                      random_tiny_instance, synthetic_instance)

__version__ = "1.0.0"

__all__ = [name for name in dir() if not name.startswith("_")]
