"""Benchmark harness: configuration files, runs, sweeps, and artifacts."""

from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from netsleep.builder import ModelConfig, build_model, solution_assignment
from netsleep.experiment import (METRIC_COLUMNS, SCHEMES, ExperimentConfig,
                                 emit_plot_data, prepare, run_experiment,
                                 run_sweep, scheme_config, solution_from_json,
                                 solution_to_json, write_metrics_csv)
from netsleep.solver import SolveRequest, verify_solution

from helpers import day, demand, six_node


@pytest.fixture(scope="module")
def tiny_config(tmp_path_factory):
    out = tmp_path_factory.mktemp("runs")
    return ExperimentConfig(instance_class="ring12", seed=3, catalog="eta",
                            scenario="aver", scale=1.0, time_limit=20.0,
                            gap_target=0.02, samples=50,
                            output_dir=str(out))


def test_scheme_config_mapping():
    assert scheme_config("simple") == ModelConfig()
    assert scheme_config("dedicated-smart") == \
        ModelConfig(protection="dedicated", smart=True)
    shared = scheme_config("shared-classic")
    assert shared.protection == "shared" and not shared.smart
    robust = scheme_config("robust-dedicated-classic", gamma=4)
    assert robust.protection == "dedicated"
    assert robust.robust is not None and robust.robust.budget_at(0, 0) == 4
    plain_robust = scheme_config("robust", gamma=2)
    assert plain_robust.protection == "none"
    assert plain_robust.robust.budget_at(1, 3) == 2
    with pytest.raises(ValueError, match="unknown scheme"):
        scheme_config("premium")


def test_config_validation_rejects_nonsense(tmp_path):
    with pytest.raises(ValueError, match="exactly one"):
        ExperimentConfig().validated()
    with pytest.raises(ValueError, match="exactly one"):
        ExperimentConfig(instance_file="x", instance_class="ring12").validated()
    with pytest.raises(ValueError, match="unknown instance class"):
        ExperimentConfig(instance_class="mesh99").validated()
    with pytest.raises(ValueError, match="unknown catalog"):
        ExperimentConfig(instance_class="ring12", catalog="zeta").validated()
    with pytest.raises(ValueError, match="scenario kind"):
        ExperimentConfig(instance_class="ring12", scenario="d").validated()
    with pytest.raises(ValueError, match="method"):
        ExperimentConfig(instance_class="ring12", method="anneal").validated()
    with pytest.raises(ValueError, match="nonnegative"):
        ExperimentConfig(instance_class="ring12", gamma=-1).validated()


def test_ini_round_trip(tmp_path):
    cfg = ExperimentConfig(instance_class="ring17", seed=9, catalog="delta",
                           scenario="b", scheme="shared-smart", gamma=2,
                           r_hat=0.15, mu_b=0.9, omega=7, scale=1.25,
                           strengthen=True, warm_shared=False,
                           time_limit=33.5, samples=123,
                           evaluate_robustness=True,
                           output_dir="artifacts")
    path = tmp_path / "run.ini"
    cfg.to_ini(path)
    again = ExperimentConfig.from_ini(path)
    assert again == cfg


def test_ini_overrides_and_errors(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text("[instance]\ninstance_class = ring12\nseed = 4\n",
                    encoding="utf-8")
    cfg = ExperimentConfig.from_ini(path, overrides={"seed": 8})
    assert cfg.seed == 8 and cfg.instance_class == "ring12"
    path.write_text("[instance]\nflavour = spicy\n", encoding="utf-8")
    with pytest.raises(ValueError, match="unknown config key"):
        ExperimentConfig.from_ini(path)
    path.write_text("[exotic]\ninstance_class = ring12\n", encoding="utf-8")
    with pytest.raises(ValueError, match="unknown config section"):
        ExperimentConfig.from_ini(path)
    with pytest.raises(FileNotFoundError):
        ExperimentConfig.from_ini(tmp_path / "absent.ini")


def test_prepare_applies_explicit_scale(tiny_config, backend):
    prep = prepare(tiny_config, backend)
    assert prep.instance.scale == 1.0
    assert len(prep.demands) == 15
    assert len(prep.scenarios) == 6
    assert prep.full_active > 0
    raw = {d.id: d.value for d in prep.instance.demands}
    for dem in prep.demands:
        assert dem.nominal_value == pytest.approx(raw[dem.id])


def test_run_experiment_writes_artifacts(tiny_config, backend):
    cfg = replace(tiny_config, scheme="simple", evaluate_robustness=True)
    result = run_experiment(cfg, backend)
    assert result.metrics["scheme"] == "simple"
    assert 0 < result.metrics["pct_full_energy"] < 100
    assert result.solution_path.exists()
    assert result.metrics_path.exists()
    assert result.log_path.exists()
    header = result.metrics_path.read_text(encoding="utf-8").splitlines()[0]
    assert header == ",".join(METRIC_COLUMNS)
    robustness = result.metrics_path.parent / "robustness.csv"
    assert robustness.exists()
    body = robustness.read_text(encoding="utf-8").splitlines()
    assert body[0].startswith("scheme,gamma")
    assert body[1].startswith("simple,")


def test_sweep_orders_schemes_and_fills_cross_metrics(tiny_config, backend):
    rows = run_sweep(tiny_config, schemes=("simple", "dedicated-classic",
                                           "dedicated-smart"),
                     backend=backend)
    by = {r["scheme"]: r for r in rows}
    assert set(by) == {"simple", "dedicated-classic", "dedicated-smart"}
    assert by["simple"]["pct_full_energy"] <= \
        by["dedicated-smart"]["pct_full_energy"] + 1e-9
    assert by["dedicated-smart"]["pct_full_energy"] <= \
        by["dedicated-classic"]["pct_full_energy"] + 1e-9
    assert by["dedicated-classic"]["gap_simple_pct"] > 0
    assert by["dedicated-smart"]["delta_smart_pct"] <= 0
    assert by["simple"]["gap_simple_pct"] == ""
    sweep_dir = next(p for p in Path(tiny_config.output_dir).iterdir()
                     if p.name.endswith("-sweep"))
    assert (sweep_dir / "metrics.csv").exists()
    assert (sweep_dir / "schemes.csv").exists()


def test_sweep_rejects_unknown_scheme(tiny_config, backend):
    with pytest.raises(ValueError, match="unknown schemes"):
        run_sweep(tiny_config, schemes=("simple", "budget"), backend=backend)


def test_plot_data_requires_a_complete_axis(tmp_path):
    rows = [{"scheme": "simple", "pct_full_energy": 50.0},
            {"scheme": "", "pct_full_energy": 60.0}]
    with pytest.raises(ValueError, match="lacks sweep axis"):
        emit_plot_data(rows, "scheme", tmp_path / "p.csv")
    emit_plot_data(rows[:1], "scheme", tmp_path / "p.csv")
    lines = (tmp_path / "p.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0].startswith("scheme,")
    assert "wall_time_s" not in lines[0]
    assert "instance" not in lines[0]
    assert lines[1].startswith("simple,")


def test_metrics_csv_formats_numbers(tmp_path):
    rows = [{c: "" for c in METRIC_COLUMNS}]
    rows[0].update(instance="t", scheme="simple", method="exact",
                   pct_full_energy=52.34567, wall_time_s=1.25)
    path = tmp_path / "m.csv"
    write_metrics_csv(rows, path)
    text = path.read_text(encoding="utf-8").splitlines()
    assert text[0] == ",".join(METRIC_COLUMNS)
    assert text[1] == "t,simple,exact,,,52.3457,,,,1.2500"


def test_solution_json_round_trip(eta, backend):
    topo = six_node(eta)
    demands = [demand("d0", "A", "C", 500.0), demand("d1", "B", "C", 500.0)]
    cfg = ModelConfig(protection="dedicated")
    inst = build_model(topo, eta, demands, day(), cfg)
    res = backend.solve(SolveRequest(inst, time_limit=60, gap_target=1e-6))
    from netsleep.builder import extract_solution
    sol = extract_solution(topo, demands, day(), res.incumbent)
    sol.total_energy = res.objective
    text = solution_to_json(sol, demands)
    back = solution_from_json(text, topo)
    assert np.array_equal(back.primary, sol.primary)
    assert np.array_equal(back.backup, sol.backup)
    assert np.array_equal(back.active_cards, sol.active_cards)
    assert back.total_energy == pytest.approx(sol.total_energy)
    amap = solution_assignment(back, demands, day(), cfg)
    assert verify_solution(inst, inst.assignment_from_map(amap)).ok
    with pytest.raises(ValueError, match="different topology"):
        solution_from_json(text, _rewired(eta))


def _rewired(eta):
    from helpers import topology
    return topology([("A", "B"), ("B", "C")], edge_nodes=("A", "B", "C"),
                    catalog=eta)
