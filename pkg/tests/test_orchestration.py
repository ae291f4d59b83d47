import json
import os

import numpy as np
import pandas as pd
import pytest

from conftest import TINY_TRAIN, small_spec, write_experiment
from pmc.errors import ConfigError, ReportError
from pmc.models import load_ensemble, load_generator
from pmc.orchestration.build_seed_flow import (CONF_FILE, ENSEMBLE_FILE, GENERATOR_FILE, SUMMARY_FILE,
                                               build_seed_flows, execute_run, load_run_dataset)
from pmc.orchestration.generate_conf import ExperimentConfig, load_experiment, read_run_conf
from pmc.orchestration.generate_scheduler import scheduler
from pmc.run_experiment import run_experiment
from pmc.scripts import final_results
from pmc.trainers import TrainConfig


def experiment(tmp_path, name="exp", **overrides) -> ExperimentConfig:
    return load_experiment(write_experiment(tmp_path / f"{name}.yaml", tmp_path / name, **overrides))


# configuration

def test_relative_paths_resolve_against_the_file(tmp_path):
    path = tmp_path / "conf" / "exp.yaml"
    path.parent.mkdir()
    write_experiment(path, "out")
    assert load_experiment(path).output_dir == str(tmp_path / "conf" / "out")


def test_builtin_benchmark_name(tmp_path):
    exp = experiment(tmp_path, benchmark="blobs-mm2")
    assert exp.benchmark.name == "blobs-mm2" and exp.benchmark.n_classes == 4
    with pytest.raises(ConfigError, match="blobs-mm3"):
        experiment(tmp_path, benchmark="blobs-mm3")


@pytest.mark.parametrize("overrides, message", [
    ({"dataset": "data.tsv"}, "exactly one"),
    ({"baseline": "pmc-pi", "train": {"mode": "MMDA-PI"}}, "missing_modality"),
    ({"baseline": "pmc-pi", "missing_modality": "B"}, "MMDA-PI"),
    ({"train": {"mode": "MMDA-PI"}}, "pmc-pi"),
    ({"generator": "oracle"}, "oracle"),
    ({"missing_modality": "C"}, "missing_modality"),
    ({"seeds": [1, 1]}, "unique"),
    ({"learning_rate": 0.1}, "learning_rate"),
    ({"train": {"alpha": [1.0, -1.0]}}, "alpha"),
])
def test_experiment_validation(tmp_path, overrides, message):
    with pytest.raises(ConfigError, match=message):
        experiment(tmp_path, **overrides)


def test_benchmark_errors_surface_as_config_errors(tmp_path):
    spec = small_spec().to_dict()
    spec["n_classes"] = 0
    with pytest.raises(ConfigError, match="n_classes"):
        experiment(tmp_path, benchmark=spec)


def test_alpha_sweep_directories(tmp_path):
    exp = experiment(tmp_path, train={"alpha": [0.5, 2.0]})
    assert exp.alpha_values == (0.5, 2.0)
    runs = build_seed_flows(exp)
    assert sorted(os.path.relpath(r.run_dir, exp.output_dir) for r in runs) == [
        os.path.join("alpha_0.5", "seed_1"), os.path.join("alpha_0.5", "seed_2"),
        os.path.join("alpha_2", "seed_1"), os.path.join("alpha_2", "seed_2")]
    conf = read_run_conf(os.path.join(exp.output_dir, "alpha_2", "seed_2", CONF_FILE))
    assert conf["train"]["alpha"] == 2.0
    assert conf["train"]["seed"] == 2 and conf["benchmark"]["seed"] == 2
    assert TrainConfig.from_dict(conf["train"]).feature_hidden == tuple(TINY_TRAIN["feature_hidden"])


def test_experiment_to_dict_round_trip(tmp_path):
    exp = experiment(tmp_path, train={"alpha": [0.5, 2.0]}, audit=True)
    assert ExperimentConfig.from_dict(json.loads(json.dumps(exp.to_dict()))) == exp


# runs

def test_pmc_run_writes_checkpoints_and_metrics(tmp_path):
    (run,) = build_seed_flows(experiment(tmp_path, seeds=[3], audit=True))
    summary = execute_run(run.conf_path)
    assert summary["seed"] == 3 and summary["baseline"] == "pmc"
    assert 0.0 <= summary["tgt_fused"] <= 1.0
    with open(os.path.join(run.run_dir, SUMMARY_FILE)) as in_IO:
        assert json.load(in_IO) == summary
    metrics = pd.read_csv(os.path.join(run.run_dir, "metrics.tsv"), sep="\t")
    assert len(metrics) == TINY_TRAIN["warmup_epochs"] + TINY_TRAIN["epochs"]
    assert load_ensemble(os.path.join(run.run_dir, ENSEMBLE_FILE)).modalities == ("A", "B")
    assert os.path.exists(os.path.join(run.run_dir, "selection_audit.tsv"))
    assert not os.path.exists(os.path.join(run.run_dir, GENERATOR_FILE))


def test_pi_runs(tmp_path):
    (pi,) = build_seed_flows(experiment(tmp_path, "pi", seeds=[1], baseline="pmc-pi", missing_modality="B",
                                        train={"mode": "MMDA-PI"}))
    execute_run(pi.conf_path)
    generator = load_generator(os.path.join(pi.run_dir, GENERATOR_FILE))
    assert generator.frozen and generator.missing == "B"

    (ceiling,) = build_seed_flows(experiment(tmp_path, "ceiling", seeds=[1], baseline="dann-mmg",
                                             missing_modality="B", generator="oracle", train={"mode": "MMDA-PI"}))
    summary = execute_run(ceiling.conf_path)
    assert not os.path.exists(os.path.join(ceiling.run_dir, GENERATOR_FILE))
    metrics = pd.read_csv(os.path.join(ceiling.run_dir, "metrics.tsv"), sep="\t")
    assert (metrics["n_fused"] == 0).all() and (metrics["n_A"] == 0).all()
    assert summary["baseline"] == "dann-mmg"


def test_missing_modality_dataset(tmp_path):
    (run,) = build_seed_flows(experiment(tmp_path, seeds=[1], baseline="dann", missing_modality="B"))
    dataset = load_run_dataset(read_run_conf(run.conf_path))
    assert dataset.schema.missing == ("B",)
    assert "B" in dataset.hidden.payloads
    summary = execute_run(run.conf_path)
    assert "tgt_A" in summary and "tgt_B" not in summary


def test_parallel_seeds_match_sequential(tmp_path):
    sequential = scheduler(str(tmp_path), 1).schedule_run(build_seed_flows(experiment(tmp_path, "seq")))
    parallel = scheduler(str(tmp_path), 2).schedule_run(build_seed_flows(experiment(tmp_path, "par")))
    assert sequential == parallel


# aggregation and reports

def test_run_experiment_aggregates_seeds(tmp_path):
    exp = experiment(tmp_path)
    final_path, detailed_path = run_experiment(exp)
    final = pd.read_csv(final_path, sep="\t")
    detailed = pd.read_csv(detailed_path, sep="\t")
    assert len(detailed) == 2 and final["nseeds"].tolist() == [2]
    expected = detailed["tgt_fused"].std(ddof=1)
    assert final["tgt_fused_std"].iloc[0] == pytest.approx(expected)
    assert os.path.exists(os.path.join(exp.output_dir, "run_conf.json"))


def test_single_seed_warns(tmp_path):
    exp = experiment(tmp_path, seeds=[4])
    scheduler(exp.output_dir).schedule_run(build_seed_flows(exp))
    with pytest.warns(UserWarning, match="single seed"):
        final_path, _ = final_results.get_final_results(exp.output_dir, exp.output_dir)
    assert pd.read_csv(final_path, sep="\t", na_values="-")["tgt_fused_std"].isna().all()


def test_report_compares_runs(tmp_path):
    dirs = []
    for name, baseline in (("pmc", "pmc"), ("dann", "dann")):
        exp = experiment(tmp_path, name, baseline=baseline)
        run_experiment(exp)
        dirs.append(exp.output_dir)
    table_text, out_path = final_results.report(dirs, str(tmp_path / "report"), plot=True)
    table = pd.read_csv(out_path, sep="\t")
    assert table["run"].tolist() == ["pmc", "dann"]
    assert table["delta_fused"].iloc[0] == 0.0
    assert table["delta_fused"].iloc[1] == pytest.approx(table["tgt_fused_mean"].iloc[1] - table["tgt_fused_mean"].iloc[0])
    assert "delta_fused" in table_text
    assert os.path.getsize(tmp_path / "report" / "report.png") > 0


def test_report_rejects_mixed_modalities(tmp_path):
    full = experiment(tmp_path, "full", seeds=[1], baseline="dann")
    partial = experiment(tmp_path, "partial", seeds=[1], baseline="dann", missing_modality="B")
    for exp in (full, partial):
        run_experiment(exp)
    with pytest.raises(ReportError, match="partial"):
        final_results.compare_runs([full.output_dir, partial.output_dir])


def test_report_needs_results(tmp_path):
    with pytest.raises(ReportError):
        final_results.get_final_results(str(tmp_path), str(tmp_path))
    with pytest.raises(ReportError):
        final_results.compare_runs([str(tmp_path)])


def test_generated_payloads_follow_the_dataset_seed(tmp_path):
    runs = build_seed_flows(experiment(tmp_path))
    a, b = (load_run_dataset(read_run_conf(r.conf_path)) for r in runs)
    assert not np.array_equal(a.source.payloads["A"], b.source.payloads["A"])
