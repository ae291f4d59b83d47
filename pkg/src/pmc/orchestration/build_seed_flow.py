"""Per-seed run directories and the work done inside one of them."""
import logging
import os
from dataclasses import dataclass
from typing import List

from pmc.errors import ConfigError
from pmc.models import MmgModel, OracleGenerator, save_ensemble, save_generator
from pmc.orchestration import generate_conf
from pmc.orchestration.generate_conf import PI_BASELINES, ExperimentConfig
from pmc.synthdata import BenchmarkSpec, MultiModalDataset, drop_modality, generate_benchmark, load
from pmc.trainers import TrainConfig, train_dann, train_pmc, train_pmc_pi, train_source_only

logger = logging.getLogger(__name__)

METRICS_FILE = "metrics.tsv"
SUMMARY_FILE = "summary.json"
CONF_FILE = "run_conf.json"
AUDIT_FILE = "selection_audit.tsv"
ENSEMBLE_FILE = "ensemble.npz"
GENERATOR_FILE = "generator.npz"


@dataclass(frozen=True)
class SeedRun:
    run_dir: str
    seed: int
    alpha: float
    conf_path: str


def alpha_dir_name(alpha: float) -> str:
    return f"alpha_{alpha:g}"


def build_seed_flows(experiment: ExperimentConfig) -> List[SeedRun]:
    """Create ``[alpha_<v>/]seed_<n>`` directories, each with its own ``run_conf.json``."""
    runs = []
    sweep = len(experiment.alpha_values) > 1
    for alpha in experiment.alpha_values:
        root = os.path.join(experiment.output_dir, alpha_dir_name(alpha)) if sweep else experiment.output_dir
        for seed in experiment.seeds:
            run_dir = os.path.join(root, f"seed_{seed}")
            os.makedirs(run_dir, exist_ok=True)
            conf_path = os.path.join(run_dir, CONF_FILE)
            generate_conf.generate_run_conf(conf_path, experiment, seed, alpha, run_dir)
            runs.append(SeedRun(run_dir, seed, alpha, conf_path))
    return runs


def load_run_dataset(conf: dict) -> MultiModalDataset:
    """The dataset of one run: loaded from file or generated with the run's seed."""
    if conf["dataset"] is not None:
        dataset = load(conf["dataset"])
    else:
        dataset = generate_benchmark(BenchmarkSpec.from_dict(conf["benchmark"]))
    missing = conf["missing_modality"]
    if missing is not None and missing not in dataset.schema.missing:
        dataset = drop_modality(dataset, missing)
    if conf["baseline"] in PI_BASELINES and len(dataset.schema.missing) != 1:
        raise ConfigError(f"baseline '{conf['baseline']}' needs exactly one modality missing from the target domain")
    return dataset


def execute_run(conf_path: str) -> dict:
    """Train one seed as described by its ``run_conf.json``; returns the run summary."""
    conf = generate_conf.read_run_conf(conf_path)
    run_dir = conf["run_dir"]
    config = TrainConfig.from_dict(conf["train"])
    dataset = load_run_dataset(conf)
    baseline = conf["baseline"]
    audit_path = os.path.join(run_dir, AUDIT_FILE) if conf["audit"] else None
    if audit_path is not None and os.path.exists(audit_path):
        os.remove(audit_path)

    logger.info("seed %d: training %s on %d source / %d target samples", config.seed, baseline,
                dataset.n_source, dataset.n_target)
    generator = None
    available = dataset.schema.target_names
    if baseline == "source-only":
        ensemble, metrics = train_source_only(dataset, config, available)
    elif baseline == "dann":
        ensemble, metrics = train_dann(dataset, config, available)
    elif baseline == "pmc":
        ensemble, metrics = train_pmc(dataset, config, audit_path)
    else:
        if baseline == "dann-mmg":
            config = TrainConfig.from_dict({**config.to_dict(), "disable_mss": True, "disable_mis": True})
        oracle = OracleGenerator.from_dataset(dataset) if conf["generator"] == "oracle" else None
        ensemble, generator, metrics = train_pmc_pi(dataset, config, oracle, audit_path)

    save_ensemble(ensemble, os.path.join(run_dir, ENSEMBLE_FILE))
    if isinstance(generator, MmgModel):
        save_generator(generator, os.path.join(run_dir, GENERATOR_FILE))
    metrics.summary.update({"seed": config.seed, "alpha": config.alpha, "baseline": baseline})
    metrics.save(os.path.join(run_dir, METRICS_FILE), os.path.join(run_dir, SUMMARY_FILE))
    logger.info("seed %d finished: fused target accuracy %.4f", config.seed, metrics.final_target_accuracy)
    return metrics.summary
