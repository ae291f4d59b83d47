"""Experiment configuration and the resolved-configuration snapshot of each run."""
import json
import os
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Tuple

import yaml

from pmc.errors import ConfigError, SpecError
from pmc.synthdata import BenchmarkSpec, blobs_mm2
from pmc.trainers import TrainConfig
from pmc.utils import PathLike, atomic_write_text

BASELINES = ("source-only", "dann", "pmc", "pmc-pi", "dann-mmg")
# baselines that need a modality missing from the target domain
PI_BASELINES = ("pmc-pi", "dann-mmg")
GENERATORS = ("mmg", "oracle")
EXPERIMENT_KEYS = ("benchmark", "dataset", "train", "baseline", "seeds", "output_dir", "workers", "generator",
                   "audit", "missing_modality")


@dataclass(frozen=True)
class ExperimentConfig:
    output_dir: str
    benchmark: Optional[BenchmarkSpec] = None
    dataset: Optional[str] = None
    train: TrainConfig = TrainConfig()
    baseline: str = "pmc"
    seeds: Tuple[int, ...] = (1, 2, 3, 4, 5)
    workers: int = 1
    generator: str = "mmg"
    audit: bool = False
    # dropped from the target domain before training
    missing_modality: Optional[str] = None
    # one sub-run per value when more than one is given
    alphas: Tuple[float, ...] = field(default=())

    def __post_init__(self):
        if (self.benchmark is None) == (self.dataset is None):
            raise ConfigError("exactly one of 'benchmark' and 'dataset' must be given")
        if self.baseline not in BASELINES:
            raise ConfigError(f"baseline must be one of {BASELINES} (provided '{self.baseline}')")
        if not self.seeds:
            raise ConfigError("seeds: at least one seed is required")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError(f"seeds must be unique (provided {list(self.seeds)})")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1 (provided {self.workers})")
        if self.generator not in GENERATORS:
            raise ConfigError(f"generator must be one of {GENERATORS} (provided '{self.generator}')")
        if any(a <= 0 for a in self.alphas):
            raise ConfigError(f"alpha values must be positive (provided {list(self.alphas)})")
        if self.benchmark is not None:
            names = [m.name for m in self.benchmark.modalities]
            if self.missing_modality is not None and self.missing_modality not in names:
                raise ConfigError(f"missing_modality '{self.missing_modality}' is not a benchmark modality {names}")
            if self.baseline in PI_BASELINES and self.missing_modality is None:
                raise ConfigError(f"baseline '{self.baseline}' needs 'missing_modality' on a benchmark")
        if self.baseline in PI_BASELINES and self.train.mode != "MMDA-PI":
            raise ConfigError(f"baseline '{self.baseline}' needs train.mode 'MMDA-PI' (provided '{self.train.mode}')")
        if self.baseline == "pmc" and self.train.mode != "MMDA":
            raise ConfigError("baseline 'pmc' trains with every modality on both domains; use 'pmc-pi' for MMDA-PI")
        if self.generator == "oracle" and self.baseline not in PI_BASELINES:
            raise ConfigError(f"the oracle generator only applies to {PI_BASELINES}")

    @property
    def alpha_values(self) -> Tuple[float, ...]:
        return self.alphas if self.alphas else (self.train.alpha,)

    @classmethod
    def from_dict(cls, conf: Mapping, base_dir: PathLike = ".") -> "ExperimentConfig":
        unknown = set(conf) - set(EXPERIMENT_KEYS)
        if unknown:
            raise ConfigError(f"unknown experiment keys: {sorted(unknown)}")
        if "output_dir" not in conf:
            raise ConfigError("output_dir is required")
        train_conf = dict(conf.get("train") or {})
        alphas: Tuple[float, ...] = ()
        if isinstance(train_conf.get("alpha"), list):
            alphas = tuple(float(a) for a in train_conf.pop("alpha"))
            if not alphas:
                raise ConfigError("train.alpha: an alpha list needs at least one value")
            train_conf["alpha"] = alphas[0]
        benchmark = None
        if conf.get("benchmark") is not None:
            bench = conf["benchmark"]
            if isinstance(bench, str):
                if bench != "blobs-mm2":
                    raise ConfigError(f"unknown built-in benchmark '{bench}' (only 'blobs-mm2')")
                benchmark = blobs_mm2()
            else:
                benchmark = BenchmarkSpec.from_dict(bench)
        dataset = conf.get("dataset")
        if dataset is not None:
            dataset = os.path.abspath(os.path.join(base_dir, dataset))
        return cls(output_dir=os.path.abspath(os.path.join(base_dir, conf["output_dir"])),
                   benchmark=benchmark, dataset=dataset,
                   train=TrainConfig.from_dict(train_conf),
                   baseline=conf.get("baseline", "pmc"),
                   seeds=tuple(int(s) for s in conf.get("seeds", (1, 2, 3, 4, 5))),
                   workers=int(conf.get("workers", 1)),
                   generator=conf.get("generator", "mmg"),
                   audit=bool(conf.get("audit", False)),
                   missing_modality=conf.get("missing_modality"),
                   alphas=alphas)

    def to_dict(self) -> dict:
        train = self.train.to_dict()
        if self.alphas:
            train["alpha"] = list(self.alphas)
        return {"output_dir": self.output_dir,
                "benchmark": self.benchmark.to_dict() if self.benchmark is not None else None,
                "dataset": self.dataset, "train": train, "baseline": self.baseline, "seeds": list(self.seeds),
                "workers": self.workers, "generator": self.generator, "audit": self.audit,
                "missing_modality": self.missing_modality}


def load_experiment(path: PathLike, overrides: Mapping = None) -> ExperimentConfig:
    """Read a YAML experiment file; relative paths resolve against the file's directory."""
    with open(path, "r") as in_IO:
        conf = yaml.safe_load(in_IO) or {}
    if not isinstance(conf, dict):
        raise ConfigError(f"{path}: expected a mapping at the top level")
    conf.update(overrides or {})
    try:
        return ExperimentConfig.from_dict(conf, base_dir=os.path.dirname(os.path.abspath(path)))
    except SpecError as err:
        raise ConfigError(f"benchmark: {err}") from err


def load_benchmark_spec(path: PathLike) -> BenchmarkSpec:
    with open(path, "r") as in_IO:
        conf = yaml.safe_load(in_IO) or {}
    if not isinstance(conf, dict):
        raise SpecError(f"{path}: expected a mapping at the top level")
    return BenchmarkSpec.from_dict(conf)


def generate_run_conf(out_path: PathLike, experiment: ExperimentConfig, seed: int, alpha: float,
                      run_dir: str) -> PathLike:
    """Snapshot everything one seed's run depends on as ``run_conf.json``."""
    train = replace(experiment.train, seed=seed, alpha=alpha)
    benchmark = replace(experiment.benchmark, seed=seed) if experiment.benchmark is not None else None
    conf_settings = {
        "run_dir": run_dir,
        "seed": seed,
        "baseline": experiment.baseline,
        "generator": experiment.generator,
        "audit": experiment.audit,
        "missing_modality": experiment.missing_modality,
        "dataset": experiment.dataset,
        "benchmark": benchmark.to_dict() if benchmark is not None else None,
        "train": train.to_dict(),
    }
    atomic_write_text(out_path, json.dumps(conf_settings, indent=4))
    return out_path


def read_run_conf(path: PathLike) -> dict:
    with open(path, "r") as in_IO:
        return json.load(in_IO)
