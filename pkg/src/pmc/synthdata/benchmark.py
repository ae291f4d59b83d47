"""Seeded Gaussian-blob benchmarks with per-modality covariate shift."""
import logging
from dataclasses import asdict, dataclass, field, fields
from typing import Optional, Tuple, Union

import numpy as np

from pmc.errors import SpecError
from pmc.synthdata.dataset import DatasetSchema, DomainSplit, HiddenTruth, ModalitySchema, MultiModalDataset

logger = logging.getLogger(__name__)

COUPLINGS = {
    "tanh": np.tanh,
    "sine": np.sin,
    "quadratic": lambda u: 0.5 * u ** 2,
}


@dataclass(frozen=True)
class ModalityBenchmark:
    name: str
    dim: int = 8
    # distance of the class means from the origin
    informativeness: float = 1.0
    rotation_deg: float = 0.0
    translation: Union[float, Tuple[float, ...]] = 0.0
    scale: float = 1.0
    # when set, this modality is a nonlinear function of ``derived_from``
    derived_from: Optional[str] = None
    coupling: str = "tanh"
    # overrides the benchmark-wide noise level
    noise: Optional[float] = None

    def __post_init__(self):
        if self.dim <= 0:
            raise SpecError(f"modality '{self.name}': dim must be positive (provided {self.dim})")
        if self.informativeness < 0:
            raise SpecError(f"modality '{self.name}': informativeness must be >= 0 (provided {self.informativeness})")
        if self.scale <= 0:
            raise SpecError(f"modality '{self.name}': scale must be positive (provided {self.scale})")
        if self.noise is not None and self.noise < 0:
            raise SpecError(f"modality '{self.name}': noise must be >= 0 (provided {self.noise})")
        if self.coupling not in COUPLINGS:
            raise SpecError(f"modality '{self.name}': unknown coupling '{self.coupling}', choose from {sorted(COUPLINGS)}")
        if not isinstance(self.translation, (int, float)) and len(self.translation) != self.dim:
            raise SpecError(f"modality '{self.name}': translation vector needs {self.dim} entries")

    def translation_vector(self) -> np.ndarray:
        if isinstance(self.translation, (int, float)):
            return np.full(self.dim, float(self.translation) / np.sqrt(self.dim))
        return np.asarray(self.translation, dtype=np.float64)


@dataclass(frozen=True)
class BenchmarkSpec:
    name: str = "blobs-mm2"
    n_classes: int = 4
    modalities: Tuple[ModalityBenchmark, ...] = field(default_factory=tuple)
    noise: float = 1.0
    n_source: int = 400
    n_target: int = 400
    seed: int = 0

    def __post_init__(self):
        if self.n_classes < 2:
            raise SpecError(f"n_classes must be at least 2 (provided {self.n_classes})")
        if self.n_source <= 0 or self.n_target <= 0:
            raise SpecError(f"n_source and n_target must be positive (provided {self.n_source}, {self.n_target})")
        if self.noise < 0:
            raise SpecError(f"noise must be >= 0 (provided {self.noise})")
        if not self.modalities:
            raise SpecError("modalities: at least one modality is required")
        names = [m.name for m in self.modalities]
        if len(set(names)) != len(names):
            raise SpecError(f"modalities: duplicate names {names}")
        for m in self.modalities:
            if m.derived_from is not None:
                base = next((b for b in self.modalities if b.name == m.derived_from), None)
                if base is None or base.derived_from is not None:
                    raise SpecError(f"modality '{m.name}': derived_from must name a base modality (provided {m.derived_from})")

    @classmethod
    def from_dict(cls, conf: dict) -> "BenchmarkSpec":
        conf = dict(conf)
        known = {f.name for f in fields(cls)}
        unknown = set(conf) - known
        if unknown:
            raise SpecError(f"unknown benchmark keys: {sorted(unknown)}")
        modality_keys = {f.name for f in fields(ModalityBenchmark)}
        modalities = []
        for entry in conf.pop("modalities", []) or []:
            bad = set(entry) - modality_keys
            if bad:
                raise SpecError(f"unknown modality keys: {sorted(bad)}")
            entry = dict(entry)
            if isinstance(entry.get("translation"), list):
                entry["translation"] = tuple(entry["translation"])
            try:
                modalities.append(ModalityBenchmark(**entry))
            except TypeError as err:
                raise SpecError(f"modality entry {entry}: {err}") from err
        try:
            return cls(modalities=tuple(modalities), **conf)
        except TypeError as err:
            raise SpecError(str(err)) from err

    def dim(self, name: str) -> int:
        for m in self.modalities:
            if m.name == name:
                return m.dim
        raise SpecError(f"unknown modality '{name}'")

    def to_dict(self) -> dict:
        out = asdict(self)
        for m in out["modalities"]:
            if isinstance(m["translation"], tuple):
                m["translation"] = list(m["translation"])
        return out


def blobs_mm2(seed: int = 0) -> BenchmarkSpec:
    """Default two-modality benchmark: A the stronger modality, B weaker and derivable from A."""
    return BenchmarkSpec(
        name="blobs-mm2", n_classes=4, noise=1.0, n_source=400, n_target=400, seed=seed,
        modalities=(
            ModalityBenchmark("A", dim=8, informativeness=2.5, rotation_deg=35.0, translation=1.5),
            ModalityBenchmark("B", dim=8, informativeness=1.3, rotation_deg=35.0, translation=1.5,
                              derived_from="A", coupling="tanh", noise=0.25),
        ))


def rotation_matrix(dim: int, degrees: float) -> np.ndarray:
    """Block-diagonal rotation by ``degrees`` in the planes (0,1), (2,3), ..."""
    theta = np.deg2rad(degrees)
    c, s = np.cos(theta), np.sin(theta)
    R = np.eye(dim)
    for k in range(0, dim - 1, 2):
        R[k, k], R[k, k + 1] = c, -s
        R[k + 1, k], R[k + 1, k + 1] = s, c
    return R


def apply_shift(x: np.ndarray, modality: ModalityBenchmark) -> np.ndarray:
    R = rotation_matrix(modality.dim, modality.rotation_deg)
    return modality.scale * (x @ R.T) + modality.translation_vector()


def _balanced_labels(rng: np.random.Generator, n: int, n_classes: int) -> np.ndarray:
    return rng.permutation(np.arange(n) % n_classes)


def generate_benchmark(spec: BenchmarkSpec) -> MultiModalDataset:
    rng = np.random.default_rng(spec.seed)
    n_classes = spec.n_classes

    means, couplings = {}, {}
    for m in spec.modalities:
        directions = rng.normal(size=(n_classes, m.dim))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        means[m.name] = m.informativeness * directions
    for m in spec.modalities:
        if m.derived_from is not None:
            base_dim = spec.dim(m.derived_from)
            # the coupling only reads the base modality off its class-mean subspace, so the
            # derived modality gets no category signal beyond its own offsets
            q, _ = np.linalg.qr(rng.normal(size=(base_dim, n_classes)) if not means[m.derived_from].any()
                                else means[m.derived_from].T)
            complement = np.eye(base_dim) - q @ q.T
            couplings[m.name] = rng.normal(size=(m.dim, base_dim)) / np.sqrt(base_dim) @ complement

    def noise(m: ModalityBenchmark) -> float:
        return spec.noise if m.noise is None else m.noise

    base = [m for m in spec.modalities if m.derived_from is None]
    derived = [m for m in spec.modalities if m.derived_from is not None]

    def draw(n: int) -> Tuple[np.ndarray, dict]:
        labels = _balanced_labels(rng, n, n_classes)
        payloads = {}
        for m in base:
            payloads[m.name] = means[m.name][labels] + noise(m) * rng.normal(size=(n, m.dim))
        for m in derived:
            mapped = COUPLINGS[m.coupling](payloads[m.derived_from] @ couplings[m.name].T)
            payloads[m.name] = mapped + means[m.name][labels] + noise(m) * rng.normal(size=(n, m.dim))
        return labels, payloads

    source_labels, source_payloads = draw(spec.n_source)
    target_labels, canonical = draw(spec.n_target)
    target_payloads = {m.name: apply_shift(canonical[m.name], m) for m in spec.modalities}

    schema = DatasetSchema(tuple(ModalitySchema(m.name, m.dim) for m in spec.modalities), n_classes)
    source_ids = np.arange(spec.n_source, dtype=np.int64)
    target_ids = np.arange(spec.n_source, spec.n_source + spec.n_target, dtype=np.int64)
    logger.debug("generated benchmark %s: %d source / %d target samples", spec.name, spec.n_source, spec.n_target)
    return MultiModalDataset(
        schema=schema,
        source=DomainSplit(source_ids, source_payloads, source_labels),
        target=DomainSplit(target_ids, target_payloads),
        hidden=HiddenTruth(target_ids, target_labels),
    )


def summarize_spec(spec: BenchmarkSpec) -> list:
    """Rows (modality, dim, informativeness, rotation, |translation|, scale, derived_from) for display."""
    return [[m.name, m.dim, m.informativeness, m.rotation_deg,
             round(float(np.linalg.norm(m.translation_vector())), 4), m.scale, m.derived_from or "-"]
            for m in spec.modalities]
