"""Multi-modality dataset containers.

Source samples carry labels. Target samples never do: their ground truth lives
in a separate :class:`HiddenTruth` object that only the evaluation code reads.
"""
from dataclasses import dataclass, field, replace
from typing import Dict, Iterator, List, Mapping, Optional, Tuple

import numpy as np

from pmc.errors import DatasetError, IdempotenceError, SchemaError

SOURCE, TARGET = 0, 1
FUSED = "fused"


@dataclass(frozen=True)
class ModalitySchema:
    name: str
    dim: int


@dataclass(frozen=True)
class DatasetSchema:
    modalities: Tuple[ModalitySchema, ...]
    n_classes: int
    # modalities absent from every target sample (MMDA-PI)
    missing: Tuple[str, ...] = ()

    def __post_init__(self):
        names = [m.name for m in self.modalities]
        if not names:
            raise SchemaError("a dataset needs at least one modality")
        if len(set(names)) != len(names):
            raise SchemaError(f"duplicate modality names: {names}")
        if FUSED in names:
            raise SchemaError(f"'{FUSED}' is reserved and cannot name a modality")
        if any(m.dim <= 0 for m in self.modalities):
            raise SchemaError(f"modality dims must be positive: {[(m.name, m.dim) for m in self.modalities]}")
        if self.n_classes < 2:
            raise SchemaError(f"n_classes must be at least 2 (provided {self.n_classes})")
        unknown = set(self.missing) - set(names)
        if unknown:
            raise SchemaError(f"missing modalities {sorted(unknown)} are not in the schema")

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(m.name for m in self.modalities)

    @property
    def target_names(self) -> Tuple[str, ...]:
        return tuple(n for n in self.names if n not in self.missing)

    def dim(self, name: str) -> int:
        for m in self.modalities:
            if m.name == name:
                return m.dim
        raise SchemaError(f"unknown modality '{name}' (schema has {self.names})")


@dataclass(frozen=True, eq=False)
class DomainSplit:
    ids: np.ndarray
    payloads: Mapping[str, np.ndarray]
    labels: Optional[np.ndarray] = None

    def __len__(self):
        return len(self.ids)


@dataclass(frozen=True, eq=False)
class HiddenTruth:
    """Target ground truth: labels, plus payloads removed by :func:`drop_modality`."""
    ids: np.ndarray
    labels: np.ndarray
    payloads: Mapping[str, np.ndarray] = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class Sample:
    id: int
    domain: int
    category: Optional[int]
    payloads: Mapping[str, np.ndarray]


@dataclass(frozen=True, eq=False)
class MultiModalDataset:
    schema: DatasetSchema
    source: DomainSplit
    target: DomainSplit
    hidden: Optional[HiddenTruth] = None

    def __post_init__(self):
        check_schema(self)

    @property
    def n_source(self) -> int:
        return len(self.source)

    @property
    def n_target(self) -> int:
        return len(self.target)

    @property
    def n(self) -> int:
        return self.n_source + self.n_target

    def samples(self) -> List[Sample]:
        return list(self.iter_samples())

    def iter_samples(self) -> Iterator[Sample]:
        for i, sid in enumerate(self.source.ids):
            yield Sample(int(sid), SOURCE, int(self.source.labels[i]),
                         {m: x[i] for m, x in self.source.payloads.items()})
        for i, sid in enumerate(self.target.ids):
            yield Sample(int(sid), TARGET, None, {m: x[i] for m, x in self.target.payloads.items()})


def check_schema(ds: MultiModalDataset):
    schema = ds.schema
    for split_name, split, expected in (("source", ds.source, schema.names),
                                        ("target", ds.target, schema.target_names)):
        n = len(split.ids)
        if set(split.payloads) != set(expected):
            raise SchemaError(f"{split_name} payloads {sorted(split.payloads)} do not match expected modalities {sorted(expected)}")
        for name, x in split.payloads.items():
            if x.shape != (n, schema.dim(name)):
                raise SchemaError(f"{split_name} payload '{name}' has shape {x.shape}, expected {(n, schema.dim(name))}")
    if ds.source.labels is None or ds.source.labels.shape != ds.source.ids.shape:
        raise SchemaError("every source sample needs a category label")
    if len(ds.source) and (ds.source.labels.min() < 0 or ds.source.labels.max() >= schema.n_classes):
        raise SchemaError(f"source labels must lie in [0, {schema.n_classes})")
    if ds.target.labels is not None:
        raise SchemaError("target samples must not carry labels; ground truth belongs in HiddenTruth")
    all_ids = np.concatenate([ds.source.ids, ds.target.ids])
    if len(np.unique(all_ids)) != len(all_ids):
        raise SchemaError("sample ids must be unique")
    if ds.hidden is not None and not np.array_equal(ds.hidden.ids, ds.target.ids):
        raise SchemaError("hidden truth is not aligned with the target split")


def drop_modality(ds: MultiModalDataset, modality: str) -> MultiModalDataset:
    """Remove ``modality`` from every target sample (the payload moves to the hidden truth)."""
    ds.schema.dim(modality)
    if modality in ds.schema.missing:
        raise IdempotenceError(f"modality '{modality}' is already missing from the target domain")
    if len(ds.schema.target_names) == 1:
        raise DatasetError(f"dropping '{modality}' would leave the target domain without any modality")

    target_payloads = {m: x for m, x in ds.target.payloads.items() if m != modality}
    hidden = ds.hidden
    if hidden is not None:
        hidden_payloads: Dict[str, np.ndarray] = dict(hidden.payloads)
        hidden_payloads[modality] = ds.target.payloads[modality]
        hidden = replace(hidden, payloads=hidden_payloads)
    return replace(ds,
                   schema=replace(ds.schema, missing=ds.schema.missing + (modality,)),
                   target=replace(ds.target, payloads=target_payloads),
                   hidden=hidden)


def with_target_payload(ds: MultiModalDataset, modality: str, values: np.ndarray) -> MultiModalDataset:
    """Fill a missing target modality, e.g. with generated payloads."""
    if modality not in ds.schema.missing:
        raise SchemaError(f"modality '{modality}' is not missing from the target domain")
    payloads = dict(ds.target.payloads)
    payloads[modality] = np.asarray(values, dtype=np.float64)
    missing = tuple(m for m in ds.schema.missing if m != modality)
    return replace(ds, schema=replace(ds.schema, missing=missing), target=replace(ds.target, payloads=payloads))
