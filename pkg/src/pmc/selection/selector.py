"""Top-confidence selection of pseudo-labeled target samples.

Modality-specific selection ranks records by one modality's confidence and
labels them with that modality's pseudo label; modality-integrated selection
ranks by the fused confidence and uses the fused label. Both keep exactly
``floor(r * N)`` records, ties broken by ascending sample id.
"""
from dataclasses import dataclass, field
from typing import Iterator, List, Sequence, Tuple

import numpy as np

from pmc.errors import ArgumentError, ModalityError
from pmc.selection.curriculum import scaled_ratio, selection_count
from pmc.selection.records import PseudoRecord

MIS = "MIS"


def mss_origin(modality: str) -> str:
    return f"MSS:{modality}"


@dataclass(frozen=True)
class SelectionEntry:
    id: int
    label: int
    weight: float
    origin: str
    confidence: float


@dataclass
class SelectionSet:
    entries: List[SelectionEntry] = field(default_factory=list)

    def __post_init__(self):
        keys = [(e.id, e.origin) for e in self.entries]
        if len(set(keys)) != len(keys):
            raise ArgumentError("a selection set may not hold the same sample twice for one origin")
        bad = [e for e in self.entries if not 0.0 < e.weight <= 1.0]
        if bad:
            raise ArgumentError(f"selection weights must lie in (0, 1] (sample {bad[0].id} has {bad[0].weight})")

    def __len__(self):
        return len(self.entries)

    def __iter__(self) -> Iterator[SelectionEntry]:
        return iter(self.entries)

    @property
    def ids(self) -> List[int]:
        return [e.id for e in self.entries]

    def contains(self, sample_id: int, origin: str) -> bool:
        return any(e.id == sample_id and e.origin == origin for e in self.entries)

    def count(self, origin: str) -> int:
        return sum(e.origin == origin for e in self.entries)


def rank_by_confidence(ids: np.ndarray, confidences: np.ndarray) -> np.ndarray:
    """Positions sorted by descending confidence, ascending id on ties."""
    return np.lexsort((ids, -confidences))


def _top(records: Sequence[PseudoRecord], ratio: float, key) -> List[Tuple[PseudoRecord, float]]:
    n = selection_count(ratio, len(records))
    if n == 0:
        return []
    ids = np.array([r.id for r in records], dtype=np.int64)
    scores = np.array([key(r) for r in records], dtype=np.float64)
    order = rank_by_confidence(ids, scores)[:n]
    return [(records[i], float(scores[i])) for i in order]


def mss_select(records: Sequence[PseudoRecord], modality: str, ratio: float) -> SelectionSet:
    if records and modality not in records[0].confidences:
        raise ModalityError(f"records carry no predictions for modality '{modality}'")
    chosen = _top(records, ratio, lambda r: r.confidences[modality])
    return SelectionSet([SelectionEntry(r.id, r.labels[modality], r.weights[modality], mss_origin(modality), c)
                         for r, c in chosen])


def mis_select(records: Sequence[PseudoRecord], ratio: float, alpha: float = 1.0) -> SelectionSet:
    """Select by fused confidence with the proportion scaled by ``alpha`` and capped at 1."""
    chosen = _top(records, scaled_ratio(ratio, alpha), lambda r: r.fused_confidence)
    return SelectionSet([SelectionEntry(r.id, r.fused_label, r.fused_weight, MIS, c) for r, c in chosen])
