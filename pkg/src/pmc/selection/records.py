"""Pseudo-labeled target records: per-modality and fused predictions with their weights."""
from dataclasses import dataclass
from typing import Dict, List, Mapping, Sequence

import numpy as np

from pmc.errors import ArgumentError, ModalityError
from pmc.models.branches import predict

FUSED_WEIGHTS = ("mean_max", "mean_at_fused")


@dataclass(frozen=True, eq=False)
class PseudoRecord:
    id: int
    probs: Mapping[str, np.ndarray]
    labels: Mapping[str, int]
    confidences: Mapping[str, float]
    fused: np.ndarray
    fused_label: int
    fused_confidence: float
    # w^m; equal to the confidences
    weights: Mapping[str, float]
    fused_weight: float


def late_fusion(probs: Sequence[np.ndarray]) -> np.ndarray:
    """Mean of per-modality probability vectors (rows are samples)."""
    return np.mean(np.stack(probs), axis=0)


def records_from_probs(ids, probs: Mapping[str, np.ndarray], fused_weight: str = "mean_max") -> List[PseudoRecord]:
    """Build records from per-modality probability rows aligned with ``ids``.

    Rows are rescaled onto the simplex first, so scores that are proportional
    to probabilities give the same records. ``fused_weight`` picks ``w^0``:
    ``mean_max`` averages the per-modality confidences ``w^m``;
    ``mean_at_fused`` averages each modality's probability at the fused label
    instead.
    """
    if fused_weight not in FUSED_WEIGHTS:
        raise ArgumentError(f"fused_weight must be one of {FUSED_WEIGHTS} (provided '{fused_weight}')")
    if not probs:
        raise ModalityError("pseudo records need at least one modality")
    ids = np.asarray(ids, dtype=np.int64)
    names = list(probs)
    stacked = {m: np.atleast_2d(np.asarray(probs[m], dtype=np.float64)) for m in names}
    for m, p in stacked.items():
        if len(p) != len(ids):
            raise ArgumentError(f"modality '{m}': {len(p)} probability rows for {len(ids)} samples")
        if not np.isfinite(p).all() or (p < 0).any():
            raise ArgumentError(f"modality '{m}': probability vectors must be finite and non-negative")
        totals = p.sum(axis=1, keepdims=True)
        if (totals <= 0).any():
            raise ArgumentError(f"modality '{m}': probability vectors must have positive mass")
        stacked[m] = p / totals

    fused = late_fusion([stacked[m] for m in names])
    fused_labels = fused.argmax(axis=1)
    rows = np.arange(len(ids))
    labels = {m: stacked[m].argmax(axis=1) for m in names}
    confidences = {m: stacked[m][rows, labels[m]] for m in names}
    if fused_weight == "mean_max":
        w0 = np.mean([confidences[m] for m in names], axis=0)
    else:
        w0 = np.mean([stacked[m][rows, fused_labels] for m in names], axis=0)

    records = []
    for i, sid in enumerate(ids):
        conf = {m: float(confidences[m][i]) for m in names}
        records.append(PseudoRecord(
            id=int(sid),
            probs={m: stacked[m][i] for m in names},
            labels={m: int(labels[m][i]) for m in names},
            confidences=conf,
            fused=fused[i],
            fused_label=int(fused_labels[i]),
            fused_confidence=float(fused[i, fused_labels[i]]),
            weights=dict(conf),
            fused_weight=float(w0[i]),
        ))
    return records


def make_pseudo_records(ensemble, ids, payloads: Mapping[str, np.ndarray], fused_weight: str = "mean_max",
                        modalities: Sequence[str] = None) -> List[PseudoRecord]:
    """Predict every target sample with every branch of ``ensemble`` and build its record."""
    names = tuple(modalities) if modalities is not None else ensemble.modalities
    lacking = [m for m in names if m not in payloads]
    if lacking:
        raise ModalityError(f"target samples lack payloads for {lacking}")
    probs: Dict[str, np.ndarray] = {m: predict(ensemble.branches[m], payloads[m]) for m in names}
    return records_from_probs(ids, probs, fused_weight)
