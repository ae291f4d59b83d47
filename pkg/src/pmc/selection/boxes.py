"""Detection-mode selection over scored boxes: greedy per-frame NMS, then top-r selection."""
from dataclasses import dataclass, field, replace
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np

from pmc.errors import ArgumentError, BoxError, ModalityError
from pmc.selection.curriculum import selection_count
from pmc.selection.selector import MIS, SelectionEntry, SelectionSet, mss_origin
from pmc.selection.records import late_fusion


@dataclass(frozen=True, eq=False)
class ScoredBox:
    id: int
    frame: int
    x1: float
    y1: float
    x2: float
    y2: float
    probs: np.ndarray
    # per-modality probability vectors for this box, needed by the integrated mode
    modality_probs: Mapping[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if not (np.isfinite([self.x1, self.y1, self.x2, self.y2]).all() and self.x1 < self.x2 and self.y1 < self.y2):
            raise BoxError(f"box {self.id}: invalid geometry ({self.x1}, {self.y1}, {self.x2}, {self.y2})")
        p = np.asarray(self.probs, dtype=np.float64)
        if p.ndim != 1 or (p < 0).any() or not np.isclose(p.sum(), 1.0, atol=1e-6):
            raise BoxError(f"box {self.id}: scores must form a probability vector")

    @property
    def label(self) -> int:
        return int(np.argmax(self.probs))

    @property
    def confidence(self) -> float:
        return float(np.max(self.probs))

    @property
    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)

    def order_key(self) -> Tuple:
        return (-self.confidence, self.frame, self.x1, self.y1, self.x2, self.y2, self.label, self.id)


def iou(a: ScoredBox, b: ScoredBox) -> float:
    w = min(a.x2, b.x2) - max(a.x1, b.x1)
    h = min(a.y2, b.y2) - max(a.y1, b.y1)
    if w <= 0 or h <= 0:
        return 0.0
    inter = w * h
    return inter / (a.area + b.area - inter)


def nms(boxes: Sequence[ScoredBox], iou_threshold: float = 0.5) -> List[ScoredBox]:
    """Greedy suppression within each frame; a box is dropped when IoU >= threshold with a kept box.

    The result is ordered by descending confidence and does not depend on the
    order of ``boxes``.
    """
    if not 0.0 < iou_threshold < 1.0:
        raise ArgumentError(f"IoU threshold must lie in (0, 1) (provided {iou_threshold})")
    kept_per_frame: Dict[int, List[ScoredBox]] = {}
    kept = []
    for box in sorted(boxes, key=ScoredBox.order_key):
        frame_kept = kept_per_frame.setdefault(box.frame, [])
        if all(iou(box, other) < iou_threshold for other in frame_kept):
            frame_kept.append(box)
            kept.append(box)
    return kept


def _top_boxes(boxes: Sequence[ScoredBox], ratio: float) -> List[ScoredBox]:
    n = selection_count(ratio, len(boxes))
    return sorted(boxes, key=lambda b: (-b.confidence, b.id))[:n]


def select_boxes(mode: str, boxes: Mapping[str, Sequence[ScoredBox]], ratio: float,
                 iou_threshold: float = 0.5) -> SelectionSet:
    """Pick pseudo-labeled boxes.

    ``mode`` is ``"MSS:<modality>"`` or ``"MIS"``. In the modality-specific mode
    only that modality's detections are suppressed and ranked. In the integrated
    mode all detections are pooled and suppressed together, then every surviving
    box is rescored with the mean of its per-modality probability vectors.
    """
    if mode == MIS:
        pooled = [b for m in boxes for b in boxes[m]]
        survivors = nms(pooled, iou_threshold)
        names = list(boxes)
        fused = []
        for b in survivors:
            lacking = [m for m in names if m not in b.modality_probs]
            if lacking:
                raise ModalityError(f"box {b.id} has no scores from {lacking}")
            probs = late_fusion([np.asarray(b.modality_probs[m], dtype=np.float64) for m in names])
            fused.append(replace(b, probs=probs))
        chosen = _top_boxes(fused, ratio)
        return SelectionSet([SelectionEntry(b.id, b.label, b.confidence, MIS, b.confidence) for b in chosen])

    prefix = mss_origin("")
    if not mode.startswith(prefix):
        raise ArgumentError(f"mode must be '{MIS}' or '{prefix}<modality>' (provided '{mode}')")
    modality = mode[len(prefix):]
    if modality not in boxes:
        raise ModalityError(f"no detections for modality '{modality}'")
    chosen = _top_boxes(nms(boxes[modality], iou_threshold), ratio)
    return SelectionSet([SelectionEntry(b.id, b.label, b.confidence, mode, b.confidence) for b in chosen])
