"""Self-paced proportion schedule.

Each score stream (one per modality plus the fused stream) keeps its source
accuracy history ``A_1..A_e`` and running means ``Ā_i``. Epoch ``i`` votes
``η_i = -1`` when both ``A_i < Ā_i`` and ``A_{i-1} < Ā_{i-1}``, else ``+1``; the
first two epochs always vote ``+1``. The proportion is ``r = clamp(Σ η_i / E, 0, 1)``.
"""
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, Iterable, List

from pmc.errors import ArgumentError, ScheduleOverflowError

logger = logging.getLogger(__name__)

# absorbs representation error in r * n so exact fractions are not floored one short
COUNT_TOLERANCE = 1e-9


def selection_count(ratio: float, n: int) -> int:
    """``floor(ratio * n)``; a product within ``COUNT_TOLERANCE`` below an integer counts as that integer."""
    if not 0.0 <= ratio <= 1.0:
        raise ArgumentError(f"selection ratio must lie in [0, 1] (provided {ratio})")
    return min(n, int(math.floor(ratio * n + COUNT_TOLERANCE)))


@dataclass
class StreamSchedule:
    accuracies: List[float] = field(default_factory=list)
    running_means: List[float] = field(default_factory=list)
    etas: List[int] = field(default_factory=list)

    def push(self, accuracy: float) -> int:
        self.accuracies.append(float(accuracy))
        self.running_means.append(math.fsum(self.accuracies) / len(self.accuracies))
        i = len(self.accuracies)
        eta = 1
        if i > 2:
            dropping_now = self.accuracies[-1] < self.running_means[-1]
            dropping_before = self.accuracies[-2] < self.running_means[-2]
            eta = -1 if dropping_now and dropping_before else 1
        self.etas.append(eta)
        return eta

    def ratio(self, total_epochs: int) -> float:
        return min(1.0, max(0.0, sum(self.etas) / total_epochs))

    @property
    def epochs(self) -> int:
        return len(self.accuracies)


@dataclass
class CurriculumState:
    total_epochs: int
    streams: Dict[str, StreamSchedule] = field(default_factory=dict)
    alpha: float = 1.0

    def __post_init__(self):
        if self.total_epochs < 1:
            raise ArgumentError(f"total_epochs must be >= 1 (provided {self.total_epochs})")
        if self.alpha <= 0:
            raise ArgumentError(f"alpha must be positive (provided {self.alpha})")

    @classmethod
    def for_streams(cls, names: Iterable[str], total_epochs: int, alpha: float = 1.0) -> "CurriculumState":
        return cls(total_epochs, {n: StreamSchedule() for n in names}, alpha)

    def ratio(self, stream: str) -> float:
        return self.streams[stream].ratio(self.total_epochs)


def scaled_ratio(ratio: float, alpha: float) -> float:
    """``min(alpha * r, 1)``; the scale only applies to the modality-integrated stream."""
    if alpha <= 0:
        raise ArgumentError(f"alpha must be positive (provided {alpha})")
    if not 0.0 <= ratio <= 1.0:
        raise ArgumentError(f"selection ratio must lie in [0, 1] (provided {ratio})")
    raw = alpha * ratio
    if raw > 1.0:
        warnings.warn(f"alpha={alpha} pushes the integrated proportion to {raw:.3f}; capped at 1")
    return min(raw, 1.0)


def update_proportion(state: CurriculumState, accuracy: float, stream: str) -> float:
    """Record the epoch's source accuracy for ``stream`` and return the new proportion."""
    schedule = state.streams.setdefault(stream, StreamSchedule())
    if schedule.epochs >= state.total_epochs:
        raise ScheduleOverflowError(f"stream '{stream}' already holds {schedule.epochs} of "
                                    f"{state.total_epochs} epochs")
    if not 0.0 <= accuracy <= 1.0:
        raise ArgumentError(f"accuracy must lie in [0, 1] (provided {accuracy})")
    schedule.push(accuracy)
    r = schedule.ratio(state.total_epochs)
    logger.debug("stream %s epoch %d: A=%.4f mean=%.4f eta=%+d r=%.4f", stream, schedule.epochs, accuracy,
                  schedule.running_means[-1], schedule.etas[-1], r)
    return r
