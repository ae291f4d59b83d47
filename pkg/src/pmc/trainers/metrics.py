"""Per-epoch training records.

Column names: ``src_<m>`` / ``tgt_<m>`` are source and hidden-label target
accuracies per modality (``fused`` for the late-fusion prediction), ``r_<m>``
the selection proportions, ``n_<origin>`` the number of selected samples and
``prec_<origin>`` the share of those whose pseudo label matches the hidden
target label (``nan`` when nothing was selected or no labels are held).
"""
import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence

import pandas as pd

from pmc.errors import StateError
from pmc.synthdata import FUSED
from pmc.utils import PathLike, atomic_path, atomic_write_text

PHASES = ("warmup", "warmup-generated", "cooperation")


@dataclass
class RunMetrics:
    modalities: Sequence[str]
    rows: List[dict] = field(default_factory=list)
    summary: Dict[str, float] = field(default_factory=dict)

    def record(self, phase: str, source: Mapping[str, float], target: Optional[Mapping[str, float]] = None,
               ratios: Optional[Mapping[str, float]] = None, counts: Optional[Mapping[str, int]] = None,
               precision: Optional[Mapping[str, float]] = None) -> dict:
        if phase not in PHASES:
            raise StateError(f"unknown training phase '{phase}'")
        streams = list(self.modalities) + [FUSED]
        row = {"epoch": len(self.rows), "phase": phase}
        for prefix, values in (("src", source), ("tgt", target or {}), ("r", ratios or {}),
                               ("prec", precision or {})):
            for s in streams:
                value = values.get(s, math.nan)
                if prefix != "r" and not math.isnan(value) and not 0.0 <= value <= 1.0:
                    raise StateError(f"{prefix}_{s}={value} outside [0, 1]")
                row[f"{prefix}_{s}"] = float(value)
        for s in streams:
            row[f"n_{s}"] = int((counts or {}).get(s, 0))
        self.rows.append(row)
        return row

    def to_frame(self) -> pd.DataFrame:
        columns = ["epoch", "phase"] + [f"{p}_{s}" for p in ("src", "tgt", "r", "n", "prec")
                                        for s in list(self.modalities) + [FUSED]]
        return pd.DataFrame(self.rows, columns=columns)

    @property
    def final_target_accuracy(self) -> float:
        return self.summary.get(f"tgt_{FUSED}", math.nan)

    def save(self, path: PathLike, summary_path: PathLike = None):
        """Write the epoch table (tab-separated) and, optionally, the summary as JSON."""
        with atomic_path(path) as tmp_path:
            self.to_frame().to_csv(tmp_path, sep="\t", index=False)
        if summary_path is not None:
            atomic_write_text(summary_path, json.dumps(self.summary, indent=2, sort_keys=True))
        return path

    @classmethod
    def load(cls, path: PathLike, summary_path: PathLike = None) -> "RunMetrics":
        frame = pd.read_csv(path, sep="\t")
        modalities = [c[len("src_"):] for c in frame.columns if c.startswith("src_") and c != f"src_{FUSED}"]
        rows = frame.to_dict(orient="records")
        summary = {}
        if summary_path is not None:
            with open(summary_path) as in_IO:
                summary = json.load(in_IO)
        return cls(modalities, rows, summary)
