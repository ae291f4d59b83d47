"""Tab-separated audit trail of every selected pseudo label."""
import os
from typing import Iterable

import pandas as pd

from pmc.selection.selector import SelectionSet
from pmc.utils import PathLike

AUDIT_COLUMNS = ["epoch", "origin", "id", "label", "weight", "confidence"]


def audit_frame(epoch: int, selections: Iterable[SelectionSet]) -> pd.DataFrame:
    rows = [[epoch, e.origin, e.id, e.label, e.weight, e.confidence] for s in selections for e in s]
    return pd.DataFrame(rows, columns=AUDIT_COLUMNS)


def append_audit(path: PathLike, epoch: int, selections: Iterable[SelectionSet]) -> PathLike:
    frame = audit_frame(epoch, selections)
    frame.to_csv(path, sep="\t", index=False, mode="a", header=not os.path.exists(path))
    return path
