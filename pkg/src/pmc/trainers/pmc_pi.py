"""Cooperation when one modality is only observed on the source side.

A frozen generator fills the missing target modality, conditioned on the
latest fused pseudo-label probabilities, and is re-run after every round so
the generated payloads follow the improving pseudo labels.
"""
import logging
from dataclasses import replace
from typing import Optional, Tuple, Union

import numpy as np

from pmc.errors import StateError, UnsupportedConfigurationError
from pmc.models import BranchEnsemble, MmgModel, OracleGenerator, generate_target, train_mmg_on_dataset
from pmc.selection import CurriculumState, make_pseudo_records
from pmc.synthdata import FUSED, MultiModalDataset, with_target_payload
from pmc.trainers.config import TrainConfig
from pmc.trainers.metrics import RunMetrics
from pmc.trainers.pmc import _ensemble, _Monitor, cooperation_round, fused_probs, warmup
from pmc.utils import PathLike

logger = logging.getLogger(__name__)

Generator = Union[MmgModel, OracleGenerator]


def impute_target(view: MultiModalDataset, generator: Generator, v: np.ndarray) -> MultiModalDataset:
    """``view`` with the generator's payloads filled in for the missing target modality."""
    return with_target_payload(view, generator.missing, generate_target(generator, view, v))


def train_pmc_pi(dataset: MultiModalDataset, config: TrainConfig = TrainConfig(),
                 generator: Optional[Generator] = None,
                 audit_path: PathLike = None) -> Tuple[BranchEnsemble, Generator, RunMetrics]:
    """Train (or take) a frozen generator, then run cooperation over real and generated modalities.

    Round 0 only selects modality-specific pseudo labels from the available
    modalities; later rounds use every branch and the integrated selection.
    """
    missing = dataset.schema.missing
    if len(missing) != 1:
        raise UnsupportedConfigurationError(f"exactly one modality may be missing from the target domain "
                                            f"(found {list(missing)})")
    view = replace(dataset, hidden=None)
    if generator is None:
        generator = train_mmg_on_dataset(view, config.seed, config.mmg_config())
    if not generator.frozen:
        raise StateError("the generator must be frozen before cooperation starts")
    if generator.missing != missing[0]:
        raise StateError(f"generator produces '{generator.missing}' but the target domain lacks '{missing[0]}'")

    available = view.schema.target_names
    ensemble = _ensemble(view, config)
    metrics = RunMetrics(ensemble.modalities)
    monitor = _Monitor(dataset, metrics)
    ids = view.target.ids

    warmup(ensemble, view, config, monitor, config.warmup_epochs, modalities=available)
    records = make_pseudo_records(ensemble, ids, view.target.payloads, config.fused_weight, available)
    augmented = impute_target(view, generator, np.stack([r.fused for r in records]) if records
                              else np.zeros((0, view.schema.n_classes)))
    warmup(ensemble, augmented, config, monitor, config.warmup_epochs, "warmup-generated", missing)

    curriculum = CurriculumState.for_streams(list(ensemble.modalities) + [FUSED], config.epochs, config.alpha)
    for k in range(config.epochs):
        if k > 0:
            records = make_pseudo_records(ensemble, ids, augmented.target.payloads, config.fused_weight)
        cooperation_round(ensemble, augmented, config, monitor, curriculum, records, k,
                          mss_modalities=available if k == 0 else None, use_mis=k > 0, audit_path=audit_path)
        augmented = impute_target(view, generator, fused_probs(ensemble, augmented.target.payloads))
    monitor.finish(ensemble, augmented)
    logger.info("cooperation with generated '%s' finished after %d rounds", missing[0], config.epochs)
    return ensemble, generator, metrics
