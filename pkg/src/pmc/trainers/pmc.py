"""Progressive modality cooperation over fully observed modalities.

After a domain-adversarial warmup, every cooperation round predicts the target
set with each branch and with their late fusion, updates the self-paced
proportions from source accuracy, selects modality-specific and
modality-integrated pseudo labels, and retrains every branch on
``L_src + L_tar + L_adv`` for one pass.
"""
import logging
import math
from dataclasses import replace
from typing import Dict, Mapping, Sequence, Tuple

import numpy as np

from pmc.errors import DatasetError, ModalityError, SelectionError
from pmc.models import BranchEnsemble, ModalityBranch, PseudoTargets, predict, train_epoch
from pmc.nncore import backward, forward, softmax_xent_batch
from pmc.selection import (MIS, CurriculumState, PseudoRecord, SelectionSet, append_audit, late_fusion,
                           make_pseudo_records, mis_select, mss_select, update_proportion)
from pmc.synthdata import FUSED, MultiModalDataset, Sample
from pmc.trainers.config import TrainConfig
from pmc.trainers.metrics import RunMetrics
from pmc.utils import PathLike

logger = logging.getLogger(__name__)


def pseudo_targets(target_ids: np.ndarray, selections: Sequence[SelectionSet]) -> PseudoTargets:
    """Scatter selection entries onto target-split positions.

    Entries of MSS origin fill the modality-specific term, entries of MIS origin
    the modality-integrated term.
    """
    position = {int(sid): i for i, sid in enumerate(target_ids)}
    targets = PseudoTargets.empty(len(target_ids))
    for selection in selections:
        for entry in selection:
            if entry.id not in position:
                raise SelectionError(f"selected sample {entry.id} is not in the target split")
            i = position[entry.id]
            if entry.origin == MIS:
                targets.mis_mask[i], targets.mis_labels[i], targets.mis_weights[i] = True, entry.label, entry.weight
            else:
                targets.mss_mask[i], targets.mss_labels[i], targets.mss_weights[i] = True, entry.label, entry.weight
    return targets


def tar_loss(branch: ModalityBranch, mss: SelectionSet, mis: SelectionSet, target_ids, xt):
    """Weighted pseudo-label cross-entropy over the whole target split.

    Normalized by the number of target samples, selected or not. Returns
    ``(loss, feature_grads, classifier_grads)``.
    """
    xt = np.atleast_2d(np.asarray(xt, dtype=np.float64))
    target_ids = np.asarray(target_ids)
    targets = pseudo_targets(target_ids, [mss, mis])
    n = len(target_ids)
    positions, labels, weights = targets.terms(np.arange(n))
    acts_f, h = forward(branch.feature, xt)
    acts_c, logits = forward(branch.classifier, h)
    dlogits = np.zeros_like(logits)
    loss = 0.0
    if len(positions):
        losses, g = softmax_xent_batch(logits[positions], labels, weights)
        np.add.at(dlogits, positions, g / n)
        loss = float(losses.sum() / n)
    grads_c = backward(branch.classifier, acts_c, dlogits)
    grads_f = backward(branch.feature, acts_f, grads_c.input)
    return loss, grads_f.as_list(), grads_c.as_list()


def _payloads_of(sample) -> Mapping[str, np.ndarray]:
    return sample.payloads if isinstance(sample, Sample) else sample


def late_fusion_predict(ensemble: BranchEnsemble, sample, modalities: Sequence[str] = None) -> Tuple[int, np.ndarray]:
    """``(label, fused probability vector)`` for one sample; ties go to the lowest category index."""
    payloads = _payloads_of(sample)
    names = tuple(modalities) if modalities is not None else ensemble.modalities
    lacking = [m for m in names if m not in payloads]
    if lacking:
        raise ModalityError(f"sample lacks payloads for {lacking}")
    fused = late_fusion([predict(ensemble.branches[m], payloads[m]) for m in names])
    return int(np.argmax(fused)), fused


def fused_probs(ensemble: BranchEnsemble, payloads: Mapping[str, np.ndarray], modalities: Sequence[str] = None) -> np.ndarray:
    names = tuple(modalities) if modalities is not None else ensemble.modalities
    lacking = [m for m in names if m not in payloads]
    if lacking:
        raise ModalityError(f"payloads missing for {lacking}")
    return late_fusion([predict(ensemble.branches[m], payloads[m]) for m in names])


def evaluate(ensemble: BranchEnsemble, dataset: MultiModalDataset, split: str = "target",
             modalities: Sequence[str] = None) -> Dict[str, float]:
    """Classification accuracy per modality and of the late fusion (key ``fused``).

    Target accuracy reads the hidden ground truth and is meant for reporting only.
    """
    if split == "source":
        part, labels = dataset.source, dataset.source.labels
    elif split == "target":
        if dataset.hidden is None:
            raise DatasetError("target evaluation needs the hidden ground truth")
        part, labels = dataset.target, dataset.hidden.labels
    else:
        raise DatasetError(f"split must be 'source' or 'target' (provided '{split}')")
    names = tuple(modalities) if modalities is not None else ensemble.modalities
    if len(labels) == 0:
        return {**{m: float("nan") for m in names}, FUSED: float("nan")}
    lacking = [m for m in names if m not in part.payloads]
    if lacking:
        raise ModalityError(f"{split} samples lack payloads for {lacking}")
    probs = {m: predict(ensemble.branches[m], part.payloads[m]) for m in names}
    out = {m: float(np.mean(p.argmax(axis=1) == labels)) for m, p in probs.items()}
    out[FUSED] = float(np.mean(late_fusion(list(probs.values())).argmax(axis=1) == labels))
    return out


class _Monitor:
    """Keeps the hidden-label view apart from the training view."""

    def __init__(self, dataset: MultiModalDataset, metrics: RunMetrics):
        self.hidden = dataset.hidden
        self.metrics = metrics

    def target_accuracy(self, ensemble: BranchEnsemble, view: MultiModalDataset, modalities=None) -> Dict[str, float]:
        if self.hidden is None:
            return {}
        return evaluate(ensemble, replace(view, hidden=self.hidden), "target", modalities)

    def label_precision(self, mss: Mapping[str, SelectionSet], mis: SelectionSet) -> Dict[str, float]:
        """Share of selected pseudo labels that match the hidden target labels, per origin."""
        if self.hidden is None:
            return {}
        truth = dict(zip(self.hidden.ids.tolist(), self.hidden.labels.tolist()))
        precision = {}
        for stream, chosen in list(mss.items()) + [(FUSED, mis)]:
            if len(chosen):
                precision[stream] = float(np.mean([truth[e.id] == e.label for e in chosen]))
        return precision

    def finish(self, ensemble: BranchEnsemble, view: MultiModalDataset, modalities=None):
        summary = {f"src_{k}": v for k, v in evaluate(ensemble, view, "source", modalities).items()}
        summary.update({f"tgt_{k}": v for k, v in self.target_accuracy(ensemble, view, modalities).items()})
        summary["epochs"] = len(self.metrics.rows)
        self.metrics.summary = summary
        logger.info("final accuracies: %s", ", ".join(f"{k}={v:.4f}" for k, v in summary.items() if k != "epochs"))


def _ensemble(view: MultiModalDataset, config: TrainConfig, modalities: Sequence[str] = None) -> BranchEnsemble:
    return BranchEnsemble.create(view, config.seed, modalities, config.trade_off, config.arch(), config.optim_config())


def _log_epoch(phase: str, epoch: int, row: dict, modalities: Sequence[str]):
    parts = [f"A_{m}={row[f'src_{m}']:.4f}" for m in list(modalities) + [FUSED]]
    parts += [f"r_{m}={row[f'r_{m}']:.3f}" for m in list(modalities) + [FUSED] if not math.isnan(row[f"r_{m}"])]
    parts += [f"n_{m}={row[f'n_{m}']}" for m in list(modalities) + [FUSED] if row[f"n_{m}"]]
    parts += [f"prec_{m}={row[f'prec_{m}']:.3f}" for m in list(modalities) + [FUSED]
              if not math.isnan(row.get(f"prec_{m}", math.nan))]
    logger.info("%s epoch %d: %s", phase, epoch, " ".join(parts))


def warmup(ensemble: BranchEnsemble, view: MultiModalDataset, config: TrainConfig, monitor: _Monitor,
           epochs: int, phase: str = "warmup", modalities: Sequence[str] = None):
    """Domain-adversarial training without pseudo labels for ``epochs`` passes."""
    names = tuple(modalities) if modalities is not None else ensemble.modalities
    sub = replace(ensemble, branches={m: ensemble.branches[m] for m in names})
    for e in range(epochs):
        train_epoch(sub, view, e, config.total_epochs, config.batch_size)
        source = evaluate(ensemble, view, "source", names)
        row = monitor.metrics.record(phase, source, monitor.target_accuracy(ensemble, view, names))
        _log_epoch(phase, e, row, names)
    ensemble.epochs_done += epochs


def train_dann(dataset: MultiModalDataset, config: TrainConfig = TrainConfig(),
               modalities: Sequence[str] = None) -> Tuple[BranchEnsemble, RunMetrics]:
    """Domain-adversarial baseline trained for as many epochs as a full cooperation run."""
    view = replace(dataset, hidden=None)
    ensemble = _ensemble(view, config, modalities)
    metrics = RunMetrics(ensemble.modalities)
    monitor = _Monitor(dataset, metrics)
    warmup(ensemble, view, config, monitor, config.total_epochs)
    monitor.finish(ensemble, view)
    return ensemble, metrics


def train_source_only(dataset: MultiModalDataset, config: TrainConfig = TrainConfig(),
                      modalities: Sequence[str] = None) -> Tuple[BranchEnsemble, RunMetrics]:
    """Same loop as :func:`train_dann` with the adversary switched off."""
    return train_dann(dataset, replace(config, trade_off=0.0), modalities)


def select_round(records: Sequence[PseudoRecord], curriculum: CurriculumState, config: TrainConfig,
                 mss_modalities: Sequence[str], use_mis: bool = True) -> Tuple[Dict[str, SelectionSet], SelectionSet]:
    mss = {}
    for m in mss_modalities:
        mss[m] = SelectionSet() if config.disable_mss else mss_select(records, m, curriculum.ratio(m))
    mis = SelectionSet()
    if use_mis and not config.disable_mis:
        mis = mis_select(records, curriculum.ratio(FUSED), curriculum.alpha)
    return mss, mis


def cooperation_round(ensemble: BranchEnsemble, view: MultiModalDataset, config: TrainConfig, monitor: _Monitor,
                      curriculum: CurriculumState, records: Sequence[PseudoRecord], k: int,
                      mss_modalities: Sequence[str] = None, use_mis: bool = True,
                      audit_path: PathLike = None) -> dict:
    """One cooperation round: update proportions, select, retrain every branch for one pass."""
    names = ensemble.modalities
    source = evaluate(ensemble, view, "source")
    ratios = {s: update_proportion(curriculum, source[s], s) for s in list(names) + [FUSED]}
    mss, mis = select_round(records, curriculum, config,
                            names if mss_modalities is None else mss_modalities, use_mis)
    pseudo = {m: pseudo_targets(view.target.ids, [mss.get(m, SelectionSet()), mis]) for m in names}
    if audit_path is not None:
        append_audit(audit_path, config.warmup_epochs + k, list(mss.values()) + [mis])

    train_epoch(ensemble, view, config.warmup_epochs + k, config.total_epochs, config.batch_size, pseudo)
    counts = {m: len(mss.get(m, ())) for m in names}
    counts[FUSED] = mis.count(MIS)
    row = monitor.metrics.record("cooperation", evaluate(ensemble, view, "source"),
                                 monitor.target_accuracy(ensemble, view), ratios, counts,
                                 monitor.label_precision(mss, mis))
    _log_epoch("cooperation", k, row, names)
    return row


def train_pmc(dataset: MultiModalDataset, config: TrainConfig = TrainConfig(),
              audit_path: PathLike = None) -> Tuple[BranchEnsemble, RunMetrics]:
    """Warm up every branch, then run ``config.epochs`` cooperation rounds.

    With both selection modules disabled the parameter trajectory is the one of
    :func:`train_dann` under the same seed.
    """
    if dataset.schema.missing:
        raise ModalityError(f"target samples lack {list(dataset.schema.missing)}; use train_pmc_pi")
    view = replace(dataset, hidden=None)
    ensemble = _ensemble(view, config)
    metrics = RunMetrics(ensemble.modalities)
    monitor = _Monitor(dataset, metrics)
    warmup(ensemble, view, config, monitor, config.warmup_epochs)

    curriculum = CurriculumState.for_streams(list(ensemble.modalities) + [FUSED], config.epochs, config.alpha)
    for k in range(config.epochs):
        records = make_pseudo_records(ensemble, view.target.ids, view.target.payloads, config.fused_weight)
        cooperation_round(ensemble, view, config, monitor, curriculum, records, k, audit_path=audit_path)
    monitor.finish(ensemble, view)
    return ensemble, metrics
