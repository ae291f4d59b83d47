"""Per-modality adversarial branches: feature extractor F, classifier C, domain classifier D.

Each branch owns its parameters, its optimizer state and its own shuffling
stream, all seeded from ``(seed, modality name)``, so a branch trains the same
way whatever other modalities sit next to it in the ensemble.
"""
import logging
import zlib
from dataclasses import dataclass
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.special import softmax

from pmc.errors import ArgumentError, BatchError, ContractViolationError, DatasetError, InputShapeError, ModalityError
from pmc.nncore import (DenseNet, OptimConfig, OptimState, adaptation_factor, backward, binary_xent, forward,
                        grl_backward, sgd_step, softmax_xent_batch)
from pmc.synthdata import SOURCE, TARGET, MultiModalDataset

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BranchArch:
    feature_hidden: Tuple[int, ...] = (64,)
    feature_dim: int = 32
    classifier_hidden: Tuple[int, ...] = ()
    domain_hidden: Tuple[int, ...] = (16,)


def branch_seed(seed: int, modality: str) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), zlib.crc32(modality.encode())])


@dataclass
class ModalityBranch:
    modality: str
    feature: DenseNet
    classifier: DenseNet
    domain: DenseNet
    optim: OptimState
    rng: np.random.Generator

    def __post_init__(self):
        if self.feature.output_dim != self.classifier.input_dim or self.feature.output_dim != self.domain.input_dim:
            raise InputShapeError(f"branch '{self.modality}': feature dim {self.feature.output_dim} does not feed "
                                  f"classifier ({self.classifier.input_dim}) / domain classifier ({self.domain.input_dim})")
        if self.domain.output_dim != 1:
            raise InputShapeError(f"branch '{self.modality}': domain classifier must emit one logit")

    @classmethod
    def create(cls, modality: str, in_dim: int, n_classes: int, seed: int,
               arch: BranchArch = BranchArch(), optim_config: OptimConfig = OptimConfig()) -> "ModalityBranch":
        f_seed, c_seed, d_seed, batch_seed = branch_seed(seed, modality).spawn(4)
        feature = DenseNet.initialize((in_dim, *arch.feature_hidden, arch.feature_dim), np.random.default_rng(f_seed))
        classifier = DenseNet.initialize((arch.feature_dim, *arch.classifier_hidden, n_classes), np.random.default_rng(c_seed))
        domain = DenseNet.initialize((arch.feature_dim, *arch.domain_hidden, 1), np.random.default_rng(d_seed))
        n_feature = len(feature.params)
        n_heads = len(classifier.params) + len(domain.params)
        params = feature.params + classifier.params + domain.params
        optim = OptimState.for_params(params, optim_config, [1.0] * n_feature + [optim_config.head_lr_mult] * n_heads)
        return cls(modality, feature, classifier, domain, optim, np.random.default_rng(batch_seed))

    @property
    def n_classes(self) -> int:
        return self.classifier.output_dim

    @property
    def params(self) -> List[np.ndarray]:
        return self.feature.params + self.classifier.params + self.domain.params


@dataclass
class BranchEnsemble:
    branches: Dict[str, ModalityBranch]
    trade_off: float = 0.3
    adaptation_ramp: bool = True
    gamma: float = 10.0
    epochs_done: int = 0

    def __post_init__(self):
        if self.trade_off < 0:
            raise ArgumentError(f"trade_off must be >= 0 (provided {self.trade_off})")

    @classmethod
    def create(cls, dataset: MultiModalDataset, seed: int, modalities: Sequence[str] = None,
               trade_off: float = 0.3, arch: BranchArch = BranchArch(),
               optim_config: OptimConfig = OptimConfig()) -> "BranchEnsemble":
        names = tuple(modalities) if modalities is not None else dataset.schema.names
        branches = {m: ModalityBranch.create(m, dataset.schema.dim(m), dataset.schema.n_classes, seed, arch, optim_config)
                    for m in names}
        return cls(branches, trade_off, optim_config.adaptation_ramp, optim_config.gamma)

    @property
    def modalities(self) -> Tuple[str, ...]:
        return tuple(self.branches)

    def reversal_factor(self, progress: float) -> float:
        """GRL strength ``lambda * q(p)``."""
        if not self.adaptation_ramp:
            return self.trade_off
        return self.trade_off * float(adaptation_factor(progress, self.gamma))


def predict(branch: ModalityBranch, x) -> np.ndarray:
    """Category probabilities ``softmax(C(F(x)))`` for one sample or a batch of rows."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1:] != (branch.feature.input_dim,):
        raise InputShapeError(f"branch '{branch.modality}' expects {branch.feature.input_dim} features, got shape {x.shape}")
    _, h = forward(branch.feature, x)
    _, logits = forward(branch.classifier, h)
    return softmax(logits, axis=-1)


def adv_loss(branch: ModalityBranch, x, domains, factor: float):
    """Mean domain cross-entropy of ``D(F(x))``.

    Returns ``(loss, feature_grads, domain_grads)``; ``feature_grads`` already
    passed through the reversal layer with strength ``factor``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    domains = np.asarray(domains)
    if len(x) == 0:
        raise BatchError("adversarial loss needs a non-empty batch")
    acts_f, h = forward(branch.feature, x)
    acts_d, logits = forward(branch.domain, h)
    losses, g = binary_xent(logits[:, 0], domains)
    n = len(x)
    grads_d = backward(branch.domain, acts_d, g[:, None] / n)
    grads_f = backward(branch.feature, acts_f, grl_backward(grads_d.input, factor))
    return float(losses.sum() / n), grads_f.as_list(), grads_d.as_list()


def src_loss(branch: ModalityBranch, x, labels, domains=None):
    """Mean category cross-entropy over labeled source rows. Returns ``(loss, feature_grads, classifier_grads)``."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    labels = np.asarray(labels)
    if domains is not None and (np.asarray(domains) != SOURCE).any():
        raise ContractViolationError("the source classification loss only accepts source-domain samples")
    if len(x) == 0:
        raise BatchError("source loss needs a non-empty batch")
    acts_f, h = forward(branch.feature, x)
    acts_c, logits = forward(branch.classifier, h)
    n = len(x)
    losses, g = softmax_xent_batch(logits, labels, np.ones(n))
    grads_c = backward(branch.classifier, acts_c, g / n)
    grads_f = backward(branch.feature, acts_f, grads_c.input)
    return float(losses.sum() / n), grads_f.as_list(), grads_c.as_list()


@dataclass
class PseudoTargets:
    """Per-target-sample pseudo-label terms for one branch, aligned with the target split.

    A sample may carry a modality-specific term, a modality-integrated term, or both.
    """
    mss_mask: np.ndarray
    mss_labels: np.ndarray
    mss_weights: np.ndarray
    mis_mask: np.ndarray
    mis_labels: np.ndarray
    mis_weights: np.ndarray

    @classmethod
    def empty(cls, n_target: int) -> "PseudoTargets":
        mask, labels, weights = np.zeros(n_target, bool), np.zeros(n_target, np.int64), np.zeros(n_target)
        return cls(mask, labels, weights, mask.copy(), labels.copy(), weights.copy())

    def terms(self, rows: np.ndarray):
        """``(positions, labels, weights)`` of every active term among ``rows``."""
        mss = np.flatnonzero(self.mss_mask[rows])
        mis = np.flatnonzero(self.mis_mask[rows])
        positions = np.concatenate([mss, mis])
        labels = np.concatenate([self.mss_labels[rows[mss]], self.mis_labels[rows[mis]]])
        weights = np.concatenate([self.mss_weights[rows[mss]], self.mis_weights[rows[mis]]])
        return positions, labels, weights


@dataclass
class StepLosses:
    src: float
    tar: float
    adv: float


def branch_gradients(branch: ModalityBranch, xs: np.ndarray, ys: np.ndarray, xt: np.ndarray, factor: float,
                     pseudo: Optional[Tuple[np.ndarray, np.ndarray, np.ndarray]] = None):
    """Gradients of ``L_src + L_tar + L_adv`` (reversal on the F path) for one mini-batch.

    ``pseudo`` holds ``(positions into xt, labels, weights)``; the target term is
    normalized by the number of target rows in the batch, selected or not.
    Returns ``(grads aligned with branch.params, StepLosses)``.
    """
    ns, nt = len(xs), len(xt)
    if ns == 0:
        raise BatchError(f"branch '{branch.modality}': a training batch needs source samples")
    x = np.vstack([xs, xt]) if nt else xs
    acts_f, h = forward(branch.feature, x)

    acts_c, logits = forward(branch.classifier, h)
    dlogits = np.zeros_like(logits)
    losses, g = softmax_xent_batch(logits[:ns], ys, np.ones(ns))
    dlogits[:ns] = g / ns
    src = losses.sum() / ns
    tar = 0.0
    if pseudo is not None and len(pseudo[0]):
        positions, labels, weights = pseudo
        rows = ns + positions
        losses_t, g_t = softmax_xent_batch(logits[rows], labels, weights)
        np.add.at(dlogits, rows, g_t / nt)
        tar = losses_t.sum() / nt
    grads_c = backward(branch.classifier, acts_c, dlogits)

    acts_d, domain_logits = forward(branch.domain, h)
    domains = np.concatenate([np.full(ns, SOURCE), np.full(nt, TARGET)])
    losses_d, g_d = binary_xent(domain_logits[:, 0], domains)
    n = ns + nt
    grads_d = backward(branch.domain, acts_d, g_d[:, None] / n)

    dh = grads_c.input + grl_backward(grads_d.input, factor)
    grads_f = backward(branch.feature, acts_f, dh)
    grads = grads_f.as_list() + grads_c.as_list() + grads_d.as_list()
    return grads, StepLosses(float(src), float(tar), float(losses_d.sum() / n))


def iterate_batches(rng: np.random.Generator, n_source: int, n_target: int, batch_size: int) -> Iterator[Tuple[np.ndarray, np.ndarray]]:
    """Balanced mini-batches: ``batch_size`` source and ``batch_size`` target indices each.

    The shorter domain is cycled so both are visited at least once per epoch.
    """
    n_batches = batches_per_epoch(n_source, n_target, batch_size)
    total = n_batches * batch_size
    src = np.resize(rng.permutation(n_source), total)
    tgt = np.resize(rng.permutation(n_target), total) if n_target else np.zeros(0, dtype=np.int64)
    for b in range(n_batches):
        sl = slice(b * batch_size, (b + 1) * batch_size)
        yield src[sl], (tgt[sl] if n_target else tgt)


def batches_per_epoch(n_source: int, n_target: int, batch_size: int) -> int:
    return -(-max(n_source, n_target) // batch_size)


def source_accuracy(branch: ModalityBranch, dataset: MultiModalDataset) -> float:
    probs = predict(branch, dataset.source.payloads[branch.modality])
    return float(np.mean(probs.argmax(axis=1) == dataset.source.labels))


def train_epoch(ensemble: BranchEnsemble, dataset: MultiModalDataset, epoch: int, total_epochs: int,
                batch_size: int = 16, pseudo: Mapping[str, PseudoTargets] = None) -> Dict[str, float]:
    """One pass of mini-batch SGD per branch. Returns source accuracy per modality after the pass.

    ``epoch`` counts from 0 over the whole run (``total_epochs`` long) and
    drives the INV learning rate and the reversal ramp.
    """
    if dataset.n_source == 0:
        raise DatasetError("cannot train on a dataset without source samples")
    if not 0 <= epoch < total_epochs:
        raise ArgumentError(f"epoch {epoch} outside a run of {total_epochs} epochs")
    missing = [m for m in ensemble.modalities if m not in dataset.target.payloads]
    if missing:
        raise ModalityError(f"target samples lack payloads for {missing}")
    if dataset.n_target == 0:
        logger.warning("training epoch %d without target samples; the domain classifier only sees source data", epoch)

    n_batches = batches_per_epoch(dataset.n_source, dataset.n_target, batch_size)
    total_steps = total_epochs * n_batches
    accuracies = {}
    for m, branch in ensemble.branches.items():
        xs_all, ys_all = dataset.source.payloads[m], dataset.source.labels
        xt_all = dataset.target.payloads[m]
        targets = pseudo.get(m) if pseudo else None
        for b, (src_idx, tgt_idx) in enumerate(iterate_batches(branch.rng, dataset.n_source, dataset.n_target, batch_size)):
            progress = (epoch * n_batches + b) / total_steps
            branch.optim.set_progress(progress)
            terms = targets.terms(tgt_idx) if targets is not None else None
            grads, _ = branch_gradients(branch, xs_all[src_idx], ys_all[src_idx], xt_all[tgt_idx],
                                        ensemble.reversal_factor(progress), terms)
            sgd_step(branch.params, grads, branch.optim)
        accuracies[m] = source_accuracy(branch, dataset)
    ensemble.epochs_done += 1
    return accuracies


def train_dann_epoch(ensemble: BranchEnsemble, dataset: MultiModalDataset, epoch: int, total_epochs: int,
                     batch_size: int = 16) -> Dict[str, float]:
    """Source classification plus reversed domain confusion, no pseudo labels."""
    return train_epoch(ensemble, dataset, epoch, total_epochs, batch_size)


def domain_accuracy(branch: ModalityBranch, xs: np.ndarray, xt: np.ndarray) -> float:
    """Accuracy of the domain classifier on a mixed source/target sample set."""
    _, hs = forward(branch.feature, xs)
    _, ht = forward(branch.feature, xt)
    _, ls = forward(branch.domain, hs)
    _, lt = forward(branch.domain, ht)
    correct = np.sum(ls[:, 0] <= 0) + np.sum(lt[:, 0] > 0)
    return float(correct / (len(xs) + len(xt)))
