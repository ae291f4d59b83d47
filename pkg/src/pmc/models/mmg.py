"""Missing-modality generator.

An encoder ``E`` maps the available modality to a latent code ``z``; a decoder
``DE`` maps ``z`` concatenated with a category vector ``v`` to the missing
modality. A latent domain classifier ``D_gen`` sees ``z`` (before the
concatenation) through a gradient reversal layer so the encoder produces codes
that do not tell the domains apart. Reconstruction is L1 and only uses source
pairs, conditioned on one-hot labels.
"""
import logging
from dataclasses import asdict, dataclass, fields
from typing import Mapping, Optional, Tuple

import numpy as np

from pmc.errors import ArgumentError, ConditioningError, ConfigError, PairingError, StateError
from pmc.nncore import (DenseNet, OptimConfig, OptimState, adaptation_factor, backward, binary_xent, forward,
                        grl_backward, l1_loss, sgd_step)
from pmc.synthdata import SOURCE, TARGET, HiddenTruth, MultiModalDataset

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MmgConfig:
    latent_dim: int = 16
    hidden: Tuple[int, ...] = (32,)
    domain_hidden: Tuple[int, ...] = (16,)
    epochs: int = 60
    batch_size: int = 16
    lambda_gen: float = 0.1
    # reconstruction from scratch needs a larger step than the classifier branches
    base_lr: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 3e-4
    disable_cv: bool = False
    disable_gend: bool = False

    def __post_init__(self):
        if self.latent_dim <= 0 or any(h <= 0 for h in self.hidden + self.domain_hidden):
            raise ConfigError(f"generator layer sizes must be positive (provided latent_dim={self.latent_dim}, hidden={self.hidden})")
        if self.epochs < 1:
            raise ConfigError(f"generator epochs must be >= 1 (provided {self.epochs})")
        if self.batch_size < 1:
            raise ConfigError(f"generator batch_size must be >= 1 (provided {self.batch_size})")
        if self.lambda_gen < 0:
            raise ConfigError(f"lambda_gen must be >= 0 (provided {self.lambda_gen})")

    @property
    def effective_lambda(self) -> float:
        return 0.0 if self.disable_gend else self.lambda_gen

    def optim_config(self) -> OptimConfig:
        return OptimConfig(base_lr=self.base_lr, momentum=self.momentum, weight_decay=self.weight_decay)

    @classmethod
    def from_dict(cls, conf: Mapping) -> "MmgConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(conf) - known
        if unknown:
            raise ConfigError(f"unknown generator keys: {sorted(unknown)}")
        conf = dict(conf)
        for key in ("hidden", "domain_hidden"):
            if key in conf:
                conf[key] = tuple(conf[key])
        return cls(**conf)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["hidden"], out["domain_hidden"] = list(self.hidden), list(self.domain_hidden)
        return out


@dataclass
class MmgModel:
    available: str
    missing: str
    encoder: DenseNet
    decoder: DenseNet
    gen_domain: DenseNet
    n_classes: int
    lambda_gen: float = 0.1
    # False pads the decoder input with zeros instead of the category vector
    use_conditioning: bool = True
    frozen: bool = False

    def __post_init__(self):
        if self.lambda_gen < 0:
            raise ArgumentError(f"lambda_gen must be >= 0 (provided {self.lambda_gen})")
        if self.decoder.input_dim != self.latent_dim + self.n_classes:
            raise ConditioningError(f"decoder input {self.decoder.input_dim} != latent {self.latent_dim} + "
                                    f"categories {self.n_classes}")
        if self.gen_domain.input_dim != self.latent_dim or self.gen_domain.output_dim != 1:
            raise ConditioningError("latent domain classifier must map the latent code to one logit")

    @classmethod
    def create(cls, available: str, missing: str, avail_dim: int, missing_dim: int, n_classes: int,
               seed: int, config: MmgConfig = MmgConfig()) -> "MmgModel":
        e_seed, de_seed, d_seed = np.random.SeedSequence([int(seed), 0x6d6d67]).spawn(3)
        encoder = DenseNet.initialize((avail_dim, *config.hidden, config.latent_dim), np.random.default_rng(e_seed))
        decoder = DenseNet.initialize((config.latent_dim + n_classes, *config.hidden, missing_dim),
                                      np.random.default_rng(de_seed))
        gen_domain = DenseNet.initialize((config.latent_dim, *config.domain_hidden, 1), np.random.default_rng(d_seed))
        return cls(available, missing, encoder, decoder, gen_domain, n_classes,
                   config.effective_lambda, not config.disable_cv)

    @property
    def latent_dim(self) -> int:
        return self.encoder.output_dim

    @property
    def params(self):
        return self.encoder.params + self.decoder.params + self.gen_domain.params

    def freeze(self) -> "MmgModel":
        for net in (self.encoder, self.decoder, self.gen_domain):
            net.freeze()
        self.frozen = True
        return self


def conditioning_block(model: MmgModel, v: np.ndarray) -> np.ndarray:
    return v if model.use_conditioning else np.zeros_like(v)


def _check_conditioning(model: MmgModel, x: np.ndarray, v: np.ndarray):
    if x.shape[-1:] != (model.encoder.input_dim,):
        raise ConditioningError(f"generator for '{model.missing}' expects {model.encoder.input_dim} "
                                f"'{model.available}' features, got shape {x.shape}")
    if v.shape[-1:] != (model.n_classes,):
        raise ConditioningError(f"category vector must have {model.n_classes} entries, got shape {v.shape}")
    if x.ndim != v.ndim or (x.ndim == 2 and len(x) != len(v)):
        raise ConditioningError(f"{x.shape} inputs do not pair with {v.shape} category vectors")
    if np.any(v < -1e-12) or not np.allclose(v.sum(axis=-1), 1.0, atol=1e-6):
        raise ConditioningError("category vectors must lie on the probability simplex")


def generate(model: MmgModel, x_available, v) -> np.ndarray:
    """``DE(E(x) ⊕ v)`` for one sample or a batch of rows."""
    x = np.asarray(x_available, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    _check_conditioning(model, x, v)
    _, z = forward(model.encoder, x)
    _, out = forward(model.decoder, np.concatenate([z, conditioning_block(model, v)], axis=-1))
    return out


def one_hot(labels: np.ndarray, n_classes: int) -> np.ndarray:
    out = np.zeros((len(labels), n_classes))
    out[np.arange(len(labels)), labels] = 1.0
    return out


@dataclass
class MmgLosses:
    gen: float
    adv: float


def mmg_gradients(model: MmgModel, xs_avail: np.ndarray, xs_missing: np.ndarray, ys: np.ndarray,
                  xt_avail: np.ndarray, factor: float):
    """Gradients of ``L_gen + minmax L_adv_gen`` for one mini-batch, aligned with ``model.params``.

    ``factor`` is the reversal strength applied to the latent-domain gradient
    on its way into the encoder.
    """
    ns, nt = len(xs_avail), len(xt_avail)
    if ns == 0:
        raise PairingError("a generator batch needs paired source samples")
    x = np.vstack([xs_avail, xt_avail]) if nt else xs_avail
    acts_e, z = forward(model.encoder, x)

    v = conditioning_block(model, one_hot(ys, model.n_classes))
    acts_de, out = forward(model.decoder, np.hstack([z[:ns], v]))
    gen, g_out = l1_loss(out, xs_missing)
    grads_de = backward(model.decoder, acts_de, g_out)

    acts_dg, logits = forward(model.gen_domain, z)
    domains = np.concatenate([np.full(ns, SOURCE), np.full(nt, TARGET)])
    losses_d, g_d = binary_xent(logits[:, 0], domains)
    n = ns + nt
    grads_dg = backward(model.gen_domain, acts_dg, g_d[:, None] / n)

    dz = grl_backward(grads_dg.input, factor)
    dz[:ns] += grads_de.input[:, :model.latent_dim]
    grads_e = backward(model.encoder, acts_e, dz)
    grads = grads_e.as_list() + grads_de.as_list() + grads_dg.as_list()
    return grads, MmgLosses(float(gen), float(losses_d.sum() / n))


def _check_pairs(xs_avail: np.ndarray, xs_missing: np.ndarray, ys: np.ndarray):
    if not (len(xs_avail) == len(xs_missing) == len(ys)):
        raise PairingError(f"{len(xs_avail)} available payloads, {len(xs_missing)} missing-modality payloads "
                           f"and {len(ys)} labels cannot be paired")
    unpaired = np.flatnonzero(~np.isfinite(xs_missing).all(axis=1) | ~np.isfinite(xs_avail).all(axis=1))
    if len(unpaired):
        raise PairingError(f"source rows {unpaired[:5].tolist()} lack a complete pair of payloads")


def train_mmg(xs_avail, xs_missing, ys, xt_avail, n_classes: int, seed: int = 0,
              config: MmgConfig = MmgConfig(), available: str = "A", missing: str = "B") -> MmgModel:
    """Fit a generator on paired source samples; target rows only feed the latent adversary.

    Returns a frozen :class:`MmgModel`.
    """
    xs_avail = np.asarray(xs_avail, dtype=np.float64)
    xs_missing = np.asarray(xs_missing, dtype=np.float64)
    xt_avail = np.asarray(xt_avail, dtype=np.float64).reshape(-1, xs_avail.shape[1])
    ys = np.asarray(ys, dtype=np.int64)
    _check_pairs(xs_avail, xs_missing, ys)
    if len(ys) == 0:
        raise PairingError("the generator needs at least one paired source sample")

    model = MmgModel.create(available, missing, xs_avail.shape[1], xs_missing.shape[1], n_classes, seed, config)
    optim_config = config.optim_config()
    optim = OptimState.for_params(model.params, optim_config)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x6d6d67, 1]))

    ns, nt, bs = len(xs_avail), len(xt_avail), config.batch_size
    n_batches = -(-max(ns, nt) // bs)
    total_steps = config.epochs * n_batches
    for epoch in range(config.epochs):
        src = np.resize(rng.permutation(ns), n_batches * bs)
        tgt = np.resize(rng.permutation(nt), n_batches * bs) if nt else np.zeros(0, dtype=np.int64)
        gen_total = 0.0
        for b in range(n_batches):
            progress = (epoch * n_batches + b) / total_steps
            optim.set_progress(progress)
            sl = slice(b * bs, (b + 1) * bs)
            s_idx, t_idx = src[sl], (tgt[sl] if nt else tgt)
            factor = model.lambda_gen * float(adaptation_factor(progress, optim_config.gamma))
            grads, losses = mmg_gradients(model, xs_avail[s_idx], xs_missing[s_idx], ys[s_idx], xt_avail[t_idx], factor)
            sgd_step(model.params, grads, optim)
            gen_total += losses.gen
        logger.debug("generator epoch %d: L1 %.4f", epoch, gen_total / n_batches)
    logger.info("trained generator %s -> %s over %d epochs", available, missing, config.epochs)
    return model.freeze()


def train_mmg_on_dataset(dataset: MultiModalDataset, seed: int = 0, config: MmgConfig = MmgConfig()) -> MmgModel:
    """Generator for the single modality missing from ``dataset``'s target split."""
    if len(dataset.schema.missing) != 1:
        raise PairingError(f"expected exactly one missing target modality, found {list(dataset.schema.missing)}")
    missing = dataset.schema.missing[0]
    available = dataset.schema.target_names[0]
    return train_mmg(dataset.source.payloads[available], dataset.source.payloads[missing], dataset.source.labels,
                     dataset.target.payloads[available], dataset.schema.n_classes, seed, config, available, missing)


@dataclass
class OracleGenerator:
    """Returns the true hidden payload of each target sample; for ceiling runs only."""
    available: str
    missing: str
    hidden: HiddenTruth
    frozen: bool = True

    @classmethod
    def from_dataset(cls, dataset: MultiModalDataset) -> "OracleGenerator":
        if dataset.hidden is None or not dataset.schema.missing or dataset.schema.missing[0] not in dataset.hidden.payloads:
            raise StateError("the oracle generator needs the hidden payload of the missing modality")
        return cls(dataset.schema.target_names[0], dataset.schema.missing[0], dataset.hidden)

    def generate_target(self, dataset: MultiModalDataset, v: Optional[np.ndarray] = None) -> np.ndarray:
        if not np.array_equal(dataset.target.ids, self.hidden.ids):
            raise StateError("oracle payloads are not aligned with the target split")
        return np.array(self.hidden.payloads[self.missing], copy=True)


def generate_target(generator, dataset: MultiModalDataset, v: np.ndarray) -> np.ndarray:
    """Missing-modality payloads for every target sample, conditioned on ``v`` (one row per sample)."""
    if isinstance(generator, OracleGenerator):
        return generator.generate_target(dataset, v)
    return generate(generator, dataset.target.payloads[generator.available], v)
