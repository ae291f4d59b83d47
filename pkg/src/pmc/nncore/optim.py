"""Momentum SGD with weight decay and the INV learning-rate schedule."""
from dataclasses import asdict, dataclass, field
from typing import List, Sequence

import numpy as np

from pmc.errors import ArgumentError, ConfigError, StateError


@dataclass(frozen=True)
class OptimConfig:
    base_lr: float = 0.0015
    momentum: float = 0.9
    weight_decay: float = 3e-4
    # classifier heads run this many times faster than the feature extractor
    head_lr_mult: float = 10.0
    inv_schedule: bool = True
    adaptation_ramp: bool = True
    gamma: float = 10.0
    power: float = 0.75

    def __post_init__(self):
        if self.base_lr <= 0 or self.head_lr_mult <= 0:
            raise ConfigError(f"learning rates must be positive (provided base_lr={self.base_lr}, head_lr_mult={self.head_lr_mult})")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError(f"momentum must lie in [0, 1) (provided {self.momentum})")
        if self.weight_decay < 0:
            raise ConfigError(f"weight_decay must be >= 0 (provided {self.weight_decay})")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class OptimState:
    velocities: List[np.ndarray]
    base_lr: float
    momentum: float = 0.9
    weight_decay: float = 3e-4
    progress: float = 0.0
    lr_mults: List[float] = field(default=None)
    inv_schedule: bool = True
    gamma: float = 10.0
    power: float = 0.75

    @classmethod
    def for_params(cls, params: Sequence[np.ndarray], config: OptimConfig, lr_mults: Sequence[float] = None) -> "OptimState":
        mults = list(lr_mults) if lr_mults is not None else [1.0] * len(params)
        if len(mults) != len(params):
            raise StateError(f"{len(mults)} learning-rate multipliers for {len(params)} parameter arrays")
        return cls(velocities=[np.zeros_like(p) for p in params], base_lr=config.base_lr,
                   momentum=config.momentum, weight_decay=config.weight_decay, lr_mults=mults,
                   inv_schedule=config.inv_schedule, gamma=config.gamma, power=config.power)

    def __post_init__(self):
        if self.lr_mults is None:
            self.lr_mults = [1.0] * len(self.velocities)

    def set_progress(self, p: float):
        if not 0.0 <= p <= 1.0:
            raise ArgumentError(f"training progress must lie in [0, 1] (provided {p})")
        if p < self.progress:
            raise StateError(f"training progress may not go backwards ({self.progress} -> {p})")
        self.progress = p

    @property
    def lr(self) -> float:
        if not self.inv_schedule:
            return self.base_lr
        return inv_lr(self.progress, self.base_lr, gamma=self.gamma, power=self.power)


def inv_lr(p: float, base_lr: float, gamma: float = 10.0, power: float = 0.75) -> float:
    """``base_lr * (1 + gamma * p) ** -power``."""
    if not 0.0 <= p <= 1.0:
        raise ArgumentError(f"training progress must lie in [0, 1] (provided {p})")
    return base_lr * (1.0 + gamma * p) ** (-power)


def adaptation_factor(p: float, gamma: float = 10.0) -> float:
    """Ramp of the reversal strength from 0 at the start to ~1 at the end of training."""
    return 2.0 / (1.0 + np.exp(-gamma * p)) - 1.0


def sgd_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray], optim: OptimState) -> Sequence[np.ndarray]:
    """In-place update ``v <- mu v + g + wd p; p <- p - lr v``; returns ``params``."""
    if not (len(params) == len(grads) == len(optim.velocities)):
        raise StateError(f"{len(params)} parameters, {len(grads)} gradients, {len(optim.velocities)} velocity buffers")
    lr = optim.lr
    for p, g, v, mult in zip(params, grads, optim.velocities, optim.lr_mults):
        if p.shape != g.shape or p.shape != v.shape:
            raise StateError(f"parameter {p.shape}, gradient {g.shape}, velocity {v.shape} disagree")
        v *= optim.momentum
        v += g
        if optim.weight_decay:
            v += optim.weight_decay * p
        p -= (lr * mult) * v
    return params

