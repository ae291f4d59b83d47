from dataclasses import asdict, dataclass, fields
from typing import Mapping, Tuple

from pmc.errors import ConfigError
from pmc.models import BranchArch, MmgConfig
from pmc.nncore import OptimConfig
from pmc.selection import FUSED_WEIGHTS

MODES = ("MMDA", "MMDA-PI")


@dataclass(frozen=True)
class TrainConfig:
    """Hyper-parameters of one training run."""
    epochs: int = 40
    warmup_epochs: int = 20
    trade_off: float = 0.3
    lambda_gen: float = 0.1
    base_lr: float = 0.0015
    momentum: float = 0.9
    weight_decay: float = 3e-4
    head_lr_mult: float = 10.0
    batch_size: int = 16
    alpha: float = 1.0
    seed: int = 0
    mode: str = "MMDA"
    disable_mss: bool = False
    disable_mis: bool = False
    disable_cv: bool = False
    disable_gend: bool = False
    fused_weight: str = "mean_max"
    feature_hidden: Tuple[int, ...] = (64,)
    feature_dim: int = 32
    domain_hidden: Tuple[int, ...] = (16,)
    latent_dim: int = 16
    generator_epochs: int = 60
    generator_lr: float = 0.01

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1 (provided {self.epochs})")
        if self.warmup_epochs < 0:
            raise ConfigError(f"warmup_epochs must be >= 0 (provided {self.warmup_epochs})")
        if self.trade_off < 0 or self.lambda_gen < 0:
            raise ConfigError(f"trade-off parameters must be >= 0 (provided trade_off={self.trade_off}, "
                              f"lambda_gen={self.lambda_gen})")
        if self.base_lr <= 0 or self.generator_lr <= 0 or self.head_lr_mult <= 0:
            raise ConfigError(f"learning rates must be positive (provided base_lr={self.base_lr}, "
                              f"generator_lr={self.generator_lr}, head_lr_mult={self.head_lr_mult})")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1 (provided {self.batch_size})")
        if self.alpha <= 0:
            raise ConfigError(f"alpha must be positive (provided {self.alpha})")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES} (provided '{self.mode}')")
        if self.fused_weight not in FUSED_WEIGHTS:
            raise ConfigError(f"fused_weight must be one of {FUSED_WEIGHTS} (provided '{self.fused_weight}')")
        # delegates the remaining range checks
        self.optim_config()

    @property
    def total_epochs(self) -> int:
        return self.warmup_epochs + self.epochs

    def optim_config(self) -> OptimConfig:
        return OptimConfig(base_lr=self.base_lr, momentum=self.momentum, weight_decay=self.weight_decay,
                           head_lr_mult=self.head_lr_mult)

    def arch(self) -> BranchArch:
        return BranchArch(feature_hidden=self.feature_hidden, feature_dim=self.feature_dim,
                          domain_hidden=self.domain_hidden)

    def mmg_config(self) -> MmgConfig:
        return MmgConfig(latent_dim=self.latent_dim, epochs=self.generator_epochs, batch_size=self.batch_size,
                         lambda_gen=self.lambda_gen, base_lr=self.generator_lr, momentum=self.momentum,
                         weight_decay=self.weight_decay, disable_cv=self.disable_cv, disable_gend=self.disable_gend)

    @classmethod
    def from_dict(cls, conf: Mapping) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(conf) - known
        if unknown:
            raise ConfigError(f"unknown train keys: {sorted(unknown)}")
        conf = dict(conf)
        for key in ("feature_hidden", "domain_hidden"):
            if key in conf:
                conf[key] = tuple(conf[key])
        try:
            return cls(**conf)
        except TypeError as err:
            raise ConfigError(str(err)) from err

    def to_dict(self) -> dict:
        out = asdict(self)
        out["feature_hidden"], out["domain_hidden"] = list(self.feature_hidden), list(self.domain_hidden)
        return out
