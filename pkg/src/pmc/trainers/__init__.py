from pmc.trainers.config import MODES, TrainConfig
from pmc.trainers.metrics import RunMetrics
from pmc.trainers.pmc import (evaluate, fused_probs, late_fusion_predict, pseudo_targets, tar_loss,
                              train_dann, train_pmc, train_source_only)
from pmc.trainers.pmc_pi import impute_target, train_pmc_pi
