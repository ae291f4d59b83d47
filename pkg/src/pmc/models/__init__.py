from pmc.models.branches import (BranchArch, BranchEnsemble, ModalityBranch, PseudoTargets, adv_loss, branch_gradients,
                                 predict, src_loss, train_dann_epoch, train_epoch)
from pmc.models.mmg import (MmgConfig, MmgModel, OracleGenerator, generate, generate_target, mmg_gradients, train_mmg,
                            train_mmg_on_dataset)
from pmc.models.checkpoint import load_ensemble, load_generator, save_ensemble, save_generator
