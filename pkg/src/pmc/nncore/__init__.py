from pmc.nncore.network import Activations, DenseNet, Gradients, backward, forward
from pmc.nncore.losses import binary_xent, grl_backward, grl_forward, l1_loss, softmax_xent, softmax_xent_batch
from pmc.nncore.optim import OptimConfig, OptimState, adaptation_factor, inv_lr, sgd_step
