"""Dense tensors, reverse-mode autodiff, neural primitives and Adam."""
from . import functional
from .functional import (
    concat,
    elu,
    gather,
    hadamard,
    linear,
    log,
    max_pool,
    mean_pool,
    relu,
    sigmoid,
    softmax,
    stack,
    subset_mean,
    tanh,
)
from .gradcheck import check_gradients, relative_error
from .losses import cross_entropy, hinge_pair, mse, multi_choice_hinge
from .nn import (
    INIT_SCHEME,
    BiLSTM,
    Initializer,
    LSTM,
    LSTMCell,
    Linear,
    Module,
    bilstm_encode,
    lstm_cell,
)
from .optim import Adam, adam_step, step_decay
from .tensor import MacCounter, Parameter, Tensor, count_macs, matmul, no_grad


def backward(loss):
    """Populate ``.grad`` on every parameter that contributed to ``loss``."""
    loss.backward()
