"""Adam optimiser with the step-decay schedule used for training."""
import numpy as np


def adam_step(params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """One in-place Adam update. Parameters without a gradient are skipped."""
    for p in params:
        if p.grad is None:
            continue
        g = p.grad
        p.step += 1
        p.m = beta1 * p.m + (1.0 - beta1) * g
        p.v = beta2 * p.v + (1.0 - beta2) * g * g
        m_hat = p.m / (1.0 - beta1**p.step)
        v_hat = p.v / (1.0 - beta2**p.step)
        p.data -= lr * m_hat / (np.sqrt(v_hat) + eps)


class Adam:
    def __init__(self, params, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        adam_step(self.params, self.lr, self.beta1, self.beta2, self.eps)


def step_decay(base_lr, epoch, every, factor=0.5):
    """Learning rate after halving every ``every`` epochs (epochs counted from 0)."""
    return base_lr * factor ** (epoch // every)
