"""Training losses for the three answer decoders."""
import numpy as np

from ..errors import ContractError
from . import functional as F
from .tensor import Tensor


def _labels(label, classes):
    label = np.asarray(label, dtype=np.int64)
    if label.size and (label.min() < 0 or label.max() >= classes):
        raise IndexError(f"label out of range for {classes} classes: {label}")
    return label


def cross_entropy(p, label):
    """Mean negative log-probability of ``label`` under probability rows ``p``.

    ``p`` has shape ``(classes,)`` or ``(B, classes)`` and must already be a
    softmax output.
    """
    classes = p.shape[-1]
    label = _labels(label, classes)
    if p.ndim == 1:
        if label.ndim != 0:
            raise ContractError("single probability vector needs a scalar label")
        return -F.log(p[int(label)])
    rows = np.arange(p.shape[0])
    picked = p[rows, label]
    return -F.log(picked).mean()


def hinge_pair(s_p, s_n):
    """``max(0, 1 + s_n - s_p)``, averaged when given arrays."""
    s_p, s_n = Tensor.wrap(s_p), Tensor.wrap(s_n)
    margin = F.relu(1.0 + s_n - s_p)
    return margin if margin.size == 1 else margin.mean()


def multi_choice_hinge(scores, label):
    """Hinge over every (correct, wrong) pair of a ``(B, A)`` score matrix."""
    B, A = scores.shape
    label = _labels(label, A)
    rows = np.arange(B)
    s_p = scores[rows, label].reshape(B, 1)
    mask = np.ones((B, A), dtype=scores.dtype)
    mask[rows, label] = 0.0
    margins = F.relu(1.0 + scores - s_p) * mask
    return margins.sum() / (B * (A - 1))


def mse(pred, target):
    target = Tensor.wrap(target, pred)
    if pred.shape != target.shape:
        raise ContractError(f"mse: prediction {pred.shape} vs target {target.shape}")
    diff = pred - target
    return (diff * diff).mean()
