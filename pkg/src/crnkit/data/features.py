"""Linear projection of raw features to the model width."""
from ..diffcore.functional import linear
from ..diffcore.tensor import Tensor


def project_features(raw, W):
    """Map ``raw`` (..., D_raw) through ``W`` (D_raw, d); no bias."""
    return linear(Tensor.wrap(raw), W)
