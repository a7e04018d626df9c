"""Question-guided attention pooling of the last object array."""
from ..diffcore import functional as F
from ..diffcore.nn import Linear, Module


class AttentionReadout(Module):
    """Softmax attention over every row of every final object.

    Projections of the rows and of the question carry no bias; the two
    scoring layers do.
    """

    def __init__(self, init, name, d, dual=False):
        self.W_o = Linear(init, f"{name}.W_o", d, d, bias=False)
        self.W_q = Linear(init, f"{name}.W_q", d, d, bias=False)
        self.W_a = Linear(init, f"{name}.W_a", d, d, bias=False) if dual else None
        width = (3 if dual else 2) * d
        self.W_I = Linear(init, f"{name}.W_I", width, d)
        self.W_score = Linear(init, f"{name}.W_score", d, 1)

    def weights(self, o_flat, q, a=None):
        """Attention weights over slots of ``o_flat`` (..., H', d); sums to 1 on axis -1."""
        proj = self.W_o(o_flat)
        qv = self.W_q(q)
        blocks = [proj, proj * qv.reshape(qv.shape[:-1] + (1, qv.shape[-1]))]
        if self.W_a is not None:
            if a is None:
                raise ValueError("dual readout needs an answer feature")
            av = self.W_a(a)
            blocks.append(proj * av.reshape(av.shape[:-1] + (1, av.shape[-1])))
        I = F.concat(blocks, axis=-1)
        I2 = F.elu(self.W_I(I))
        logits = self.W_score(I2)
        logits = logits.reshape(logits.shape[:-1])
        return F.softmax(logits, axis=-1)

    def __call__(self, O, q, a=None):
        """``O`` is (..., n, H, d) or already flat (..., H', d); returns (..., d)."""
        if O.ndim >= 3 and O.ndim - 1 > q.ndim:
            flat = O.reshape(O.shape[:-3] + (O.shape[-3] * O.shape[-2], O.shape[-1]))
        else:
            flat = O
        gamma = self.weights(flat, q, a)
        weighted = flat * gamma.reshape(gamma.shape + (1,))
        return weighted.sum(axis=-2)


def attention_readout(O, q, readout, a=None):
    return readout(O, q, a)
