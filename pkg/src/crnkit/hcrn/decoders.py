"""Answer decoders: open-ended classification, multi-choice scoring, count regression."""
import numpy as np

from ..diffcore import functional as F
from ..diffcore.losses import cross_entropy, mse, multi_choice_hinge
from ..diffcore.nn import Linear, Module
from ..errors import ConfigurationError


def round_half_away(x):
    """Round to the nearest integer, ties away from zero (2.5 -> 3, -2.5 -> -3)."""
    x = np.asarray(x, dtype=np.float64)
    return (np.sign(x) * np.floor(np.abs(x) + 0.5)).astype(np.int64)


def argmax_lowest(scores):
    """Argmax over the last axis; ties resolve to the lowest index."""
    return np.argmax(np.asarray(scores), axis=-1)


def _bcast(v, like):
    """Give a (..., d) vector the leading shape of ``like`` (..., A, d) by inserting axes."""
    pad = like.ndim - v.ndim
    if pad <= 0:
        return v
    v = v.reshape(v.shape[:-1] + (1,) * pad + (v.shape[-1],))
    return v.broadcast_to(like.shape[:-1] + (v.shape[-1],))


class _Trunk(Module):
    """Shared two-layer body: ``y = ELU(W_o [streams; W_q q + b (; W_a a + b)] + b)``, ``y' = ELU(W_y y + b)``.

    ``streams`` counts how many stream summaries are concatenated in front
    (0 gives the question-only baseline).
    """

    def __init__(self, init, name, d, streams, answers=False):
        if streams < 0 or streams > 2:
            raise ConfigurationError(f"decoder takes 0, 1 or 2 stream summaries, got {streams}")
        self.streams = streams
        self.W_q = Linear(init, f"{name}.W_q", d, d)
        self.W_a = Linear(init, f"{name}.W_a", d, d) if answers else None
        width = (streams + 1 + (1 if answers else 0)) * d
        self.W_o = Linear(init, f"{name}.W_o", width, d)
        self.W_y = Linear(init, f"{name}.W_y", d, d)

    def __call__(self, summaries, q, a=None):
        summaries = [s for s in summaries if s is not None]
        if len(summaries) != self.streams:
            raise ConfigurationError(
                f"decoder built for {self.streams} stream summaries, got {len(summaries)}"
            )
        blocks = list(summaries)
        if self.W_a is not None:
            if a is None:
                raise ConfigurationError("multi-choice decoder needs answer features")
            av = self.W_a(a)
            blocks = [_bcast(b, av) for b in blocks]
            blocks += [_bcast(self.W_q(q), av), av]
        else:
            blocks.append(self.W_q(q))
        y = F.elu(self.W_o(F.concat(blocks, axis=-1)))
        return F.elu(self.W_y(y))


class OpenEndedDecoder(Module):
    """Softmax over a fixed answer vocabulary."""

    def __init__(self, init, name, d, num_answers, streams=1):
        self.trunk = _Trunk(init, f"{name}.trunk", d, streams)
        self.W = Linear(init, f"{name}.W", d, num_answers)

    def __call__(self, summaries, q, a=None):
        return F.softmax(self.W(self.trunk(summaries, q)), axis=-1)

    def loss(self, out, labels):
        return cross_entropy(out, labels)

    @staticmethod
    def predict(out):
        return argmax_lowest(out.data)


class MultiChoiceDecoder(Module):
    """One score per candidate; candidates sit on the second-to-last axis of ``a``.

    ``loss`` is the pairwise hinge (short-form) or softmax cross-entropy over
    the candidates (long-form).
    """

    def __init__(self, init, name, d, streams=1, loss="hinge"):
        if loss not in ("hinge", "cross-entropy"):
            raise ConfigurationError(f"multi-choice loss must be hinge or cross-entropy, got {loss!r}")
        self.loss_kind = loss
        self.trunk = _Trunk(init, f"{name}.trunk", d, streams, answers=True)
        self.W = Linear(init, f"{name}.W", d, 1)

    def __call__(self, summaries, q, a=None):
        s = self.W(self.trunk(summaries, q, a))
        return s.reshape(s.shape[:-1])

    def loss(self, out, labels):
        if self.loss_kind == "hinge":
            return multi_choice_hinge(out, labels)
        return cross_entropy(F.softmax(out, axis=-1), labels)

    @staticmethod
    def predict(out):
        return argmax_lowest(out.data)


class CountDecoder(Module):
    """Linear regression on the trunk output; MSE in training, rounded at evaluation."""

    def __init__(self, init, name, d, streams=1):
        self.trunk = _Trunk(init, f"{name}.trunk", d, streams)
        self.W = Linear(init, f"{name}.W", d, 1)

    def __call__(self, summaries, q, a=None):
        s = self.W(self.trunk(summaries, q))
        return s.reshape(s.shape[:-1])

    def loss(self, out, labels):
        return mse(out, np.asarray(labels, dtype=out.dtype))

    @staticmethod
    def predict(out):
        return round_half_away(out.data)


def build_decoder(init, task, d, streams, long_form=False):
    if task.kind == "open-ended":
        return OpenEndedDecoder(init, "decoder", d, task.num_answers, streams)
    if task.kind == "multi-choice":
        loss = task.loss or ("cross-entropy" if long_form else "hinge")
        return MultiChoiceDecoder(init, "decoder", d, streams, loss)
    return CountDecoder(init, "decoder", d, streams)


def decode(decoder, o_v, q, o_t=None, a=None):
    """Run ``decoder`` on the visual summary, optional textual summary and question (answers)."""
    return decoder([o_v, o_t], q, a)
