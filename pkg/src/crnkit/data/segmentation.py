"""Index arithmetic for cutting videos into clips and subtitles into segments."""
import numpy as np

from ..errors import SegmentationError


def clip_anchors(L, N):
    """Equally spaced anchor frames: ``floor((i + 0.5) * L / N)``."""
    i = np.arange(N)
    return np.floor((i + 0.5) * L / N).astype(np.int64)


def segment_clips(L, N, T):
    """Frame indices of ``N`` clips of ``T`` frames from an ``L``-frame video.

    Clip ``i`` is the window ``[a - T//2, a + ceil(T/2))`` around anchor ``a``;
    indices falling outside the video repeat the first or last frame.

    Returns:
        int array of shape ``(N, T)``.
    """
    if L < 1 or N < 1 or T < 1:
        raise SegmentationError(f"L, N, T must be positive, got L={L}, N={N}, T={T}")
    anchors = clip_anchors(L, N)
    offsets = np.arange(T) - T // 2
    return np.clip(anchors[:, None] + offsets[None, :], 0, L - 1)


def segment_subtitles(S, M):
    """Split ``S`` tokens into ``M`` overlapping ``(start, length)`` spans.

    Every span has ``length = S // M``; consecutive spans start half a span
    apart (at least one token), and a span that would run past the end is
    pulled back to end at ``S``.
    """
    if M < 1 or S < M:
        raise SegmentationError(f"need at least M={M} tokens, got S={S}")
    length = S // M
    stride = max(1, length // 2)
    spans = []
    for i in range(M):
        start = min(i * stride, S - length)
        spans.append((start, length))
    return spans


def truncate_or_pad(tokens, max_len):
    """Cut a ``(S, d)`` token matrix to ``max_len`` rows or zero-pad it up to that."""
    tokens = np.asarray(tokens)
    if tokens.shape[0] >= max_len:
        return tokens[:max_len]
    pad = np.zeros((max_len - tokens.shape[0],) + tokens.shape[1:], dtype=tokens.dtype)
    return np.concatenate([tokens, pad], axis=0)
