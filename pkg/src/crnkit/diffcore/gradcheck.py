"""Central finite-difference gradient checks."""
import numpy as np

from .tensor import no_grad


def relative_error(analytic, numeric, floor=1e-6):
    """``|a - n| / max(|a|, |n|, floor)`` elementwise.

    The floor keeps entries whose true gradient is ~0 from turning
    round-off into huge relative errors.
    """
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / denom


def check_gradients(loss_fn, tensors, eps=1e-5, probes=None, rng=None, corrupt=0.0):
    """Compare analytic gradients of ``loss_fn()`` with central differences.

    Args:
        loss_fn: zero-argument callable returning a scalar Tensor. It must be
            deterministic (fix any sampling seed inside it).
        tensors: dict name -> leaf Tensor (requires_grad) to probe.
        eps: finite-difference step.
        probes: number of random entries checked per tensor; ``None`` checks
            every entry.
        rng: numpy Generator choosing probe positions.
        corrupt: added to every analytic gradient entry (negative-control hook).

    Returns:
        dict name -> max relative error over the probed entries.
    """
    rng = rng or np.random.default_rng(0)
    for t in tensors.values():
        t.grad = None
    loss = loss_fn()
    loss.backward()
    report = {}
    for name, t in tensors.items():
        analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
        analytic = analytic + corrupt
        flat = t.data.reshape(-1)
        if probes is None or probes >= flat.size:
            positions = np.arange(flat.size)
        else:
            positions = rng.choice(flat.size, size=probes, replace=False)
        numeric = np.empty(len(positions))
        with no_grad():
            for j, pos in enumerate(positions):
                orig = flat[pos]
                flat[pos] = orig + eps
                up = loss_fn().item()
                flat[pos] = orig - eps
                down = loss_fn().item()
                flat[pos] = orig
                numeric[j] = (up - down) / (2.0 * eps)
        err = relative_error(analytic.reshape(-1)[positions], numeric)
        report[name] = float(err.max()) if err.size else 0.0
    return report
