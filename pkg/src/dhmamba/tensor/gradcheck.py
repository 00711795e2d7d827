"""Central finite-difference checks for the tape."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .core import Tensor


def numerical_grad(fn: Callable[[], Tensor], leaf: Tensor, h: float = 1e-4, max_entries: int | None = None,
                   rng: np.random.Generator | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Central differences of scalar ``fn()`` w.r.t. entries of ``leaf.data``.

    Returns ``(flat_indices, values)``. With ``max_entries`` a random subset
    of entries is probed.
    """
    flat = leaf.data.reshape(-1)
    idx = np.arange(flat.size)
    if max_entries is not None and flat.size > max_entries:
        rng = rng or np.random.default_rng(0)
        idx = np.sort(rng.choice(flat.size, size=max_entries, replace=False))
    vals = np.empty(idx.size)
    for k, i in enumerate(idx):
        orig = flat[i]
        flat[i] = orig + h
        fp = float(fn().data)
        flat[i] = orig - h
        fm = float(fn().data)
        flat[i] = orig
        vals[k] = (fp - fm) / (2 * h)
    return idx, vals


def grad_check(fn: Callable[[], Tensor], leaves: Sequence[Tensor], h: float = 1e-4,
               max_entries: int | None = None, seed: int = 0) -> float:
    """Largest relative error between autodiff and central differences over ``leaves``.

    Relative error per leaf is ``||analytic - numeric|| / max(||analytic||, ||numeric||, 1e-12)``
    on the probed entries.
    """
    for leaf in leaves:
        leaf.requires_grad = True
        leaf.grad = None
    out = fn()
    out.backward()
    analytic = [np.zeros_like(l.data) if l.grad is None else l.grad.copy() for l in leaves]
    rng = np.random.default_rng(seed)
    worst = 0.0
    for leaf, a in zip(leaves, analytic):
        idx, num = numerical_grad(fn, leaf, h=h, max_entries=max_entries, rng=rng)
        an = a.reshape(-1)[idx]
        denom = max(np.linalg.norm(an), np.linalg.norm(num), 1e-12)
        worst = max(worst, float(np.linalg.norm(an - num) / denom))
    return worst
