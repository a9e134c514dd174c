"""Central finite-difference gradient checking in float64."""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

from pixelvq.autodiff.tensor import Tensor, no_grad


def numeric_grad(fn: Callable[[], Tensor], t: Tensor, h: float = 1e-4,
                 indices: Optional[np.ndarray] = None) -> np.ndarray:
    """Central differences of ``fn()`` w.r.t. the flat entries ``indices`` of ``t``."""
    flat = t.data.reshape(-1)
    if indices is None:
        indices = np.arange(flat.size)
    out = np.empty(len(indices), dtype=np.float64)
    with no_grad():
        for j, i in enumerate(indices):
            orig = flat[i]
            flat[i] = orig + h
            fp = float(fn().data)
            flat[i] = orig - h
            fm = float(fn().data)
            flat[i] = orig
            out[j] = (fp - fm) / (2.0 * h)
    return out


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-10) -> float:
    a = np.asarray(analytic, dtype=np.float64).ravel()
    n = np.asarray(numeric, dtype=np.float64).ravel()
    scale = max(np.linalg.norm(a), np.linalg.norm(n))
    diff = np.linalg.norm(a - n)
    if scale < floor:
        return 0.0 if diff < floor else float("inf")
    return float(diff / scale)


def gradcheck(fn: Callable[[], Tensor], tensors: Sequence[Tensor], names: Optional[Sequence[str]] = None,
              h: float = 1e-4, max_entries: Optional[int] = None,
              rng: Optional[np.random.Generator] = None) -> dict:
    """Compare analytic and numeric gradients for each tensor.

    ``tensors`` must be float64 leaves with ``requires_grad``. When
    ``max_entries`` is given, a random subset of that many entries per tensor
    is checked. Returns ``{name: relative_error}``.
    """
    rng = rng or np.random.default_rng(0)
    names = list(names) if names is not None else [f"t{i}" for i in range(len(tensors))]
    for t in tensors:
        if t.dtype != np.float64:
            raise TypeError("gradcheck needs float64 tensors (use Module.astype(np.float64))")
        t.grad = None
    fn().backward()
    analytic = [np.zeros_like(t.data) if t.grad is None else t.grad.copy() for t in tensors]
    report = {}
    for name, t, a in zip(names, tensors, analytic):
        if max_entries is not None and t.size > max_entries:
            idx = np.sort(rng.choice(t.size, size=max_entries, replace=False))
        else:
            idx = np.arange(t.size)
        num = numeric_grad(fn, t, h, idx)
        report[name] = relative_error(a.reshape(-1)[idx], num)
    return report
