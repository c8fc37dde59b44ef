"""Exhaustive maximum-likelihood search (toy-scale ground truth)."""

from __future__ import annotations

import numpy as np

from ddlink.detectors import constellation as cn

MAX_HYPOTHESES = 1 << 20


def ml_feasible(n_symbols: int, q: int) -> bool:
    return q**n_symbols <= MAX_HYPOTHESES


def enumerate_indices(n_symbols: int, q: int) -> np.ndarray:
    """All q^n index vectors, mixed-radix order (row k encodes integer k)."""
    total = q**n_symbols
    if total > MAX_HYPOTHESES:
        raise ValueError(f"{total} hypotheses exceed the exhaustive-search budget")
    k = np.arange(total)
    out = np.empty((total, n_symbols), dtype=np.int64)
    for pos in range(n_symbols - 1, -1, -1):
        out[:, pos] = k % q
        k = k // q
    return out


def ml_detect(y, h, const: cn.Constellation, block: int = 8192) -> np.ndarray:
    """Exhaustive ML decision indices argmin ||y - Hx||^2."""
    h = np.asarray(h, dtype=complex)
    y = np.asarray(y, dtype=complex)
    n = h.shape[1]
    hypotheses = enumerate_indices(n, const.size)
    best_val = np.inf
    best_idx = None
    for start in range(0, len(hypotheses), block):
        chunk = hypotheses[start : start + block]
        x = const.points[chunk]  # (b, n)
        resid = y[None, :] - x @ h.T
        metric = np.sum(np.abs(resid) ** 2, axis=1)
        k = int(np.argmin(metric))
        if metric[k] < best_val:
            best_val = float(metric[k])
            best_idx = chunk[k]
    return best_idx
