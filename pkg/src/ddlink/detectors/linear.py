"""Linear detection: matched filter, zero forcing, linear MMSE."""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from ddlink.detectors import constellation as cn
from ddlink.detectors.common import (
    DetectorError,
    DetectorOptions,
    MacCounter,
    as_channel,
    finalize,
)

_KINDS = ("mf", "zf", "lmmse")


def linear_detect(kind: str, y, h, noise_var: float, const: cn.Constellation) -> "DetectorResult":
    """Transform by the chosen linear front end, then slice.

    ``mf`` applies the conjugate transpose (gain-normalized per stream),
    ``zf`` the pseudo-inverse, ``lmmse`` the regularized inverse
    ``(H^H H + noise_var I)^{-1} H^H``.  Soft outputs are the transformed
    values; variances are the per-stream residual MSE estimates.
    """
    if kind not in _KINDS:
        raise ValueError(f"unknown linear detector {kind!r}; expected one of {_KINDS}")
    counter = MacCounter()
    chan = as_channel(h)
    hm = chan.dense()
    m, n = hm.shape
    y = np.asarray(y, dtype=complex)

    if kind == "mf":
        col_gain = np.sum(np.abs(hm) ** 2, axis=0)
        if np.any(col_gain == 0):
            raise DetectorError("matched filter undefined for an all-zero column")
        soft = (hm.conj().T @ y) / col_gain
        counter.gemm(n, m)
        var = noise_var / np.maximum(col_gain, 1e-300)
    else:
        gram = hm.conj().T @ hm
        counter.gemm(n, m, n)
        if kind == "zf":
            reg = gram
        else:
            if noise_var <= 0:
                raise ValueError("lmmse requires noise_var > 0")
            reg = gram + noise_var * np.eye(n)
        try:
            cho = sla.cho_factor(reg)
        except np.linalg.LinAlgError as exc:
            raise DetectorError(f"singular normal equations for {kind}: {exc}") from exc
        if kind == "zf":
            cond = np.abs(np.diag(cho[0])).max() / max(np.abs(np.diag(cho[0])).min(), 1e-300)
            if cond > 1e10:
                raise DetectorError("channel Gram matrix is numerically rank deficient")
        soft = sla.cho_solve(cho, hm.conj().T @ y)
        counter.cholesky_solve(n, rhs=1)
        counter.gemm(n, m)
        inv_diag = np.real(np.diag(sla.cho_solve(cho, np.eye(n))))
        counter.cholesky_solve(n, rhs=n)
        var = noise_var * np.maximum(inv_diag, 1e-300)

    probs, mean_post, var_post = cn.posterior(soft, np.maximum(var, 1e-300), const)
    result = finalize(soft, var, probs, const, 1, [float(np.linalg.norm(y - hm @ soft))], counter)
    result.mean = soft
    return result


def lmmse_matrix(h: np.ndarray, noise_var: float) -> np.ndarray:
    """Closed-form LMMSE transform (test and comparison helper)."""
    h = np.asarray(h)
    n = h.shape[1]
    return np.linalg.solve(h.conj().T @ h + noise_var * np.eye(n), h.conj().T)
