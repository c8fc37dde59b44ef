"""Gaussian message passing on the sparse factor graph of the channel.

Observation and variable nodes exchange Gaussian moments: each
observation cancels the mean of every other symbol's interference and
treats the residual as Gaussian; each variable combines its other
observations' messages with the uniform constellation prior.  Messages
are damped on their means and variances.  Flooding schedule.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from ddlink.detectors import constellation as cn
from ddlink.detectors.common import (
    DetectorOptions,
    MacCounter,
    SparseChannel,
    as_channel,
    finalize,
)


def prune_channel(h: np.ndarray, energy_keep: float = 0.999, max_per_row: int | None = None):
    """Sparsify a dense effective channel for message passing.

    Keeps the strongest entries of each row until ``energy_keep`` of the
    row energy is covered (optionally capped per row).  Returns a CSR
    matrix; the discarded residual becomes model error the detector
    treats as noise.
    """
    h = np.asarray(h)
    m, n = h.shape
    rows, cols, vals = [], [], []
    for r in range(m):
        mag = np.abs(h[r]) ** 2
        order = np.argsort(mag)[::-1]
        total = mag.sum()
        if total == 0:
            continue
        acc = np.cumsum(mag[order])
        keep = int(np.searchsorted(acc, energy_keep * total)) + 1
        if max_per_row is not None:
            keep = min(keep, max_per_row)
        sel = order[:keep]
        rows.extend([r] * len(sel))
        cols.extend(sel.tolist())
        vals.extend(h[r, sel].tolist())
    return sp.csr_matrix((vals, (rows, cols)), shape=(m, n))


def gmp_detect(
    y,
    h_sparse,
    noise_var: float,
    const: cn.Constellation,
    opts: DetectorOptions | None = None,
):
    """Detect symbols by damped Gaussian message passing.

    ``h_sparse`` must be sparse (row/column adjacency form); dense
    inputs are accepted for toy problems but defeat the point.
    """
    opts = opts or DetectorOptions()
    counter = MacCounter()
    chan = as_channel(h_sparse)
    if not isinstance(chan, SparseChannel):
        chan = SparseChannel(sp.csr_matrix(chan.dense()))
    coo = chan.h.tocoo()
    rows, cols, vals = coo.row, coo.col, coo.data
    n_edges = len(vals)
    m, n = chan.m, chan.n
    y = np.asarray(y, dtype=complex)
    abs2 = np.abs(vals) ** 2
    q = const.size

    mean_e = np.zeros(n_edges, dtype=complex)  # variable -> observation moments
    var_e = np.ones(n_edges)
    post_probs = np.full((n, q), 1.0 / q)
    trace = []
    best = None
    diverged = False
    delta = np.inf
    iterations = 0

    for t in range(opts.max_iterations):
        iterations = t + 1
        # observation side: leave-one-out Gaussian interference
        row_mean = np.bincount(rows, weights=(vals * mean_e).real, minlength=m) + 1j * np.bincount(
            rows, weights=(vals * mean_e).imag, minlength=m
        )
        row_var = np.bincount(rows, weights=abs2 * var_e, minlength=m)
        ext_mean = y[rows] - (row_mean[rows] - vals * mean_e)
        ext_var = np.maximum(row_var[rows] - abs2 * var_e + noise_var, 1e-12)
        counter.add(6 * n_edges)

        # per-edge symbol log-likelihoods
        ll = -np.abs(ext_mean[:, None] - vals[:, None] * const.points[None, :]) ** 2 / ext_var[:, None]
        counter.add(4 * n_edges * q)

        # variable side: combine, leave one out, damp moments
        col_ll = np.zeros((n, q))
        np.add.at(col_ll, cols, ll)
        loo = col_ll[cols] - ll
        loo -= loo.max(axis=1, keepdims=True)
        pe = np.exp(loo)
        pe /= pe.sum(axis=1, keepdims=True)
        new_mean = pe @ const.points
        new_var = np.maximum((pe @ (np.abs(const.points) ** 2)).real - np.abs(new_mean) ** 2, 1e-12)
        counter.add(3 * n_edges * q)
        delta = float(np.linalg.norm(new_mean - mean_e) / np.sqrt(max(n_edges, 1)))
        mean_e = opts.damping * new_mean + (1 - opts.damping) * mean_e
        var_e = opts.damping * new_var + (1 - opts.damping) * var_e

        # beliefs from the full product
        bl = col_ll - col_ll.max(axis=1, keepdims=True)
        post_probs = np.exp(bl)
        post_probs /= post_probs.sum(axis=1, keepdims=True)
        post_mean = post_probs @ const.points
        resid = float(np.linalg.norm(y - chan.matvec(post_mean)))
        trace.append(resid)
        if best is None or resid <= best[0]:
            best = (resid, post_probs.copy())
        if delta < opts.tol:
            break
        if len(trace) > opts.divergence_patience and all(
            trace[-k] > trace[-k - 1] for k in range(1, opts.divergence_patience + 1)
        ):
            diverged = True
            break

    if diverged and best is not None:
        post_probs = best[1]
    post_mean = post_probs @ const.points
    post_var = np.maximum((post_probs @ (np.abs(const.points) ** 2)).real - np.abs(post_mean) ** 2, 0.0)
    return finalize(
        post_mean, float(np.mean(post_var)), post_probs, const, iterations, trace, counter, diverged
    )
