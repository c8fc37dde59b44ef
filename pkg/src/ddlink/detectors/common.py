"""Shared detector types: options, results, channel forms, cost counting.

Multiply-accumulate counters are analytic tallies of the operations each
stage dispatches (complex MACs; standard flop formulas for LAPACK
factorizations), accumulated while the detector runs, so complexity
scaling can be asserted without timing noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ddlink.detectors import constellation as cn


class DetectorError(RuntimeError):
    """Unrecoverable detector failure (non-finite state, rank defect)."""


@dataclass(frozen=True)
class DetectorOptions:
    """Iteration/damping knobs shared by the iterative detectors."""

    max_iterations: int = 30
    damping: float = 0.5  # message damping (Gaussian message passing)
    prior_damping: float = 1.0  # prior update damping (orthogonal/memory detectors)
    tol: float = 1e-4
    taylor_order: int = 3
    outer_iterations: int = 10
    inner: str = "oamp"
    memory_combining: bool = True
    power_iterations: int = 30
    trace_probes: int = 32
    probe_seed: int = 7070
    divergence_patience: int = 5
    var_floor: float = 1e-13
    var_ceil: float = 1e6

    def __post_init__(self):
        if self.max_iterations < 1 or self.outer_iterations < 1:
            raise ValueError("iteration counts must be >= 1")
        if not 0.0 < self.damping <= 1.0 or not 0.0 < self.prior_damping <= 1.0:
            raise ValueError("damping must lie in (0, 1]")


@dataclass
class DetectorResult:
    """Hard decisions plus soft statistics and per-iteration diagnostics."""

    indices: np.ndarray
    symbols: np.ndarray
    bits: np.ndarray
    mean: np.ndarray
    variance: np.ndarray
    iterations: int
    residual_trace: list = field(default_factory=list)
    diverged: bool = False
    mac_count: int = 0
    probs: np.ndarray | None = None

    def errors_against(self, true_bits: np.ndarray) -> int:
        return int(np.sum(self.bits != np.asarray(true_bits)))


class MacCounter:
    def __init__(self):
        self.total = 0

    def add(self, n) -> None:
        self.total += int(n)

    def gemm(self, m, k, n=1) -> None:
        self.total += int(m) * int(k) * int(n)

    def svd(self, m, n) -> None:
        # zgesdd-style cost, constant folded into the cubic term
        self.total += 9 * int(m) * int(n) * int(min(m, n))

    def cholesky_solve(self, n, rhs=1) -> None:
        self.total += int(n) ** 3 // 3 + int(n) ** 2 * int(rhs)

    def fft(self, n, count=1) -> None:
        self.total += int(5 * n * max(np.log2(max(n, 2)), 1.0)) * int(count)


def finalize(mean, var, probs, const, iterations, trace, counter, diverged=False):
    indices = cn.slice_symbols(mean, const)
    return DetectorResult(
        indices=indices,
        symbols=const.points[indices],
        bits=cn.demap_bits(indices, const),
        mean=np.asarray(mean),
        variance=np.broadcast_to(np.asarray(var, dtype=float), np.shape(mean)).copy(),
        iterations=iterations,
        residual_trace=list(trace),
        diverged=diverged,
        mac_count=counter.total,
        probs=probs,
    )


def extrinsic(mean_post, var_post, mean_prior, var_prior, opts: DetectorOptions):
    """Gaussian extrinsic of a posterior against its prior (clipped)."""
    var_post = float(var_post)
    var_prior = float(var_prior)
    inv = 1.0 / max(var_post, opts.var_floor) - 1.0 / max(var_prior, opts.var_floor)
    if inv <= 1.0 / opts.var_ceil:
        v_ext = opts.var_ceil
    else:
        v_ext = min(max(1.0 / inv, opts.var_floor), opts.var_ceil)
    x_ext = v_ext * (mean_post / var_post - mean_prior / var_prior)
    return x_ext, v_ext


class DenseChannel:
    """Dense effective channel with a cached singular value decomposition."""

    def __init__(self, h: np.ndarray, counter: MacCounter | None = None):
        self.h = np.ascontiguousarray(h, dtype=complex)
        self.m, self.n = self.h.shape
        self._svd = None
        self.nnz_per_row = self.n
        self.matvec_macs = self.m * self.n

    def matvec(self, x):
        return self.h @ x

    def rmatvec(self, y):
        return self.h.conj().T @ y

    def dense(self):
        return self.h

    def svd(self, counter: MacCounter):
        if self._svd is None:
            self._svd = np.linalg.svd(self.h, full_matrices=False)
            counter.svd(self.m, self.n)
        return self._svd


class SparseChannel:
    """Sparse effective channel (message passing, matched-filter stages)."""

    def __init__(self, h: sp.spmatrix):
        self.h = sp.csr_matrix(h)
        self.m, self.n = self.h.shape
        self.nnz_per_row = self.h.nnz / max(self.m, 1)
        self.matvec_macs = self.h.nnz

    def matvec(self, x):
        return self.h @ x

    def rmatvec(self, y):
        return self.h.conj().T @ y

    def dense(self):
        return self.h.toarray()


class ComposedChannel:
    """Effective channel factored as rx ∘ H_time ∘ tx.

    ``tx``/``rx`` are vectorized appliers of the modem's symbol/time
    maps (must be unitary for the cross-domain detectors and the exact
    sparse linear stage); ``h_time`` is the banded time-domain channel
    as a scipy sparse matrix.
    """

    def __init__(self, tx, rx, h_time: sp.spmatrix, n_symbols: int, unitary: bool, frame_len: int):
        self.tx = tx
        self.rx = rx
        self.h_time = sp.csr_matrix(h_time)
        self.n = n_symbols
        self.m = n_symbols
        self.frame_len = frame_len
        self.unitary = unitary
        self.nnz_per_row = self.h_time.nnz / max(frame_len, 1)
        self.matvec_macs = self.h_time.nnz + int(10 * n_symbols * max(np.log2(max(n_symbols, 2)), 1))

    def matvec(self, x):
        return self.rx(self.h_time @ self.tx(x))

    def rmatvec(self, y):
        return self.rx(self.h_time.conj().T @ self.tx(y))

    def dense(self):
        return self.rx(np.asarray(self.h_time @ self.tx(np.eye(self.n, dtype=complex))))


def as_channel(h):
    if isinstance(h, (DenseChannel, SparseChannel, ComposedChannel)):
        return h
    if sp.issparse(h):
        return SparseChannel(h)
    return DenseChannel(np.asarray(h))
