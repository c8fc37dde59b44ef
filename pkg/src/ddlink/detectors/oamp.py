"""Orthogonal approximate message passing.

Alternates an exact LMMSE linear estimator with a per-symbol MMSE
denoiser over the constellation, passing Gaussian extrinsic (not
posterior) statistics in both directions; the extrinsic step is what
keeps input and output estimation errors orthogonal.  The linear stage
is computed from a cached factorization: one singular value
decomposition for dense channels, or banded sparse LU solves per
iteration when the channel is given in factored time-domain form with a
unitary symbol map.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ddlink.detectors import constellation as cn
from ddlink.detectors.common import (
    ComposedChannel,
    DenseChannel,
    DetectorError,
    DetectorOptions,
    MacCounter,
    as_channel,
    extrinsic,
    finalize,
)

_EXACT_TRACE_LIMIT = 256


class SvdLmmseStage:
    """LMMSE posterior from a cached SVD of a dense channel."""

    def __init__(self, chan: DenseChannel, y, noise_var, counter: MacCounter):
        self.u, self.s, self.vh = chan.svd(counter)
        self.h = chan.h
        self.y = y
        self.nv = noise_var
        self.n = chan.n
        self.counter = counter

    def posterior(self, x_pr, v_pr):
        res = self.y - self.h @ x_pr
        z = self.u.conj().T @ res
        gain = self.s / (v_pr * self.s**2 + self.nv)
        x_post = x_pr + v_pr * (self.vh.conj().T @ (gain * z))
        self.counter.gemm(self.n, self.n, 3)
        tr = np.sum(self.s**2 / (v_pr * self.s**2 + self.nv))
        v_post = v_pr - (v_pr**2 / self.n) * tr
        return x_post, float(max(v_post.real, 0.0))


class SparseTimeLmmseStage:
    """Exact LMMSE through a factored channel rx ∘ H_time ∘ tx (unitary maps).

    Per iteration: one sparse LU factorization of
    ``v H_t H_t^H + noise_var I`` (banded plus a wrap corner) and a
    handful of solves; the posterior-variance trace uses exact solves at
    small sizes and seeded Hutchinson probes otherwise.
    """

    def __init__(self, chan: ComposedChannel, y, noise_var, counter: MacCounter, opts):
        self.chan = chan
        self.y = y
        self.nv = noise_var
        self.n = chan.n
        self.counter = counter
        self.opts = opts
        self.ht = chan.h_time.tocsc()
        self.gram = (chan.h_time @ chan.h_time.conj().T).tocsc()
        self.frame = chan.frame_len
        rng = np.random.default_rng(opts.probe_seed)
        if self.frame > _EXACT_TRACE_LIMIT:
            self.probes = (
                rng.integers(0, 2, size=(self.frame, opts.trace_probes)) * 2.0
                - 1.0
                + 1j * (rng.integers(0, 2, size=(self.frame, opts.trace_probes)) * 2.0 - 1.0)
            ) / np.sqrt(2.0)
        else:
            self.probes = None

    def posterior(self, x_pr, v_pr):
        res = self.y - self.chan.matvec(x_pr)
        res_t = self.chan.tx(res)
        c_mat = (v_pr * self.gram + self.nv * sp.identity(self.frame, format="csc")).tocsc()
        lu = spla.splu(c_mat)
        band = max(int(self.chan.nnz_per_row), 1)
        self.counter.add(self.frame * band * band)
        sol = lu.solve(res_t)
        x_post = x_pr + v_pr * self.chan.rx(self.ht.conj().T @ sol)
        self.counter.add(3 * self.ht.nnz)
        self.counter.fft(self.n, 2)
        if self.probes is None:
            hd = self.ht.toarray()
            tr = float(np.sum(np.conj(hd) * lu.solve(hd)).real)
            self.counter.add(self.frame**2 * band)
        else:
            hz = self.ht.conj().T @ self.probes
            tr = float(np.mean(np.sum(np.conj(hz) * (self.ht.conj().T @ lu.solve(self.probes)), axis=0)).real)
            self.counter.add(2 * self.ht.nnz * self.probes.shape[1])
        v_post = v_pr - (v_pr**2 / self.n) * tr
        return x_post, float(max(v_post, 0.0))


def make_stage(chan, y, noise_var, counter, opts):
    if isinstance(chan, ComposedChannel) and chan.unitary:
        return SparseTimeLmmseStage(chan, y, noise_var, counter, opts)
    if isinstance(chan, ComposedChannel):
        return SvdLmmseStage(DenseChannel(chan.dense()), y, noise_var, counter)
    return SvdLmmseStage(chan, y, noise_var, counter)


def oamp_detect(
    y,
    h,
    noise_var: float,
    const: cn.Constellation,
    opts: DetectorOptions | None = None,
):
    """Detect symbols with orthogonal message passing.

    ``h`` may be a dense matrix, or a factored
    :class:`~ddlink.detectors.common.ComposedChannel` whose exact sparse
    path produces the same iterates as the dense route.
    """
    if noise_var <= 0:
        raise ValueError("oamp requires noise_var > 0")
    opts = opts or DetectorOptions()
    counter = MacCounter()
    chan = as_channel(h)
    y = np.asarray(y, dtype=complex)
    stage = make_stage(chan, y, noise_var, counter, opts)
    n = chan.n

    x_pr = np.zeros(n, dtype=complex)
    v_pr = 1.0
    trace = []
    best = None
    diverged = False
    mean = np.zeros(n, dtype=complex)
    var_mean = 1.0
    probs = None
    iterations = 0

    for t in range(opts.max_iterations):
        iterations = t + 1
        x_post, v_post = stage.posterior(x_pr, v_pr)
        if not np.all(np.isfinite(x_post)) or not np.isfinite(v_post):
            if t == 0:
                raise DetectorError("linear stage produced a non-finite state")
            diverged = True
            break
        x_a, v_a = extrinsic(x_post, v_post, x_pr, v_pr, opts)
        probs, mean, var_sym = cn.posterior(x_a, v_a, const)
        var_mean = float(np.mean(var_sym))
        counter.add(4 * n * const.size)
        resid = float(np.linalg.norm(y - chan.matvec(mean)))
        trace.append(resid)
        if best is None or resid <= best[0]:
            best = (resid, mean.copy(), var_sym.copy(), probs.copy())
        x_b, v_b = extrinsic(mean, max(var_mean, opts.var_floor), x_a, v_a, opts)
        delta = float(np.linalg.norm(x_b - x_pr) / np.sqrt(n))
        d = opts.prior_damping
        x_pr = d * x_b + (1 - d) * x_pr
        v_pr = d * v_b + (1 - d) * v_pr
        if delta < opts.tol:
            break
        if len(trace) > opts.divergence_patience and all(
            trace[-k] > trace[-k - 1] for k in range(1, opts.divergence_patience + 1)
        ):
            diverged = True
            break

    if diverged and best is not None:
        _, mean, var_sym, probs = best
        var_mean = float(np.mean(var_sym))
    return finalize(mean, var_mean, probs, const, iterations, trace, counter, diverged)
