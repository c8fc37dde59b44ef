"""Cross-domain iterative detection.

Outer loop between the time domain, where the channel matrix stays
banded-sparse even for off-grid Doppler, and the symbol domain, where
the constellation constraint lives.  The time-domain linear stage is
either the exact banded LMMSE (inner="oamp") or the memory
matched-filter series (inner="mamp"); extrinsic means/variances cross
the unitary modem transform in both directions each outer iteration.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ddlink.detectors import constellation as cn
from ddlink.detectors.common import (
    ComposedChannel,
    DetectorOptions,
    MacCounter,
    extrinsic,
    finalize,
)
from ddlink.detectors.mamp import MampLinearStage

_EXACT_TRACE_LIMIT = 256


class _TimeChannel:
    """Adapter exposing the time-domain channel to the memory stage."""

    def __init__(self, h_time: sp.csr_matrix):
        self.h = h_time
        self.m, self.n = h_time.shape
        self.matvec_macs = h_time.nnz

    def matvec(self, x):
        return self.h @ x

    def rmatvec(self, y):
        return self.h.conj().T @ y


class _TimeLmmse:
    """Exact banded LMMSE posterior in the time domain."""

    def __init__(self, h_time, y_time, noise_var, counter, opts):
        self.h = h_time.tocsc()
        self.gram = (h_time @ h_time.conj().T).tocsc()
        self.y = y_time
        self.nv = noise_var
        self.counter = counter
        self.opts = opts
        self.frame = h_time.shape[0]
        rng = np.random.default_rng(opts.probe_seed)
        if self.frame > _EXACT_TRACE_LIMIT:
            self.probes = (
                rng.integers(0, 2, size=(self.frame, opts.trace_probes)) * 2.0
                - 1.0
                + 1j * (rng.integers(0, 2, size=(self.frame, opts.trace_probes)) * 2.0 - 1.0)
            ) / np.sqrt(2.0)
        else:
            self.probes = None

    def posterior(self, s_pr, v_pr):
        band = max(int(self.h.nnz / self.frame), 1)
        c_mat = (v_pr * self.gram + self.nv * sp.identity(self.frame, format="csc")).tocsc()
        lu = spla.splu(c_mat)
        self.counter.add(self.frame * band * band)
        res = self.y - self.h @ s_pr
        s_post = s_pr + v_pr * (self.h.conj().T @ lu.solve(res))
        self.counter.add(3 * self.h.nnz)
        if self.probes is None:
            hd = self.h.toarray()
            tr = float(np.sum(np.conj(hd) * lu.solve(hd)).real)
        else:
            tr = float(
                np.mean(
                    np.sum(
                        np.conj(self.h.conj().T @ self.probes)
                        * (self.h.conj().T @ lu.solve(self.probes)),
                        axis=0,
                    )
                ).real
            )
            self.counter.add(2 * self.h.nnz * self.probes.shape[1])
        v_post = v_pr - (v_pr**2 / self.frame) * tr
        return s_post, float(max(v_post, 0.0))


def cross_domain_detect(
    y_time,
    channel: ComposedChannel,
    noise_var: float,
    const: cn.Constellation,
    opts: DetectorOptions | None = None,
):
    """Detect symbols by iterating between time and symbol domains.

    ``y_time`` is the received body stream (prefix already stripped);
    ``channel`` must carry a unitary symbol/time map, which preserves
    the whiteness of extrinsic errors across the domain hop.
    """
    if not isinstance(channel, ComposedChannel):
        raise ValueError("cross-domain detection needs the factored channel form")
    if not channel.unitary:
        raise ValueError("cross-domain detection requires a unitary modem transform")
    if noise_var <= 0:
        raise ValueError("cross-domain detection requires noise_var > 0")
    opts = opts or DetectorOptions()
    counter = MacCounter()
    y_time = np.asarray(y_time, dtype=complex)
    n = channel.n
    frame = channel.frame_len
    if len(y_time) != frame:
        raise ValueError(f"time stream of {len(y_time)} samples, expected {frame}")

    if opts.inner == "oamp":
        stage = _TimeLmmse(channel.h_time, y_time, noise_var, counter, opts)
        time_estimate = None
    elif opts.inner == "mamp":
        tchan = _TimeChannel(channel.h_time)
        mstage = MampLinearStage(tchan, y_time, noise_var, opts, counter)
        time_estimate = mstage.estimate
        stage = None
    else:
        raise ValueError(f"unknown inner stage {opts.inner!r}")

    s_pr = np.zeros(frame, dtype=complex)
    v_pr = 1.0
    trace = []
    best = None
    diverged = False
    mean = np.zeros(n, dtype=complex)
    var_mean = 1.0
    probs = None
    iterations = 0

    for t in range(opts.outer_iterations):
        iterations = t + 1
        if stage is not None:
            s_post, v_post = stage.posterior(s_pr, v_pr)
            s_ext, v_ext = extrinsic(s_post, v_post, s_pr, v_pr, opts)
        else:
            s_ext, v_ext = time_estimate(s_pr, v_pr)  # already de-correlated
        # unitary hop to the symbol domain preserves the error statistics
        x_obs = channel.rx(s_ext)
        counter.fft(n)
        probs, mean, var_sym = cn.posterior(x_obs, max(v_ext, opts.var_floor), const)
        var_mean = float(np.mean(var_sym))
        counter.add(4 * n * const.size)
        resid = float(np.linalg.norm(y_time - channel.h_time @ channel.tx(mean)))
        trace.append(resid)
        if best is None or resid <= best[0]:
            best = (resid, mean.copy(), var_sym.copy(), probs.copy())
        x_b, v_b = extrinsic(mean, max(var_mean, opts.var_floor), x_obs, v_ext, opts)
        s_b = channel.tx(x_b)
        counter.fft(n)
        delta = float(np.linalg.norm(s_b - s_pr) / np.sqrt(frame))
        d = opts.prior_damping
        s_pr = d * s_b + (1 - d) * s_pr
        v_pr = max(d * v_b + (1 - d) * v_pr, opts.var_floor)
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
