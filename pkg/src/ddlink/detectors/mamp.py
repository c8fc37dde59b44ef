"""Memory approximate message passing with a matched-filter linear stage.

The linear estimator never inverts a matrix: it approximates the LMMSE
filter with a truncated matrix Taylor (Neumann) series in the Gram
operator ``S = H H^H``, applied through repeated matched-filter products
(``O(nnz)`` each).  The output is de-correlated using spectral-moment
bookkeeping so its error stays orthogonal to the input error, and an
inverse-variance combination over all preceding linear-stage outputs
(the long-memory step, closed form) feeds the per-symbol MMSE denoiser
used by the orthogonal detector.
"""

from __future__ import annotations

import numpy as np

from ddlink.detectors import constellation as cn
from ddlink.detectors.common import (
    DenseChannel,
    DetectorOptions,
    MacCounter,
    as_channel,
    extrinsic,
    finalize,
)

_EXACT_MOMENT_LIMIT = 320


class SpectralInfo:
    """Eigenvalue bounds and moments of the Gram operator S = H H^H."""

    def __init__(self, chan, opts: DetectorOptions, counter: MacCounter, order: int):
        self.chan = chan
        m = chan.m
        apply_s = lambda v: chan.matvec(chan.rmatvec(v))  # noqa: E731
        cost = 2 * getattr(chan, "matvec_macs", chan.m * chan.n)
        n_mom = 2 * order + 3
        if isinstance(chan, DenseChannel) and min(chan.m, chan.n) <= _EXACT_MOMENT_LIMIT:
            s = np.linalg.svd(chan.h, compute_uv=False)
            counter.svd(chan.m, chan.n)
            lam = np.zeros(m)
            lam[: len(s)] = s**2
            self.lam_max = float(lam.max()) if lam.size else 1.0
            self.lam_min = float(lam.min()) if lam.size else 0.0
            self.moments = np.array([np.mean(lam**j) for j in range(n_mom)])
            return
        rng = np.random.default_rng(opts.probe_seed)
        v = rng.standard_normal(m) + 1j * rng.standard_normal(m)
        lam_max = 1.0
        for _ in range(opts.power_iterations):
            v = apply_s(v)
            counter.add(cost)
            lam_max = float(np.linalg.norm(v))
            v /= max(lam_max, 1e-300)
        self.lam_max = lam_max * 1.02
        w = rng.standard_normal(m) + 1j * rng.standard_normal(m)
        shift = 1.0
        for _ in range(opts.power_iterations):
            w = self.lam_max * w - apply_s(w)
            counter.add(cost)
            shift = float(np.linalg.norm(w))
            w /= max(shift, 1e-300)
        self.lam_min = max(self.lam_max - shift, 0.0)
        probes = (
            rng.integers(0, 2, size=(m, opts.trace_probes)) * 2.0
            - 1.0
            + 1j * (rng.integers(0, 2, size=(m, opts.trace_probes)) * 2.0 - 1.0)
        ) / np.sqrt(2.0)
        moments = np.empty(n_mom)
        u = probes.copy()
        moments[0] = 1.0
        for j in range(1, n_mom):
            u = np.column_stack([apply_s(u[:, k]) for k in range(u.shape[1])])
            counter.add(cost * u.shape[1])
            moments[j] = float(np.mean(np.sum(np.conj(probes) * u, axis=0)).real) / m
        self.moments = moments


def _series_coefficients(order: int, a: float, b: float) -> np.ndarray:
    """Power-basis coefficients of sum_{k<=order} (a + b*lam)^k."""
    coeffs = np.zeros(order + 1)
    term = np.array([1.0])
    for _ in range(order + 1):
        coeffs[: len(term)] += term
        term = np.convolve(term, [a, b])
    return coeffs


class MampLinearStage:
    """De-correlated Taylor-series LMMSE approximation (matched filters only)."""

    def __init__(self, chan, y, noise_var, opts: DetectorOptions, counter: MacCounter):
        self.chan = chan
        self.y = np.asarray(y, dtype=complex)
        self.nv = noise_var
        self.opts = opts
        self.counter = counter
        self.order = opts.taylor_order
        self.info = SpectralInfo(chan, opts, counter, self.order)
        self.cost = 2 * getattr(chan, "matvec_macs", chan.m * chan.n)

    def estimate(self, x_pr, v_pr):
        """De-correlated estimate r = x_pr + W(y - H x_pr)/gain and its error variance."""
        info = self.info
        alpha = 2.0 / max(v_pr * (info.lam_max + info.lam_min) + 2.0 * self.nv, 1e-300)
        a = 1.0 - alpha * self.nv
        b = -alpha * v_pr
        q = alpha * _series_coefficients(self.order, a, b)
        mu = info.moments
        g = v_pr * np.sum(q * mu[1 : len(q) + 1])
        qq = np.convolve(q, q)
        big_a = np.sum(qq * mu[2 : len(qq) + 2])
        big_b = np.sum(qq * mu[1 : len(qq) + 1])
        res = self.y - self.chan.matvec(x_pr)
        acc = alpha * res
        u = res
        for _ in range(self.order):
            u = a * u + b * self.chan.matvec(self.chan.rmatvec(u))
            self.counter.add(self.cost)
            acc = acc + alpha * u
        if abs(g) < 1e-300:
            g = 1e-300
        r = x_pr + (v_pr / g) * self.chan.rmatvec(acc)
        self.counter.add(self.cost)
        ratio = v_pr**2 / g**2
        tau2 = v_pr * max(ratio * big_a - 1.0, 0.0) + self.nv * ratio * big_b
        return r, float(max(tau2, self.opts.var_floor))


def mamp_detect(
    y,
    h,
    noise_var: float,
    const: cn.Constellation,
    opts: DetectorOptions | None = None,
):
    """Detect symbols with the memory matched-filter detector."""
    if noise_var <= 0:
        raise ValueError("mamp requires noise_var > 0")
    opts = opts or DetectorOptions()
    counter = MacCounter()
    chan = as_channel(h)
    y = np.asarray(y, dtype=complex)
    stage = MampLinearStage(chan, y, noise_var, opts, counter)
    n = chan.n

    x_pr = np.zeros(n, dtype=complex)
    v_pr = 1.0
    history = []  # (r_i, 1/tau_i^2) of every preceding linear output
    trace = []
    best = None
    diverged = False
    mean = np.zeros(n, dtype=complex)
    var_mean = 1.0
    probs = None
    iterations = 0

    for t in range(opts.max_iterations):
        iterations = t + 1
        r, tau2 = stage.estimate(x_pr, v_pr)
        if not np.all(np.isfinite(r)) or not np.isfinite(tau2):
            diverged = True
            break
        history.append((r, 1.0 / max(tau2, opts.var_floor)))
        if opts.memory_combining and len(history) > 1:
            weights = np.array([w for _, w in history])
            weights = weights / weights.sum()
            r_bar = np.zeros(n, dtype=complex)
            for (ri, _), w in zip(history, weights):
                r_bar += w * ri
            tau_bar = 1.0 / sum(w for _, w in history)
        else:
            r_bar, tau_bar = r, tau2
        probs, mean, var_sym = cn.posterior(r_bar, max(tau_bar, opts.var_floor), const)
        var_mean = float(np.mean(var_sym))
        counter.add(4 * n * const.size)
        resid = float(np.linalg.norm(y - chan.matvec(mean)))
        trace.append(resid)
        if best is None or resid <= best[0]:
            best = (resid, mean.copy(), var_sym.copy(), probs.copy())
        x_b, v_b = extrinsic(mean, max(var_mean, opts.var_floor), r_bar, tau_bar, opts)
        delta = float(np.linalg.norm(x_b - x_pr) / np.sqrt(n))
        d = opts.prior_damping
        x_pr = d * x_b + (1 - d) * x_pr
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
