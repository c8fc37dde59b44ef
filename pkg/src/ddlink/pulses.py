"""Pulse shaping, prototype filters, and combined filter responses.

Sampled pulses (:class:`Pulse`) feed the modulators and the oversampled
spectrum experiments; continuous-time responses
(:class:`ContinuousFilter`, :func:`cascade`) feed the sampled channel
model, which needs the combined transmit/receive filter chain at
off-grid delays.

Energy conventions (documented per kind):

* ``rect``      unit amplitude over its duration, so the gain diagonal of a
                full-length rectangular pulse is the identity.
* ``srrc``      unit discrete energy, ``sum |taps|^2 = 1``; the matched
                cascade then peaks at exactly 1.
* ``hermite``   raw prototype samples; the printed coefficient set already
                integrates to unit continuous energy.
* ``oddm_u``    plain sum of shifted unit-energy copies (energy = number of
                copies); the modulator applies the ``1/sqrt(N)`` share.
* ``fir_lowpass`` unit discrete energy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import hermite as npherm
from scipy.interpolate import CubicSpline
from scipy.signal import fftconvolve, firwin

HERMITE_COEFFS = {
    0: 1.412692577,
    4: -3.0145e-3,
    8: -8.8041e-6,
    12: -2.2611e-9,
    16: -4.4570e-15,
    20: 1.8633e-16,
}

_PULSE_KINDS = ("rect", "srrc", "hermite", "oddm_u", "fir_lowpass")


@dataclass(frozen=True)
class Pulse:
    """A sampled pulse: taps at uniform spacing, time origin at ``taps[delay]``."""

    kind: str
    taps: np.ndarray
    sample_period: float
    delay: int

    @property
    def duration(self) -> float:
        return len(self.taps) * self.sample_period

    @property
    def support(self) -> tuple[float, float]:
        t0 = -self.delay * self.sample_period
        return (t0, t0 + (len(self.taps) - 1) * self.sample_period)

    def at(self, t: float) -> complex:
        """Pulse value at time ``t``; requires ``t`` on the tap grid."""
        pos = t / self.sample_period + self.delay
        idx = round(pos)
        if abs(pos - idx) > 1e-6:
            raise ValueError(f"time {t!r} is not commensurate with the tap grid")
        if idx < 0 or idx >= len(self.taps):
            return 0.0
        return complex(self.taps[idx])


def srrc_amplitude(t, beta: float) -> np.ndarray:
    """Square-root raised cosine amplitude, unit symbol period, unnormalized.

    The removable singularities at ``t = 0`` and ``|t| = 1/(4 beta)`` use
    their analytic limits so no tap is ever NaN.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if beta == 0.0:
        return np.sinc(t)
    out = np.empty_like(t)
    zero = np.isclose(t, 0.0, atol=1e-12)
    sing = np.isclose(np.abs(t), 1.0 / (4.0 * beta), rtol=1e-12, atol=1e-12)
    gen = ~(zero | sing)
    out[zero] = 1.0 - beta + 4.0 * beta / np.pi
    out[sing] = (beta / np.sqrt(2.0)) * (
        (1.0 + 2.0 / np.pi) * np.sin(np.pi / (4.0 * beta))
        + (1.0 - 2.0 / np.pi) * np.cos(np.pi / (4.0 * beta))
    )
    tg = t[gen]
    out[gen] = (
        np.sin(np.pi * tg * (1.0 - beta)) + 4.0 * beta * tg * np.cos(np.pi * tg * (1.0 + beta))
    ) / (np.pi * tg * (1.0 - (4.0 * beta * tg) ** 2))
    return out


def raised_cosine(t, beta: float) -> np.ndarray:
    """Raised-cosine amplitude with unit peak and Nyquist zero crossings."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    num = np.sinc(t) * np.cos(np.pi * beta * t)
    den = 1.0 - (2.0 * beta * t) ** 2
    sing = np.isclose(den, 0.0, atol=1e-12)
    den = np.where(sing, 1.0, den)
    out = num / den
    if beta > 0.0:
        out[sing] = (np.pi / 4.0) * np.sinc(1.0 / (2.0 * beta))
    return out


def hermite_amplitude(t, t0: float) -> np.ndarray:
    """FBMC prototype built from even-order Hermite polynomial terms."""
    t = np.asarray(t, dtype=float)
    coef = np.zeros(max(HERMITE_COEFFS) + 1)
    for order, a in HERMITE_COEFFS.items():
        coef[order] = a
    u = t / t0
    return np.exp(-2.0 * np.pi * u**2) * npherm.hermval(2.0 * np.sqrt(np.pi) * u, coef) / np.sqrt(t0)


def make_pulse(kind: str, **params) -> Pulse:
    """Build a sampled pulse.

    Parameters by kind:

    * ``rect``:       ``t`` (duration, s), ``sps`` (taps over the duration).
    * ``srrc``:       ``beta``, ``span`` (symbols), ``sps``,
                      ``symbol_period`` (s, default 1.0).
    * ``hermite``:    ``t0`` (s), ``sample_period`` (s); support is
                      ``[-3 t0, 3 t0]``.
    * ``oddm_u``:     ``beta``, ``q`` (half support of the underlying
                      square-root Nyquist pulse, in symbols), ``n`` copies
                      spaced ``m`` symbols apart, ``sps``,
                      ``symbol_period`` (s, default 1.0).
    * ``fir_lowpass``: see :func:`bandlimit_filter`.
    """
    if kind not in _PULSE_KINDS:
        raise ValueError(f"unknown pulse kind {kind!r}; expected one of {_PULSE_KINDS}")
    if kind == "rect":
        duration = float(params["t"])
        sps = int(params["sps"])
        if sps < 1:
            raise ValueError("sps must be >= 1")
        taps = np.ones(sps, dtype=complex)
        return Pulse("rect", taps, duration / sps, 0)
    if kind == "srrc":
        beta = float(params["beta"])
        span = int(params["span"])
        sps = int(params["sps"])
        tsym = float(params.get("symbol_period", 1.0))
        _check_srrc(beta, span, sps)
        half = span * sps // 2
        t = (np.arange(span * sps + 1) - half) / sps
        taps = srrc_amplitude(t, beta).astype(complex)
        taps /= np.linalg.norm(taps)
        return Pulse("srrc", taps, tsym / sps, half)
    if kind == "hermite":
        t0 = float(params["t0"])
        sp = float(params["sample_period"])
        half = int(round(3.0 * t0 / sp))
        t = (np.arange(2 * half + 1) - half) * sp
        taps = hermite_amplitude(t, t0).astype(complex)
        return Pulse("hermite", taps, sp, half)
    if kind == "oddm_u":
        beta = float(params["beta"])
        q = int(params["q"])
        n = int(params["n"])
        m = int(params["m"])
        sps = int(params["sps"])
        tsym = float(params.get("symbol_period", 1.0))
        if q < 1:
            raise ValueError("q must be >= 1")
        if 2 * q >= m:
            raise ValueError(f"truncated support 2q = {2 * q} must be smaller than m = {m}")
        g = _truncated_root_nyquist(beta, q, sps)
        length = (n - 1) * m * sps + len(g)
        taps = np.zeros(length, dtype=complex)
        for copy in range(n):
            start = copy * m * sps
            taps[start : start + len(g)] += g
        return Pulse("oddm_u", taps, tsym / sps, q * sps - 1)
    # fir_lowpass
    return bandlimit_filter(
        float(params["bandwidth"]),
        int(params["span"]),
        int(params["sps"]),
        symbol_rate=float(params.get("symbol_rate", 1.0)),
    )


def _check_srrc(beta: float, span: int, sps: int) -> None:
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"roll-off must lie in [0, 1], got {beta}")
    if span <= 0:
        raise ValueError(f"span must be positive, got {span}")
    if sps < 1:
        raise ValueError(f"sps must be >= 1, got {sps}")


def _truncated_root_nyquist(beta: float, q: int, sps: int) -> np.ndarray:
    """SRRC truncated to (-q, q) symbols, unit discrete energy; 2q*sps - 1 taps."""
    t = (np.arange(2 * q * sps - 1) - (q * sps - 1)) / sps
    g = srrc_amplitude(t, beta).astype(complex)
    return g / np.linalg.norm(g)


def sample_gain_diag(pulse: Pulse, m: int, t_frame: float) -> np.ndarray:
    """Diagonal gain entries ``g(k t_frame / m)`` for k = 0..m-1.

    Valid only for pulses no longer than ``t_frame``; longer pulses must
    go through the full-convolution path instead.
    """
    if pulse.duration > t_frame * (1.0 + 1e-9):
        raise ValueError(
            f"pulse duration {pulse.duration:.3e} exceeds the slot duration {t_frame:.3e}"
        )
    step = t_frame / m
    return np.array([pulse.at(k * step) for k in range(m)], dtype=complex)


def bandlimit_filter(bandwidth: float, span: int, sps: int, symbol_rate: float = 1.0) -> Pulse:
    """Linear-phase band-limiting FIR: windowed sinc with a Hamming window.

    Designed at the oversampled rate ``sps * symbol_rate`` with cutoff at
    ``bandwidth / 2``; taps are normalized to unit energy so the cascade
    with the matched (time-reversed conjugate) filter peaks at 1.
    """
    fs = sps * symbol_rate
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    if bandwidth > fs / 2:
        raise ValueError(
            f"cutoff {bandwidth / 2:g} above the design Nyquist limit (fs = {fs:g}); "
            "increase sps or reduce bandwidth"
        )
    if span <= 0:
        raise ValueError("span must be positive")
    numtaps = span * sps + 1
    taps = firwin(numtaps, bandwidth / 2.0, window="hamming", fs=fs).astype(complex)
    taps /= np.linalg.norm(taps)
    return Pulse("fir_lowpass", taps, 1.0 / fs, numtaps // 2)


def matched(pulse: Pulse) -> Pulse:
    """Matched filter: time-reversed conjugate of the pulse."""
    n = len(pulse.taps)
    return Pulse(pulse.kind, pulse.taps[::-1].conj(), pulse.sample_period, n - 1 - pulse.delay)


class ContinuousFilter:
    """A continuous-time impulse response on a finite support.

    Wraps either an analytic function or a cubic-spline fit of a finely
    sampled response; evaluates to zero outside the support.  Instances
    are immutable and safe to share.
    """

    def __init__(self, func, t_min: float, t_max: float):
        self._func = func
        self.t_min = float(t_min)
        self.t_max = float(t_max)

    def __call__(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros(t.shape, dtype=complex)
        inside = (t >= self.t_min) & (t <= self.t_max)
        if np.any(inside):
            out[inside] = self._func(t[inside])
        return out

    @property
    def support(self) -> tuple[float, float]:
        return (self.t_min, self.t_max)


def srrc_filter(beta: float, span: int, symbol_period: float = 1.0) -> ContinuousFilter:
    """Continuous SRRC over ``span`` symbols, unit continuous energy."""
    half = span / 2.0 * symbol_period
    return ContinuousFilter(
        lambda t: srrc_amplitude(t / symbol_period, beta) / np.sqrt(symbol_period),
        -half,
        half,
    )


def raised_cosine_filter(beta: float, span: int, symbol_period: float = 1.0) -> ContinuousFilter:
    """Continuous raised cosine (the SRRC matched cascade), unit peak."""
    half = span * symbol_period
    return ContinuousFilter(lambda t: raised_cosine(t / symbol_period, beta), -half, half)


def windowed_sinc_filter(
    bandwidth: float, span: int, symbol_rate: float = 1.0
) -> ContinuousFilter:
    """Continuous counterpart of :func:`bandlimit_filter`, unit continuous energy."""
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    half = span / (2.0 * symbol_rate)
    fc = bandwidth / 2.0

    def shape(t):
        window = 0.54 + 0.46 * np.cos(np.pi * t / half)
        return 2.0 * fc * np.sinc(2.0 * fc * t) * window

    # normalize to unit energy on the truncated support
    tt = np.linspace(-half, half, 4097)
    energy = np.trapezoid(np.abs(shape(tt)) ** 2, tt)
    scale = 1.0 / np.sqrt(energy)
    return ContinuousFilter(lambda t: scale * shape(t), -half, half)


def scaled(filt: ContinuousFilter, gain: float) -> ContinuousFilter:
    """Scale a continuous response by a constant gain."""
    return ContinuousFilter(lambda t: gain * filt(t), filt.support[0], filt.support[1])


def shifted(filt: ContinuousFilter, t0: float) -> ContinuousFilter:
    """Delay a continuous response by ``t0`` (positive = later)."""
    lo, hi = filt.support
    return ContinuousFilter(lambda t: filt(t - t0), lo + t0, hi + t0)


class KroneckerResponse:
    """Idealized on-grid response: 1 at t = 0, 0 elsewhere (within tolerance)."""

    def __init__(self, tol: float):
        self.tol = float(tol)
        self.t_min = -self.tol
        self.t_max = self.tol

    def __call__(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return (np.abs(t) <= self.tol).astype(complex)

    @property
    def support(self) -> tuple[float, float]:
        return (self.t_min, self.t_max)


def cascade(filters, step: float) -> ContinuousFilter:
    """Numerically convolve continuous filters and spline-fit the result.

    ``step`` sets the fine sampling grid; it should be well below the
    narrowest feature of the component responses (1/32 of the symbol
    period is ample for the smooth filters used here).
    """
    filters = list(filters)
    if not filters:
        raise ValueError("cascade requires at least one filter")
    if len(filters) == 1:
        f = filters[0]
        return ContinuousFilter(lambda t: f(t), f.support[0], f.support[1])

    def sampled(f):
        lo, hi = f.support
        k0 = int(np.floor(lo / step))
        k1 = int(np.ceil(hi / step))
        kk = np.arange(k0, k1 + 1)
        return kk[0], f(kk * step)

    k_acc, vals = sampled(filters[0])
    for f in filters[1:]:
        k0, v = sampled(f)
        vals = fftconvolve(vals, v) * step
        k_acc = k_acc + k0
    times = (k_acc + np.arange(len(vals))) * step
    if np.max(np.abs(vals.imag)) < 1e-12 * max(np.max(np.abs(vals.real)), 1e-300):
        spline = CubicSpline(times, vals.real)
        func = lambda t: spline(t).astype(complex)  # noqa: E731
    else:
        sr = CubicSpline(times, vals.real)
        si = CubicSpline(times, vals.imag)
        func = lambda t: sr(t) + 1j * si(t)  # noqa: E731
    return ContinuousFilter(func, times[0], times[-1])
