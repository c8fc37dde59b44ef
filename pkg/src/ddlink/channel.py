"""Doubly-selective fading channel: generation, sampling, propagation.

The physical channel is a sum of discrete propagation paths, each with a
complex gain, a continuous (off-grid) delay and a Doppler shift.  The
sampled view folds the combined transmit/receive filter response into a
per-output-sample tap table ``h[c, p]`` (output sample ``c``, delay tap
``p``); with a prefix at least as long as the channel memory the
post-strip input/output map is the banded circular-shift matrix built by
:func:`assemble_hch`.

Phase convention: Doppler phases are referenced to the first body sample
of a frame (time zero), so tap tables for prefixed streams are evaluated
at negative offsets during propagation.
"""

from __future__ import annotations

import dataclasses
import io
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

SPEED_OF_LIGHT = 299_792_458.0
DEFAULT_CARRIER_HZ = 4e9


@dataclass(frozen=True)
class ChannelSpec:
    """Multipath channel realization plus its sampling context.

    ``prc`` is the continuous combined transmit+matched filter response
    (any callable with a ``support`` attribute); ``ts`` the sample
    period in seconds; ``gamma`` the oversampling factor relative to the
    symbol rate (kept for provenance).
    """

    gains: np.ndarray
    delays: np.ndarray
    dopplers: np.ndarray
    seed: int | None = None
    ts: float | None = None
    gamma: int = 1
    prc: object | None = None
    latency: int = 0  # receiver timing advance folded into prc, in samples

    @property
    def n_paths(self) -> int:
        return len(self.gains)

    def configured(self, ts: float, prc, gamma: int = 1, latency: int = 0) -> "ChannelSpec":
        """Attach a sample period and combined filter response."""
        return dataclasses.replace(
            self, ts=float(ts), prc=prc, gamma=int(gamma), latency=int(latency)
        )

    @property
    def memory(self) -> int:
        """Channel memory P in samples: delay spread plus filter tail."""
        _require_sampling(self)
        tail = max(self.prc.support[1], 0.0)
        return int(np.floor((np.max(self.delays, initial=0.0) + tail) / self.ts)) + 1


def doppler_max(speed_kmh: float, fc_hz: float = DEFAULT_CARRIER_HZ) -> float:
    """Maximum Doppler shift in Hz for a mobile speed and carrier frequency."""
    return fc_hz * (speed_kmh / 3.6) / SPEED_OF_LIGHT


def draw_channel(
    l_paths: int,
    tau_max: float,
    speed_kmh: float,
    fc_hz: float = DEFAULT_CARRIER_HZ,
    seed: int = 0,
) -> ChannelSpec:
    """Draw a random multipath realization.

    Per-path complex Gaussian gains with power ``1/L``, delays uniform
    on ``[0, tau_max]`` (continuous, deliberately off-grid), Dopplers
    ``nu_max * cos(theta)`` with the arrival angle uniform on
    ``[-pi, pi]``.  A fixed seed reproduces the realization bit-exactly:
    draws come from a seeded PCG64 generator in a fixed order (gains,
    then delays, then angles).
    """
    if l_paths < 1:
        raise ValueError("need at least one path")
    if tau_max < 0 or speed_kmh < 0:
        raise ValueError("tau_max and speed must be non-negative")
    rng = np.random.default_rng(seed)
    gains = (rng.standard_normal(l_paths) + 1j * rng.standard_normal(l_paths)) / np.sqrt(
        2.0 * l_paths
    )
    delays = rng.uniform(0.0, tau_max, size=l_paths)
    theta = rng.uniform(-np.pi, np.pi, size=l_paths)
    dopplers = doppler_max(speed_kmh, fc_hz) * np.cos(theta)
    return ChannelSpec(gains=gains, delays=delays, dopplers=dopplers, seed=seed)


def to_record(spec: ChannelSpec) -> str:
    """Serialize a realization to a line-delimited record (bit-exact replay)."""
    buf = io.StringIO()
    buf.write(f"seed={spec.seed!r} L={spec.n_paths}\n")
    for g, tau, nu in zip(spec.gains, spec.delays, spec.dopplers):
        buf.write(
            f"gain_re={float(g.real)!r} gain_im={float(g.imag)!r} "
            f"tau_s={float(tau)!r} doppler_hz={float(nu)!r}\n"
        )
    return buf.getvalue()


def from_record(text: str) -> ChannelSpec:
    """Parse a record produced by :func:`to_record`."""
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    head = dict(item.split("=", 1) for item in lines[0].split())
    n = int(head["L"])
    seed = None if head["seed"] == "None" else int(head["seed"])
    if len(lines) - 1 != n:
        raise ValueError(f"expected {n} path lines, found {len(lines) - 1}")
    gains, delays, dopplers = [], [], []
    for ln in lines[1:]:
        fields = dict(item.split("=", 1) for item in ln.split())
        gains.append(float(fields["gain_re"]) + 1j * float(fields["gain_im"]))
        delays.append(float(fields["tau_s"]))
        dopplers.append(float(fields["doppler_hz"]))
    return ChannelSpec(
        gains=np.array(gains), delays=np.array(delays), dopplers=np.array(dopplers), seed=seed
    )


@dataclass(frozen=True)
class ResponseTable:
    """Sampled channel taps ``h[c, p]`` for c = offset..offset+length-1."""

    taps: np.ndarray  # (length, P)
    ts: float
    offset: int = 0

    @property
    def length(self) -> int:
        return self.taps.shape[0]

    @property
    def p(self) -> int:
        return self.taps.shape[1]


def _require_sampling(spec: ChannelSpec) -> None:
    if spec.ts is None or spec.prc is None:
        raise ValueError("ChannelSpec needs ts and prc; call spec.configured(...) first")


def discrete_response(spec: ChannelSpec, length: int, offset: int = 0) -> ResponseTable:
    """Evaluate the sampled tap table over ``length`` output samples.

    ``h[c, p] = sum_i g_i exp(2j pi nu_i (c - p) ts) prc(p ts - tau_i)``
    with ``c`` counted from ``offset`` (Doppler phase zero at c = 0).
    """
    _require_sampling(spec)
    if length < 1:
        raise ValueError("length must be >= 1")
    p_taps = spec.memory
    p_idx = np.arange(p_taps)
    # (L, P) filter samples at each path's fractional delay
    t_args = p_idx[None, :] * spec.ts - spec.delays[:, None]
    g_ip = np.vstack([spec.prc(row) for row in t_args])
    if not np.any(g_ip):
        raise ValueError("combined filter response is identically zero on the tap grid")
    a_ip = spec.gains[:, None] * g_ip * np.exp(-2j * np.pi * spec.dopplers[:, None] * p_idx[None, :] * spec.ts)
    c_idx = np.arange(offset, offset + length)
    e_ci = np.exp(2j * np.pi * np.outer(c_idx, spec.dopplers) * spec.ts)
    return ResponseTable(taps=e_ci @ a_ip, ts=spec.ts, offset=offset)


@dataclass(frozen=True)
class TimeChannelMatrix:
    """Banded time-domain channel matrix with optional circular wrap.

    Row ``c`` holds ``h[c, p]`` at column ``(c - p) mod n`` (circular) or
    ``c - p`` when non-negative (linear, prefix-free streams).  With a
    chirp-periodic prefix the wrapped entries additionally carry the
    quadratic wrap phase parameterized by ``cpp_c1``.
    """

    table: ResponseTable
    wrap: str = "circular"
    cpp_c1: float | None = None

    @property
    def size(self) -> int:
        return self.table.length

    @property
    def nnz_per_row(self) -> float:
        return min(self.table.p, self.size)

    def _entries(self):
        n = self.size
        taps = self.table.taps
        p_count = min(taps.shape[1], n)
        rows = np.repeat(np.arange(n), p_count)
        p_idx = np.tile(np.arange(p_count), n)
        diff = rows - p_idx
        vals = taps[:, :p_count].flatten()
        if self.wrap == "linear":
            keep = diff >= 0
            return rows[keep], diff[keep], vals[keep]
        cols = diff % n
        if self.cpp_c1 is not None:
            wrapped = diff < 0
            vals = vals.copy()
            vals[wrapped] *= np.exp(-2j * np.pi * self.cpp_c1 * (n**2 + 2.0 * n * diff[wrapped]))
        return rows, cols, vals

    def dense(self) -> np.ndarray:
        out = np.zeros((self.size, self.size), dtype=complex)
        rows, cols, vals = self._entries()
        np.add.at(out, (rows, cols), vals)
        return out

    def sparse(self) -> sp.csr_matrix:
        rows, cols, vals = self._entries()
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.size, self.size))

    def matvec(self, s: np.ndarray) -> np.ndarray:
        n = self.size
        taps = self.table.taps
        out = np.zeros(n, dtype=complex)
        for p in range(min(taps.shape[1], n)):
            if self.wrap == "linear":
                out[p:] += taps[p:, p] * s[: n - p]
            else:
                shifted = np.roll(s, p)
                if self.cpp_c1 is not None and p > 0:
                    shifted = shifted.copy()
                    diff = np.arange(p) - p
                    shifted[:p] *= np.exp(-2j * np.pi * self.cpp_c1 * (n**2 + 2.0 * n * diff))
                out += taps[:, p] * shifted
        return out


def assemble_hch(
    table: ResponseTable, wrap: str = "circular", cpp_c1: float | None = None
) -> TimeChannelMatrix:
    """Wrap a tap table into its banded (circular-shift form) matrix."""
    if wrap not in ("circular", "linear"):
        raise ValueError(f"wrap must be 'circular' or 'linear', got {wrap!r}")
    return TimeChannelMatrix(table=table, wrap=wrap, cpp_c1=cpp_c1)


def channel_matrix(
    spec: ChannelSpec,
    length: int,
    offset: int = 0,
    wrap: str = "circular",
    cpp_c1: float | None = None,
) -> TimeChannelMatrix:
    """Convenience: sample the response and assemble the channel matrix."""
    return assemble_hch(discrete_response(spec, length, offset=offset), wrap=wrap, cpp_c1=cpp_c1)


def propagate(spec: ChannelSpec, frame, noise_var: float = 0.0, rng=None):
    """Send a (possibly prefixed) frame through the channel.

    Performs the linear time-varying convolution over the full sample
    stream (zero initial state), then adds complex AWGN of per-sample
    variance ``noise_var``.  ``frame`` is any object with ``samples``
    and ``ref_index`` attributes (see ``modems.TimeFrame``); a bare
    array is treated as having its reference at sample 0.

    The frame's prefix must cover the channel memory: the circular model
    assembled by :func:`assemble_hch` is only valid in that regime, so a
    shorter prefix is rejected outright.
    """
    _require_sampling(spec)
    samples = np.asarray(getattr(frame, "samples", frame))
    ref = int(getattr(frame, "ref_index", 0))
    prefixed = getattr(frame, "prefix_kind", "none") != "none"
    if prefixed and getattr(frame, "prefix_len", 0) < spec.memory - 1:
        raise ValueError(
            f"prefix of {frame.prefix_len} samples is shorter than the channel "
            f"memory of {spec.memory} taps; the circular model would be invalid"
        )
    table = discrete_response(spec, len(samples), offset=-ref)
    out = np.zeros(len(samples), dtype=complex)
    for p in range(min(table.p, len(samples))):
        out[p:] += table.taps[p:, p] * samples[: len(samples) - p]
    if noise_var > 0.0:
        if rng is None:
            raise ValueError("noise_var > 0 requires an rng")
        noise = rng.standard_normal(len(out)) + 1j * rng.standard_normal(len(out))
        out = out + np.sqrt(noise_var / 2.0) * noise
    if dataclasses.is_dataclass(frame):
        return dataclasses.replace(frame, samples=out)
    return out
