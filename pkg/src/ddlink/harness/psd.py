"""Power spectral density estimation for the oversampled transmit signals.

Each scheme is synthesized at the oversampling factor from random
constellation frames; the spectrum estimate is a single-segment
periodogram with a Hamming window spanning the whole frame, averaged
over independent frames, with samples normalized to unit average power
so the in-band spectral mass sums to unit transmit power.
"""

from __future__ import annotations

import zlib

import numpy as np

from ddlink import pulses as pl
from ddlink import transforms as tr
from ddlink.detectors import by_name, map_bits
from ddlink.harness.config import ConfigError, ExperimentConfig

PSD_SCHEMES = ("otfs_rect", "osdm", "vofdm", "otfs_srrc", "oddm")
PSD_BINS = 4096


def synthesize(scheme: str, cfg: ExperimentConfig, rng) -> np.ndarray:
    """One oversampled random frame of the scheme's transmit signal."""
    m, n, g = cfg.m, cfg.n, cfg.oversampling
    const = by_name(cfg.constellation)
    x = map_bits(rng.integers(0, 2, m * n * const.bits_per_symbol), const).reshape(m, n, order="F")
    if scheme in ("otfs_rect", "osdm", "vofdm"):
        # continuous-time rectangular-pulse synthesis: per-slot
        # zero-padded subcarrier sum sampled at T/(gM), subcarriers
        # wrapped to the centered baseband convention shared by the
        # filtered schemes
        u = tr.isfft(x)
        idx = np.arange(m)
        target = np.where(idx < (m + 1) // 2, idx, idx + (g - 1) * m)
        padded = np.zeros((g * m, n), dtype=complex)
        padded[target, :] = u
        cols = np.fft.ifft(padded, axis=0) * (g * np.sqrt(m))
        return cols.flatten(order="F")
    if scheme == "otfs_srrc":
        # discrete rectangular-pulse frame, upsampled then shaped
        s = tr.apply_dft(x, axis=1, inverse=True).flatten(order="F")
        up = np.zeros(g * len(s), dtype=complex)
        up[::g] = s
        taps = pl.make_pulse("srrc", beta=cfg.beta, span=cfg.span, sps=g).taps
        return np.convolve(up, taps)
    if scheme == "oddm":
        return _synthesize_oddm(x, cfg, g)
    raise ConfigError(f"spectrum synthesis supports {PSD_SCHEMES}, not {scheme!r}")


def _synthesize_oddm(x, cfg: ExperimentConfig, g: int) -> np.ndarray:
    """Staggered delay-Doppler synthesis with the intra-pulse phase ramp."""
    m, n, q = cfg.m, cfg.n, cfg.q
    taps = pl._truncated_root_nyquist(cfg.beta, q, g)
    half = q * g - 1
    length = g * (m * n + 2 * q - 1)
    out = np.zeros(length, dtype=complex)
    n_idx = np.arange(n)
    for j, gval in enumerate(taps):
        o = j - half
        phase = np.exp(2j * np.pi * n_idx * o / (g * m * n))
        a = np.fft.ifft(x * phase[None, :], axis=1) * n  # unnormalized inverse DFT
        start = half + o
        out[start : start + g * m * n : g] += gval * a.flatten(order="F") / np.sqrt(n)
    return out


def estimate_psd(samples: np.ndarray, n_bins: int = PSD_BINS) -> np.ndarray:
    """Per-bin spectral mass (sums to 1) on a fixed frequency grid."""
    s = samples / np.sqrt(np.mean(np.abs(samples) ** 2))
    w = np.hamming(len(s))
    spec = np.fft.fftshift(np.fft.fft(s * w))
    p = np.abs(spec) ** 2 / (np.sum(w**2) * len(s))
    edges = np.linspace(0, len(p), n_bins + 1).astype(int)
    return np.add.reduceat(p, edges[:-1])


def run_psd(cfg: ExperimentConfig, seed: int | None = None):
    """Average PSDs per scheme.

    Returns (rows, curves): rows of (scheme, freq_norm, psd_db) for the
    CSV, and per-scheme (freq_norm, psd_db, mass) arrays.  ``freq_norm``
    is in subcarrier spacings; ``psd_db`` is spectral density relative
    to a uniform unit-power spread over one subcarrier spacing.
    """
    seed = cfg.seed if seed is None else seed
    rows = []
    curves = {}
    for scheme in cfg.schemes:
        if scheme not in PSD_SCHEMES:
            raise ConfigError(f"spectrum experiment supports {PSD_SCHEMES}, got {scheme!r}")
        key = zlib.crc32(scheme.encode())
        acc = None
        for frame in range(cfg.frames):
            rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(key, frame)))
            s = synthesize(scheme, cfg, rng)
            p = estimate_psd(s)
            acc = p if acc is None else acc + p
        mass = acc / cfg.frames
        rate_factor = cfg.oversampling * cfg.m  # sample rate in subcarrier spacings
        freq = (np.arange(PSD_BINS) / PSD_BINS - 0.5) * rate_factor
        bin_width = rate_factor / PSD_BINS
        psd_db = 10 * np.log10(np.maximum(mass / bin_width, 1e-300))
        curves[scheme] = (freq, psd_db, mass)
        rows.extend((scheme, f, d) for f, d in zip(freq, psd_db))
    return rows, curves


def occupied_bandwidth(freq, psd_db, floor_db: float) -> float:
    """Width of the outermost band where the PSD exceeds peak - floor."""
    mask = psd_db >= psd_db.max() - floor_db
    idx = np.nonzero(mask)[0]
    if len(idx) == 0:
        return 0.0
    return float(freq[idx[-1]] - freq[idx[0]])


def theoretical_rect_psd(freq_norm: np.ndarray, m: int) -> np.ndarray:
    """Analytic aggregate spectrum of the rectangular-pulse frame.

    White unit-power subcarrier symbols through slot-length rectangular
    pulses add incoherently, one squared-sinc lobe per subcarrier.
    """
    acc = np.zeros_like(freq_norm)
    for k in range(m):
        acc += np.sinc(freq_norm - k) ** 2
    return acc
