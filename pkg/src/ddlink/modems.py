"""One modulator/demodulator per scheme behind a single contract.

Each scheme maps an (M, N) symbol grid to a time-domain sample frame and
back, attaches its prefix, and exposes its end-to-end effective channel
for a given doubly-selective channel realization.

Conventions
-----------
* Grid-to-vector order is column-wise for every scheme except the
  delay-sequency one (``otsm``), whose symbol vector is row-wise; the
  conversion always goes through the interleaver helpers in
  :mod:`ddlink.transforms`.
* ``otfs_srrc`` produces the same symbol-rate samples as ``otfs_rect``;
  its root-Nyquist pulse pair lives in the transmit/receive filter chain
  and therefore in the channel's combined response (see
  :func:`channel_pulse_cascade`).  The diagonal-gain path (``gain_pulse``)
  is only valid for pulses confined to one slot duration.
* Doppler phase reference is the first body sample (matching
  :mod:`ddlink.channel`), so per-block prefixed schemes see later blocks
  at their true absolute times.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from ddlink import channel as chanmod
from ddlink import pulses as pl
from ddlink import transforms as tr

SCHEMES = (
    "ofdm",
    "fbmc_oqam",
    "otfs_rect",
    "otfs_srrc",
    "osdm",
    "vofdm",
    "otsm",
    "oddm",
    "ocdm",
    "afdm",
)

_DOMAINS = {
    "ofdm": "tf",
    "fbmc_oqam": "tf",
    "otfs_rect": "dd",
    "otfs_srrc": "dd",
    "osdm": "dd",
    "vofdm": "tf",
    "otsm": "delay_sequency",
    "oddm": "dd",
    "ocdm": "chirp",
    "afdm": "daf",
}

FBMC_EXTRA_SLOTS = 11  # prototype tails add 11 half-T0 slots of samples


@dataclass(frozen=True)
class FrameGrid:
    """An (M, N) symbol grid tagged with the domain it lives in."""

    data: np.ndarray
    domain: str
    constellation: str | None = None


@dataclass(frozen=True)
class TimeFrame:
    """Prefixed sample stream; ``ref_index`` marks the first body sample."""

    samples: np.ndarray
    prefix_kind: str = "none"  # none | cp | cpp | cp_per_block
    prefix_len: int = 0
    block_len: int = 0  # cp_per_block only
    n_blocks: int = 1

    @property
    def ref_index(self) -> int:
        return self.prefix_len

    @property
    def body(self) -> np.ndarray:
        if self.prefix_kind == "cp_per_block":
            stride = self.prefix_len + self.block_len
            blocks = self.samples.reshape(self.n_blocks, stride)
            return blocks[:, self.prefix_len :].reshape(-1)
        return self.samples[self.prefix_len :]


@dataclass(frozen=True, eq=False)
class Modem:
    """Scheme geometry and pulse/prefix configuration.

    ``m`` subcarriers/delay bins, ``n`` slots/Doppler bins, subcarrier
    spacing ``df`` (Hz), slot duration ``t = 1/df``.  The chirp schemes
    treat the frame as one vector of length ``m * n``.
    """

    scheme: str
    m: int
    n: int
    df: float = 15e3
    beta: float = 0.5
    span: int = 16
    q: int = 8
    prefix_len: int = 0
    c1: float = 0.0
    c2: float = 0.0
    oversample: int = 0  # 0 = auto (2 for the staggered scheme, else 1)
    gain_pulse: pl.Pulse | None = field(default=None)

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if self.m < 1 or self.n < 1:
            raise ValueError("grid dimensions must be positive")
        if self.scheme == "otsm" and (self.n & (self.n - 1)) != 0:
            raise ValueError("the delay-sequency scheme needs a power-of-two slot count")
        if self.scheme == "fbmc_oqam" and self.prefix_len != 0:
            raise ValueError("the filter-bank scheme transmits without a prefix")
        if self.scheme == "oddm" and 2 * self.q >= self.m:
            raise ValueError("oddm needs 2q < m")
        if self.oversample > 1 and self.scheme not in ("oddm", "otfs_rect"):
            raise ValueError("body oversampling applies to the staggered and rectangular schemes only")
        if self.prefix_len < 0:
            raise ValueError("prefix_len must be >= 0")

    @property
    def t(self) -> float:
        return 1.0 / self.df

    @property
    def body_oversample(self) -> int:
        """Internal oversampling of the body stream relative to the symbol rate.

        The staggered delay-Doppler scheme defaults to 2x: at plain
        Nyquist-rate sampling its root-Nyquist pulse aliases (the excess
        band folds in-band), which the physical band-limited chain never
        does.  The rectangular-pulse scheme accepts 2x to expose its
        slot-windowed out-of-band structure to the band-limiting chain;
        its default remains the Nyquist-rate model, where it coincides
        with the signal-division and vector schemes.
        """
        if self.oversample:
            return self.oversample
        return 2 if self.scheme == "oddm" else 1

    @property
    def ts(self) -> float:
        """Sample period of the body stream."""
        if self.scheme == "fbmc_oqam":
            return self.t / self.m / 2.0  # OQAM half-T staggering
        return self.t / self.m / self.body_oversample

    @property
    def rate_scale(self) -> float:
        """Stream-rate kernel scale: ratio of body rate to symbol rate."""
        return self.ts / (self.t / self.m)

    @property
    def mn(self) -> int:
        return self.m * self.n

    @property
    def domain(self) -> str:
        return _DOMAINS[self.scheme]

    @property
    def frame_len(self) -> int:
        """Body sample count (before any prefix)."""
        if self.scheme == "oddm":
            return self.body_oversample * (self.mn + 2 * self.q - 1)
        if self.scheme == "fbmc_oqam":
            return self.m * (self.n + FBMC_EXTRA_SLOTS)
        return self.body_oversample * self.mn

    @property
    def is_unitary(self) -> bool:
        """True when the symbol-to-time map is exactly unitary (square)."""
        if self.scheme in ("oddm", "fbmc_oqam"):
            return False
        if self.body_oversample > 1:
            return False  # isometry onto a subspace, not square-unitary
        if self.scheme in ("otfs_rect", "otfs_srrc") and self.gain_pulse is not None:
            g = pl.sample_gain_diag(self.gain_pulse, self.m, self.t)
            return bool(np.allclose(np.abs(g), 1.0, atol=1e-12))
        return True


# ---------------------------------------------------------------------------
# prefix handling


def prefix_add(samples: np.ndarray, kind: str, length: int, c1: float | None = None) -> np.ndarray:
    """Prepend a cyclic or chirp-periodic prefix of ``length`` samples."""
    if kind == "none" or length == 0:
        return np.asarray(samples)
    n = len(samples)
    if length > n:
        raise ValueError(f"prefix of {length} samples exceeds the frame of {n}")
    if kind == "cp":
        return np.concatenate([samples[-length:], samples])
    if kind == "cpp":
        if c1 is None:
            raise ValueError("cpp prefix requires the chirp rate c1")
        idx = np.arange(-length, 0)
        prefix = samples[n + idx] * np.exp(-2j * np.pi * c1 * (n**2 + 2.0 * n * idx))
        return np.concatenate([prefix, samples])
    raise ValueError(f"unknown prefix kind {kind!r}")


def prefix_remove(samples: np.ndarray, kind: str, length: int) -> np.ndarray:
    """Drop exactly ``length`` leading prefix samples."""
    if kind == "none" or length == 0:
        return np.asarray(samples)
    if kind not in ("cp", "cpp"):
        raise ValueError(f"unknown prefix kind {kind!r}")
    return np.asarray(samples)[length:]


# ---------------------------------------------------------------------------
# per-scheme symbol <-> time maps


class SchemeOps:
    """Vectorized symbol-to-time map of one modem.

    ``tx`` maps symbol vectors (shape ``(n_symbols,)`` or
    ``(n_symbols, k)``) to body samples; ``rx`` is the corresponding
    receive projection (the adjoint for unitary schemes).
    """

    def __init__(self, modem: Modem, tx, rx, unitary: bool):
        self.modem = modem
        self.tx = tx
        self.rx = rx
        self.unitary = unitary
        self.n_symbols = modem.mn
        self.frame_len = modem.frame_len

    def matrix(self) -> np.ndarray:
        """Dense transmit matrix (columns = tx of unit vectors)."""
        return self.tx(np.eye(self.n_symbols, dtype=complex))


def _as_cols(x):
    x = np.asarray(x, dtype=complex)
    squeeze = x.ndim == 1
    return (x[:, None] if squeeze else x), squeeze


def _grid_batch(v, m, n):
    cols = v.shape[1]
    return v.reshape(m, n, cols, order="F")


def _flat_batch(g):
    m, n, cols = g.shape
    return g.reshape(m * n, cols, order="F")


@functools.lru_cache(maxsize=64)
def scheme_ops(modem: Modem) -> SchemeOps:
    """Build (and cache) the symbol/time maps for a modem."""
    m, n = modem.m, modem.n
    scheme = modem.scheme

    if scheme in ("otfs_rect", "otfs_srrc"):
        g = modem.body_oversample
        if g > 1:
            if modem.gain_pulse is not None:
                raise ValueError("the diagonal-gain path needs the Nyquist-rate body")
            return _oversampled_rect_ops(modem)
        if modem.gain_pulse is not None:
            gdiag = pl.sample_gain_diag(modem.gain_pulse, m, modem.t)
        else:
            gdiag = np.ones(m, dtype=complex)

        def tx(x):
            v, squeeze = _as_cols(x)
            grid = _grid_batch(v, m, n)
            # two-step route: ISFFT to the time-frequency grid, then the
            # per-slot synthesis which reduces to an M-point IDFT
            u = tr.apply_dft(tr.apply_dft(grid, axis=1, inverse=True), axis=0)
            s = gdiag[:, None, None] * tr.apply_dft(u, axis=0, inverse=True)
            out = _flat_batch(s)
            return out[:, 0] if squeeze else out

        def rx(r):
            v, squeeze = _as_cols(r)
            grid = _grid_batch(v, m, n)
            u = gdiag.conj()[:, None, None] * grid
            out = _flat_batch(tr.apply_dft(u, axis=1))
            return out[:, 0] if squeeze else out

        return SchemeOps(modem, tx, rx, modem.is_unitary)

    if scheme == "osdm":

        def tx(x):
            v, squeeze = _as_cols(x)
            out = _flat_batch(tr.apply_dft(_grid_batch(v, m, n), axis=1, inverse=True))
            return out[:, 0] if squeeze else out

        def rx(r):
            v, squeeze = _as_cols(r)
            out = _flat_batch(tr.apply_dft(_grid_batch(v, m, n), axis=1))
            return out[:, 0] if squeeze else out

        return SchemeOps(modem, tx, rx, True)

    if scheme == "vofdm":
        fn_h = tr.dft_matrix(n).conj().T

        def tx(x):
            v, squeeze = _as_cols(x)
            grid = _grid_batch(v, m, n)
            s = np.einsum("mnk,nl->mlk", grid, fn_h)
            out = _flat_batch(s)
            return out[:, 0] if squeeze else out

        def rx(r):
            v, squeeze = _as_cols(r)
            grid = _grid_batch(v, m, n)
            y = np.einsum("mnk,nl->mlk", grid, fn_h.conj().T)
            out = _flat_batch(y)
            return out[:, 0] if squeeze else out

        return SchemeOps(modem, tx, rx, True)

    if scheme == "ofdm":

        def tx(x):
            v, squeeze = _as_cols(x)
            out = _flat_batch(tr.apply_dft(_grid_batch(v, m, n), axis=0, inverse=True))
            return out[:, 0] if squeeze else out

        def rx(r):
            v, squeeze = _as_cols(r)
            out = _flat_batch(tr.apply_dft(_grid_batch(v, m, n), axis=0))
            return out[:, 0] if squeeze else out

        return SchemeOps(modem, tx, rx, True)

    if scheme == "otsm":
        perm = tr.rowwise_to_colwise(m, n)
        inv = tr.colwise_to_rowwise(m, n)

        def tx(x_rw):
            v, squeeze = _as_cols(x_rw)
            grid = _grid_batch(v[perm], m, n)
            out = _flat_batch(tr.apply_wht(grid, axis=1))
            return out[:, 0] if squeeze else out

        def rx(r):
            v, squeeze = _as_cols(r)
            y_col = _flat_batch(tr.apply_wht(_grid_batch(v, m, n), axis=1))
            out = y_col[inv]
            return out[:, 0] if squeeze else out

        return SchemeOps(modem, tx, rx, True)

    if scheme == "ocdm":

        def tx(x):
            v, squeeze = _as_cols(x)
            out = tr.apply_dfnt(v, axis=0, inverse=True)
            return out[:, 0] if squeeze else out

        def rx(r):
            v, squeeze = _as_cols(r)
            out = tr.apply_dfnt(v, axis=0)
            return out[:, 0] if squeeze else out

        return SchemeOps(modem, tx, rx, True)

    if scheme == "afdm":
        c1, c2 = modem.c1, modem.c2

        def tx(x):
            v, squeeze = _as_cols(x)
            out = tr.apply_daft(v, c1, c2, axis=0, inverse=True)
            return out[:, 0] if squeeze else out

        def rx(r):
            v, squeeze = _as_cols(r)
            out = tr.apply_daft(v, c1, c2, axis=0)
            return out[:, 0] if squeeze else out

        return SchemeOps(modem, tx, rx, True)

    if scheme == "oddm":
        umat = oddm_matrix(modem)
        uh = umat.conj().T.tocsr()

        def tx(x):
            v, squeeze = _as_cols(x)
            out = umat @ v
            return out[:, 0] if squeeze else np.asarray(out)

        def rx(r):
            v, squeeze = _as_cols(r)
            out = uh @ v
            return out[:, 0] if squeeze else np.asarray(out)

        return SchemeOps(modem, tx, rx, False)

    if scheme == "fbmc_oqam":
        pmat = fbmc_matrix(modem)
        ph = pmat.conj().T

        def tx(x):
            v, squeeze = _as_cols(x)
            out = pmat @ v
            return out[:, 0] if squeeze else out

        def rx(r):
            v, squeeze = _as_cols(r)
            out = ph @ v
            return out[:, 0] if squeeze else out

        return SchemeOps(modem, tx, rx, False)

    raise AssertionError(scheme)


def _oversampled_rect_ops(modem: Modem) -> SchemeOps:
    """Slot-structured rectangular-pulse synthesis beyond Nyquist rate.

    Each slot's subcarrier sum is sampled on a g-times-finer grid
    (centered baseband convention), exposing the rectangular pulse's
    slot-boundary spectral splatter to the band-limiting chain.  The
    map is an isometry (orthonormal columns), not square-unitary.
    """
    m, n, g = modem.m, modem.n, modem.body_oversample
    idx = np.arange(m)
    target = np.where(idx < (m + 1) // 2, idx, idx + (g - 1) * m)

    def tx(x):
        v, squeeze = _as_cols(x)
        grid = _grid_batch(v, m, n)
        u = tr.apply_dft(tr.apply_dft(grid, axis=1, inverse=True), axis=0)
        padded = np.zeros((g * m, n, v.shape[1]), dtype=complex)
        padded[target] = u
        slots = np.fft.ifft(padded, axis=0) * np.sqrt(g * m)
        out = slots.reshape(g * m * n, v.shape[1], order="F")
        return out[:, 0] if squeeze else out

    def rx(r):
        v, squeeze = _as_cols(r)
        slots = v.reshape(g * m, n, v.shape[1], order="F")
        u = np.fft.fft(slots, axis=0)[target] / np.sqrt(g * m)
        grid = tr.apply_dft(tr.apply_dft(u, axis=0, inverse=True), axis=1)
        out = _flat_batch(grid)
        return out[:, 0] if squeeze else out

    return SchemeOps(modem, tx, rx, False)


def oddm_matrix(modem: Modem) -> sp.csr_matrix:
    """Sparse transmit matrix of the staggered delay-Doppler scheme.

    Row ``i`` is the sample at ``(i - (q g - 1)) ts`` for internal
    oversampling ``g``; column ``(m, n)`` holds
    ``u(t - m T/M) exp(2j pi n (t - m T/M) / (N T)) / sqrt(N)`` where
    ``u`` is the sum of N slot-spaced copies of the truncated
    root-Nyquist pulse.  Columns have exactly unit norm.
    """
    m, n, q = modem.m, modem.n, modem.q
    g = modem.body_oversample
    u = pl.make_pulse("oddm_u", beta=modem.beta, q=q, n=n, m=m, sps=g)
    u_taps = u.taps
    nt = modem.frame_len
    o_nz = np.nonzero(np.abs(u_taps) > 0)[0] - (q * g - 1)  # offsets in ts units
    k = len(o_nz)
    vals_u = u_taps[o_nz + (q * g - 1)]
    m_idx = np.arange(m)
    rows = (o_nz[None, :] + (q * g - 1) + m_idx[:, None] * g).reshape(-1)  # (m*k,)
    rows_all = np.tile(rows, n)
    cols_all = np.repeat(np.arange(n) * m, m * k) + np.tile(np.repeat(m_idx, k), n)
    phase = np.exp(2j * np.pi * np.outer(np.arange(n), o_nz) / (g * m * n))  # (n, k)
    vals_all = (np.tile(vals_u, (n, 1)) * phase)[:, None, :].repeat(m, axis=1).reshape(-1)
    mat = sp.csr_matrix((vals_all / np.sqrt(n), (rows_all, cols_all)), shape=(nt, m * n))
    return mat


@functools.lru_cache(maxsize=8)
def _fbmc_matrix_cached(m: int, n: int, df: float) -> np.ndarray:
    t0 = 1.0 / df
    t_slot = t0 / 2.0
    ns = m * (n + FBMC_EXTRA_SLOTS)
    t_axis = np.arange(ns) * (t_slot / m) - 3.0 * t0
    pmat = np.zeros((ns, m * n), dtype=complex)
    for slot in range(n):
        t_rel = t_axis - slot * t_slot
        g = np.where(np.abs(t_rel) <= 3.0 * t0, pl.hermite_amplitude(t_rel, t0), 0.0)
        for sub in range(m):
            col = g * np.exp(2j * np.pi * sub * df * t_rel) * np.exp(1j * np.pi / 2 * (sub + slot))
            pmat[:, sub + slot * m] = col
    return pmat * np.sqrt(t_slot / m)


def fbmc_matrix(modem: Modem) -> np.ndarray:
    """Dense sampled filter-bank matrix (offset-QAM staggering, Hermite prototype)."""
    return _fbmc_matrix_cached(modem.m, modem.n, modem.df)


# ---------------------------------------------------------------------------
# modulate / demodulate / effective channel


def grid_to_vector(modem: Modem, grid: np.ndarray) -> np.ndarray:
    if modem.scheme == "otsm":
        return np.asarray(grid).flatten(order="C")
    return np.asarray(grid).flatten(order="F")


def vector_to_grid(modem: Modem, x: np.ndarray) -> np.ndarray:
    order = "C" if modem.scheme == "otsm" else "F"
    return np.asarray(x).reshape(modem.m, modem.n, order=order)


def _prefix_kind(modem: Modem) -> str:
    if modem.prefix_len == 0:
        return "none"
    if modem.scheme == "afdm":
        return "cpp"
    if modem.scheme == "ofdm":
        return "cp_per_block"
    return "cp"


def modulate(modem: Modem, grid: FrameGrid) -> TimeFrame:
    """Map a symbol grid to its prefixed time-domain sample frame."""
    data = np.asarray(grid.data)
    if data.shape != (modem.m, modem.n):
        raise ValueError(f"grid shape {data.shape} does not match modem ({modem.m}, {modem.n})")
    if grid.domain != modem.domain:
        raise ValueError(
            f"grid domain {grid.domain!r} does not match the scheme's native "
            f"domain {modem.domain!r}"
        )
    ops = scheme_ops(modem)
    body = ops.tx(grid_to_vector(modem, data))
    kind = _prefix_kind(modem)
    if kind == "none":
        return TimeFrame(samples=body, prefix_kind="none", prefix_len=0)
    if kind == "cp_per_block":
        if modem.prefix_len > modem.m:
            raise ValueError(
                f"per-block prefix of {modem.prefix_len} exceeds the block length {modem.m}"
            )
        blocks = body.reshape(modem.m, modem.n, order="F")
        pieces = [
            np.concatenate([blocks[-modem.prefix_len :, b], blocks[:, b]])
            for b in range(modem.n)
        ]
        return TimeFrame(
            samples=np.concatenate(pieces),
            prefix_kind="cp_per_block",
            prefix_len=modem.prefix_len,
            block_len=modem.m,
            n_blocks=modem.n,
        )
    samples = prefix_add(body, kind, modem.prefix_len, c1=modem.c1)
    return TimeFrame(samples=samples, prefix_kind=kind, prefix_len=modem.prefix_len)


def demodulate(modem: Modem, frame: TimeFrame) -> FrameGrid:
    """Strip the prefix and project back to the scheme's native grid."""
    body = frame.body
    if len(body) != modem.frame_len:
        raise ValueError(
            f"frame body of {len(body)} samples does not match the expected {modem.frame_len}"
        )
    y = scheme_ops(modem).rx(body)
    return FrameGrid(data=vector_to_grid(modem, y), domain=modem.domain)


def channel_pulse_cascade(modem: Modem) -> list:
    """Scheme-specific continuous filters to fold into the channel response.

    The SRRC-pulsed scheme contributes its matched pulse pair (the
    raised cosine); every other scheme contributes nothing beyond the
    band-limiting chain the experiment adds.
    """
    if modem.scheme == "otfs_srrc":
        tsym = modem.t / modem.m
        return [pl.raised_cosine_filter(modem.beta, modem.span, tsym)]
    return []


def configured_channel(
    modem: Modem,
    spec: chanmod.ChannelSpec,
    bandwidth: float | None = None,
    bl_span: int = 16,
    bl_sps: int = 8,
    latency_sym: float | None = None,
) -> chanmod.ChannelSpec:
    """Attach a modem-matched sampling context to a channel realization.

    Builds the combined continuous response: the band-limiting transmit
    filter and its matched receive filter (lowpass cutoff at
    ``bandwidth``, default ``M df``), convolved with the scheme's own
    pulse cascade, scaled by the stream-rate factor so oversampled body
    streams see unit in-band channel gain.  A cutoff at the symbol rate
    leaves root-Nyquist chains untouched; symbol-rate sampling of the
    wide matched pair is where the unshaped rectangular scheme pays its
    aliasing penalty.

    The symmetric matched cascade is non-causal; a receiver timing
    advance shifts it right by an integer number of body samples
    (``latency_sym`` slot fractions, default the minimal shift making
    the response causal) so the tap table keeps its one-sided lag grid
    and a plain cyclic prefix covers the whole memory.
    """
    symbol_rate = modem.m * modem.df
    tsym = 1.0 / symbol_rate
    if bandwidth is None:
        bandwidth = symbol_rate
    # "bandwidth" is the lowpass cutoff; the design helper takes the
    # two-sided width
    bl = pl.windowed_sinc_filter(2.0 * bandwidth, span=bl_span, symbol_rate=symbol_rate)
    # the band-limit pair is the peak-normalized base kernel; every extra
    # matched-pair kernel multiplies as a unit-area density (unit-plateau
    # spectrum), keeping symbol-spaced taps of the full-band cascade at
    # the unit impulse
    parts = [bl, bl] + [pl.scaled(f, 1.0 / tsym) for f in channel_pulse_cascade(modem)]
    prc = pl.cascade(parts, step=tsym / (4 * bl_sps))
    if modem.rate_scale != 1.0:
        prc = pl.scaled(prc, modem.rate_scale)
    ts = modem.ts
    if latency_sym is None:
        n_lat = max(0, int(np.ceil(-prc.support[0] / ts - 1e-9)))
    else:
        n_lat = int(round(latency_sym * tsym / ts))
        if n_lat * ts < -prc.support[0] - 1e-12:
            raise ValueError(
                f"latency of {n_lat} samples does not causalize the response "
                f"(needs {-prc.support[0] / ts:.1f})"
            )
    if n_lat:
        prc = pl.shifted(prc, n_lat * ts)
    return spec.configured(ts, prc, gamma=modem.body_oversample, latency=n_lat)


def effective_channel(modem: Modem, chan) -> np.ndarray:
    """End-to-end symbol-domain channel matrix ``H`` with ``y = H x + noise``.

    ``chan`` is either a configured :class:`ddlink.channel.ChannelSpec`
    or a pre-assembled :class:`ddlink.channel.TimeChannelMatrix` of the
    scheme's body length.  The per-block-prefixed scheme (``ofdm``)
    needs the spec, because its blocks sample the channel at different
    absolute times.
    """
    if isinstance(chan, chanmod.TimeChannelMatrix):
        if modem.scheme == "ofdm":
            raise ValueError(
                "the per-block prefixed scheme needs a ChannelSpec: one body-sized "
                "matrix cannot represent the per-block timing"
            )
        if chan.size != modem.frame_len:
            raise ValueError(
                f"channel matrix size {chan.size} does not match the frame length "
                f"{modem.frame_len}"
            )
        ops = scheme_ops(modem)
        h_sp = chan.sparse()
        return ops.rx(np.asarray((h_sp @ ops.tx(np.eye(ops.n_symbols, dtype=complex)))))

    spec: chanmod.ChannelSpec = chan
    if modem.scheme == "ofdm":
        if modem.prefix_len < spec.memory - 1:
            raise ValueError("per-block prefix shorter than the channel memory")
        fm = tr.dft_matrix(modem.m)
        blocks = []
        stride = modem.m + modem.prefix_len
        for b in range(modem.n):
            circ = chanmod.channel_matrix(spec, modem.m, offset=b * stride).dense()
            blocks.append(fm @ circ @ fm.conj().T)
        out = np.zeros((modem.mn, modem.mn), dtype=complex)
        for b, blk in enumerate(blocks):
            sl = slice(b * modem.m, (b + 1) * modem.m)
            out[sl, sl] = blk
        return out
    wrap = "linear" if modem.scheme == "fbmc_oqam" else "circular"
    cpp_c1 = modem.c1 if (modem.scheme == "afdm" and modem.prefix_len > 0) else None
    hch = chanmod.channel_matrix(spec, modem.frame_len, wrap=wrap, cpp_c1=cpp_c1)
    return effective_channel(modem, hch)


def default_afdm_c1(nu_max_hz: float, m: int, n: int, df: float) -> float:
    """Chirp rate placing Doppler-shifted path images on disjoint bins.

    ``(2 k_max + 1) / (2 M')`` with ``k_max`` the Doppler extent in
    frame-rate bins plus one guard bin; ``2 M' c1`` is then an odd
    integer, so the chirp-periodic prefix coincides with a cyclic
    prefix for even frame lengths.
    """
    mn = m * n
    k_max = int(np.ceil(nu_max_hz * n / df)) + 1
    return (2.0 * k_max + 1.0) / (2.0 * mn)


def frame_for_channel(modem: Modem, spec: chanmod.ChannelSpec) -> Modem:
    """Copy of the modem with a prefix covering the channel memory."""
    if modem.scheme == "fbmc_oqam":
        return modem
    return replace(modem, prefix_len=max(modem.prefix_len, spec.memory))
