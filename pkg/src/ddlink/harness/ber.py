"""Monte-Carlo bit error rate sweeps.

Per trial: draw a channel realization from the trial-indexed seed,
modulate a random frame, propagate with per-SNR noise draws, detect
with every configured detector, count bit errors.  Per-trial seeds
derive from (master seed, scheme, sweep point, trial index) only, so
counts are independent of worker count and chunking.
"""

from __future__ import annotations

import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ddlink import channel as chanmod
from ddlink import detectors as dt
from ddlink import modems as md
from ddlink.harness.config import ConfigError, ExperimentConfig

BER_UNSUPPORTED = ("fbmc_oqam",)
_PRUNE_ENERGY = 0.995
_PRUNE_MAX_PER_ROW = 64


def _scheme_setup(cfg: ExperimentConfig, scheme: str, bandwidth_frac: float):
    """Modem with a worst-case prefix and the channel latency pinned."""
    modem = cfg.modem(scheme)
    probe = chanmod.ChannelSpec(
        gains=np.array([1.0 + 0j]),
        delays=np.array([cfg.channel.tau_max_sym / (cfg.m * cfg.df)]),
        dopplers=np.array([0.0]),
    )
    spec = md.configured_channel(
        modem, probe, bandwidth=bandwidth_frac * cfg.m * cfg.df, bl_span=cfg.bl_span
    )
    prefix = spec.memory
    if scheme == "ofdm" and prefix > cfg.m:
        raise ConfigError("per-block prefix exceeds the block length at this geometry")
    return replace(modem, prefix_len=prefix)


def needs_dense(detector: str, modem: md.Modem) -> bool:
    if detector in ("mf", "zf", "gmp"):
        return True
    if modem.scheme == "ofdm":
        return True
    if not modem.is_unitary:
        return detector in ("lmmse", "oamp", "mamp")
    return False


def _lmmse_composed(y, chan: dt.ComposedChannel, noise_var, const):
    """Closed-form LMMSE through the factored unitary channel."""
    ht = chan.h_time.tocsc()
    gram = (ht.conj().T @ ht + noise_var * sp.identity(chan.frame_len, format="csc")).tocsc()
    lu = spla.splu(gram)
    soft_t = lu.solve(ht.conj().T @ chan.tx(y))
    soft = chan.rx(soft_t)
    probs, _, _ = dt.posterior(soft, max(noise_var, 1e-12), const)
    idx = dt.slice_symbols(soft, const)
    return dt.DetectorResult(
        indices=idx,
        symbols=const.points[idx],
        bits=dt.demap_bits(idx, const),
        mean=soft,
        variance=np.full(len(soft), noise_var),
        iterations=1,
        residual_trace=[],
        mac_count=chan.frame_len * int(chan.nnz_per_row) ** 2,
        probs=probs,
    )


def _detect(detector, y, r_time, structures, noise_var, const, opts):
    chan = structures["composed"]
    if detector == "lmmse" and chan is not None and chan.unitary:
        return _lmmse_composed(y, chan, noise_var, const)
    if detector in ("mf", "zf", "lmmse"):
        return dt.linear_detect(detector, y, structures["dense"], noise_var, const)
    if detector == "gmp":
        return dt.gmp_detect(y, structures["pruned"], noise_var, const, opts)
    if detector == "oamp":
        target = chan if (chan is not None and chan.unitary) else structures["dense_chan"]
        return dt.oamp_detect(y, target, noise_var, const, opts)
    if detector == "mamp":
        target = chan if (chan is not None and chan.unitary) else structures["dense_chan"]
        return dt.mamp_detect(y, target, noise_var, const, opts)
    if detector in ("cd_oamp", "cd_mamp"):
        if chan is None or not chan.unitary:
            raise ConfigError(f"{detector} needs a unitary scheme transform")
        return dt.cross_domain_detect(r_time, chan, noise_var, const, opts)
    raise ConfigError(f"unknown detector {detector!r}")


def run_trials(cfg: ExperimentConfig, scheme: str, velocity: float, bandwidth_frac: float, trials):
    """Error counts for a set of trial indices (one scheme, one sweep point)."""
    const = dt.by_name(cfg.constellation)
    modem = _scheme_setup(cfg, scheme, bandwidth_frac)
    ops = md.scheme_ops(modem)
    tau_max = cfg.channel.tau_max_sym / (cfg.m * cfg.df)
    bw = bandwidth_frac * cfg.m * cfg.df
    key = (zlib.crc32(scheme.encode()), int(velocity * 16), int(bandwidth_frac * 1024))
    needs = {d: needs_dense(d, modem) for d in cfg.detectors}
    any_dense = any(needs.values())
    counts = {
        (d, s): {"errors": 0, "bits": 0, "diverged": 0} for d in cfg.detectors for s in cfg.snr_db
    }

    for trial in trials:
        ss = np.random.SeedSequence(entropy=cfg.seed, spawn_key=key + (trial,))
        chan_seed, bits_seed, noise_seed = (int(x) for x in ss.generate_state(3))
        if cfg.channel.profile == "awgn":
            base = chanmod.ChannelSpec(
                gains=np.array([1.0 + 0j]), delays=np.array([0.0]), dopplers=np.array([0.0])
            )
        else:
            base = chanmod.draw_channel(
                cfg.channel.paths, tau_max, velocity, cfg.channel.carrier_hz, seed=chan_seed
            )
        spec = md.configured_channel(modem, base, bandwidth=bw, bl_span=cfg.bl_span)
        bits_rng = np.random.default_rng(bits_seed)
        tx_bits = bits_rng.integers(0, 2, modem.mn * const.bits_per_symbol).astype(np.int8)
        x = dt.map_bits(tx_bits, const)
        frame = md.modulate(modem, md.FrameGrid(md.vector_to_grid(modem, x), modem.domain))

        structures = {"composed": None, "dense": None, "dense_chan": None, "pruned": None}
        if modem.scheme != "ofdm":
            wrap = "circular"
            cpp = modem.c1 if modem.scheme == "afdm" else None
            hch = chanmod.channel_matrix(spec, modem.frame_len, wrap=wrap, cpp_c1=cpp)
            structures["composed"] = dt.ComposedChannel(
                ops.tx, ops.rx, hch.sparse(), modem.mn, ops.unitary, modem.frame_len
            )
        if any_dense:
            h_eff = (
                md.effective_channel(modem, spec)
                if modem.scheme == "ofdm"
                else structures["composed"].dense()
            )
            structures["dense"] = h_eff
            structures["dense_chan"] = dt.DenseChannel(h_eff)
            if "gmp" in cfg.detectors:
                structures["pruned"] = dt.prune_channel(
                    h_eff, energy_keep=_PRUNE_ENERGY, max_per_row=_PRUNE_MAX_PER_ROW
                )

        for si, snr in enumerate(cfg.snr_db):
            nv = 10 ** (-snr / 10)
            noise_rng = np.random.default_rng(np.random.SeedSequence(entropy=noise_seed, spawn_key=(si,)))
            received = chanmod.propagate(spec, frame, nv, rng=noise_rng)
            body = received.body
            y = md.grid_to_vector(modem, md.demodulate(modem, received).data)
            for det in cfg.detectors:
                res = _detect(det, y, body, structures, nv, const, cfg.options_for(det))
                cell = counts[(det, snr)]
                cell["errors"] += res.errors_against(tx_bits)
                cell["bits"] += len(tx_bits)
                cell["diverged"] += int(res.diverged)
    return counts


def _merge(total, part):
    for k, v in part.items():
        cell = total.setdefault(k, {"errors": 0, "bits": 0, "diverged": 0})
        for f in cell:
            cell[f] += v[f]
    return total


def run_ber(cfg: ExperimentConfig, seed: int | None = None, threads: int = 1):
    """Full sweep; returns {(velocity, bandwidth_frac): [row dicts]}."""
    if seed is not None:
        cfg = cfg.with_overrides(seed=seed)
    for scheme in cfg.schemes:
        if scheme in BER_UNSUPPORTED:
            raise ConfigError(f"{scheme} does not take part in the error-rate suite")
    velocities = cfg.velocities_kmh or (cfg.channel.speed_kmh,)
    bandwidths = cfg.bandwidth_fracs or (cfg.bandwidth_frac,)
    results = {}
    for velocity in velocities:
        for bw in bandwidths:
            rows = []
            for scheme in cfg.schemes:
                trial_ids = list(range(cfg.trials))
                if threads > 1:
                    chunks = [trial_ids[i::threads] for i in range(threads)]
                    totals = {}
                    with ProcessPoolExecutor(max_workers=threads) as pool:
                        futures = [
                            pool.submit(run_trials, cfg, scheme, velocity, bw, chunk)
                            for chunk in chunks
                            if chunk
                        ]
                        for fut in futures:
                            _merge(totals, fut.result())
                else:
                    totals = run_trials(cfg, scheme, velocity, bw, trial_ids)
                for det in cfg.detectors:
                    for snr in cfg.snr_db:
                        cell = totals[(det, snr)]
                        rows.append(
                            {
                                "scheme": scheme,
                                "detector": det,
                                "snr_db": snr,
                                "ber": cell["errors"] / max(cell["bits"], 1),
                                "errors": cell["errors"],
                                "bits": cell["bits"],
                                "trials": cfg.trials,
                                "diverged": cell["diverged"],
                            }
                        )
            results[(velocity, bw)] = rows
    return results
