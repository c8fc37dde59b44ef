"""Channel-matrix magnitude dumps for the structural comparisons.

Emits the time-domain channel magnitude and each scheme's effective
channel magnitude under doubly-selective, time-selective and
frequency-selective presets at a small geometry, as CSV grids.  A
common receiver latency is used across schemes so their patterns stay
aligned.
"""

from __future__ import annotations

import os

import numpy as np

from ddlink import channel as chanmod
from ddlink import modems as md
from ddlink.harness.config import ConfigError, ExperimentConfig
from ddlink.harness.runio import ensure_dir, write_matrix_csv

PRESETS = ("doubly_selective", "time_selective", "frequency_selective")
MAX_M, MAX_N = 16, 8


def preset_channel(cfg: ExperimentConfig, preset: str, seed: int) -> chanmod.ChannelSpec:
    tau_max = cfg.channel.tau_max_sym / (cfg.m * cfg.df)
    if preset == "doubly_selective":
        return chanmod.draw_channel(cfg.channel.paths, tau_max, cfg.channel.speed_kmh, cfg.channel.carrier_hz, seed)
    if preset == "time_selective":
        return chanmod.draw_channel(1, 0.0, cfg.channel.speed_kmh, cfg.channel.carrier_hz, seed)
    if preset == "frequency_selective":
        return chanmod.draw_channel(cfg.channel.paths, tau_max, 0.0, cfg.channel.carrier_hz, seed)
    raise ConfigError(f"unknown preset {preset!r}")


def common_latency(cfg: ExperimentConfig) -> float:
    """Slot-fraction latency causalizing every scheme's combined response."""
    worst = 0.0
    for scheme in cfg.schemes:
        modem = cfg.modem(scheme)
        probe = chanmod.ChannelSpec(
            gains=np.array([1.0 + 0j]), delays=np.array([0.0]), dopplers=np.array([0.0])
        )
        spec = md.configured_channel(modem, probe, bandwidth=cfg.bandwidth_frac * cfg.m * cfg.df, bl_span=cfg.bl_span)
        worst = max(worst, spec.latency * spec.ts * cfg.m * cfg.df)
    return float(np.ceil(worst))


def run_chanmat(cfg: ExperimentConfig, out_dir: str, seed: int | None = None) -> dict:
    if cfg.m > MAX_M or cfg.n > MAX_N:
        raise ConfigError(
            f"dense dumps are limited to m <= {MAX_M}, n <= {MAX_N}; got ({cfg.m}, {cfg.n})"
        )
    seed = cfg.seed if seed is None else seed
    ensure_dir(out_dir)
    latency = common_latency(cfg)
    written = {}
    for preset in PRESETS:
        base = preset_channel(cfg, preset, seed)
        ref_modem = cfg.modem(cfg.schemes[0])
        ref_spec = md.configured_channel(
            ref_modem,
            base,
            bandwidth=cfg.bandwidth_frac * cfg.m * cfg.df,
            bl_span=cfg.bl_span,
            latency_sym=latency,
        )
        hch = chanmod.channel_matrix(ref_spec, cfg.m * cfg.n)
        path = os.path.join(out_dir, f"hch_{preset}.csv")
        write_matrix_csv(path, np.abs(hch.dense()))
        written[f"hch_{preset}"] = path
        for scheme in cfg.schemes:
            modem = cfg.modem(scheme)
            spec = md.configured_channel(
                modem,
                base,
                bandwidth=cfg.bandwidth_frac * cfg.m * cfg.df,
                bl_span=cfg.bl_span,
                latency_sym=latency,
            )
            h_eff = md.effective_channel(modem, spec)
            path = os.path.join(out_dir, f"heff_{scheme}_{preset}.csv")
            write_matrix_csv(path, np.abs(h_eff))
            written[f"heff_{scheme}_{preset}"] = path
    return written
