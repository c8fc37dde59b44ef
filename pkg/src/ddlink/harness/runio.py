"""Deterministic experiment outputs.

CSV bodies are byte-stable for a given config and seed: fixed column
orders, fixed float formats (dB values to 4 decimals; probabilities and
magnitudes in full-precision scientific notation).  Timestamps, wall
times and environment notes go to a separate metadata file.
"""

from __future__ import annotations

import dataclasses
import os
import time

import numpy as np
import yaml

PSD_COLUMNS = ("scheme", "freq_norm", "psd_db")
BER_COLUMNS = ("scheme", "detector", "snr_db", "ber", "errors", "bits", "trials")


def _fmt_db(x: float) -> str:
    return f"{x:.4f}"


def write_psd_csv(path, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(PSD_COLUMNS) + "\n")
        for scheme, freq, psd_db in rows:
            fh.write(f"{scheme},{_fmt_db(freq)},{_fmt_db(psd_db)}\n")


def write_ber_csv(path, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(BER_COLUMNS) + "\n")
        for r in rows:
            ber = f"{r['ber']:.10e}"
            fh.write(
                f"{r['scheme']},{r['detector']},{_fmt_db(r['snr_db'])},{ber},"
                f"{r['errors']},{r['bits']},{r['trials']}\n"
            )


def write_matrix_csv(path, matrix) -> None:
    np.savetxt(path, np.asarray(matrix), fmt="%.8e", delimiter=",")


def wilson_interval(errors: int, bits: int, z: float = 1.96):
    """95% Wilson score interval for the bit error proportion."""
    if bits == 0:
        return (0.0, 1.0)
    p = errors / bits
    denom = 1.0 + z**2 / bits
    center = (p + z**2 / (2 * bits)) / denom
    half = z * np.sqrt(p * (1 - p) / bits + z**2 / (4 * bits**2)) / denom
    return (max(center - half, 0.0), min(center + half, 1.0))


def write_metadata(path, config, seed, extra=None) -> None:
    meta = {
        "written_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "seed": int(seed),
        "config": dataclasses.asdict(config),
    }
    if extra:
        meta.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(meta, fh, sort_keys=True)


def ensure_dir(path) -> str:
    os.makedirs(path, exist_ok=True)
    return path
