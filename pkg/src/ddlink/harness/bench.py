"""Detector complexity benchmark: operation counters across problem sizes.

Runs each configured detector on synthetic channels of increasing size
with a fixed nonzero budget per row, recording the multiply-accumulate
counters the detectors maintain internally.  Sparse detectors are run
on banded random channels; the dense orthogonal detector on dense
random channels.
"""

from __future__ import annotations

import time

import numpy as np
import scipy.sparse as sp

from ddlink import detectors as dt
from ddlink.harness.config import ConfigError, ExperimentConfig

SPARSE_NNZ_PER_ROW = 8


def banded_channel(n: int, nnz_per_row: int, seed: int) -> sp.csr_matrix:
    rng = np.random.default_rng(seed)
    rows = np.repeat(np.arange(n), nnz_per_row)
    cols = (rows + np.tile(np.arange(nnz_per_row), n)) % n
    vals = (rng.standard_normal(n * nnz_per_row) + 1j * rng.standard_normal(n * nnz_per_row)) / np.sqrt(
        nnz_per_row
    )
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def run_bench(cfg: ExperimentConfig, seed: int | None = None):
    seed = cfg.seed if seed is None else seed
    const = dt.by_name(cfg.constellation)
    opts = dt.DetectorOptions(max_iterations=8, tol=0.0, **cfg.detector_options)
    rows = []
    for n in cfg.sizes:
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(n,)))
        bits = rng.integers(0, 2, n * const.bits_per_symbol)
        x = dt.map_bits(bits, const)
        nv = 10 ** (-15 / 10)
        noise = np.sqrt(nv / 2) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
        sparse_h = banded_channel(n, SPARSE_NNZ_PER_ROW, seed + n)
        dense_h = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(n)
        for det in cfg.detectors:
            if det == "gmp":
                y = sparse_h @ x + noise
                t0 = time.perf_counter()
                res = dt.gmp_detect(y, sparse_h, nv, const, opts)
            elif det == "mamp":
                y = sparse_h @ x + noise
                t0 = time.perf_counter()
                res = dt.mamp_detect(y, sparse_h, nv, const, opts)
            elif det == "oamp":
                y = dense_h @ x + noise
                t0 = time.perf_counter()
                res = dt.oamp_detect(y, dense_h, nv, const, opts)
            elif det in ("cd_oamp", "cd_mamp"):
                chan = dt.ComposedChannel(lambda v: v, lambda v: v, sparse_h, n, True, n)
                y = sparse_h @ x + noise
                t0 = time.perf_counter()
                res = dt.cross_domain_detect(y, chan, nv, const, cfg.options_for(det))
            elif det == "lmmse":
                y = dense_h @ x + noise
                t0 = time.perf_counter()
                res = dt.linear_detect("lmmse", y, dense_h, nv, const)
            else:
                raise ConfigError(f"benchmark does not cover detector {det!r}")
            wall_ms = (time.perf_counter() - t0) * 1e3
            rows.append(
                {
                    "detector": det,
                    "n": n,
                    "macs": res.mac_count,
                    "iterations": res.iterations,
                    "wall_ms": wall_ms,
                }
            )
    return rows


def write_bench_csv(path, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("detector,n,macs,iterations,wall_ms\n")
        for r in rows:
            fh.write(f"{r['detector']},{r['n']},{r['macs']},{r['iterations']},{r['wall_ms']:.4f}\n")
