"""Command-line entry point for the experiment harness.

Subcommands: ``psd``, ``ber``, ``chanmat``, ``equiv``, ``detect-bench``.
Exit codes: 0 success, 2 configuration error, 3 internal assertion
failure.  CSV bodies are deterministic for a given config and seed;
wall times and timestamps go to the side metadata files.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

from ddlink.harness import bench, chanmat, equiv, psd, runio
from ddlink.harness import ber as ber_mod
from ddlink.harness.config import ConfigError, load_config

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INTERNAL = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ddlink",
        description="Delay-Doppler waveform simulation harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("psd", "power spectral density comparison"),
        ("ber", "Monte-Carlo bit error rate sweep"),
        ("chanmat", "effective channel magnitude dumps"),
        ("equiv", "scheme equivalence and identity report"),
        ("detect-bench", "detector complexity benchmark"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="experiment configuration (YAML)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--threads", type=int, default=1, help="worker processes for trials")
    return parser


def _run(args) -> int:
    cfg = load_config(args.config)
    if cfg.experiment != args.command:
        raise ConfigError(
            f"config declares experiment {cfg.experiment!r} but the "
            f"{args.command!r} command was invoked"
        )
    seed = cfg.seed if args.seed is None else args.seed
    out = runio.ensure_dir(args.out)
    started = time.perf_counter()

    if args.command == "psd":
        rows, curves = psd.run_psd(cfg, seed)
        runio.write_psd_csv(os.path.join(out, "psd.csv"), rows)
        runio.write_metadata(
            os.path.join(out, "psd.meta.yaml"),
            cfg,
            seed,
            {"wall_s": time.perf_counter() - started, "schemes": list(curves)},
        )
        print(f"wrote {os.path.join(out, 'psd.csv')} ({len(rows)} rows)")
        return EXIT_OK

    if args.command == "ber":
        results = ber_mod.run_ber(cfg, seed, threads=args.threads)
        written = []
        intervals = {}
        for (velocity, bw), rows in results.items():
            if len(results) == 1:
                name = "ber.csv"
            else:
                name = f"ber_v{velocity:g}_bw{bw:g}.csv"
            path = os.path.join(out, name)
            runio.write_ber_csv(path, rows)
            written.append(path)
            for r in rows:
                lo, hi = runio.wilson_interval(r["errors"], r["bits"])
                intervals[f"{name}:{r['scheme']}:{r['detector']}:{r['snr_db']:g}"] = {
                    "wilson_low": float(lo),
                    "wilson_high": float(hi),
                    "diverged_trials": r.get("diverged", 0),
                }
        runio.write_metadata(
            os.path.join(out, "ber.meta.yaml"),
            cfg,
            seed,
            {"wall_s": time.perf_counter() - started, "wilson_95": intervals},
        )
        print("wrote " + ", ".join(written))
        return EXIT_OK

    if args.command == "chanmat":
        written = chanmat.run_chanmat(cfg, out, seed)
        runio.write_metadata(
            os.path.join(out, "chanmat.meta.yaml"),
            cfg,
            seed,
            {"wall_s": time.perf_counter() - started, "files": sorted(written)},
        )
        print(f"wrote {len(written)} matrices to {out}")
        return EXIT_OK

    if args.command == "equiv":
        checks = equiv.run_equivalence(cfg, seed)
        report = equiv.format_report(checks)
        path = os.path.join(out, "equiv.txt")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(report)
        sys.stdout.write(report)
        runio.write_metadata(
            os.path.join(out, "equiv.meta.yaml"),
            cfg,
            seed,
            {
                "wall_s": time.perf_counter() - started,
                "results": {c.name: {"deviation": c.deviation, "passed": c.passed} for c in checks},
            },
        )
        return EXIT_OK

    if args.command == "detect-bench":
        rows = bench.run_bench(cfg, seed)
        path = os.path.join(out, "detect_bench.csv")
        bench.write_bench_csv(path, rows)
        runio.write_metadata(
            os.path.join(out, "detect_bench.meta.yaml"),
            cfg,
            seed,
            {"wall_s": time.perf_counter() - started},
        )
        print(f"wrote {path}")
        return EXIT_OK

    raise AssertionError(args.command)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - the CLI contract maps these to exit 3
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
