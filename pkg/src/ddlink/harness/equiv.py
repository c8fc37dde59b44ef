"""Scheme-equivalence and identity report.

Runs the full identity suite connecting the schemes (shared sample
streams, transform special cases, round trips, prefix reductions) and
reports one pass/fail line per identity with its maximum deviation.
Failures are report content, never exceptions.  A documented fault
switch perturbs one identity's data so the report's sensitivity can be
demonstrated (negative control).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ddlink import modems as md
from ddlink import transforms as tr
from ddlink.harness.config import ExperimentConfig


@dataclass
class IdentityCheck:
    name: str
    description: str
    deviation: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.deviation <= self.tolerance


def _qpsk_grid(rng, m, n):
    return ((rng.integers(0, 2, (m, n)) * 2 - 1) + 1j * (rng.integers(0, 2, (m, n)) * 2 - 1)) / np.sqrt(2)


def run_equivalence(config: ExperimentConfig, seed: int | None = None) -> list[IdentityCheck]:
    seed = config.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    fault = config.fault
    checks: list[IdentityCheck] = []
    m, n = 8, 4
    df = config.df

    # 1. identical sample streams of the rectangular-pulse family
    dev = 0.0
    for _ in range(100):
        x = _qpsk_grid(rng, m, n)
        s1 = md.modulate(md.Modem("otfs_rect", m, n, df=df), md.FrameGrid(x, "dd")).samples
        s2 = md.modulate(md.Modem("osdm", m, n, df=df), md.FrameGrid(x, "dd")).samples
        s3 = md.modulate(md.Modem("vofdm", m, n, df=df), md.FrameGrid(x, "tf")).samples
        if fault == "stream_equivalence":
            s2 = s2 + 1e-3
        dev = max(dev, float(np.abs(s1 - s2).max()), float(np.abs(s1 - s3).max()))
    checks.append(
        IdentityCheck(
            "stream_equivalence",
            "rectangular-pulse delay-Doppler, signal-division and vector schemes emit identical sample streams",
            dev,
            1e-12,
        )
    )

    # 2. affine transform with zero chirp rates reduces to the DFT
    dev = 0.0
    for size in (2, 8, 64, 256):
        a = tr.daft_matrix(size, 0.0, 0.0)
        if fault == "daft_dft":
            a = a * np.exp(1j * 1e-3)
        dev = max(dev, float(np.abs(a - tr.dft_matrix(size)).max()))
    checks.append(
        IdentityCheck(
            "daft_dft",
            "affine Fourier transform at zero chirp rates equals the DFT entrywise",
            dev,
            1e-12,
        )
    )

    # 3. Fresnel transform as a quarter-rate affine transform (even sizes)
    dev = 0.0
    for size in (4, 8, 64):
        a = np.exp(-1j * np.pi / 4) * tr.daft_matrix(size, -1 / (2 * size), -1 / (2 * size))
        dev = max(dev, float(np.abs(a - tr.dfnt_matrix(size)).max()))
    checks.append(
        IdentityCheck(
            "dfnt_daft",
            "Fresnel transform equals the affine transform at chirp rate -1/(2M) times a global phase",
            dev,
            1e-12,
        )
    )

    # 4. unitary round trips
    dev = 0.0
    for scheme in ("ofdm", "otfs_rect", "osdm", "vofdm", "otsm", "ocdm", "afdm"):
        modem = md.Modem(scheme, m, n, df=df, c1=0.013, c2=0.007)
        x = _qpsk_grid(rng, m, n)
        back = md.demodulate(modem, md.modulate(modem, md.FrameGrid(x, modem.domain)))
        dev = max(dev, float(np.abs(back.data - x).max()))
    checks.append(
        IdentityCheck(
            "round_trips",
            "every unitary scheme recovers its grid exactly through an identity channel",
            dev,
            1e-10,
        )
    )

    # 5. chirp-periodic prefix reduces to the cyclic prefix
    body = rng.standard_normal(32) + 1j * rng.standard_normal(32)
    c1 = 5.0 / (2 * 32)  # 2 M' c1 = 5, integer, M' even
    cpp = md.prefix_add(body, "cpp", 6, c1=c1)
    cp = md.prefix_add(body, "cp", 6)
    if fault == "cpp_cp":
        cpp = cpp * np.exp(1j * 1e-3)
    checks.append(
        IdentityCheck(
            "cpp_cp",
            "chirp-periodic prefix coincides with the cyclic prefix when 2 M' c1 is an integer and M' is even",
            float(np.abs(cpp - cp).max()),
            1e-12,
        )
    )

    # 6. grid transform inverse pair
    x = rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))
    dev = float(np.abs(tr.sfft(tr.isfft(x)) - x).max())
    checks.append(
        IdentityCheck(
            "grid_transform_inverse",
            "the delay-Doppler/time-frequency grid transforms invert each other",
            dev,
            1e-12,
        )
    )

    # 7. sequency transform is self-inverse
    w = tr.wht_matrix(16)
    checks.append(
        IdentityCheck(
            "wht_self_inverse",
            "the normalized sequency transform applied twice is the identity",
            float(np.abs(w @ w - np.eye(16)).max()),
            1e-12,
        )
    )
    return checks


def format_report(checks) -> str:
    lines = ["identity report", "=" * 60]
    for c in checks:
        status = "PASS" if c.passed else "FAIL"
        lines.append(f"[{status}] {c.name}: max deviation {c.deviation:.3e} (tol {c.tolerance:.0e})")
        lines.append(f"       {c.description}")
    n_fail = sum(not c.passed for c in checks)
    lines.append("=" * 60)
    lines.append(f"{len(checks) - n_fail}/{len(checks)} identities hold")
    return "\n".join(lines) + "\n"
