from dataclasses import dataclass

import numpy as np
import pytest

from ddlink import channel as ch
from ddlink import pulses as pl


@dataclass(frozen=True)
class Frame:
    samples: np.ndarray
    prefix_kind: str = "none"
    prefix_len: int = 0

    @property
    def ref_index(self) -> int:
        return self.prefix_len


def brute_force_taps(spec, length, offset=0):
    """Independent double-loop evaluation of the tap table."""
    out = np.zeros((length, spec.memory), dtype=complex)
    for ci, c in enumerate(range(offset, offset + length)):
        for p in range(spec.memory):
            acc = 0.0
            for g, tau, nu in zip(spec.gains, spec.delays, spec.dopplers):
                acc += g * np.exp(2j * np.pi * nu * (c - p) * spec.ts) * complex(
                    spec.prc(np.array([p * spec.ts - tau]))[0]
                )
            out[ci, p] = acc
    return out


def default_prc(ts, beta=0.35):
    full_band = pl.windowed_sinc_filter(1.0 / ts, span=12, symbol_rate=1.0 / ts)
    return pl.cascade([full_band, full_band], step=ts / 32)


class TestDrawChannel:
    def test_degenerate_single_path(self):
        spec = ch.draw_channel(1, 0.0, 0.0, seed=5)
        assert spec.n_paths == 1
        assert spec.delays[0] == 0.0 and spec.dopplers[0] == 0.0

    def test_power_profile(self):
        # average path power 1/L, total unit, across a seed ensemble
        powers = []
        for seed in range(400):
            spec = ch.draw_channel(3, 1e-4, 300.0, seed=seed)
            powers.append(np.sum(np.abs(spec.gains) ** 2))
        assert abs(np.mean(powers) - 1.0) < 0.05

    def test_bounds(self):
        spec = ch.draw_channel(8, 2e-4, 500.0, seed=1)
        nu_max = ch.doppler_max(500.0)
        assert np.all(spec.delays >= 0) and np.all(spec.delays <= 2e-4)
        assert np.all(np.abs(spec.dopplers) <= nu_max + 1e-12)

    def test_seed_reproducibility(self):
        a = ch.draw_channel(3, 1e-4, 300.0, seed=42)
        b = ch.draw_channel(3, 1e-4, 300.0, seed=42)
        np.testing.assert_array_equal(a.gains, b.gains)
        np.testing.assert_array_equal(a.delays, b.delays)
        np.testing.assert_array_equal(a.dopplers, b.dopplers)

    def test_record_round_trip_is_bit_exact(self):
        spec = ch.draw_channel(3, 1e-4, 300.0, seed=7)
        back = ch.from_record(ch.to_record(spec))
        np.testing.assert_array_equal(spec.gains, back.gains)
        np.testing.assert_array_equal(spec.delays, back.delays)
        np.testing.assert_array_equal(spec.dopplers, back.dopplers)
        assert back.seed == 7

    def test_doppler_from_speed(self):
        # 300 km/h at 4 GHz: fc * v / c
        expected = 4e9 * (300.0 / 3.6) / ch.SPEED_OF_LIGHT
        assert abs(ch.doppler_max(300.0) - expected) < 1e-9


class TestDiscreteResponse:
    def test_single_ideal_path(self):
        ts = 1e-5
        spec = ch.ChannelSpec(
            gains=np.array([1.0 + 0j]), delays=np.array([0.0]), dopplers=np.array([0.0])
        ).configured(ts, pl.KroneckerResponse(ts * 1e-6))
        table = ch.discrete_response(spec, 16)
        assert table.p == 1
        np.testing.assert_allclose(table.taps[:, 0], np.ones(16), atol=1e-14)

    def test_pure_doppler_rotation(self):
        ts = 1e-5
        nu = 700.0
        spec = ch.ChannelSpec(
            gains=np.array([1.0 + 0j]), delays=np.array([0.0]), dopplers=np.array([nu])
        ).configured(ts, pl.KroneckerResponse(ts * 1e-6))
        table = ch.discrete_response(spec, 32)
        expected = np.exp(2j * np.pi * nu * np.arange(32) * ts)
        np.testing.assert_allclose(table.taps[:, 0], expected, atol=1e-12)
        np.testing.assert_allclose(np.abs(table.taps[:, 0]), 1.0, atol=1e-12)

    def test_matches_brute_force(self):
        ts = 1e-5
        spec = ch.draw_channel(3, 4 * ts, 300.0, seed=3).configured(ts, default_prc(ts))
        table = ch.discrete_response(spec, 24)
        np.testing.assert_allclose(table.taps, brute_force_taps(spec, 24), atol=1e-14)

    def test_offset_phases(self):
        ts = 1e-5
        spec = ch.draw_channel(2, 2 * ts, 200.0, seed=9).configured(ts, default_prc(ts))
        shifted = ch.discrete_response(spec, 8, offset=-5)
        np.testing.assert_allclose(shifted.taps, brute_force_taps(spec, 8, offset=-5), atol=1e-14)


class TestAssemble:
    def test_identity_response(self):
        table = ch.ResponseTable(taps=np.ones((4, 1), dtype=complex), ts=1.0)
        np.testing.assert_array_equal(ch.assemble_hch(table).dense(), np.eye(4))

    def test_hand_assembled_circulant(self):
        taps = np.tile(np.array([1.0, 0.5]), (4, 1)).astype(complex)
        h = ch.assemble_hch(ch.ResponseTable(taps=taps, ts=1.0)).dense()
        np.testing.assert_array_equal(h[0], [1.0, 0.0, 0.0, 0.5])
        for c in range(4):
            assert h[c, c] == 1.0 and h[c, (c - 1) % 4] == 0.5

    def test_zero_pattern_matches_template(self):
        ts = 1e-5
        spec = ch.draw_channel(3, 4 * ts, 300.0, seed=11).configured(ts, default_prc(ts))
        n = 32
        hmat = ch.channel_matrix(spec, n)
        dense = hmat.dense()
        p = spec.memory
        allowed = np.zeros((n, n), dtype=bool)
        for c in range(n):
            for q in range(p):
                allowed[c, (c - q) % n] = True
        assert np.all(dense[~allowed] == 0)

    def test_linear_wrap_drops_corner(self):
        taps = np.tile(np.array([1.0, 0.5]), (4, 1)).astype(complex)
        h = ch.assemble_hch(ch.ResponseTable(taps=taps, ts=1.0), wrap="linear").dense()
        assert h[0, 3] == 0.0 and h[1, 0] == 0.5

    def test_matvec_matches_dense(self):
        ts = 1e-5
        rng = np.random.default_rng(0)
        spec = ch.draw_channel(3, 4 * ts, 300.0, seed=2).configured(ts, default_prc(ts))
        for wrap, c1 in (("circular", None), ("linear", None), ("circular", 0.013)):
            hmat = ch.channel_matrix(spec, 24, wrap=wrap, cpp_c1=c1)
            s = rng.standard_normal(24) + 1j * rng.standard_normal(24)
            np.testing.assert_allclose(hmat.matvec(s), hmat.dense() @ s, atol=1e-12)

    def test_sparse_matches_dense(self):
        ts = 1e-5
        spec = ch.draw_channel(2, 3 * ts, 100.0, seed=4).configured(ts, default_prc(ts))
        hmat = ch.channel_matrix(spec, 16)
        np.testing.assert_allclose(hmat.sparse().toarray(), hmat.dense(), atol=1e-15)


class TestPropagate:
    def _cp_frame(self, body, n_cp):
        samples = np.concatenate([body[-n_cp:], body])
        return Frame(samples=samples, prefix_kind="cp", prefix_len=n_cp)

    def test_identity_channel_passthrough(self):
        ts = 1e-5
        spec = ch.ChannelSpec(
            gains=np.array([1.0 + 0j]), delays=np.array([0.0]), dopplers=np.array([0.0])
        ).configured(ts, pl.KroneckerResponse(ts * 1e-6))
        rng = np.random.default_rng(1)
        body = rng.standard_normal(16) + 1j * rng.standard_normal(16)
        out = ch.propagate(spec, Frame(samples=body), 0.0)
        np.testing.assert_allclose(out.samples, body, atol=1e-14)

    def test_convolve_then_strip_equals_circular_matrix(self):
        # the module's central consistency check
        ts = 1e-5
        rng = np.random.default_rng(8)
        for seed in range(5):
            spec = ch.draw_channel(3, 4 * ts, 300.0, seed=seed).configured(ts, default_prc(ts))
            n = 48
            body = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            frame = self._cp_frame(body, spec.memory + 2)
            out = ch.propagate(spec, frame, 0.0)
            stripped = out.samples[frame.prefix_len :]
            expected = ch.channel_matrix(spec, n).dense() @ body
            np.testing.assert_allclose(stripped, expected, atol=1e-10)

    def test_chirp_prefix_strip_equals_chirp_wrapped_matrix(self):
        ts = 1e-5
        c1 = 3 / (2 * 48) + 1e-4  # deliberately not CP-equivalent
        rng = np.random.default_rng(3)
        spec = ch.draw_channel(3, 4 * ts, 300.0, seed=6).configured(ts, default_prc(ts))
        n = 48
        body = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        n_pre = spec.memory + 1
        idx = np.arange(-n_pre, 0)
        prefix = body[n + idx] * np.exp(-2j * np.pi * c1 * (n**2 + 2.0 * n * idx))
        frame = Frame(samples=np.concatenate([prefix, body]), prefix_kind="cpp", prefix_len=n_pre)
        out = ch.propagate(spec, frame, 0.0)
        stripped = out.samples[n_pre:]
        expected = ch.channel_matrix(spec, n, cpp_c1=c1).dense() @ body
        np.testing.assert_allclose(stripped, expected, atol=1e-10)

    def test_short_prefix_rejected(self):
        ts = 1e-5
        spec = ch.draw_channel(3, 6 * ts, 300.0, seed=2).configured(ts, default_prc(ts))
        body = np.ones(32, dtype=complex)
        frame = Frame(samples=np.concatenate([body[-1:], body]), prefix_kind="cp", prefix_len=1)
        with pytest.raises(ValueError):
            ch.propagate(spec, frame, 0.0)

    def test_noise_variance(self):
        ts = 1e-5
        spec = ch.ChannelSpec(
            gains=np.array([1.0 + 0j]), delays=np.array([0.0]), dopplers=np.array([0.0])
        ).configured(ts, pl.KroneckerResponse(ts * 1e-6))
        rng = np.random.default_rng(12)
        n = 1_000_000
        out = ch.propagate(spec, Frame(samples=np.zeros(n, dtype=complex)), 0.25, rng=rng)
        measured = np.mean(np.abs(out.samples) ** 2)
        assert abs(measured - 0.25) / 0.25 < 0.03


class TestSpecialCaseStructure:
    def test_frequency_selective_is_circulant(self):
        ts = 1e-5
        spec = ch.draw_channel(3, 4 * ts, 0.0, seed=13).configured(ts, default_prc(ts))
        table = ch.discrete_response(spec, 24)
        # no Doppler: taps independent of the output sample index
        np.testing.assert_allclose(table.taps, np.tile(table.taps[:1], (24, 1)), atol=1e-14)
        dense = ch.assemble_hch(table).dense()
        rolled = np.roll(np.roll(dense, 1, axis=0), 1, axis=1)
        np.testing.assert_allclose(dense, rolled, atol=1e-14)

    def test_time_selective_is_diagonal_rotation(self):
        ts = 1e-5
        spec = ch.ChannelSpec(
            gains=np.array([1.0 + 0j]), delays=np.array([0.0]), dopplers=np.array([900.0])
        ).configured(ts, pl.KroneckerResponse(ts * 1e-6))
        dense = ch.channel_matrix(spec, 16).dense()
        off_diag = dense - np.diag(np.diag(dense))
        assert np.max(np.abs(off_diag)) == 0.0
        np.testing.assert_allclose(np.abs(np.diag(dense)), 1.0, atol=1e-12)

    def test_row_energy_near_unity(self):
        # default ensemble: unit power profile, full-band unit-energy
        # filters; mean Frobenius gain is the expectation of
        # |H s|^2 / |s|^2 over white s, averaged over channel draws
        ts = 1e-5
        prc = default_prc(ts)
        gains = []
        for seed in range(200):
            spec = ch.draw_channel(3, 4 * ts, 300.0, seed=seed).configured(ts, prc)
            h = ch.channel_matrix(spec, 64).dense()
            gains.append(np.linalg.norm(h, "fro") ** 2 / 64.0)
        assert abs(np.mean(gains) - 1.0) < 0.1
