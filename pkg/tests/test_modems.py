from dataclasses import replace

import numpy as np
import pytest

from ddlink import channel as ch
from ddlink import modems as md
from ddlink import pulses as pl
from ddlink import transforms as tr

DF = 15e3


def random_qpsk(rng, shape):
    return ((rng.integers(0, 2, shape) * 2 - 1) + 1j * (rng.integers(0, 2, shape) * 2 - 1)) / np.sqrt(2)


def modem_under_test(scheme, m=8, n=4, **kw):
    defaults = dict(df=DF)
    if scheme == "oddm":
        defaults.update(q=3, beta=0.35)
    if scheme == "afdm":
        defaults.update(c1=3.0 / (2 * m * n))
    defaults.update(kw)
    return md.Modem(scheme, m, n, **defaults)


UNITARY_SCHEMES = ["ofdm", "otfs_rect", "otfs_srrc", "osdm", "vofdm", "otsm", "ocdm", "afdm"]


class TestRoundTrips:
    @pytest.mark.parametrize("scheme", UNITARY_SCHEMES)
    def test_identity_roundtrip(self, scheme):
        rng = np.random.default_rng(1)
        modem = modem_under_test(scheme)
        grid = md.FrameGrid(random_qpsk(rng, (8, 4)), modem.domain)
        back = md.demodulate(modem, md.modulate(modem, grid))
        np.testing.assert_allclose(back.data, grid.data, atol=1e-10)

    def test_otsm_roundtrip_exercises_self_inverse(self):
        rng = np.random.default_rng(2)
        modem = modem_under_test("otsm", 8, 4)
        grid = md.FrameGrid(random_qpsk(rng, (8, 4)), "delay_sequency")
        frame = md.modulate(modem, grid)
        back = md.demodulate(modem, frame)
        np.testing.assert_allclose(back.data, grid.data, atol=1e-12)

    def test_roundtrip_with_prefix(self):
        rng = np.random.default_rng(3)
        for scheme in ("otfs_rect", "ocdm", "afdm", "otsm", "ofdm", "oddm"):
            modem = modem_under_test(scheme, prefix_len=5)
            grid = md.FrameGrid(random_qpsk(rng, (8, 4)), modem.domain)
            frame = md.modulate(modem, grid)
            back = md.demodulate(modem, frame)
            if scheme == "oddm":
                # truncated pulse leakage bounds the raw round trip
                assert np.abs(back.data - grid.data).max() < 0.08
            else:
                np.testing.assert_allclose(back.data, grid.data, atol=1e-10)

    def test_fbmc_recovers_real_symbols(self):
        rng = np.random.default_rng(4)
        modem = modem_under_test("fbmc_oqam")
        pam = (rng.integers(0, 2, (8, 4)) * 2 - 1).astype(complex)
        back = md.demodulate(modem, md.modulate(modem, md.FrameGrid(pam, "tf")))
        np.testing.assert_allclose(back.data.real, pam.real, atol=1e-3)

    def test_fbmc_real_orthogonality_only(self):
        modem = modem_under_test("fbmc_oqam")
        p = md.fbmc_matrix(modem)
        gram = p.conj().T @ p
        assert np.abs(gram.real - np.eye(32)).max() < 1e-3
        assert np.abs(gram.imag).max() > 0.1  # complex orthogonality genuinely fails


class TestModulateDetails:
    def test_otfs_impulse_m2n2(self):
        # direct evaluation of (F_N^H kron I_M) e_0 for M = N = 2
        modem = modem_under_test("otfs_rect", 2, 2)
        grid = np.zeros((2, 2), dtype=complex)
        grid[0, 0] = 1.0
        frame = md.modulate(modem, md.FrameGrid(grid, "dd"))
        expected = np.array([1.0, 0.0, 1.0, 0.0]) / np.sqrt(2)
        np.testing.assert_allclose(frame.samples, expected, atol=1e-14)

    def test_scheme_equivalence_streams(self):
        # rectangular-pulse delay-Doppler, signal-division and vector
        # multiplexing produce identical sample streams
        rng = np.random.default_rng(5)
        for trial in range(20):
            x = random_qpsk(rng, (8, 4))
            s1 = md.modulate(modem_under_test("otfs_rect"), md.FrameGrid(x, "dd")).samples
            s2 = md.modulate(modem_under_test("osdm"), md.FrameGrid(x, "dd")).samples
            s3 = md.modulate(modem_under_test("vofdm"), md.FrameGrid(x, "tf")).samples
            assert np.abs(s1 - s2).max() <= 1e-12
            assert np.abs(s1 - s3).max() <= 1e-12

    def test_afdm_zero_params_is_idft(self):
        rng = np.random.default_rng(6)
        modem = modem_under_test("afdm", c1=0.0, c2=0.0, prefix_len=0)
        x = rng.standard_normal(32) + 1j * rng.standard_normal(32)
        frame = md.modulate(modem, md.FrameGrid(md.vector_to_grid(modem, x), "daf"))
        np.testing.assert_allclose(frame.samples, np.fft.ifft(x, norm="ortho"), atol=1e-12)

    def test_unitary_energy_preservation(self):
        rng = np.random.default_rng(7)
        for scheme in UNITARY_SCHEMES:
            modem = modem_under_test(scheme)
            x = random_qpsk(rng, (8, 4))
            frame = md.modulate(modem, md.FrameGrid(x, modem.domain))
            assert abs(np.linalg.norm(frame.samples) - np.linalg.norm(x)) < 1e-10

    def test_gain_pulse_path(self):
        # diagonal-gain route checked against the dense kron product
        m, n = 4, 4
        taps = np.array([0.5, 1.0, 1.0, 0.5], dtype=complex)
        pulse = pl.Pulse("rect", taps, (1.0 / DF) / 4, 0)
        modem = md.Modem("otfs_rect", m, n, df=DF, gain_pulse=pulse)
        rng = np.random.default_rng(8)
        x = rng.standard_normal(16) + 1j * rng.standard_normal(16)
        frame = md.modulate(modem, md.FrameGrid(md.vector_to_grid(modem, x), "dd"))
        gmat = np.diag(pl.sample_gain_diag(pulse, m, 1.0 / DF))
        a_tx = np.kron(tr.dft_matrix(n).conj().T, gmat)
        np.testing.assert_allclose(frame.samples, a_tx @ x, atol=1e-12)

    def test_gain_pulse_rect_reduces_to_default(self):
        m, n = 8, 4
        rect = pl.make_pulse("rect", t=1.0 / DF, sps=m)
        rng = np.random.default_rng(9)
        x = random_qpsk(rng, (m, n))
        s_rect = md.modulate(md.Modem("otfs_srrc", m, n, df=DF, gain_pulse=rect), md.FrameGrid(x, "dd"))
        s_plain = md.modulate(modem_under_test("otfs_rect", m, n), md.FrameGrid(x, "dd"))
        np.testing.assert_allclose(s_rect.samples, s_plain.samples, atol=1e-12)

    def test_oddm_nyquist_sample_identity(self):
        # at zero roll-off the T/M-spaced samples reduce to the
        # per-delay-bin inverse DFT, scaled by the pulse peak
        m, n, q = 16, 4, 3
        modem = md.Modem("oddm", m, n, df=DF, q=q, beta=0.0, oversample=1)
        rng = np.random.default_rng(10)
        x = random_qpsk(rng, (m, n))
        frame = md.modulate(modem, md.FrameGrid(x, "dd"))
        g0 = pl._truncated_root_nyquist(0.0, q, 1)[q - 1].real
        for ell in range(n):
            for k in range(m):
                expected = g0 / np.sqrt(n) * np.sum(x[k, :] * np.exp(2j * np.pi * np.arange(n) * ell / n))
                got = frame.samples[(q - 1) + k + m * ell]
                assert abs(got - expected) < 1e-12

    def test_domain_validation(self):
        modem = modem_under_test("otfs_rect")
        with pytest.raises(ValueError):
            md.modulate(modem, md.FrameGrid(np.zeros((8, 4), dtype=complex), "tf"))
        with pytest.raises(ValueError):
            md.modulate(modem, md.FrameGrid(np.zeros((4, 8), dtype=complex), "dd"))

    def test_otsm_needs_power_of_two_slots(self):
        with pytest.raises(ValueError):
            md.Modem("otsm", 8, 6)


class TestPrefixes:
    def test_cp_example(self):
        s = np.array([1, 2, 3, 4], dtype=complex)
        np.testing.assert_array_equal(md.prefix_add(s, "cp", 2), [3, 4, 1, 2, 3, 4])

    def test_cpp_reduces_to_cp(self):
        # chirp-periodic prefix with 2 N c1 integer and N even
        rng = np.random.default_rng(11)
        s = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        c1 = 3.0 / (2 * 8)
        np.testing.assert_allclose(
            md.prefix_add(s, "cpp", 3, c1=c1), md.prefix_add(s, "cp", 3), atol=1e-12
        )

    def test_cpp_phase_law(self):
        rng = np.random.default_rng(12)
        s = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        c1 = 0.013
        out = md.prefix_add(s, "cpp", 2, c1=c1)
        for k, nn in enumerate(range(-2, 0)):
            expected = s[8 + nn] * np.exp(-2j * np.pi * c1 * (64 + 16 * nn))
            assert abs(out[k] - expected) < 1e-12

    def test_remove_inverts_add(self):
        rng = np.random.default_rng(13)
        s = rng.standard_normal(10) + 1j * rng.standard_normal(10)
        for kind in ("cp", "cpp"):
            ext = md.prefix_add(s, kind, 4, c1=0.01)
            np.testing.assert_array_equal(md.prefix_remove(ext, kind, 4), s)

    def test_prefix_longer_than_frame(self):
        with pytest.raises(ValueError):
            md.prefix_add(np.ones(4, dtype=complex), "cp", 5)


class TestEffectiveChannel:
    def _consistency(self, modem, spec, rng):
        spec = md.configured_channel(modem, spec, bl_span=6)
        modem = replace(modem, prefix_len=0 if modem.scheme == "fbmc_oqam" else spec.memory)
        if modem.scheme == "fbmc_oqam":
            x = (rng.integers(0, 2, modem.mn) * 2 - 1).astype(complex)
        else:
            x = rng.standard_normal(modem.mn) + 1j * rng.standard_normal(modem.mn)
        grid = md.FrameGrid(md.vector_to_grid(modem, x), modem.domain)
        frame = md.modulate(modem, grid)
        received = ch.propagate(spec, frame, 0.0)
        y_pipeline = md.grid_to_vector(modem, md.demodulate(modem, received).data)
        y_matrix = md.effective_channel(modem, spec) @ x
        return np.abs(y_pipeline - y_matrix).max()

    def _modem16(self, scheme):
        kw = {}
        if scheme == "otfs_srrc":
            kw = dict(span=8)
        return modem_under_test(scheme, m=16, n=4, **kw)

    @pytest.mark.parametrize("scheme", md.SCHEMES)
    def test_pipeline_matches_matrix_doubly_selective(self, scheme):
        rng = np.random.default_rng(20)
        base = ch.draw_channel(3, 4.0 / (16 * DF), 300.0, seed=21)
        assert self._consistency(self._modem16(scheme), base, rng) < 1e-10

    @pytest.mark.parametrize("preset", ["time_selective", "frequency_selective"])
    def test_pipeline_matches_matrix_special_cases(self, preset):
        rng = np.random.default_rng(22)
        if preset == "time_selective":
            base = ch.draw_channel(1, 0.0, 500.0, seed=23)
        else:
            base = ch.draw_channel(3, 4.0 / (16 * DF), 0.0, seed=24)
        for scheme in ("otfs_rect", "otfs_srrc", "oddm"):
            assert self._consistency(self._modem16(scheme), base, rng) < 1e-10

    def test_identity_matrix_gives_identity(self):
        table = ch.ResponseTable(taps=np.ones((32, 1), dtype=complex), ts=1.0 / (8 * DF))
        hch = ch.assemble_hch(table)
        for scheme in ("otfs_rect", "osdm", "vofdm", "otsm", "ocdm", "afdm"):
            modem = modem_under_test(scheme)
            np.testing.assert_allclose(md.effective_channel(modem, hch), np.eye(32), atol=1e-10)

    def test_table_form_matches_kron_product(self):
        # delay-Doppler scheme: H = (F_N kron I_M) Hch (F_N^H kron I_M)
        rng = np.random.default_rng(25)
        base = ch.draw_channel(3, 4.0 / (8 * DF), 300.0, seed=26)
        modem = modem_under_test("otfs_rect")
        spec = md.configured_channel(modem, base, bl_span=12)
        hch = ch.channel_matrix(spec, 32)
        h = md.effective_channel(modem, hch)
        fn = tr.dft_matrix(4)
        a = np.kron(fn, np.eye(8))
        np.testing.assert_allclose(h, a @ hch.dense() @ a.conj().T, atol=1e-10)

    def test_frequency_selective_block_structure(self):
        # time-invariant channel: the Doppler axis diagonalizes, so the
        # effective matrix is block-diagonal over Doppler indices
        base = ch.draw_channel(3, 4.0 / (8 * DF), 0.0, seed=27)
        modem = modem_under_test("otfs_rect")
        spec = md.configured_channel(modem, base, bl_span=12)
        h = md.effective_channel(modem, spec)
        m, n = 8, 4
        for li in range(n):
            for lj in range(n):
                block = h[li * m : (li + 1) * m, lj * m : (lj + 1) * m]
                if li != lj:
                    assert np.abs(block).max() < 1e-12

    def test_time_selective_interference_spacing(self):
        # single zero-delay path with an ideal on-grid kernel:
        # interference exactly between delay-equal bins, i.e. at every
        # M-th vector index
        modem = modem_under_test("otfs_rect")
        ts = modem.ts
        spec = ch.ChannelSpec(
            gains=np.array([1.0 + 0j]), delays=np.array([0.0]), dopplers=np.array([777.0])
        ).configured(ts, pl.KroneckerResponse(ts * 1e-6))
        h = md.effective_channel(modem, spec)
        idx = np.arange(modem.mn)
        same_delay = (idx[:, None] - idx[None, :]) % modem.m == 0
        assert np.abs(h[~same_delay]).max() < 1e-12
        assert np.abs(h[same_delay]).max() > 0.1

    def test_srrc_and_staggered_effective_channels_similar(self):
        # the two matched-pulse schemes produce correlated magnitude
        # patterns on the same channel; the fine structure differs at
        # this cramped geometry (the staggered scheme's intra-pulse
        # phase twist spreads more cross-Doppler energy), so the check
        # is a correlation that must clearly beat a mismatched-channel
        # control, not a tight elementwise bound
        m_srrc = modem_under_test("otfs_srrc", beta=0.35, span=6)
        m_oddm = modem_under_test("oddm", q=3, beta=0.35)
        common = dict(bl_span=4, latency_sym=10)

        def pattern(modem, seed):
            base = ch.draw_channel(3, 4.0 / (8 * DF), 300.0, seed=seed)
            h = np.abs(md.effective_channel(modem, md.configured_channel(modem, base, **common)))
            return h / np.linalg.norm(h)

        same, control = [], []
        for seed in range(6):
            same.append(np.sum(pattern(m_srrc, seed) * pattern(m_oddm, seed)))
            control.append(np.sum(pattern(m_srrc, seed) * pattern(m_oddm, seed + 50)))
        assert np.mean(same) > 0.75
        assert np.mean(same) > np.mean(control) + 0.05


class TestOddmFrame:
    def test_unit_norm_columns(self):
        modem = modem_under_test("oddm", 16, 4, q=3)
        u = md.oddm_matrix(modem)
        norms = np.sqrt(np.asarray((np.abs(u.toarray()) ** 2).sum(axis=0)))
        np.testing.assert_allclose(norms, 1.0, atol=1e-12)

    def test_near_orthogonal_at_internal_oversampling(self):
        modem = modem_under_test("oddm", 16, 4, q=3, beta=0.5)
        u = md.oddm_matrix(modem).toarray()
        gram = u.conj().T @ u
        assert np.abs(gram - np.eye(64)).max() < 0.02

    def test_frame_length(self):
        modem = md.Modem("oddm", 16, 4, q=3, oversample=1)
        assert modem.frame_len == 16 * 4 + 2 * 3 - 1
        modem2 = md.Modem("oddm", 16, 4, q=3)
        assert modem2.frame_len == 2 * (16 * 4 + 2 * 3 - 1)
