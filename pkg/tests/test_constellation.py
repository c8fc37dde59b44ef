import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ddlink.detectors import constellation as cn


class TestAlphabets:
    @pytest.mark.parametrize("name", ["qpsk", "qam16"])
    def test_unit_average_power(self, name):
        const = cn.by_name(name)
        assert abs(np.mean(np.abs(const.points) ** 2) - 1.0) < 1e-12

    @pytest.mark.parametrize("name", ["qpsk", "qam16"])
    def test_gray_adjacency(self, name):
        # geometric nearest neighbors differ in exactly one bit
        const = cn.by_name(name)
        pts = const.points
        d = np.abs(pts[:, None] - pts[None, :])
        d[np.eye(const.size, dtype=bool)] = np.inf
        min_d = d.min()
        for i in range(const.size):
            for j in range(const.size):
                if abs(d[i, j] - min_d) < 1e-9:
                    assert np.sum(const.bits[i] != const.bits[j]) == 1

    def test_bit_roundtrip(self):
        const = cn.qpsk()
        for k in range(4):
            bits = np.array([k >> 1 & 1, k & 1], dtype=np.int8)
            sym = cn.map_bits(bits, const)
            idx = cn.slice_symbols(sym, const)
            np.testing.assert_array_equal(cn.demap_bits(idx, const), bits)

    @given(st.integers(0, 2**16 - 1))
    @settings(max_examples=40, deadline=None)
    def test_qam16_bit_roundtrip(self, word):
        const = cn.qam16()
        bits = np.array([(word >> k) & 1 for k in range(16)], dtype=np.int8)
        syms = cn.map_bits(bits, const)
        idx = cn.slice_symbols(syms, const)
        np.testing.assert_array_equal(cn.demap_bits(idx, const), bits)


class TestSlicer:
    def test_point_maps_to_itself(self):
        const = cn.qpsk()
        np.testing.assert_array_equal(cn.slice_symbols(const.points, const), np.arange(4))

    def test_tie_breaks_to_lowest_index(self):
        const = cn.qpsk()
        assert cn.slice_symbols(np.array([0.0 + 0.0j]), const)[0] == 0


class TestDenoiser:
    def test_posterior_matches_direct_sum(self):
        const = cn.qam16()
        rng = np.random.default_rng(0)
        u = rng.standard_normal(5) + 1j * rng.standard_normal(5)
        v = 0.3
        probs, mean, var = cn.posterior(u, v, const)
        for i in range(5):
            w = np.exp(-np.abs(u[i] - const.points) ** 2 / v)
            w /= w.sum()
            assert abs(mean[i] - np.sum(w * const.points)) < 1e-12
            assert abs(var[i] - (np.sum(w * np.abs(const.points) ** 2) - np.abs(np.sum(w * const.points)) ** 2)) < 1e-12

    def test_low_noise_limit(self):
        const = cn.qpsk()
        _, mean, var = cn.posterior(const.points + 1e-3, 1e-6, const)
        np.testing.assert_allclose(mean, const.points, atol=1e-4)
        assert var.max() < 1e-6

    def test_llr_signs(self):
        const = cn.qpsk()
        probs, _, _ = cn.posterior(const.points, 0.1, const)
        llr = cn.bit_llrs(probs, const)
        for k in range(4):
            bits = const.bits[k]
            assert np.all(np.sign(llr[k]) == np.where(bits == 0, 1.0, -1.0))
