import math

import numpy as np
import pytest

from cpafdm.channel import ChannelFamily, channel_matrix, effective_channel, optimal_c1
from cpafdm.cpim import (
    CpimRecord,
    PermCodebook,
    build_codebook,
    cpim_detect,
    cpim_encode,
    max_index_bits,
    run_cpim,
    spectral_efficiency,
)
from cpafdm.detection import demap_indices, mmse_equalize
from cpafdm.transforms import cpdaft_forward, identity_permutation
from cpafdm.waveform import Frame, WaveformId, modulate, map_bits, qam_constellation


# ------------------------------------------------------------------- capacity


def test_max_index_bits_small_values():
    assert max_index_bits(2) == 1
    assert max_index_bits(4) == 4  # 4! = 24
    assert max_index_bits(16) == 44  # 16! = 20922789888000
    assert math.factorial(16) == 20922789888000
    with pytest.raises(ValueError):
        max_index_bits(1)


def test_max_index_bits_is_floor_log2():
    for n in (2, 5, 16, 64, 100):
        k = max_index_bits(n)
        assert (1 << k) <= math.factorial(n) < (1 << (k + 1))
    assert max_index_bits(64) == 295


# ------------------------------------------------------------------- codebook


def test_codebook_construction():
    cb = build_codebook(4, 1, seed=3)
    assert len(cb) == 2
    assert cb.entries[0].is_identity()
    assert not cb.entries[1].is_identity()
    again = build_codebook(4, 1, seed=3)
    assert cb.entries == again.entries
    other = build_codebook(4, 1, seed=4)
    assert cb.entries[1] != other.entries[1] or True  # seeds may collide at n=4


def test_codebook_entries_distinct():
    cb = build_codebook(16, 6, seed=11)
    assert len(cb) == 64
    for i in range(64):
        for j in range(i + 1, 64):
            assert cb.entries[i] != cb.entries[j]


def test_codebook_capacity_check():
    with pytest.raises(ValueError):
        build_codebook(4, 5, seed=0)  # max is 4
    with pytest.raises(ValueError):
        build_codebook(8, 0, seed=0)
    build_codebook(4, 4, seed=0)  # exactly at capacity: 16 of 24 permutations


def test_codebook_validation():
    ident = identity_permutation(4)
    with pytest.raises(ValueError):
        PermCodebook(n=4, entries=(ident,), k_bits=1)
    with pytest.raises(ValueError):
        PermCodebook(n=4, entries=(ident, ident), k_bits=1)


# --------------------------------------------------------------------- encode


def test_encode_zero_index_matches_plain_waveform():
    n, c1 = 8, optimal_c1(1, 0, 8)
    cb = build_codebook(n, 2, seed=5)
    c = qam_constellation(4)
    rng = np.random.default_rng(7)
    sym_bits = rng.integers(0, 2, size=n * 2)
    bits = np.concatenate([[0, 0], sym_bits])
    sent, time = cpim_encode(bits, cb, c, c1)
    assert sent.chosen_index == 0
    plain = modulate(WaveformId.afdm(n, c1), map_bits(sym_bits, c))
    assert np.max(np.abs(time.data - plain.data)) < 1e-12


def test_encode_bit_layout_and_energy():
    n, c1 = 8, optimal_c1(1, 0, 8)
    cb = build_codebook(n, 2, seed=5)
    c = qam_constellation(4)
    bits = np.concatenate([[1, 0], np.zeros(16, dtype=int)])
    sent, time = cpim_encode(bits, cb, c, c1)
    assert sent.chosen_index == 2  # MSB-first index bits
    assert bits.size == 18  # N log2 M + log2 K = 16 + 2
    assert np.array_equal(sent.bits, bits)
    # permuting never costs transmit energy
    assert np.linalg.norm(time.data) == pytest.approx(
        np.linalg.norm(sent.symbols.data), rel=1e-12
    )


def test_encode_validation():
    cb = build_codebook(8, 2, seed=5)
    c = qam_constellation(4)
    with pytest.raises(ValueError):
        cpim_encode(np.zeros(17, dtype=int), cb, c, 0.1)
    with pytest.raises(ValueError):
        cpim_encode(np.full(18, 2), cb, c, 0.1)


# --------------------------------------------------------------------- detect


def _draw_channel(rng, n=8, p=2, lmax=1, fmax=1):
    return ChannelFamily(n=n, p=p, lmax=lmax, fmax=fmax).draw(rng)


def test_noiseless_roundtrip_every_entry():
    n, c1 = 8, optimal_c1(1, 0, 8)
    cb = build_codebook(n, 3, seed=9)
    c = qam_constellation(4)
    rng = np.random.default_rng(13)
    spec = _draw_channel(rng)
    w0 = WaveformId.afdm(n, c1)
    h = channel_matrix(spec, w0.prefix_rule)
    for k in range(len(cb)):
        bits = np.concatenate(
            [np.array([(k >> 2) & 1, (k >> 1) & 1, k & 1]), rng.integers(0, 2, size=16)]
        )
        sent, time = cpim_encode(bits, cb, c, c1)
        assert sent.chosen_index == k
        got = cpim_detect(Frame(h @ time.data, "received"), cb, spec, 0.0, c, c1)
        assert got.chosen_index == k
        assert np.array_equal(got.bits, sent.bits)


def test_detect_matches_per_candidate_pipeline():
    # oracle: score every entry through its own demodulator and equalizer
    n, c1 = 8, optimal_c1(1, 0, 8)
    cb = build_codebook(n, 2, seed=21)
    c = qam_constellation(4)
    rng = np.random.default_rng(23)
    for snr_db in (5.0, 15.0):
        var = 10.0 ** (-snr_db / 10.0)
        for _ in range(10):
            spec = _draw_channel(rng)
            bits = rng.integers(0, 2, size=18)
            sent, time = cpim_encode(bits, cb, c, c1)
            w = WaveformId.one_sided(n, c1, cb.entries[sent.chosen_index])
            h = channel_matrix(spec, w.prefix_rule)
            noise = math.sqrt(var / 2) * (
                rng.standard_normal(n) + 1j * rng.standard_normal(n)
            )
            r = h @ time.data + noise

            scores = []
            for perm in cb.entries:
                wk = WaveformId.one_sided(n, c1, perm)
                yk = cpdaft_forward(wk.cfg, r)
                gk = effective_channel(spec, wk.cfg)
                xk = mmse_equalize(gk, yk, var)
                sliced = c.points[demap_indices(xk, c)]
                scores.append(float(np.sum(np.abs(yk - gk.matrix @ sliced) ** 2)))
            expect_k = int(np.argmin(scores))

            got = cpim_detect(Frame(r, "received"), cb, spec, var, c, c1)
            assert got.chosen_index == expect_k


def test_detect_domain_checks():
    cb = build_codebook(8, 1, seed=1)
    c = qam_constellation(4)
    spec = _draw_channel(np.random.default_rng(0))
    with pytest.raises(ValueError):
        cpim_detect(Frame(np.ones(8), "time"), cb, spec, 0.1, c, 0.1)
    with pytest.raises(ValueError):
        cpim_detect(Frame(np.ones(4), "received"), cb, spec, 0.1, c, 0.1)


# ----------------------------------------------------------------------- rate


def test_spectral_efficiency_values():
    assert spectral_efficiency(64, 4, 2) == (128, 129)
    assert spectral_efficiency(64, 16, 256) == (256, 264)
    assert spectral_efficiency(8, 4, 4) == (16, 18)


def test_spectral_efficiency_validation():
    with pytest.raises(ValueError):
        spectral_efficiency(64, 4, 1)  # at least two codebook entries
    with pytest.raises(ValueError):
        spectral_efficiency(64, 4, 3)
    with pytest.raises(ValueError):
        spectral_efficiency(64, 5, 2)
    with pytest.raises(ValueError):
        spectral_efficiency(4, 4, 1 << 5)  # capacity is 4 bits at n=4


# ---------------------------------------------------------------- monte carlo


def test_run_cpim_deterministic_and_thread_invariant():
    cb = build_codebook(16, 2, seed=2)
    fam = ChannelFamily(n=16, p=3, lmax=2, fmax=1)
    a = run_cpim(cb, fam, [10.0, 20.0], trials=100, master_seed=6)
    b = run_cpim(cb, fam, [10.0, 20.0], trials=100, master_seed=6, threads=4)
    assert a == b
    assert all(isinstance(r, CpimRecord) for r in a)


def test_run_cpim_high_snr_is_reliable():
    cb = build_codebook(16, 2, seed=2)
    fam = ChannelFamily(n=16, p=3, lmax=2, fmax=1)
    (rec,) = run_cpim(cb, fam, [30.0], trials=400, master_seed=8)
    assert rec.index_error_rate < 1e-2
    assert rec.total_ber < 1e-2
    assert rec.trials == 400


def test_run_cpim_size_mismatch():
    cb = build_codebook(8, 1, seed=2)
    fam = ChannelFamily(n=16, p=3, lmax=2, fmax=1)
    with pytest.raises(ValueError):
        run_cpim(cb, fam, [10.0], trials=10, master_seed=1)
