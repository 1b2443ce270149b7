import numpy as np
import pytest

from cpafdm.channel import (
    ChannelFamily,
    ChannelSpec,
    NonOrthogonalChannelError,
    PathSpec,
    PrefixPhaseRule,
    channel_matrix,
    effective_channel,
    extract_paths,
    location_index,
    optimal_c1,
)
from cpafdm.transforms import (
    TransformConfig,
    cpdaft_matrix,
    default_c2,
    random_permutation,
)


def reference_received(spec, prefix, s):
    """Literal prefix-append / per-path delay-Doppler sum / prefix-discard.

    The chirp-periodic prefix is built by continuing the c1 chirp itself:
    sample -i copies sample n-i times the ratio of the chirp at the two
    indices.  Valid as an oracle whenever 2*n*c1 is an integer (the regime
    in which the prefix rule is used).
    """
    n = spec.n
    ncp = spec.lmax
    ext = np.zeros(ncp + n, dtype=complex)
    ext[ncp:] = s
    for i in range(1, ncp + 1):
        if prefix.kind == "afdm-chirp-periodic":
            ratio = np.exp(2j * np.pi * prefix.c1 * (i * i - (n - i) ** 2))
            ext[ncp - i] = s[n - i] * ratio
        else:
            ext[ncp - i] = s[n - i]
    r = np.zeros(n, dtype=complex)
    for k in range(n):
        acc = 0.0 + 0.0j
        for p in spec.paths:
            acc += (
                p.gain
                * np.exp(-2j * np.pi * p.doppler * k / n)
                * ext[ncp + k - p.delay]
            )
        r[k] = acc
    return r


def random_integer_channel(rng, n, p, lmax, fmax, guard=0):
    fam = ChannelFamily(n=n, p=p, lmax=lmax, fmax=fmax, guard=guard)
    return fam.draw(rng)


# ------------------------------------------------------------- channel matrix


def test_trivial_path_is_identity():
    spec = ChannelSpec(n=8, paths=(PathSpec(1.0, 0, 0.0),), lmax=0, fmax=0)
    for rule in (PrefixPhaseRule.zero(), PrefixPhaseRule.afdm(0.25)):
        assert np.allclose(channel_matrix(spec, rule), np.eye(8), atol=1e-12)


def test_pure_delay_is_cyclic_shift():
    spec = ChannelSpec(n=6, paths=(PathSpec(1.0, 2, 0.0),), lmax=2, fmax=0)
    h = channel_matrix(spec, PrefixPhaseRule.zero())
    expected = np.zeros((6, 6))
    for i in range(6):
        expected[i, (i - 2) % 6] = 1.0
    assert np.allclose(h, expected, atol=1e-12)


def test_pure_doppler_is_diagonal():
    spec = ChannelSpec(n=8, paths=(PathSpec(1.0, 0, 3.0),), lmax=0, fmax=3)
    h = channel_matrix(spec, PrefixPhaseRule.zero())
    k = np.arange(8)
    assert np.allclose(h, np.diag(np.exp(-2j * np.pi * 3.0 * k / 8)), atol=1e-12)


def test_matrix_matches_time_domain_pipeline():
    # the matrix route must agree with a literal prefix simulation
    rng = np.random.default_rng(101)
    for n in (8, 16, 32):
        for _ in range(6):
            fmax = int(rng.integers(0, 3))
            lmax = int(rng.integers(1, 4))
            if 2 * fmax * (lmax + 1) + lmax > n:
                continue
            p = min(3, (lmax + 1) * (2 * fmax + 1))
            spec = random_integer_channel(rng, n, p=p, lmax=lmax, fmax=fmax)
            c1 = optimal_c1(fmax, 0, n)
            s = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            for rule in (PrefixPhaseRule.zero(), PrefixPhaseRule.afdm(c1)):
                direct = channel_matrix(spec, rule) @ s
                assert np.max(np.abs(direct - reference_received(spec, rule, s))) < 1e-10


def test_even_n_integer_rate_prefix_phase_vanishes():
    # even n with integer 2*n*c1: the wrap fix-up collapses to ones
    rng = np.random.default_rng(7)
    spec = random_integer_channel(rng, 16, p=3, lmax=3, fmax=1)
    c1 = 5.0 / 32.0  # 2*n*c1 = 5
    h_afdm = channel_matrix(spec, PrefixPhaseRule.afdm(c1))
    h_zero = channel_matrix(spec, PrefixPhaseRule.zero())
    assert np.max(np.abs(h_afdm - h_zero)) < 1e-12


def test_prefix_rule_validation():
    with pytest.raises(ValueError):
        PrefixPhaseRule(kind="bogus")
    with pytest.raises(ValueError):
        PrefixPhaseRule(kind="zero", c1=float("nan"))


def test_channel_spec_validation():
    with pytest.raises(ValueError):
        ChannelSpec(n=8, paths=(PathSpec(1.0, 5, 0.0),), lmax=3, fmax=0)
    with pytest.raises(ValueError):
        ChannelSpec(n=8, paths=(PathSpec(1.0, 0, 2.0),), lmax=0, fmax=1)
    with pytest.raises(ValueError):
        ChannelSpec(n=8, paths=(), lmax=0, fmax=0)
    with pytest.raises(ValueError):
        ChannelSpec(n=8, paths=(PathSpec(1.0, 0, 0.0),), lmax=8, fmax=0)


def test_orthogonality_condition():
    ok = ChannelSpec(n=64, paths=(PathSpec(1.0, 0, 0.0),), lmax=2, fmax=1)
    assert ok.is_orthogonal
    bad = ChannelSpec(n=8, paths=(PathSpec(1.0, 0, 0.0),), lmax=3, fmax=2)
    assert not bad.is_orthogonal  # 2*2*4 + 3 = 19 > 8


def test_optimal_c1_values():
    assert optimal_c1(1, 0, 64) == pytest.approx(3.0 / 128.0, abs=1e-15)
    assert optimal_c1(0, 0, 2) == pytest.approx(0.25, abs=1e-15)
    assert optimal_c1(2, 1, 32) == pytest.approx(7.0 / 64.0, abs=1e-15)
    with pytest.raises(ValueError):
        optimal_c1(-1, 0, 8)


# ---------------------------------------------------------- effective channel


def test_effective_channel_matches_dense_product():
    rng = np.random.default_rng(11)
    n = 16
    spec = random_integer_channel(rng, n, p=2, lmax=2, fmax=1)
    cfg = TransformConfig.one_sided(
        n, optimal_c1(1, 0, n), default_c2(n), random_permutation(n, rng)
    )
    g = effective_channel(spec, cfg).matrix
    a = cpdaft_matrix(cfg)
    h = channel_matrix(spec, PrefixPhaseRule.afdm(cfg.c1))
    assert np.max(np.abs(g - a @ h @ a.conj().T)) < 1e-10


def test_one_sided_is_chirp_scaled_unpermuted_core():
    # entries differ from the unpermuted-c2 core only by the permuted chirp phases
    rng = np.random.default_rng(13)
    n = 16
    c1 = optimal_c1(1, 0, n)
    c2 = default_c2(n)
    spec = random_integer_channel(rng, n, p=3, lmax=2, fmax=1)
    perm = random_permutation(n, rng)
    g = effective_channel(spec, TransformConfig.one_sided(n, c1, c2, perm)).matrix
    core = effective_channel(spec, TransformConfig.conventional(n, c1, 0.0)).matrix
    sq = perm.map.astype(float) ** 2
    scale = np.exp(-2j * np.pi * c2 * (sq[:, None] - sq[None, :]))
    assert np.max(np.abs(g - scale * core)) < 1e-10


def test_one_sided_support_equals_unpermuted_support():
    rng = np.random.default_rng(17)
    n = 32
    c1 = optimal_c1(2, 0, n)
    c2 = default_c2(n)
    for _ in range(20):
        spec = random_integer_channel(rng, n, p=3, lmax=2, fmax=2)
        afdm = effective_channel(spec, TransformConfig.conventional(n, c1, c2))
        cp = effective_channel(
            spec, TransformConfig.one_sided(n, c1, c2, random_permutation(n, rng))
        )
        assert cp.support == afdm.support


def test_two_sided_support_diverges():
    rng = np.random.default_rng(19)
    n = 32
    c1 = optimal_c1(2, 0, n)
    c2 = default_c2(n)
    spec = random_integer_channel(rng, n, p=3, lmax=2, fmax=2)
    afdm = effective_channel(spec, TransformConfig.conventional(n, c1, c2))
    two = effective_channel(
        spec,
        TransformConfig.two_sided(
            n, c1, c2, random_permutation(n, rng), random_permutation(n, rng)
        ),
    )
    assert two.support != afdm.support


def test_effective_channel_size_mismatch():
    spec = ChannelSpec(n=8, paths=(PathSpec(1.0, 0, 0.0),), lmax=0, fmax=0)
    with pytest.raises(ValueError):
        effective_channel(spec, TransformConfig.ofdm(16))


# ------------------------------------------------------------------ locations


def test_location_index_example():
    spec = ChannelSpec(n=16, paths=(PathSpec(1.0, 1, 2.0),), lmax=1, fmax=2)
    assert location_index(spec.paths[0], spec, c1=5.0 / 32.0) == 7.0


def test_location_index_wraps():
    spec = ChannelSpec(n=16, paths=(PathSpec(1.0, 0, -1.0),), lmax=0, fmax=1)
    assert location_index(spec.paths[0], spec, c1=3.0 / 32.0) == 15.0


def test_location_matches_row0_support_column():
    rng = np.random.default_rng(23)
    n = 32
    fmax, lmax = 2, 2
    c1 = optimal_c1(fmax, 0, n)
    for _ in range(10):
        spec = random_integer_channel(rng, n, p=1, lmax=lmax, fmax=fmax)
        g = effective_channel(spec, TransformConfig.conventional(n, c1, default_c2(n)))
        cols = sorted(c for r, c in g.support if r == 0)
        assert cols == [int(location_index(spec.paths[0], spec, c1))]


def test_locations_distinct_over_range():
    n = 32
    fmax, lmax = 2, 2
    c1 = optimal_c1(fmax, 0, n)
    spec = ChannelSpec(n=n, paths=(PathSpec(1.0, 0, 0.0),), lmax=lmax, fmax=fmax)
    locs = set()
    for delay in range(lmax + 1):
        for dopp in range(-fmax, fmax + 1):
            locs.add(location_index(PathSpec(1.0, delay, float(dopp)), spec, c1))
    assert len(locs) == (lmax + 1) * (2 * fmax + 1)


def test_fractional_doppler_peaks_at_rounded_location():
    rng = np.random.default_rng(29)
    n = 32
    fmax, lmax = 2, 2
    c1 = optimal_c1(fmax, 0, n)
    fam = ChannelFamily(n=n, p=1, lmax=lmax, fmax=fmax, fractional=True)
    for _ in range(10):
        spec = fam.draw(rng)
        frac = spec.paths[0].doppler % 1.0
        if abs(frac - 0.5) < 0.05:
            continue  # midpoint ties are genuinely ambiguous
        g = effective_channel(spec, TransformConfig.conventional(n, c1, default_c2(n)))
        loc = location_index(spec.paths[0], spec, c1)
        assert np.argmax(np.abs(g.matrix[0])) == int(round(loc)) % n


# ------------------------------------------------------------ path extraction


def test_extract_paths_roundtrip():
    rng = np.random.default_rng(31)
    n = 32
    fmax, lmax = 2, 2
    c1 = optimal_c1(fmax, 0, n)
    c2 = default_c2(n)
    for _ in range(25):
        spec = random_integer_channel(rng, n, p=3, lmax=lmax, fmax=fmax)
        cfg = TransformConfig.one_sided(n, c1, c2, random_permutation(n, rng))
        got = extract_paths(effective_channel(spec, cfg), spec)
        want = sorted(spec.paths, key=lambda p: (p.delay, p.doppler))
        assert len(got) == len(want)
        for a, b in zip(got, want):
            assert a.delay == b.delay
            assert a.doppler == b.doppler
            assert abs(a.gain - b.gain) < 1e-8


def test_extract_paths_requires_identity_perm1():
    rng = np.random.default_rng(37)
    n = 16
    spec = random_integer_channel(rng, n, p=2, lmax=1, fmax=1)
    cfg = TransformConfig.two_sided(
        n,
        optimal_c1(1, 0, n),
        default_c2(n),
        random_permutation(n, rng),
        random_permutation(n, rng),
    )
    with pytest.raises(NonOrthogonalChannelError):
        extract_paths(effective_channel(spec, cfg), spec)


def test_extract_paths_rejects_ambiguous_geometry():
    # n=5, lmax=1, fmax=1 satisfies the inequality with equality, yet the
    # signed Doppler range wraps onto itself; the location table catches it
    spec = ChannelSpec(n=5, paths=(PathSpec(1.0, 0, 0.0),), lmax=1, fmax=1)
    assert spec.is_orthogonal
    cfg = TransformConfig.conventional(5, optimal_c1(1, 0, 5), default_c2(5))
    with pytest.raises(NonOrthogonalChannelError):
        extract_paths(effective_channel(spec, cfg), spec)


def test_extract_paths_rejects_non_integer_alignment():
    rng = np.random.default_rng(41)
    spec = random_integer_channel(rng, 16, p=2, lmax=1, fmax=1)
    cfg = TransformConfig.conventional(16, 0.1001, default_c2(16))
    with pytest.raises(NonOrthogonalChannelError):
        extract_paths(effective_channel(spec, cfg), spec)


# --------------------------------------------------------------------- family


def test_family_draws_distinct_pairs_unit_power():
    rng = np.random.default_rng(43)
    fam = ChannelFamily(n=64, p=3, lmax=2, fmax=1)
    for _ in range(20):
        spec = fam.draw(rng)
        pairs = {(p.delay, p.doppler) for p in spec.paths}
        assert len(pairs) == 3
        assert sum(abs(p.gain) ** 2 for p in spec.paths) == pytest.approx(1.0)
        assert all(0 <= p.delay <= 2 and abs(p.doppler) <= 1 for p in spec.paths)


def test_family_draw_deterministic():
    fam = ChannelFamily(n=32, p=2, lmax=2, fmax=1)
    a = fam.draw(np.random.default_rng(99))
    b = fam.draw(np.random.default_rng(99))
    assert a == b


def test_family_rejects_impossible_request():
    with pytest.raises(ValueError):
        ChannelFamily(n=16, p=10, lmax=1, fmax=1)
