import cmath
import math

import numpy as np
import pytest

from cpafdm.channel import optimal_c1
from cpafdm.metrics import (
    AFGrid,
    DegenerateMainlobeError,
    ambiguity,
    cut_metrics,
    evm_percent,
    papr,
    papr_ccdf,
    papr_ccdf_analytic,
    papr_samples,
    permutation_ensemble,
)
from cpafdm.transforms import (
    TransformConfig,
    cpdaft_inverse,
    default_c2,
    identity_permutation,
    random_permutation,
)
from cpafdm.waveform import Frame, WaveformId, qam_constellation


def bruteforce_ambiguity(s, q):
    """Direct double-loop cyclic ambiguity, normalized at the origin."""
    s = list(s)
    n = len(s)
    rows = []
    for lag in range(-(n // 2), n - n // 2):
        row = []
        for k in range(q * n):
            nu = (k - (q * n) // 2) / (q * n)
            acc = 0j
            for m in range(n):
                acc += s[m] * s[(m - lag) % n].conjugate() * cmath.exp(-2j * cmath.pi * nu * m)
            row.append(abs(acc))
        rows.append(row)
    rows = np.array(rows)
    return rows / rows[n // 2, (q * n) // 2]


# ----------------------------------------------------------------------- PAPR


def test_papr_flat_envelope_is_zero_db():
    s = np.exp(2j * np.pi * np.arange(64) / 7.0)
    assert papr(s) == pytest.approx(0.0, abs=1e-12)


def test_papr_impulse():
    s = np.zeros(64, dtype=complex)
    s[13] = 3.0
    assert papr(s) == pytest.approx(10.0 * math.log10(64.0), abs=1e-12)


def test_papr_rejects_bad_input():
    with pytest.raises(ValueError):
        papr(np.zeros(8, dtype=complex))
    with pytest.raises(ValueError):
        papr(Frame(np.ones(8), "symbol"))
    assert papr(Frame(np.ones(8), "time")) == pytest.approx(0.0)


def test_ccdf_analytic_closed_form():
    assert papr_ccdf_analytic(64, 0.0) == pytest.approx(1.0)
    assert papr_ccdf_analytic(17, 0.0) == pytest.approx(1.0)
    g = 1.7
    assert papr_ccdf_analytic(1, g) == pytest.approx(math.exp(-g), rel=1e-12)
    # direct power evaluation as the oracle for the log1p/expm1 path
    gamma = math.log(64.0)
    expected = 1.0 - (1.0 - 1.0 / 64.0) ** 64
    assert papr_ccdf_analytic(64, gamma) == pytest.approx(expected, rel=1e-12)
    # high-precision decimal evaluation of 1-(1-1/64)^64
    assert expected == pytest.approx(0.635013475756, abs=1e-12)
    with pytest.raises(ValueError):
        papr_ccdf_analytic(64, -0.1)


def test_ccdf_curves_monotone_and_bounded():
    rng = np.random.default_rng(8)
    w = WaveformId.one_sided(64, optimal_c1(1, 0, 64), random_permutation(64, rng))
    samples = papr_samples(w, qam_constellation(4), 2000, seed=5)
    curve = papr_ccdf(samples, 64)
    for arr in (curve.empirical, curve.analytic):
        assert np.all(arr[:-1] >= arr[1:] - 1e-15)
        assert np.all((arr >= 0.0) & (arr <= 1.0))
    # rough agreement in the body of the distribution
    mid = np.searchsorted(curve.gammas_db, 8.0)
    assert abs(curve.empirical[mid] - curve.analytic[mid]) < 0.1


def test_papr_samples_deterministic():
    w = WaveformId.afdm(32, optimal_c1(1, 0, 32))
    a = papr_samples(w, qam_constellation(16), 50, seed=9)
    b = papr_samples(w, qam_constellation(16), 50, seed=9)
    assert np.array_equal(a, b)
    assert a.shape == (50,)


# ------------------------------------------------------------------ ambiguity


def test_ambiguity_matches_bruteforce():
    rng = np.random.default_rng(21)
    for n, q in ((8, 2), (16, 4), (15, 3)):
        s = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        grid = ambiguity(s, q)
        ref = bruteforce_ambiguity(s, q)
        assert grid.values.shape == ref.shape == (n, q * n)
        assert np.max(np.abs(grid.values - ref)) < 1e-10


def test_ambiguity_axes_and_normalization():
    rng = np.random.default_rng(23)
    s = rng.standard_normal(32) + 1j * rng.standard_normal(32)
    grid = ambiguity(s, 4)
    assert np.array_equal(grid.lags, np.arange(32) - 16)
    assert grid.dopplers[0] == -0.5
    assert grid.dopplers[-1] < 0.5
    assert grid.doppler_step == pytest.approx(1.0 / 128.0)
    i0, j0 = 16, 64
    assert grid.values[i0, j0] == pytest.approx(1.0)
    assert grid.values.max() == pytest.approx(1.0)
    assert np.argmax(grid.values) == i0 * 128 + j0


def test_ambiguity_symmetry_under_joint_negation():
    # the cyclic surface is magnitude-symmetric under (lag, doppler) ->
    # (-lag, -doppler) at every whole-bin Doppler (doppler * n integer); off
    # the whole bins the cyclic wrap phase exp(2j pi doppler n) breaks the
    # identity, so only the natural sub-grid is checked
    rng = np.random.default_rng(27)
    n, q = 16, 4
    s = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    grid = ambiguity(s, q)
    m = q * n
    for i in range(n):
        li = int(grid.lags[i])
        i_neg = int(np.where(grid.lags == ((-li + n // 2) % n) - n // 2)[0][0])
        for j in range(m // 2 % q, m, q):
            assert grid.dopplers[j] * n == pytest.approx(round(grid.dopplers[j] * n))
            j_neg = (m - j) % m  # index of -doppler, cyclically
            assert grid.values[i, j] == pytest.approx(grid.values[i_neg, j_neg], abs=1e-10)


def test_constant_modulus_zero_doppler_cut_is_autocorrelation():
    rng = np.random.default_rng(29)
    n = 24
    s = np.exp(2j * np.pi * rng.random(n))
    lags, amp = ambiguity(s, 2).zero_doppler_cut()
    for lag, a in zip(lags, amp):
        acc = sum(s[m] * np.conj(s[(m - int(lag)) % n]) for m in range(n))
        assert a == pytest.approx(abs(acc) / n, abs=1e-12)


def test_ambiguity_rejects_zero_or_bad_input():
    with pytest.raises(ValueError):
        ambiguity(np.zeros(8, dtype=complex), 2)
    with pytest.raises(ValueError):
        ambiguity(np.ones(8), 0)
    with pytest.raises(ValueError):
        ambiguity(Frame(np.ones(8), "received"), 2)


# ---------------------------------------------------------------- cut metrics


def _synthetic_grid(cut_values):
    """A tiny AFGrid whose zero-Doppler column is the given cut."""
    n = len(cut_values)
    values = np.zeros((n, 4))
    dopplers = (np.arange(4) - 2) / 4.0
    values[:, 2] = cut_values
    return AFGrid(values, np.arange(n) - n // 2, dopplers)


def test_cut_metrics_synthetic_vector():
    grid = _synthetic_grid([0.1, 0.5, 1.0, 0.5, 0.1])
    m = cut_metrics(grid, "zero-doppler")
    t = (1.0 - 1.0 / math.sqrt(2.0)) / 0.5
    assert m.mainlobe_halfwidth == pytest.approx(t)
    assert m.pslr_db == pytest.approx(-20.0 * math.log10(0.5), abs=1e-12)
    assert m.islr_db == pytest.approx(10.0 * math.log10(0.52), abs=1e-12)
    assert m.cut == "zero-doppler"


def test_cut_metrics_zero_exterior_floors():
    # mainlobe spans the three center bins; both exterior samples are zero
    m = cut_metrics(_synthetic_grid([0.0, 0.9, 1.0, 0.9, 0.0]), "zero-doppler")
    assert m.pslr_db == 300.0
    assert m.islr_db == -300.0


def test_cut_metrics_degenerate_mainlobe():
    # an impulse has a perfectly flat zero-delay cut: no -3 dB crossing exists
    s = np.zeros(16, dtype=complex)
    s[0] = 1.0
    grid = ambiguity(s, 2)
    with pytest.raises(DegenerateMainlobeError):
        cut_metrics(grid, "zero-delay")
    with pytest.raises(ValueError):
        cut_metrics(grid, "sideways")


def test_cut_metrics_are_symmetric_between_sides():
    rng = np.random.default_rng(31)
    s = rng.standard_normal(32) + 1j * rng.standard_normal(32)
    grid = ambiguity(s, 8)
    m = cut_metrics(grid, "zero-doppler")
    axis, amp = grid.zero_doppler_cut()
    assert m.mainlobe_halfwidth > 0.0
    # the cyclic AF magnitude is even along each principal cut
    center = int(np.argmin(np.abs(axis)))
    for d in range(1, 8):
        assert amp[center + d] == pytest.approx(amp[center - d], abs=1e-10)


# ------------------------------------------------------------------ ensembles


def test_ensemble_identity_reduces_to_unpermuted():
    n = 64
    c1 = optimal_c1(1, 0, n)
    ens = permutation_ensemble(
        n, c1, 1, seed=0, cut="zero-delay", permutations=[identity_permutation(n)]
    )
    cfg = TransformConfig.conventional(n, c1, default_c2(n))
    ref = cut_metrics(ambiguity(cpdaft_inverse(cfg, np.ones(n)), 8), "zero-delay")
    assert ens.metrics[0] == ref
    assert ens.halfwidth_spread == 0.0
    assert ens.pslr_mean == ref.pslr_db


def test_ensemble_deterministic_and_thread_invariant():
    n = 32
    c1 = optimal_c1(1, 0, n)
    a = permutation_ensemble(n, c1, 6, seed=77)
    b = permutation_ensemble(n, c1, 6, seed=77, threads=3)
    assert a.metrics == b.metrics
    c = permutation_ensemble(n, c1, 6, seed=78)
    assert a.metrics != c.metrics


def test_ensemble_validation():
    with pytest.raises(ValueError):
        permutation_ensemble(16, 0.1, 0, seed=1)
    with pytest.raises(ValueError):
        permutation_ensemble(16, 0.1, 2, seed=1, cut="diagonal")
    with pytest.raises(ValueError):
        permutation_ensemble(16, 0.1, 2, seed=1, symbols=np.ones(8))
    with pytest.raises(ValueError):
        permutation_ensemble(16, 0.1, 2, seed=1, permutations=[identity_permutation(16)])


# ------------------------------------------------------------------------ EVM


def test_evm_hand_value():
    ref = np.array([1.0 + 0j, -1.0 + 0j])
    est = np.array([1.1 + 0j, -0.9 + 0j])
    assert evm_percent(est, ref) == pytest.approx(10.0, rel=1e-12)


def test_evm_validation():
    with pytest.raises(ValueError):
        evm_percent(np.ones(3), np.ones(4))
    with pytest.raises(ValueError):
        evm_percent(np.ones(3), np.zeros(3))
    assert evm_percent(np.ones(3), np.ones(3)) == 0.0
