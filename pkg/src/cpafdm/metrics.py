"""Waveform-quality metrics: PAPR statistics and delay-Doppler ambiguity surfaces.

PAPR curves come with the closed-form CCDF reference 1-(1-e^{-gamma})^N for
independent complex-Gaussian samples.  Ambiguity functions use the cyclic
(periodic) definition, matching the prefix-based circulant system model, and
are evaluated on a Doppler-oversampled grid so the -3 dB mainlobe crossing
can be located between bins.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .transforms import TransformConfig, cpdaft_inverse, default_c2, random_permutation
from .waveform import ConstellationMap, Frame, WaveformId


class DegenerateMainlobeError(ValueError):
    """An ambiguity cut never falls below -3 dB, so no mainlobe edge exists."""


CUT_KINDS = ("zero-delay", "zero-doppler")

# reporting caps for cuts whose exterior is numerically empty
PSLR_CAP_DB = 300.0
ISLR_FLOOR_DB = -300.0


def _as_signal(s) -> np.ndarray:
    if isinstance(s, Frame):
        if s.domain != "time":
            raise ValueError(f"expected a 'time' frame, got {s.domain!r}")
        return s.data
    arr = np.asarray(s, dtype=np.complex128)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("signal must be a nonempty 1-D array")
    return arr


# ----------------------------------------------------------------------- PAPR


def papr(s) -> float:
    """Peak-to-average power ratio of a time-domain block, in dB."""
    arr = _as_signal(s)
    p = np.abs(arr) ** 2
    mean = p.mean()
    if mean == 0.0:
        raise ValueError("PAPR of an all-zero signal is undefined")
    return float(10.0 * math.log10(p.max() / mean))


def papr_ccdf_analytic(n: int, gamma_linear) -> np.ndarray | float:
    """Exceedance probability 1 - (1 - e^{-gamma})^n at a linear threshold.

    This is the exact CCDF of the maximum of n i.i.d. unit-mean exponential
    power samples, the usual reference model for multicarrier PAPR.
    """
    if n < 1:
        raise ValueError("n must be positive")
    g = np.asarray(gamma_linear, dtype=np.float64)
    if np.any(g < 0):
        raise ValueError("threshold must be nonnegative")
    with np.errstate(divide="ignore"):  # gamma = 0 hits log(0); the limit is 1
        out = -np.expm1(n * np.log1p(-np.exp(-g)))
    return float(out) if np.isscalar(gamma_linear) else out


def papr_samples(
    w: WaveformId,
    constellation: ConstellationMap,
    frames: int,
    seed: int | np.random.Generator,
) -> np.ndarray:
    """PAPR (dB) of `frames` random data blocks through the given waveform."""
    if frames < 1:
        raise ValueError("need at least one frame")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    idx = rng.integers(0, constellation.order, size=(frames, w.n))
    s = cpdaft_inverse(w.cfg, constellation.points[idx])
    p = np.abs(s) ** 2
    return 10.0 * np.log10(p.max(axis=-1) / p.mean(axis=-1))


@dataclass(frozen=True)
class PaprCcdf:
    """Empirical and analytic exceedance curves over a dB threshold grid."""

    gammas_db: np.ndarray
    empirical: np.ndarray
    analytic: np.ndarray


def papr_ccdf(samples_db: np.ndarray, n: int, gammas_db=None) -> PaprCcdf:
    """Empirical CCDF of PAPR samples next to the analytic reference for size n."""
    if gammas_db is None:
        gammas_db = np.arange(4.0, 13.0 + 1e-9, 0.1)
    gammas_db = np.asarray(gammas_db, dtype=np.float64)
    samples = np.sort(np.asarray(samples_db, dtype=np.float64))
    exceed = samples.size - np.searchsorted(samples, gammas_db, side="right")
    empirical = exceed / samples.size
    analytic = papr_ccdf_analytic(n, 10.0 ** (gammas_db / 10.0))
    return PaprCcdf(gammas_db, empirical, np.asarray(analytic))


# ------------------------------------------------------------------ ambiguity


@dataclass(frozen=True)
class AFGrid:
    """Cyclic ambiguity magnitudes over (delay lag, Doppler) with A(0,0) = 1.

    Rows follow `lags` (integer sample lags centered on zero); columns follow
    `dopplers` (cycles per sample on a Doppler-oversampled grid).
    """

    values: np.ndarray
    lags: np.ndarray
    dopplers: np.ndarray

    @property
    def doppler_step(self) -> float:
        return float(self.dopplers[1] - self.dopplers[0])

    def _origin(self) -> tuple[int, int]:
        return int(np.argmin(np.abs(self.lags))), int(np.argmin(np.abs(self.dopplers)))

    def zero_delay_cut(self) -> tuple[np.ndarray, np.ndarray]:
        """(Doppler axis, amplitude) along the zero-lag row."""
        i0, _ = self._origin()
        return self.dopplers, self.values[i0]

    def zero_doppler_cut(self) -> tuple[np.ndarray, np.ndarray]:
        """(lag axis, amplitude) along the zero-Doppler column."""
        _, j0 = self._origin()
        return self.lags.astype(np.float64), self.values[:, j0]

    def cut(self, kind: str) -> tuple[np.ndarray, np.ndarray]:
        if kind == "zero-delay":
            return self.zero_delay_cut()
        if kind == "zero-doppler":
            return self.zero_doppler_cut()
        raise ValueError(f"cut kind must be one of {CUT_KINDS}")


def ambiguity(s, q: int = 8) -> AFGrid:
    """Cyclic delay-Doppler ambiguity surface of a time-domain block.

    A[l, v] = |sum_m s[m] conj(s[(m-l) mod n]) e^{-2j pi v m}| evaluated at all
    n cyclic lags and q*n Doppler points covering [-1/2, 1/2) cycles/sample,
    normalized so the origin value is 1.
    """
    if q < 1:
        raise ValueError("oversampling factor must be at least 1")
    arr = _as_signal(s)
    n = arr.size
    lags = np.arange(n) - n // 2
    m = np.arange(n)
    shifted = arr[(m[None, :] - lags[:, None]) % n]
    corr = arr[None, :] * np.conj(shifted)
    spectrum = np.fft.fftshift(np.fft.fft(corr, n=q * n, axis=1), axes=1)
    values = np.abs(spectrum)
    dopplers = (np.arange(q * n) - (q * n) // 2) / (q * n)
    origin = values[n // 2, (q * n) // 2]
    if origin == 0.0:
        raise ValueError("ambiguity of an all-zero signal is undefined")
    return AFGrid(values / origin, lags, dopplers)


# ---------------------------------------------------------------- cut metrics


@dataclass(frozen=True)
class SidelobeMetrics:
    """Mainlobe width and sidelobe ratios of one principal ambiguity cut.

    pslr_db is the mainlobe peak over the highest sidelobe (positive dB for a
    normalized surface); islr_db is sidelobe energy over mainlobe energy.
    """

    cut: str
    mainlobe_halfwidth: float
    pslr_db: float
    islr_db: float


def _crossing(axis: np.ndarray, amp: np.ndarray, center: int, step: int, thr: float) -> float:
    j = center + step
    while 0 <= j < axis.size:
        if amp[j] < thr:
            prev = j - step
            t = (amp[prev] - thr) / (amp[prev] - amp[j])
            return float(axis[prev] + t * (axis[j] - axis[prev]))
        j += step
    raise DegenerateMainlobeError(
        "cut never falls 3 dB below its peak; mainlobe covers the whole axis"
    )


def cut_metrics(grid: AFGrid, cut: str) -> SidelobeMetrics:
    """Half-width, PSLR, and ISLR of one principal cut through the origin.

    The mainlobe edge is the first -3 dB (1/sqrt 2) amplitude crossing found
    scanning outward from the origin, linearly interpolated between samples;
    everything beyond the two edges counts as sidelobe.
    """
    axis, amp = grid.cut(cut)
    center = int(np.argmin(np.abs(axis)))
    peak = amp[center]
    thr = peak / math.sqrt(2.0)
    right = _crossing(axis, amp, center, +1, thr)
    left = _crossing(axis, amp, center, -1, thr)
    halfwidth = (right - left) / 2.0
    inside = (axis >= left) & (axis <= right)
    exterior = amp[~inside]
    if exterior.size == 0 or exterior.max() == 0.0:
        pslr_db = PSLR_CAP_DB
    else:
        pslr_db = min(-20.0 * math.log10(exterior.max() / peak), PSLR_CAP_DB)
    ext_energy = float(np.sum(exterior**2))
    int_energy = float(np.sum(amp[inside] ** 2))
    if ext_energy == 0.0:
        islr_db = ISLR_FLOOR_DB
    else:
        islr_db = max(10.0 * math.log10(ext_energy / int_energy), ISLR_FLOOR_DB)
    return SidelobeMetrics(cut, halfwidth, pslr_db, islr_db)


# ------------------------------------------------------------------ ensembles


@dataclass(frozen=True)
class EnsembleSummary:
    """Per-permutation sidelobe metrics with their ensemble statistics."""

    cut: str
    metrics: tuple[SidelobeMetrics, ...]

    def _field(self, name: str) -> np.ndarray:
        return np.array([getattr(m, name) for m in self.metrics])

    @property
    def pslr_mean(self) -> float:
        return float(self._field("pslr_db").mean())

    @property
    def pslr_std(self) -> float:
        return float(self._field("pslr_db").std())

    @property
    def islr_mean(self) -> float:
        return float(self._field("islr_db").mean())

    @property
    def islr_std(self) -> float:
        return float(self._field("islr_db").std())

    @property
    def halfwidth_mean(self) -> float:
        return float(self._field("mainlobe_halfwidth").mean())

    @property
    def halfwidth_spread(self) -> float:
        hw = self._field("mainlobe_halfwidth")
        return float(hw.max() - hw.min())


def permutation_ensemble(
    n: int,
    c1: float,
    count: int,
    seed: int,
    c2: float | None = None,
    q: int = 8,
    cut: str = "zero-delay",
    symbols: np.ndarray | None = None,
    permutations=None,
    threads: int = 1,
) -> EnsembleSummary:
    """Sidelobe metrics of `count` randomly permuted waveforms.

    Each draw permutes the second chirp of a one-sided configuration and
    measures the requested ambiguity cut of the resulting block.  Symbols
    default to the all-ones block; pass an explicit vector for data-dependent
    ensembles, or explicit `permutations` to pin the ensemble members (the
    identity alone reproduces the unpermuted waveform's metrics).
    """
    if count < 1:
        raise ValueError("ensemble needs at least one permutation")
    if cut not in CUT_KINDS:
        raise ValueError(f"cut kind must be one of {CUT_KINDS}")
    x = np.ones(n, dtype=np.complex128) if symbols is None else np.asarray(symbols)
    if x.shape != (n,):
        raise ValueError("symbols must be a length-n vector")
    c2 = default_c2(n) if c2 is None else c2
    if permutations is not None:
        perms = list(permutations)
        if len(perms) != count:
            raise ValueError("explicit permutation list must match count")
    else:
        rng = np.random.default_rng(seed)
        perms = [random_permutation(n, rng) for _ in range(count)]

    def one(perm):
        cfg = TransformConfig.one_sided(n, c1, c2, perm)
        return cut_metrics(ambiguity(cpdaft_inverse(cfg, x), q), cut)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            metrics = tuple(pool.map(one, perms))
    else:
        metrics = tuple(one(p) for p in perms)
    return EnsembleSummary(cut, metrics)


# ------------------------------------------------------------------------ EVM


def evm_percent(estimate: np.ndarray, reference: np.ndarray) -> float:
    """RMS error vector magnitude of an estimate against its reference, in %."""
    est = np.asarray(estimate, dtype=np.complex128)
    ref = np.asarray(reference, dtype=np.complex128)
    if est.shape != ref.shape or est.size == 0:
        raise ValueError("estimate and reference must be nonempty and same-shape")
    power = np.mean(np.abs(ref) ** 2)
    if power == 0.0:
        raise ValueError("reference power is zero")
    return float(100.0 * math.sqrt(np.mean(np.abs(est - ref) ** 2) / power))
