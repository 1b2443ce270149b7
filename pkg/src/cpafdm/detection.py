"""Equalization, demapping, and Monte-Carlo bit-error-rate runs.

The BER engine draws a fresh channel, fresh data bits, and fresh noise per
trial from a generator keyed by (master seed, experiment, SNR index, trial
index).  None of the draws depend on the waveform under test, so running
two waveforms with the same master seed compares them on identical channel
and noise realizations, trial for trial.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channel import ChannelFamily, EffectiveChannel, channel_matrix
from .rngs import spawn_rng
from .transforms import cpdaft_forward, cpdaft_inverse
from .waveform import ConstellationMap, WaveformId, qam_constellation, symbols_to_bits

__all__ = [
    "DetectionResult",
    "BerRecord",
    "mmse_equalize",
    "hard_demap",
    "demap_indices",
    "ml_detect",
    "run_ber",
    "run_ber_multi",
]

ML_CANDIDATE_CAP = 2**20

# trials per work unit in the BER engine; fixed so that results do not
# depend on the thread count
_CHUNK = 256


@dataclass(frozen=True)
class DetectionResult:
    """Detected symbols with their bits and the residual |y - G x|^2."""

    symbols: np.ndarray
    hard_bits: np.ndarray
    residual: float


@dataclass(frozen=True)
class BerRecord:
    snr_db: float
    trials: int
    bit_errors: int
    ber: float
    ci95: float


def _as_matrix(g) -> np.ndarray:
    if isinstance(g, EffectiveChannel):
        return g.matrix
    g = np.asarray(g)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ValueError("channel must be a square matrix")
    return g


def mmse_equalize(g, y: np.ndarray, noise_var: float) -> np.ndarray:
    """Linear MMSE estimate x = G^H (G G^H + var I)^{-1} y.

    noise_var of 0 (or None) switches to the zero-forcing solve, which
    raises on singular or numerically rank-deficient channels.
    """
    g = _as_matrix(g)
    y = np.asarray(y, dtype=np.complex128)
    n = g.shape[0]
    if y.shape != (n,):
        raise ValueError(f"observation must have shape ({n},)")
    if noise_var is None:
        noise_var = 0.0
    if noise_var < 0.0:
        raise ValueError("noise variance must be non-negative")
    if noise_var == 0.0:
        if np.linalg.cond(g) > 1e12:
            raise np.linalg.LinAlgError("channel is rank deficient; cannot zero-force")
        return np.linalg.solve(g, y)
    gram = g @ g.conj().T + noise_var * np.eye(n)
    return g.conj().T @ np.linalg.solve(gram, y)


def demap_indices(symbols: np.ndarray, constellation: ConstellationMap) -> np.ndarray:
    """Nearest-point indices; exact ties resolve to the smallest index."""
    symbols = np.asarray(symbols, dtype=np.complex128)
    d = np.abs(symbols[..., None] - constellation.points)
    return np.argmin(d, axis=-1)


def hard_demap(symbols: np.ndarray, constellation: ConstellationMap) -> np.ndarray:
    """Slice soft symbols to bits via nearest-point decisions."""
    return symbols_to_bits(demap_indices(symbols, constellation), constellation)


def ml_detect(g, y: np.ndarray, constellation: ConstellationMap) -> DetectionResult:
    """Exhaustive maximum-likelihood search over all symbol vectors.

    Enumerates constellation indices in lexicographic order and keeps the
    first vector attaining the minimal residual, so ties break toward the
    lexicographically smallest candidate.  Refuses searches beyond 2^20
    candidates.
    """
    g = _as_matrix(g)
    y = np.asarray(y, dtype=np.complex128)
    n = g.shape[0]
    m = constellation.order
    if m**n > ML_CANDIDATE_CAP:
        raise ValueError(
            f"{m}^{n} candidates exceed the exhaustive-search cap {ML_CANDIDATE_CAP}"
        )
    best_score = math.inf
    best_idx = None
    block_idx = []

    def flush():
        nonlocal best_score, best_idx
        if not block_idx:
            return
        cand = constellation.points[np.asarray(block_idx)]
        scores = np.sum(np.abs(y - cand @ g.T) ** 2, axis=1)
        k = int(np.argmin(scores))
        if scores[k] < best_score:
            best_score = float(scores[k])
            best_idx = block_idx[k]
        block_idx.clear()

    for combo in itertools.product(range(m), repeat=n):
        block_idx.append(combo)
        if len(block_idx) == 4096:
            flush()
    flush()
    idx = np.asarray(best_idx, dtype=np.int64)
    return DetectionResult(
        symbols=constellation.points[idx],
        hard_bits=symbols_to_bits(idx, constellation),
        residual=best_score,
    )


def _ci95(errors: int, total_bits: int) -> float:
    p = errors / total_bits
    return 1.96 * math.sqrt(max(p * (1.0 - p), 0.0) / total_bits)


def _run_chunk(
    waveforms: Sequence[WaveformId],
    family: ChannelFamily,
    constellation: ConstellationMap,
    snr_db: float,
    noise_var: float,
    master_seed: int,
    snr_index: int,
    trial_range: range,
) -> list[int]:
    """Bit errors per waveform over one block of trials (vectorized)."""
    n = family.n
    b = constellation.bits_per_symbol
    count = len(trial_range)
    specs = []
    bits = np.empty((count, n * b), dtype=np.uint8)
    noise = np.empty((count, n), dtype=np.complex128)
    scale = math.sqrt(noise_var / 2.0)
    for i, t in enumerate(trial_range):
        rng = spawn_rng(master_seed, "ber", snr_index, t)
        specs.append(family.draw(rng))
        bits[i] = rng.integers(0, 2, size=n * b)
        noise[i] = scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n))

    weights = 1 << np.arange(b - 1, -1, -1)
    idx = (bits.reshape(count, n, b).astype(np.int64) @ weights)
    x = constellation.points[idx]

    errors = []
    eye = noise_var * np.eye(n)
    for w in waveforms:
        h = np.stack([channel_matrix(spec, w.prefix_rule) for spec in specs])
        s = cpdaft_inverse(w.cfg, x)
        r = np.einsum("bij,bj->bi", h, s) + noise
        # MMSE on the effective channel G = A H A^H, evaluated in the time
        # domain: G^H (G G^H + var I)^{-1} A r  ==  A H^H (H H^H + var I)^{-1} r
        hh = h @ h.conj().transpose(0, 2, 1) + eye
        z = np.linalg.solve(hh, r[..., None])[..., 0]
        xh = cpdaft_forward(w.cfg, np.einsum("bji,bj->bi", h.conj(), z))
        d = np.abs(xh[..., None] - constellation.points)
        idx_hat = np.argmin(d, axis=-1)
        bits_hat = ((idx_hat[..., None] >> np.arange(b - 1, -1, -1)) & 1).astype(np.uint8)
        errors.append(int(np.sum(bits_hat.reshape(count, -1) != bits)))
    return errors


def run_ber_multi(
    waveforms: Sequence[WaveformId],
    family: ChannelFamily,
    snr_db_grid: Sequence[float],
    trials: int,
    master_seed: int,
    constellation: ConstellationMap | int = 4,
    threads: int = 1,
) -> list[list[BerRecord]]:
    """BER curves for several waveforms over shared channel/noise draws.

    Results are independent of the thread count and of whether waveforms
    run together or in separate calls with the same master seed.
    """
    if isinstance(constellation, int):
        constellation = qam_constellation(constellation)
    if trials < 1:
        raise ValueError("need at least one trial")
    for w in waveforms:
        if w.n != family.n:
            raise ValueError("waveform and channel sizes differ")
    bits_per_trial = family.n * constellation.bits_per_symbol
    jobs = []
    for si, snr in enumerate(snr_db_grid):
        var = 10.0 ** (-float(snr) / 10.0)
        for lo in range(0, trials, _CHUNK):
            jobs.append((si, float(snr), var, range(lo, min(lo + _CHUNK, trials))))

    def work(job):
        si, snr, var, rng_t = job
        return si, _run_chunk(
            waveforms, family, constellation, snr, var, master_seed, si, rng_t
        )

    totals = np.zeros((len(snr_db_grid), len(waveforms)), dtype=np.int64)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for si, errs in pool.map(work, jobs):
                totals[si] += errs
    else:
        for job in jobs:
            si, errs = work(job)
            totals[si] += errs

    out = []
    total_bits = trials * bits_per_trial
    for wi in range(len(waveforms)):
        records = []
        for si, snr in enumerate(snr_db_grid):
            e = int(totals[si, wi])
            records.append(
                BerRecord(
                    snr_db=float(snr),
                    trials=trials,
                    bit_errors=e,
                    ber=e / total_bits,
                    ci95=_ci95(e, total_bits),
                )
            )
        out.append(records)
    return out


def run_ber(
    w: WaveformId,
    family: ChannelFamily,
    snr_db_grid: Sequence[float],
    trials: int,
    master_seed: int,
    constellation: ConstellationMap | int = 4,
    threads: int = 1,
) -> list[BerRecord]:
    """BER curve for a single waveform; see run_ber_multi."""
    return run_ber_multi(
        [w], family, snr_db_grid, trials, master_seed, constellation, threads
    )[0]
