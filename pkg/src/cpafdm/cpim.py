"""Index modulation over the permutation choice of a one-sided transform.

A codebook of K = 2^k permutations carries k extra bits per block on top of
the constellation payload: the transmitter picks entry k from the index bits
and modulates the remaining bits through that permutation.  The receiver
scores every codebook entry by its post-equalization residual and keeps the
best, recovering both bit groups jointly.
"""

import math
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .channel import ChannelFamily, ChannelSpec, channel_matrix, effective_channel
from .detection import demap_indices
from .rngs import spawn_rng
from .transforms import (
    Permutation,
    TransformConfig,
    cpdaft_forward,
    cpdaft_inverse,
    default_c2,
    identity_permutation,
    permutation_from_rank,
)
from .waveform import (
    ConstellationMap,
    Frame,
    WaveformId,
    map_bits,
    noise_variance,
    symbols_to_bits,
)

# trials per work unit; fixed so results do not depend on the thread count
_CHUNK = 64


def max_index_bits(n: int) -> int:
    """Largest k with 2^k <= n!, via exact big-integer arithmetic."""
    if n < 2:
        raise ValueError("need at least two subcarriers")
    return math.factorial(n).bit_length() - 1


@dataclass(frozen=True)
class PermCodebook:
    """2^k_bits distinct permutations; entry 0 is always the identity."""

    n: int
    entries: tuple[Permutation, ...]
    k_bits: int

    def __post_init__(self):
        if len(self.entries) != 1 << self.k_bits:
            raise ValueError("entry count must be 2^k_bits")
        if len(set(self.entries)) != len(self.entries):
            raise ValueError("codebook entries must be pairwise distinct")
        if any(len(p) != self.n for p in self.entries):
            raise ValueError("entry size mismatch")

    def __len__(self) -> int:
        return len(self.entries)


def build_codebook(n: int, k_bits: int, seed: int) -> PermCodebook:
    """Seeded codebook of 2^k_bits distinct permutations (entry 0 identity).

    Entries are unranked from distinct uniformly drawn ranks, so the same
    seed always yields the same codebook and no entry repeats.  Keeping the
    identity at index 0 makes all-zero index bits coincide with the plain
    unpermuted waveform.
    """
    if k_bits < 1:
        raise ValueError("need at least one index bit")
    cap = max_index_bits(n)
    if k_bits > cap:
        raise ValueError(f"k_bits {k_bits} exceeds capacity {cap} for n={n}")
    fact = math.factorial(n)
    picker = random.Random(seed)
    ranks = [0]
    seen = {0}
    while len(ranks) < (1 << k_bits):
        cand = picker.randrange(1, fact)
        if cand not in seen:
            seen.add(cand)
            ranks.append(cand)
    entries = tuple(permutation_from_rank(n, r) for r in ranks)
    return PermCodebook(n=n, entries=entries, k_bits=k_bits)


@dataclass(frozen=True)
class CpimFrame:
    """One index-modulated block: the chosen entry and both bit groups."""

    index_bits: np.ndarray
    symbol_bits: np.ndarray
    chosen_index: int
    symbols: Frame

    @property
    def bits(self) -> np.ndarray:
        return np.concatenate([self.index_bits, self.symbol_bits])


def _split_bits(bits, codebook: PermCodebook, constellation: ConstellationMap):
    bits = np.asarray(bits)
    need = codebook.n * constellation.bits_per_symbol + codebook.k_bits
    if bits.shape != (need,):
        raise ValueError(f"expected {need} bits, got {bits.shape}")
    if not np.isin(bits, (0, 1)).all():
        raise ValueError("bits must be 0 or 1")
    return bits[: codebook.k_bits].astype(np.uint8), bits[codebook.k_bits :].astype(np.uint8)


def _index_from_bits(index_bits: np.ndarray) -> int:
    weights = 1 << np.arange(index_bits.size - 1, -1, -1)
    return int(index_bits @ weights)


def _index_to_bits(k: int, k_bits: int) -> np.ndarray:
    shifts = np.arange(k_bits - 1, -1, -1)
    return ((k >> shifts) & 1).astype(np.uint8)


def _entry_waveform(codebook: PermCodebook, k: int, c1: float, c2: float | None) -> WaveformId:
    return WaveformId.one_sided(codebook.n, c1, codebook.entries[k], c2)


def cpim_encode(
    bits,
    codebook: PermCodebook,
    constellation: ConstellationMap,
    c1: float,
    c2: float | None = None,
) -> tuple[CpimFrame, Frame]:
    """Encode index bits + symbol bits into a time block.

    The leading k_bits select the codebook entry (MSB first); the rest map
    onto constellation symbols sent through that entry's waveform.
    """
    index_bits, symbol_bits = _split_bits(bits, codebook, constellation)
    k = _index_from_bits(index_bits)
    symbols = map_bits(symbol_bits, constellation)
    w = _entry_waveform(codebook, k, c1, c2)
    time = Frame(cpdaft_inverse(w.cfg, symbols.data), "time")
    return CpimFrame(index_bits, symbol_bits, k, symbols), time


def _core_equalize(xi: np.ndarray, u: np.ndarray, noise_var: float) -> np.ndarray:
    """MMSE/ZF solve against the shared unpermuted core channel."""
    if noise_var == 0.0:
        if np.linalg.cond(xi) > 1e12:
            raise np.linalg.LinAlgError("channel is numerically singular")
        return np.linalg.solve(xi, u)
    gram = xi @ xi.conj().T + noise_var * np.eye(xi.shape[0])
    return xi.conj().T @ np.linalg.solve(gram, u)


def cpim_detect(
    r: Frame,
    codebook: PermCodebook,
    spec: ChannelSpec,
    noise_var: float,
    constellation: ConstellationMap,
    c1: float,
    c2: float | None = None,
) -> CpimFrame:
    """Joint index + symbol detection by per-entry residual scoring.

    Each candidate entry is demodulated, MMSE-equalized against its own
    effective channel, and hard-sliced; the entry whose re-synthesized block
    is closest to the demodulated one wins (ties go to the smallest index).

    All candidates share one equalizer core: with only the post-FFT chirp
    permuted, the per-entry effective channel is a diagonal conjugation of
    the unpermuted one, so the expensive solve happens once.
    """
    if r.domain != "received":
        raise ValueError(f"expected a 'received' frame, got {r.domain!r}")
    n = codebook.n
    if len(r) != n:
        raise ValueError("frame length does not match codebook size")
    c2 = default_c2(n) if c2 is None else c2
    core_cfg = TransformConfig.one_sided(n, c1, 0.0, identity_permutation(n))
    xi = effective_channel(spec, core_cfg).matrix
    u = cpdaft_forward(core_cfg, r.data)
    v = _core_equalize(xi, u, noise_var)

    chirp2 = np.exp(-2j * np.pi * c2 * np.arange(n) ** 2)
    best_k, best_score, best_idx = -1, math.inf, None
    for k, perm in enumerate(codebook.entries):
        lam = chirp2[perm.map]
        idx = demap_indices(lam * v, constellation)
        sliced = constellation.points[idx]
        score = float(np.sum(np.abs(u - xi @ (np.conj(lam) * sliced)) ** 2))
        if score < best_score:
            best_k, best_score, best_idx = k, score, idx
    symbol_bits = symbols_to_bits(best_idx, constellation)
    symbols = Frame(constellation.points[best_idx], "symbol")
    return CpimFrame(_index_to_bits(best_k, codebook.k_bits), symbol_bits, best_k, symbols)


def spectral_efficiency(n: int, m_order: int, k: int) -> tuple[int, int]:
    """Bits per block without and with index modulation: (N log2 M, +log2 K)."""
    if n < 2:
        raise ValueError("need at least two subcarriers")
    if m_order < 2 or m_order & (m_order - 1):
        raise ValueError("constellation order must be a power of two")
    if k < 2 or k & (k - 1):
        raise ValueError("codebook size must be a power of two, at least 2")
    k_bits = k.bit_length() - 1
    if k_bits > max_index_bits(n):
        raise ValueError(f"codebook size {k} exceeds capacity for n={n}")
    base = n * (m_order.bit_length() - 1)
    return base, base + k_bits


@dataclass(frozen=True)
class CpimRecord:
    """Monte-Carlo error rates of index-modulated detection at one SNR."""

    snr_db: float
    trials: int
    index_errors: int
    index_error_rate: float
    symbol_ber: float
    total_ber: float


def _cpim_chunk(
    codebook: PermCodebook,
    family: ChannelFamily,
    constellation: ConstellationMap,
    snr_db: float,
    master_seed: int,
    snr_index: int,
    trial_range: range,
    c1: float,
    c2: float | None,
) -> tuple[int, int, int]:
    n = codebook.n
    bps = constellation.bits_per_symbol
    var = noise_variance(snr_db)
    index_errors = symbol_errors = total_errors = 0
    for t in trial_range:
        rng = spawn_rng(master_seed, "cpim", snr_index, t)
        spec = family.draw(rng)
        bits = rng.integers(0, 2, size=n * bps + codebook.k_bits)
        noise = math.sqrt(var / 2.0) * (
            rng.standard_normal(n) + 1j * rng.standard_normal(n)
        )
        sent, time = cpim_encode(bits, codebook, constellation, c1, c2)
        w = _entry_waveform(codebook, sent.chosen_index, c1, c2)
        r = channel_matrix(spec, w.prefix_rule) @ time.data + noise
        got = cpim_detect(Frame(r, "received"), codebook, spec, var, constellation, c1, c2)
        index_errors += got.chosen_index != sent.chosen_index
        symbol_errors += int(np.count_nonzero(got.symbol_bits != sent.symbol_bits))
        total_errors += int(np.count_nonzero(got.bits != sent.bits))
    return index_errors, symbol_errors, total_errors


def run_cpim(
    codebook: PermCodebook,
    family: ChannelFamily,
    snr_db_grid,
    trials: int,
    master_seed: int,
    constellation: ConstellationMap | int = 4,
    c1: float | None = None,
    c2: float | None = None,
    threads: int = 1,
) -> list[CpimRecord]:
    """Index/symbol/total error rates over an SNR grid.

    Per-trial randomness is derived from (master seed, experiment name, SNR
    index, trial index) alone and trials aggregate by integer sums, so the
    outcome does not depend on the thread count.
    """
    from .channel import optimal_c1

    if isinstance(constellation, int):
        from .waveform import qam_constellation

        constellation = qam_constellation(constellation)
    if codebook.n != family.n:
        raise ValueError("codebook and channel sizes differ")
    if c1 is None:
        c1 = optimal_c1(family.fmax, family.guard, family.n)
    jobs = []
    for si, snr in enumerate(snr_db_grid):
        for start in range(0, trials, _CHUNK):
            jobs.append((si, float(snr), range(start, min(start + _CHUNK, trials))))

    def work(job):
        si, snr, rng_range = job
        return si, _cpim_chunk(
            codebook, family, constellation, snr, master_seed, si, rng_range, c1, c2
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, jobs))
    else:
        results = [work(j) for j in jobs]

    n_snr = len(list(snr_db_grid))
    totals = [[0, 0, 0] for _ in range(n_snr)]
    for si, (ie, se, te) in results:
        totals[si][0] += ie
        totals[si][1] += se
        totals[si][2] += te
    records = []
    sym_bits = codebook.n * constellation.bits_per_symbol
    all_bits = sym_bits + codebook.k_bits
    for si, snr in enumerate(snr_db_grid):
        ie, se, te = totals[si]
        records.append(
            CpimRecord(
                snr_db=float(snr),
                trials=trials,
                index_errors=ie,
                index_error_rate=ie / trials,
                symbol_ber=se / (trials * sym_bits),
                total_ber=te / (trials * all_bits),
            )
        )
    return records
