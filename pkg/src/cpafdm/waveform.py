"""Symbol mapping and the modulate / transmit / demodulate chain.

Frames carry a domain tag that tracks where a block sits in the chain
(symbol -> time -> received -> demodulated); each operation accepts only the
tag it expects, which catches pipeline-order mistakes early.

Constellations are square QAM with unit average energy and per-axis Gray
labeling.  A symbol's bits split evenly between the in-phase (first half)
and quadrature (second half) axes; on each axis the bit group is read as a
binary-reflected Gray code, so neighboring amplitude levels differ in
exactly one bit.  For 4-QAM this puts bits 00 at (1+1j)/sqrt(2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelSpec, PrefixPhaseRule, channel_matrix
from .transforms import (
    Permutation,
    TransformConfig,
    cpdaft_forward,
    cpdaft_inverse,
    default_c2,
)

__all__ = [
    "DOMAINS",
    "ConstellationMap",
    "qam_constellation",
    "Frame",
    "WaveformId",
    "map_bits",
    "symbols_to_bits",
    "modulate",
    "transmit",
    "demodulate",
    "noise_variance",
]

DOMAINS = ("symbol", "time", "received", "demodulated")

_QAM_ORDERS = (4, 16, 64)


def _gray_to_binary(g: int) -> int:
    b = 0
    while g:
        b ^= g
        g >>= 1
    return b


@dataclass(frozen=True)
class ConstellationMap:
    """Unit-average-energy constellation indexed by the bit pattern.

    points[i] is the symbol whose bits, read MSB-first, spell the integer i.
    """

    order: int
    points: np.ndarray = field(repr=False)

    @property
    def bits_per_symbol(self) -> int:
        return self.order.bit_length() - 1


def qam_constellation(order: int) -> ConstellationMap:
    """Gray-labeled square QAM of the given order (4, 16, or 64)."""
    if order not in _QAM_ORDERS:
        raise ValueError(f"constellation order must be one of {_QAM_ORDERS}")
    bits = order.bit_length() - 1
    half = bits // 2
    side = 1 << half
    norm = math.sqrt(2.0 * (order - 1) / 3.0)
    points = np.empty(order, dtype=np.complex128)
    for idx in range(order):
        gi = idx >> half
        gq = idx & (side - 1)
        re = (side - 1 - 2 * _gray_to_binary(gi)) / norm
        im = (side - 1 - 2 * _gray_to_binary(gq)) / norm
        points[idx] = re + 1j * im
    points.setflags(write=False)
    return ConstellationMap(order=order, points=points)


@dataclass(frozen=True)
class Frame:
    """A block of samples tagged with its position in the processing chain."""

    data: np.ndarray
    domain: str

    def __post_init__(self):
        if self.domain not in DOMAINS:
            raise ValueError(f"unknown frame domain {self.domain!r}")
        arr = np.asarray(self.data, dtype=np.complex128)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("frame data must be a non-empty 1-D block")
        object.__setattr__(self, "data", arr)

    def __len__(self) -> int:
        return int(self.data.size)


def _expect_domain(frame: Frame, expected: str, op: str) -> None:
    if frame.domain != expected:
        raise ValueError(
            f"{op} expects a {expected!r} frame, got {frame.domain!r}"
        )


_KINDS = ("ofdm", "afdm", "cpafdm-one-sided", "cpafdm-two-sided")


@dataclass(frozen=True)
class WaveformId:
    """A waveform kind plus the transform parameters realizing it.

    The kind constrains the config: ofdm means zero chirp rates and identity
    permutations, afdm means identity permutations, and the one-sided kind
    leaves the pre-DFT chirp unpermuted.
    """

    kind: str
    cfg: TransformConfig

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown waveform kind {self.kind!r}")
        c = self.cfg
        if self.kind == "ofdm":
            if c.c1 != 0.0 or c.c2 != 0.0 or not (
                c.perm1.is_identity() and c.perm2.is_identity()
            ):
                raise ValueError("ofdm requires zero chirp rates and identity permutations")
        elif self.kind == "afdm":
            if not (c.perm1.is_identity() and c.perm2.is_identity()):
                raise ValueError("afdm requires identity permutations")
        elif self.kind == "cpafdm-one-sided":
            if not c.perm1.is_identity():
                raise ValueError("one-sided waveform requires an identity pre-DFT permutation")

    @property
    def n(self) -> int:
        return self.cfg.n

    @property
    def prefix_rule(self) -> PrefixPhaseRule:
        """Prefix phasing this waveform calls for: plain for ofdm, chirp-periodic else."""
        if self.kind == "ofdm":
            return PrefixPhaseRule.zero()
        return PrefixPhaseRule.afdm(self.cfg.c1)

    @classmethod
    def ofdm(cls, n: int) -> "WaveformId":
        return cls("ofdm", TransformConfig.ofdm(n))

    @classmethod
    def afdm(cls, n: int, c1: float, c2: float | None = None) -> "WaveformId":
        c2 = default_c2(n) if c2 is None else c2
        return cls("afdm", TransformConfig.conventional(n, c1, c2))

    @classmethod
    def one_sided(
        cls, n: int, c1: float, perm2: Permutation, c2: float | None = None
    ) -> "WaveformId":
        c2 = default_c2(n) if c2 is None else c2
        return cls("cpafdm-one-sided", TransformConfig.one_sided(n, c1, c2, perm2))

    @classmethod
    def two_sided(
        cls,
        n: int,
        c1: float,
        perm1: Permutation,
        perm2: Permutation,
        c2: float | None = None,
    ) -> "WaveformId":
        c2 = default_c2(n) if c2 is None else c2
        return cls("cpafdm-two-sided", TransformConfig.two_sided(n, c1, c2, perm1, perm2))


def map_bits(bits, constellation: ConstellationMap) -> Frame:
    """Pack a bit sequence into constellation symbols (a 'symbol' frame).

    The bit count must be a multiple of bits-per-symbol; each group of bits,
    MSB first, indexes the constellation table.
    """
    bits = np.asarray(bits)
    if bits.ndim != 1 or bits.size == 0:
        raise ValueError("bits must be a non-empty 1-D sequence")
    if not np.isin(bits, (0, 1)).all():
        raise ValueError("bits must contain only 0 and 1")
    b = constellation.bits_per_symbol
    if bits.size % b:
        raise ValueError(f"bit count {bits.size} is not a multiple of {b}")
    groups = bits.reshape(-1, b).astype(np.int64)
    weights = 1 << np.arange(b - 1, -1, -1)
    idx = groups @ weights
    return Frame(constellation.points[idx], "symbol")


def symbols_to_bits(indices: np.ndarray, constellation: ConstellationMap) -> np.ndarray:
    """Unpack constellation indices back into bits, MSB first."""
    b = constellation.bits_per_symbol
    idx = np.asarray(indices, dtype=np.int64)
    shifts = np.arange(b - 1, -1, -1)
    return ((idx[..., None] >> shifts) & 1).astype(np.uint8).reshape(-1)


def modulate(w: WaveformId, frame: Frame) -> Frame:
    """Symbol block -> time block via the inverse transform."""
    _expect_domain(frame, "symbol", "modulate")
    if len(frame) != w.n:
        raise ValueError(f"frame length {len(frame)} does not match waveform size {w.n}")
    return Frame(cpdaft_inverse(w.cfg, frame.data), "time")


def noise_variance(snr_db: float | None) -> float:
    """Per-sample complex noise variance at the given Es/N0 in dB.

    Unit-average-energy constellations make Es = 1, so the variance is
    10^(-snr/10); None or +inf disables noise.
    """
    if snr_db is None or snr_db == math.inf:
        return 0.0
    if not math.isfinite(snr_db):
        raise ValueError("snr_db must be finite, None, or +inf")
    return float(10.0 ** (-snr_db / 10.0))


def transmit(
    frame: Frame,
    spec: ChannelSpec,
    snr_db: float | None,
    seed: int | np.random.Generator | None = None,
    prefix: PrefixPhaseRule | None = None,
) -> Frame:
    """Push a time block through the channel and add white noise.

    The prefix rule must match the waveform that produced the block (plain
    for ofdm, chirp-periodic otherwise); defaults to the plain rule.  A seed
    (or Generator) makes the noise reproducible; noise is skipped entirely
    when snr_db is None or +inf.
    """
    _expect_domain(frame, "time", "transmit")
    if len(frame) != spec.n:
        raise ValueError(f"frame length {len(frame)} does not match channel size {spec.n}")
    prefix = PrefixPhaseRule.zero() if prefix is None else prefix
    r = channel_matrix(spec, prefix) @ frame.data
    var = noise_variance(snr_db)
    if var > 0.0:
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        scale = math.sqrt(var / 2.0)
        r = r + scale * (rng.standard_normal(spec.n) + 1j * rng.standard_normal(spec.n))
    return Frame(r, "received")


def demodulate(w: WaveformId, frame: Frame) -> Frame:
    """Received time block -> demodulation-domain block via the forward transform."""
    _expect_domain(frame, "received", "demodulate")
    if len(frame) != w.n:
        raise ValueError(f"frame length {len(frame)} does not match waveform size {w.n}")
    return Frame(cpdaft_forward(w.cfg, frame.data), "demodulated")
