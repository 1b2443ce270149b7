"""Doubly-dispersive channels and their demodulation-domain form.

A channel is a sum of discrete paths, each with a complex gain, an integer
delay, and a (possibly fractional) Doppler shift in units of the subcarrier
spacing.  In matrix form over one block of n samples,

    H = sum_p  gain_p * Phi_p * W^{f_p} * L^{delay_p}

where L is the forward cyclic shift, W^f = diag(exp(-2j*pi*f*k/n)), and
Phi_p is the phase fix-up applied to the samples that wrap through the cyclic
prefix.  With the chirp-periodic prefix rule the fix-up makes the wrapped
samples carry exactly the phase the prefix imposed on them, so H*s matches a
literal prefix-append / convolve / discard simulation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .transforms import TransformConfig, cpdaft_forward

__all__ = [
    "SUPPORT_THRESHOLD",
    "NonOrthogonalChannelError",
    "PathSpec",
    "ChannelSpec",
    "ChannelFamily",
    "PrefixPhaseRule",
    "channel_matrix",
    "EffectiveChannel",
    "effective_channel",
    "location_index",
    "extract_paths",
    "optimal_c1",
]

# Entries of an effective channel count as support when their magnitude
# exceeds this fraction of the largest entry.
SUPPORT_THRESHOLD = 1e-9


class NonOrthogonalChannelError(ValueError):
    """Channel geometry violates the delay-Doppler orthogonality condition."""


@dataclass(frozen=True)
class PathSpec:
    """One propagation path: complex gain, integer delay, Doppler shift."""

    gain: complex
    delay: int
    doppler: float

    def __post_init__(self):
        if self.delay < 0:
            raise ValueError("path delay must be non-negative")
        if not math.isfinite(self.doppler):
            raise ValueError("path Doppler must be finite")


@dataclass(frozen=True)
class ChannelSpec:
    """A block size plus the path list and the declared delay/Doppler ranges.

    lmax and fmax bound the delays and |Doppler| of the paths; guard is the
    extra Doppler margin reserved for spectral leakage when checking the
    orthogonality condition.
    """

    n: int
    paths: tuple[PathSpec, ...]
    lmax: int
    fmax: int
    guard: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("block size must be positive")
        if not 0 <= self.lmax < self.n:
            raise ValueError("lmax must lie in [0, n)")
        if self.fmax < 0 or self.guard < 0:
            raise ValueError("fmax and guard must be non-negative")
        if len(self.paths) == 0:
            raise ValueError("channel needs at least one path")
        object.__setattr__(self, "paths", tuple(self.paths))
        for p in self.paths:
            if p.delay > self.lmax:
                raise ValueError(f"path delay {p.delay} exceeds lmax={self.lmax}")
            if abs(p.doppler) > self.fmax:
                raise ValueError(f"path Doppler {p.doppler} exceeds fmax={self.fmax}")

    @property
    def is_orthogonal(self) -> bool:
        """Whether every delay-Doppler pair in range maps to a distinct index."""
        return 2 * (self.fmax + self.guard) * (self.lmax + 1) + self.lmax <= self.n

    @property
    def prefix_length(self) -> int:
        """Cyclic-prefix length needed to absorb the longest delay."""
        return self.lmax


@dataclass(frozen=True)
class ChannelFamily:
    """Randomization recipe for drawing channels of a common geometry.

    Draws p paths with distinct (delay, Doppler) pairs, delays uniform on
    [0, lmax], Dopplers uniform on [-fmax, fmax] (integers unless
    ``fractional``), and complex-Gaussian gains normalized to unit total
    power per realization.
    """

    n: int
    p: int
    lmax: int
    fmax: int
    guard: int = 0
    fractional: bool = False

    def __post_init__(self):
        combos = (self.lmax + 1) * (2 * self.fmax + 1)
        if not self.fractional and self.p > combos:
            raise ValueError(
                f"cannot draw {self.p} distinct (delay, Doppler) pairs from {combos}"
            )
        if self.p < 1:
            raise ValueError("need at least one path")

    def draw(self, rng: np.random.Generator) -> ChannelSpec:
        if self.fractional:
            delays = rng.integers(0, self.lmax + 1, size=self.p)
            dopplers = rng.uniform(-self.fmax, self.fmax, size=self.p)
        else:
            flat = rng.choice((self.lmax + 1) * (2 * self.fmax + 1), size=self.p, replace=False)
            delays = flat // (2 * self.fmax + 1)
            dopplers = flat % (2 * self.fmax + 1) - self.fmax
        gains = rng.standard_normal(self.p) + 1j * rng.standard_normal(self.p)
        gains /= np.linalg.norm(gains)
        paths = tuple(
            PathSpec(complex(g), int(d), float(f))
            for g, d, f in zip(gains, delays, dopplers)
        )
        return ChannelSpec(
            n=self.n, paths=paths, lmax=self.lmax, fmax=self.fmax, guard=self.guard
        )


@dataclass(frozen=True)
class PrefixPhaseRule:
    """How the cyclic prefix is phased.

    kind "zero" is the plain cyclic prefix (no phase), appropriate for the
    DFT waveform.  kind "afdm-chirp-periodic" continues the c1 chirp through
    the prefix so the chirp-domain channel keeps its sparse structure.
    """

    kind: str
    c1: float = 0.0

    def __post_init__(self):
        if self.kind not in ("zero", "afdm-chirp-periodic"):
            raise ValueError(f"unknown prefix kind {self.kind!r}")
        if not math.isfinite(self.c1):
            raise ValueError("prefix c1 must be finite")

    @classmethod
    def zero(cls) -> "PrefixPhaseRule":
        return cls(kind="zero")

    @classmethod
    def afdm(cls, c1: float) -> "PrefixPhaseRule":
        return cls(kind="afdm-chirp-periodic", c1=c1)


def channel_matrix(spec: ChannelSpec, prefix: PrefixPhaseRule) -> np.ndarray:
    """Dense n x n time-domain channel matrix for one block.

    Each path contributes one cyclic diagonal: row k takes the input sample
    delayed by the path delay, scaled by the Doppler progression and, on the
    rows that wrap (k < delay), by the prefix phase fix-up
    exp(-2j*pi*c1*(n^2 + 2*n*(delay - k))).  For even n and integer 2*n*c1
    the fix-up is identically one.
    """
    n = spec.n
    rows = np.arange(n)
    h = np.zeros((n, n), dtype=np.complex128)
    for p in spec.paths:
        diag = np.exp(-2j * np.pi * p.doppler * rows / n).astype(np.complex128)
        if prefix.kind == "afdm-chirp-periodic" and p.delay > 0:
            k = p.delay - rows[: p.delay]
            phase = prefix.c1 * (n * n + 2.0 * n * k)
            diag[: p.delay] *= np.exp(-2j * np.pi * phase)
        cols = (rows - p.delay) % n
        h[rows, cols] += p.gain * diag
    return h


@dataclass(frozen=True)
class EffectiveChannel:
    """Demodulation-domain channel together with its sparsity pattern.

    support holds the (row, col) pairs whose magnitude exceeds
    SUPPORT_THRESHOLD relative to the largest entry; locs gives each path's
    location index in the order of spec.paths.
    """

    matrix: np.ndarray
    support: frozenset
    locs: tuple
    config: TransformConfig
    spec: ChannelSpec


def _apply_left(cfg: TransformConfig, m: np.ndarray) -> np.ndarray:
    # cpdaft_forward maps rows, i.e. f(M) = M A^T, so f(M.T).T = A M.
    return cpdaft_forward(cfg, m.T).T


def effective_channel(spec: ChannelSpec, cfg: TransformConfig) -> EffectiveChannel:
    """G = A H A^H for the chirp-periodic prefix rule at cfg.c1.

    Uses the FFT factorization on matrix columns rather than dense products,
    so it stays cheap up to n of a few thousand.
    """
    if spec.n != cfg.n:
        raise ValueError("channel and transform sizes differ")
    h = channel_matrix(spec, PrefixPhaseRule.afdm(cfg.c1))
    ah = _apply_left(cfg, h)
    # (A H) A^H = conj( f(conj(A H)) ) with f(M) = M A^T
    g = np.conj(cpdaft_forward(cfg, np.conj(ah)))
    mags = np.abs(g)
    cutoff = SUPPORT_THRESHOLD * mags.max()
    support = frozenset((int(r), int(c)) for r, c in np.argwhere(mags > cutoff))
    locs = tuple(location_index(p, spec, cfg.c1) for p in spec.paths)
    return EffectiveChannel(matrix=g, support=support, locs=locs, config=cfg, spec=spec)


def location_index(path: PathSpec, spec: ChannelSpec, c1: float) -> float:
    """Column offset at which a path appears in the demodulation domain.

    loc = (doppler + 2*n*c1*delay) mod n.  Integer Dopplers with integer
    2*n*c1 give exact integers; fractional Dopplers give the real-valued
    center the path's energy concentrates around.
    """
    return float((path.doppler + 2.0 * spec.n * c1 * path.delay) % spec.n)


def _loc_table(spec: ChannelSpec, c1: float) -> dict[int, tuple[int, int]]:
    """Map each in-range (delay, Doppler) pair's location to the pair.

    Raises NonOrthogonalChannelError when two pairs collide, i.e. when the
    declared ranges are not uniquely resolvable at this c1.
    """
    n = spec.n
    step = 2.0 * n * c1
    step_int = int(round(step))
    if abs(step - step_int) > 1e-9:
        raise NonOrthogonalChannelError(
            f"2*n*c1 = {step} is not an integer; locations are not integer-aligned"
        )
    table: dict[int, tuple[int, int]] = {}
    for delay in range(spec.lmax + 1):
        for dopp in range(-spec.fmax, spec.fmax + 1):
            loc = (dopp + step_int * delay) % n
            if loc in table:
                raise NonOrthogonalChannelError(
                    f"(delay, Doppler) pairs {table[loc]} and {(delay, dopp)} "
                    f"share location {loc}"
                )
            table[loc] = (delay, dopp)
    return table


def extract_paths(g: EffectiveChannel, spec: ChannelSpec) -> list[PathSpec]:
    """Recover (gain, delay, Doppler) per path from row 0 of the matrix.

    Requires integer Dopplers, integer 2*n*c1, and an unpermuted pre-DFT
    chirp (the post-DFT permutation only rotates entry phases and is undone
    here).  Paths come back sorted by (delay, Doppler).
    """
    cfg = g.config
    if not cfg.perm1.is_identity():
        raise NonOrthogonalChannelError(
            "path extraction needs an identity pre-DFT permutation"
        )
    n = spec.n
    table = _loc_table(spec, cfg.c1)
    row0 = g.matrix[0]
    cutoff = SUPPORT_THRESHOLD * np.abs(g.matrix).max()
    p2 = cfg.perm2.map
    paths = []
    for col in np.flatnonzero(np.abs(row0) > cutoff):
        col = int(col)
        if col not in table:
            raise NonOrthogonalChannelError(
                f"row-0 entry at column {col} matches no in-range (delay, Doppler) pair"
            )
        delay, dopp = table[col]
        chirp_scale = np.exp(-2j * np.pi * cfg.c2 * (p2[0] ** 2 - p2[col] ** 2))
        path_phase = np.exp(2j * np.pi * (cfg.c1 * delay * delay - col * delay / n))
        gain = row0[col] / (chirp_scale * path_phase)
        paths.append(PathSpec(gain=complex(gain), delay=delay, doppler=float(dopp)))
    return sorted(paths, key=lambda p: (p.delay, p.doppler))


def optimal_c1(fmax: int, guard: int, n: int) -> float:
    """First chirp rate that separates delay-Doppler pairs maximally:
    (2*(fmax + guard) + 1) / (2*n)."""
    if fmax < 0 or guard < 0:
        raise ValueError("fmax and guard must be non-negative")
    if n < 1:
        raise ValueError("n must be positive")
    return (2.0 * (fmax + guard) + 1.0) / (2.0 * n)
