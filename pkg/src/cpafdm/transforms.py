"""Permutations, discrete chirps, and the chirp-permuted affine Fourier transform.

The forward transform is the unitary matrix product

    A = diag(perm2(chirp_c2)) . F . diag(perm1(chirp_c1))

where F is the orthonormal DFT and chirp_c[k] = exp(-2j*pi*c*k**2).  Permuting
the chirp samples reorders the diagonal entries only, so A stays unitary for
every choice of the two permutations.  With both permutations equal to the
identity the transform reduces to the conventional discrete affine Fourier
transform; with c1 = c2 = 0 it collapses to the plain DFT.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Permutation",
    "identity_permutation",
    "permutation_from_rank",
    "permutation_to_rank",
    "random_permutation",
    "ChirpSequence",
    "chirp_sequence",
    "default_c2",
    "TransformConfig",
    "cpdaft_forward",
    "cpdaft_inverse",
    "cpdaft_matrix",
    "kernel_sample",
    "UnitaryTransform",
]


class Permutation:
    """A bijection on {0, ..., n-1} stored as a gather map.

    Applying a permutation ``p`` to a vector ``x`` produces ``y`` with
    ``y[i] = x[p.map[i]]``: entry ``i`` of the output is *fetched from*
    position ``p.map[i]`` of the input.
    """

    __slots__ = ("map",)

    def __init__(self, mapping) -> None:
        arr = np.asarray(mapping, dtype=np.int64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("permutation map must be a non-empty 1-D sequence")
        if not np.array_equal(np.sort(arr), np.arange(arr.size)):
            raise ValueError("permutation map must contain each of 0..n-1 exactly once")
        self.map = arr
        self.map.setflags(write=False)

    @property
    def size(self) -> int:
        return int(self.map.size)

    def __len__(self) -> int:
        return self.size

    def apply(self, values: np.ndarray) -> np.ndarray:
        """Gather ``values`` along the last axis: ``out[..., i] = values[..., map[i]]``."""
        values = np.asarray(values)
        if values.shape[-1] != self.size:
            raise ValueError(
                f"last axis has length {values.shape[-1]}, expected {self.size}"
            )
        return values[..., self.map]

    def inverse(self) -> "Permutation":
        inv = np.empty(self.size, dtype=np.int64)
        inv[self.map] = np.arange(self.size)
        return Permutation(inv)

    def is_identity(self) -> bool:
        return bool(np.array_equal(self.map, np.arange(self.size)))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Permutation):
            return NotImplemented
        return np.array_equal(self.map, other.map)

    def __hash__(self) -> int:
        return hash(self.map.tobytes())

    def __repr__(self) -> str:
        return f"Permutation({self.map.tolist()})"


def identity_permutation(n: int) -> Permutation:
    """The identity map on n elements."""
    if n < 1:
        raise ValueError("n must be positive")
    return Permutation(np.arange(n))


def permutation_from_rank(n: int, rank: int) -> Permutation:
    """Unrank a permutation from its index in lexicographic (Lehmer) order.

    Ranks run from 0 (identity) to n!-1 (the fully reversed sequence) and are
    handled as arbitrary-precision integers, so sizes past the 64-bit
    factorial overflow point (n >= 21) are fine.
    """
    if n < 1:
        raise ValueError("n must be positive")
    total = math.factorial(n)
    if not 0 <= rank < total:
        raise ValueError(f"rank {rank} outside [0, {n}!)")
    # factoradic digits of the rank, most significant first
    digits = []
    r = rank
    for radix in range(1, n + 1):
        digits.append(r % radix)
        r //= radix
    digits.reverse()
    pool = list(range(n))
    return Permutation([pool.pop(d) for d in digits])


def permutation_to_rank(perm: Permutation) -> int:
    """Rank of a permutation in lexicographic order (inverse of unranking)."""
    seq = perm.map.tolist()
    n = len(seq)
    rank = 0
    for i, v in enumerate(seq):
        smaller_right = sum(1 for u in seq[i + 1 :] if u < v)
        rank += smaller_right * math.factorial(n - 1 - i)
    return rank


def random_permutation(n: int, rng: np.random.Generator) -> Permutation:
    """Uniformly random permutation drawn with a numpy generator."""
    return Permutation(rng.permutation(n))


@dataclass(frozen=True)
class ChirpSequence:
    """Samples of a discrete quadratic chirp exp(-2j*pi*rate*k**2)."""

    rate: float
    values: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return int(self.values.size)


def chirp_sequence(n: int, c: float) -> ChirpSequence:
    """Length-n chirp with quadratic phase rate c.

    c = 0 gives the all-ones sequence; every sample has unit modulus.
    """
    if n < 1:
        raise ValueError("n must be positive")
    c = float(c)
    if not math.isfinite(c):
        raise ValueError("chirp rate must be finite")
    k = np.arange(n, dtype=np.float64)
    values = np.exp(-2j * np.pi * c * k * k)
    values.setflags(write=False)
    return ChirpSequence(rate=c, values=values)


def default_c2(n: int) -> float:
    """Default second chirp rate: small and irrational, 1 / (2*n*pi)."""
    if n < 1:
        raise ValueError("n must be positive")
    return 1.0 / (2.0 * n * np.pi)


@dataclass(frozen=True)
class TransformConfig:
    """Parameters of a chirp-permuted transform of size n.

    perm1 permutes the pre-DFT chirp (rate c1), perm2 the post-DFT chirp
    (rate c2).  Factory methods cover the common special cases.
    """

    n: int
    c1: float
    c2: float
    perm1: Permutation
    perm2: Permutation

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("transform size must be positive")
        if self.perm1.size != self.n or self.perm2.size != self.n:
            raise ValueError("permutation sizes must match the transform size")
        for c in (self.c1, self.c2):
            if not math.isfinite(float(c)):
                raise ValueError("chirp rates must be finite")

    @classmethod
    def conventional(cls, n: int, c1: float, c2: float) -> "TransformConfig":
        """Unpermuted transform (both permutations identity)."""
        ident = identity_permutation(n)
        return cls(n=n, c1=c1, c2=c2, perm1=ident, perm2=ident)

    @classmethod
    def ofdm(cls, n: int) -> "TransformConfig":
        """Plain DFT: zero chirp rates, identity permutations."""
        return cls.conventional(n, 0.0, 0.0)

    @classmethod
    def one_sided(cls, n: int, c1: float, c2: float, perm2: Permutation) -> "TransformConfig":
        """Permute only the post-DFT chirp; the pre-DFT chirp stays in order."""
        return cls(n=n, c1=c1, c2=c2, perm1=identity_permutation(n), perm2=perm2)

    @classmethod
    def two_sided(
        cls, n: int, c1: float, c2: float, perm1: Permutation, perm2: Permutation
    ) -> "TransformConfig":
        return cls(n=n, c1=c1, c2=c2, perm1=perm1, perm2=perm2)

    def diagonals(self) -> tuple[np.ndarray, np.ndarray]:
        """Permuted chirp samples forming the two diagonal factors."""
        d1 = chirp_sequence(self.n, self.c1).values[self.perm1.map]
        d2 = chirp_sequence(self.n, self.c2).values[self.perm2.map]
        return d1, d2


def _check_last_axis(x: np.ndarray, n: int) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim == 0 or x.shape[-1] != n:
        raise ValueError(f"input last axis must have length {n}")
    return x


def cpdaft_forward(cfg: TransformConfig, x: np.ndarray) -> np.ndarray:
    """Apply the forward transform along the last axis of ``x``.

    Fast path: chirp multiply, orthonormal FFT, chirp multiply -- O(n log n)
    per vector instead of the dense O(n^2) product.
    """
    x = _check_last_axis(x, cfg.n)
    d1, d2 = cfg.diagonals()
    return d2 * np.fft.fft(d1 * x, axis=-1, norm="ortho")


def cpdaft_inverse(cfg: TransformConfig, y: np.ndarray) -> np.ndarray:
    """Apply the inverse (conjugate-transpose) transform along the last axis."""
    y = _check_last_axis(y, cfg.n)
    d1, d2 = cfg.diagonals()
    return d1.conj() * np.fft.ifft(d2.conj() * y, axis=-1, norm="ortho")


def cpdaft_matrix(cfg: TransformConfig) -> np.ndarray:
    """Dense forward matrix, built directly from the defining product.

    Intended for small n (matrices are n x n complex); the element-wise
    construction is independent of the FFT fast path, which is useful for
    cross-checking the two.
    """
    n = cfg.n
    idx = np.arange(n)
    dft = np.exp(-2j * np.pi * np.outer(idx, idx) / n) / np.sqrt(n)
    d1, d2 = cfg.diagonals()
    return d2[:, None] * dft * d1[None, :]


def kernel_sample(cfg: TransformConfig, row: int, col: int) -> complex:
    """Single entry of the modulation (inverse-transform) kernel.

    ``row`` indexes the output (time) sample, ``col`` the input symbol; both
    are zero-based.  Equals ``cpdaft_matrix(cfg).conj().T[row, col]``.
    """
    if not (0 <= row < cfg.n and 0 <= col < cfg.n):
        raise ValueError("kernel indices must lie in [0, n)")
    p1 = int(cfg.perm1.map[row])
    p2 = int(cfg.perm2.map[col])
    phase = cfg.c1 * p1 * p1 + cfg.c2 * p2 * p2 + row * col / cfg.n
    return np.exp(2j * np.pi * phase) / np.sqrt(cfg.n)


class UnitaryTransform:
    """A transform config bundled with an application mode.

    mode "fast" uses the FFT factorization; mode "matrix" materializes (and
    caches) the dense matrix and applies it by multiplication.  Both modes
    produce the same result to floating-point accuracy.
    """

    def __init__(self, config: TransformConfig, mode: str = "fast") -> None:
        if mode not in ("fast", "matrix"):
            raise ValueError("mode must be 'fast' or 'matrix'")
        self.config = config
        self.mode = mode
        self._matrix: np.ndarray | None = None

    @property
    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            self._matrix = cpdaft_matrix(self.config)
        return self._matrix

    def forward(self, x: np.ndarray) -> np.ndarray:
        if self.mode == "fast":
            return cpdaft_forward(self.config, x)
        x = _check_last_axis(x, self.config.n)
        return x @ self.matrix.T

    def inverse(self, y: np.ndarray) -> np.ndarray:
        if self.mode == "fast":
            return cpdaft_inverse(self.config, y)
        y = _check_last_axis(y, self.config.n)
        return y @ self.matrix.conj()
