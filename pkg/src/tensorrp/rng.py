"""Reproducible, splittable random streams and random TT/MPO sampling.

The generator is SplitMix64 run in counter mode: the ``j``-th 64-bit word of
the stream keyed by ``seed`` is ``mix64(seed + (j + 1) * GOLDEN_GAMMA)``
(mod 2**64), which is exactly the output sequence of a SplitMix64 generator
whose state starts at ``seed``. Because every word is a pure function of
``(seed, j)`` the streams of many seeds are produced in one vectorized numpy
pass, and results are identical on every platform.

Variates consume one word each:

* uniform: ``((w >> 12) + 0.5) * 2**-52``, strictly inside (0, 1)
* Gaussian: inverse normal CDF of that uniform
* Rademacher: the top bit of the word selects -1 or +1
"""
from __future__ import annotations

import enum
from math import prod
from typing import Sequence

import numpy as np
from scipy.special import ndtri

from .tensor import MpoTensor, TtTensor

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_SPLIT_KEY = np.uint64(0xD1B54A32D192ED03)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


class CoreDistribution(enum.Enum):
    GAUSSIAN = "gaussian"
    RADEMACHER = "rademacher"


def as_seed(seed) -> int:
    seed = int(seed)
    if not 0 <= seed <= MASK64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def mix64(z) -> np.ndarray:
    """SplitMix64 finalizer, a bijection on 64-bit words (applied elementwise)."""
    z = np.array(z, dtype=np.uint64, copy=True)
    z ^= z >> np.uint64(30)
    z *= _M1
    z ^= z >> np.uint64(27)
    z *= _M2
    z ^= z >> np.uint64(31)
    return z


def split_seeds(seeds, indices) -> np.ndarray:
    """Vectorized :func:`split_seed`; ``seeds`` and ``indices`` broadcast."""
    base = mix64(np.asarray(seeds, dtype=np.uint64) ^ _SPLIT_KEY)
    return mix64(base + np.asarray(indices, dtype=np.uint64) * GOLDEN_GAMMA)


def split_seed(seed: int, index: int) -> int:
    """Child seed number ``index`` of ``seed``.

    For a fixed parent the map ``index -> child`` is injective over 64-bit
    indices, since it composes bijections.
    """
    if index < 0:
        raise ValueError("index must be non-negative")
    return int(split_seeds(as_seed(seed), index & MASK64))


def raw_words(seeds, n: int, start: int = 0) -> np.ndarray:
    """Words ``start .. start+n-1`` of each stream; shape ``(*seeds.shape, n)``."""
    seeds = np.asarray(seeds, dtype=np.uint64)
    counters = np.arange(start + 1, start + n + 1, dtype=np.uint64) * GOLDEN_GAMMA
    return mix64(seeds[..., None] + counters)


def words_to_uniform(words: np.ndarray) -> np.ndarray:
    return ((words >> np.uint64(12)).astype(np.float64) + 0.5) * 2.0**-52


def words_to_values(words: np.ndarray, dist: CoreDistribution) -> np.ndarray:
    if dist is CoreDistribution.RADEMACHER:
        return 1.0 - 2.0 * (words >> np.uint64(63)).astype(np.float64)
    return ndtri(words_to_uniform(words))


def sample_values(dist: CoreDistribution, seeds, n: int) -> np.ndarray:
    """``n`` i.i.d. draws from ``dist`` for every seed in ``seeds``."""
    return words_to_values(raw_words(seeds, n), dist)


class Stream:
    """A sequential generator over one counter-mode stream.

    Instances are single-owner; use :meth:`spawn` (or :func:`split_seed`) to
    obtain independent children before fanning work out.
    """

    def __init__(self, seed: int):
        self.seed = as_seed(seed)
        self.position = 0

    def _take(self, n: int) -> np.ndarray:
        words = raw_words(self.seed, n, self.position)
        self.position += n
        return words

    def words(self, n: int) -> np.ndarray:
        return self._take(n)

    def uniform(self, n: int) -> np.ndarray:
        return words_to_uniform(self._take(n))

    def normal(self, n: int) -> np.ndarray:
        return words_to_values(self._take(n), CoreDistribution.GAUSSIAN)

    def rademacher(self, n: int) -> np.ndarray:
        return words_to_values(self._take(n), CoreDistribution.RADEMACHER)

    def spawn(self, index: int) -> Stream:
        return Stream(split_seed(self.seed, index))


def tt_core_shapes(shape: Sequence[int], rank: int) -> list[tuple[int, int, int]]:
    ranks = [1] + [rank] * (len(shape) - 1) + [1]
    return [(ranks[n], d, ranks[n + 1]) for n, d in enumerate(shape)]


def mpo_core_shapes(
    in_shape: Sequence[int], out_shape: Sequence[int], rank: int
) -> list[tuple[int, int, int, int]]:
    if len(in_shape) != len(out_shape):
        raise ValueError("input and output shapes must have the same order")
    ranks = [1] + [rank] * (len(in_shape) - 1) + [1]
    return [
        (ranks[n], d, k, ranks[n + 1]) for n, (d, k) in enumerate(zip(in_shape, out_shape))
    ]


def sample_cores(dist: CoreDistribution, core_shapes, seeds) -> list[np.ndarray]:
    """Fill cores row-major, in order, from each seed's stream.

    Returns one array per core with shape ``(*seeds.shape, *core_shape)``.
    """
    seeds = np.asarray(seeds, dtype=np.uint64)
    sizes = [prod(s) for s in core_shapes]
    values = sample_values(dist, seeds, sum(sizes))
    cores = []
    offset = 0
    for shape, size in zip(core_shapes, sizes):
        cores.append(values[..., offset : offset + size].reshape(seeds.shape + tuple(shape)))
        offset += size
    return cores


def sample_tt(dist: CoreDistribution, shape: Sequence[int], rank: int, seed: int) -> TtTensor:
    """Random tensor train with i.i.d. (unnormalized) core entries."""
    if rank < 1:
        raise ValueError("rank must be at least 1")
    return TtTensor(tuple(sample_cores(dist, tt_core_shapes(shape, rank), as_seed(seed))))


def sample_mpo(
    dist: CoreDistribution,
    in_shape: Sequence[int],
    out_shape: Sequence[int],
    rank: int,
    seed: int,
) -> MpoTensor:
    """Random MPO with i.i.d. (unnormalized) core entries."""
    if rank < 1:
        raise ValueError("rank must be at least 1")
    shapes = mpo_core_shapes(in_shape, out_shape, rank)
    return MpoTensor(tuple(sample_cores(dist, shapes, as_seed(seed))))
