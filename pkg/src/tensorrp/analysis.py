"""Exact oracles, closed-form moments and Monte Carlo estimators.

The enumeration oracle averages a statistic over every sign matrix of a
given shape, which gives exact Rademacher expectations for small problems.
The closed forms cover the fourth moment of ``<A, B>`` for a Rademacher
``A``, the fourth moment of ``||B A||_F``, the exact variance of the rank-``R``
MPO map for matrix inputs, and the variance bound for tensor-train maps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import rng
from .errors import TooLargeToEnumerate, ZeroNormInput
from .projection import ProjectionSpec, Tensor, apply, apply_batch, distortion, sample_projection
from .tensor import DenseTensor, TtTensor, tt_norm_sq

MAX_ENUMERATION_ENTRIES = 20

# trials evaluated per apply_batch call in the Monte Carlo estimators
TRIAL_BATCH = 1 << 14


@dataclass(frozen=True)
class TrialStats:
    """Monte Carlo summary of ``||f(x)||^2`` over independent projections.

    ``stderr_variance`` is the jackknife standard error of the unbiased sample
    variance (infinite when fewer than three trials are available).
    """

    n_trials: int
    mean: float
    variance: float
    stderr_mean: float
    stderr_variance: float

    @classmethod
    def from_samples(cls, samples) -> TrialStats:
        y = np.asarray(samples, dtype=np.float64).reshape(-1)
        n = y.size
        if n < 2:
            raise ValueError("need at least two trials")
        mean = float(y.mean())
        centered = y - mean
        sq = centered * centered
        total = float(sq.sum())
        variance = total / (n - 1)
        stderr_variance = math.inf
        if n >= 3:
            # leave-one-out variances of the centered sample, in closed form
            loo = (total - sq * (n / (n - 1))) / (n - 2)
            spread = loo - loo.mean()
            stderr_variance = math.sqrt((n - 1) / n * float(spread @ spread))
        return cls(
            n_trials=n,
            mean=mean,
            variance=variance,
            stderr_mean=math.sqrt(variance / n),
            stderr_variance=stderr_variance,
        )


@dataclass(frozen=True)
class JltCheckConfig:
    m: int
    epsilon: float
    delta: float
    spec: ProjectionSpec
    trials: int

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")


# --------------------------------------------------------------------------
# exact Rademacher oracles

def sign_matrices(shape: tuple[int, int]) -> np.ndarray:
    """All ``2**(m*n)`` sign matrices of ``shape``, stacked along axis 0."""
    m, n = shape
    entries = m * n
    if entries > MAX_ENUMERATION_ENTRIES:
        raise TooLargeToEnumerate(
            f"{entries} entries means 2**{entries} sign matrices; "
            f"the limit is {MAX_ENUMERATION_ENTRIES}"
        )
    codes = np.arange(1 << entries, dtype=np.int64)[:, None]
    bits = (codes >> np.arange(entries, dtype=np.int64)) & 1
    return (1.0 - 2.0 * bits).reshape(-1, m, n)


def enumerate_rademacher_expectation(
    shape: tuple[int, int],
    statistic: Callable[[np.ndarray], float],
    vectorized: bool = False,
) -> float:
    """Exact mean of ``statistic(A)`` over every ``A`` in ``{-1, +1}^shape``.

    With ``vectorized=True`` the statistic receives the whole stack of sign
    matrices at once and must return one value per matrix.
    """
    signs = sign_matrices(shape)
    if vectorized:
        values = np.asarray(statistic(signs), dtype=np.float64).reshape(-1)
    else:
        values = [float(statistic(a)) for a in signs]
    return math.fsum(values) / len(signs)


def rademacher_fourth_moment_exact(b) -> float:
    """``E <A, B>^4`` for fixed ``B``: ``3 ||B||_F^4 - 2 sum_j b_j^4``."""
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    fro2 = float(b @ b)
    return 3.0 * fro2 * fro2 - 2.0 * float(np.sum(b**4))


def lemma2_exact(b, rank: int) -> float:
    """``E ||B A||_F^4`` for fixed ``p x d`` ``B`` and Rademacher ``d x rank`` ``A``.

    With ``M = B^T B`` this is ``R^2 tr(M)^2 + 2R tr(M^2) - 2R sum_i M_ii^2``.
    """
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    m = b.T @ b
    trace = float(np.trace(m))
    return (
        rank * rank * trace * trace
        + 2.0 * rank * float(np.sum(m * m))
        - 2.0 * rank * float(np.sum(np.diag(m) ** 2))
    )


def lemma2_bound(b_norm4: float, rank: int) -> float:
    """Upper bound ``R (R + 2) ||B||_F^4`` on ``E ||B A||_F^4``."""
    if b_norm4 < 0:
        raise ValueError("b_norm4 must be non-negative")
    return rank * (rank + 2) * b_norm4


# --------------------------------------------------------------------------
# closed forms

def mpo_variance_closed_form(x, k: int, rank: int) -> float:
    """Exact ``Var ||f(X)||^2`` of the rank-``R`` Gaussian MPO map on a matrix.

    ``(2/k) ||X||_F^4 + (2/R) (1 + 2/k) tr((X^T X)^2)``. The second term does
    not vanish as ``k`` grows.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("the closed form covers matrix inputs only")
    fro2 = float(np.sum(x * x))
    gram = x.T @ x
    return 2.0 / k * fro2 * fro2 + 2.0 / rank * (1.0 + 2.0 / k) * float(np.sum(gram * gram))


def tt_variance_bound(order: int, rank: int, k: int, x_norm4: float) -> float:
    """``(1/k) (3 (1 + 2/R)^(N-1) - 1) ||X||_F^4``."""
    return (3.0 * (1.0 + 2.0 / rank) ** (order - 1) - 1.0) * x_norm4 / k


def jlt_k_lower_bound(order: int, rank: int, epsilon: float, m: int, delta: float) -> float:
    """``eps^-2 (1 + 2/R)^N ln(m/delta)^(2N)``, taking the hidden constant as 1."""
    return (
        epsilon**-2
        * (1.0 + 2.0 / rank) ** order
        * math.log(m / delta) ** (2 * order)
    )


# --------------------------------------------------------------------------
# Monte Carlo

def input_norm_sq(x: Tensor) -> float:
    return tt_norm_sq(x) if isinstance(x, TtTensor) else x.norm_sq()


def projected_norms_sq(spec: ProjectionSpec, x: Tensor, trials: int, seed: int) -> np.ndarray:
    """``||f_t(x)||^2`` for trials ``t = 0..trials-1``.

    Trial ``t`` uses the projection ``spec.with_seed(split_seed(seed, t))``.
    """
    seed = rng.as_seed(seed)
    out = np.empty(trials)
    for start in range(0, trials, TRIAL_BATCH):
        stop = min(trials, start + TRIAL_BATCH)
        seeds = rng.split_seeds(seed, np.arange(start, stop))
        fx = apply_batch(spec, x, seeds)
        out[start:stop] = np.einsum("ij,ij->i", fx, fx)
    return out


def monte_carlo_norm_stats(spec: ProjectionSpec, x: Tensor, trials: int, seed: int) -> TrialStats:
    """Estimate the mean and variance of ``||f(x)||^2`` over fresh projections."""
    if trials < 2:
        raise ValueError("trials must be >= 2")
    if not input_norm_sq(x) > 0:
        raise ZeroNormInput("Monte Carlo moments need a nonzero input")
    return TrialStats.from_samples(projected_norms_sq(spec, x, trials, seed))


def jlt_embedding_check(cfg: JltCheckConfig, inputs: Sequence[Tensor], seed: int) -> float:
    """Fraction of (trial, input) pairs whose distortion exceeds ``epsilon``.

    Each trial draws one projection and applies it to every input.
    """
    if len(inputs) != cfg.m:
        raise ValueError(f"expected {cfg.m} inputs, got {len(inputs)}")
    norms = [input_norm_sq(x) for x in inputs]
    if any(not v > 0 for v in norms):
        raise ZeroNormInput("every input must be nonzero")
    failures = 0
    for t in range(cfg.trials):
        p = sample_projection(cfg.spec.with_seed(rng.split_seed(seed, t)))
        for x, norm in zip(inputs, norms):
            failures += distortion(apply(p, x), norm) > cfg.epsilon
    return failures / (cfg.trials * cfg.m)


def gaussian_dense_input(shape: Sequence[int], seed: int) -> DenseTensor:
    """Dense tensor with i.i.d. standard Gaussian entries."""
    n = math.prod(shape)
    return DenseTensor(tuple(shape), rng.Stream(seed).normal(n))
