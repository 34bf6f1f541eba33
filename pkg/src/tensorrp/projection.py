"""Random projection maps from tensors (TT or dense) to R^k.

Six variants are provided:

``TtGaussian`` / ``TtRademacher``
    Component ``i`` is ``<T_i, x> / sqrt(k * R**(N-1))`` where ``T_i`` is a
    rank-``R`` tensor train with i.i.d. Gaussian / Rademacher core entries.
    The cores are stored unnormalized and the single factor above is applied
    once, which keeps ``E ||f(x)||^2 = ||x||^2``.
``MpoGaussian`` / ``MpoRademacherRank1``
    One random MPO with output legs ``(k_1, ..., k_N)``; the output is
    vectorized row-major and scaled by ``1 / sqrt(R**(N-1) * k)``. The rank-1
    Rademacher variant always uses ``R = 1``.
``DenseGaussian`` / ``VerySparse``
    Classical ``A x / sqrt(k)`` with a ``k x D`` matrix of Gaussian entries or
    of entries in ``{+sqrt(s), 0, -sqrt(s)}`` with probabilities
    ``{1/(2s), 1 - 1/s, 1/(2s)}``.

Tensor-train draw ``i`` is sampled from ``split_seed(spec.seed, i)``; MPO and
matrix materials come straight from the stream of ``spec.seed``.
"""
from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass, field
from math import prod, sqrt
from typing import Sequence, Union

import numpy as np

from . import rng
from .errors import InvalidSpec, ShapeMismatch, ZeroNormInput
from .rng import CoreDistribution
from .tensor import (
    DEFAULT_ELEMENT_CAP,
    DenseTensor,
    MpoTensor,
    TtTensor,
    batch_mpo_apply_dense,
    batch_mpo_apply_tt,
    batch_tt_dense_inner,
    batch_tt_inner,
    check_element_cap,
    tt_to_dense,
)

Tensor = Union[TtTensor, DenseTensor]

# soft bound on floats held by one intermediate when applying batches of draws
CHUNK_FLOATS = 1 << 23


class Variant(enum.Enum):
    TT_GAUSSIAN = "TtGaussian"
    TT_RADEMACHER = "TtRademacher"
    MPO_GAUSSIAN = "MpoGaussian"
    MPO_RADEMACHER_RANK1 = "MpoRademacherRank1"
    DENSE_GAUSSIAN = "DenseGaussian"
    VERY_SPARSE = "VerySparse"

    @classmethod
    def parse(cls, name: str) -> Variant:
        for v in cls:
            if v.value.lower() == name.strip().lower():
                return v
        raise InvalidSpec(f"unknown variant {name!r}; choose from {[v.value for v in cls]}")

    @property
    def is_tt(self) -> bool:
        return self in (Variant.TT_GAUSSIAN, Variant.TT_RADEMACHER)

    @property
    def is_mpo(self) -> bool:
        return self in (Variant.MPO_GAUSSIAN, Variant.MPO_RADEMACHER_RANK1)

    @property
    def is_matrix(self) -> bool:
        return self in (Variant.DENSE_GAUSSIAN, Variant.VERY_SPARSE)

    @property
    def distribution(self) -> CoreDistribution:
        if self in (Variant.TT_RADEMACHER, Variant.MPO_RADEMACHER_RANK1):
            return CoreDistribution.RADEMACHER
        return CoreDistribution.GAUSSIAN

    @property
    def code(self) -> int:
        """Stable small integer used to derive per-variant seeds."""
        return list(Variant).index(self)


@dataclass(frozen=True)
class ProjectionSpec:
    """Everything needed to regenerate one random projection.

    ``rank`` is ignored by the matrix variants and forced to 1 for
    ``MpoRademacherRank1``. ``out_shape`` (MPO only) defaults to
    ``(k, 1, ..., 1)``; ``sparsity`` (VerySparse only) defaults to
    ``sqrt(prod(in_shape))``.
    """

    variant: Variant
    k: int
    in_shape: tuple[int, ...]
    rank: int = 1
    out_shape: tuple[int, ...] | None = None
    sparsity: float | None = None
    seed: int = 0

    def __post_init__(self):
        set_ = lambda name, value: object.__setattr__(self, name, value)  # noqa: E731
        if isinstance(self.variant, str):
            set_("variant", Variant.parse(self.variant))
        set_("in_shape", tuple(int(d) for d in self.in_shape))
        if not self.in_shape or any(d < 1 for d in self.in_shape):
            raise InvalidSpec(f"in_shape must be non-empty and positive, got {self.in_shape}")
        if int(self.k) < 1:
            raise InvalidSpec(f"k must be >= 1, got {self.k}")
        if int(self.rank) < 1:
            raise InvalidSpec(f"rank must be >= 1, got {self.rank}")
        set_("k", int(self.k))
        set_("rank", 1 if self.variant is Variant.MPO_RADEMACHER_RANK1 else int(self.rank))
        try:
            set_("seed", rng.as_seed(self.seed))
        except ValueError as exc:
            raise InvalidSpec(str(exc)) from None

        if self.variant.is_mpo:
            out = self.out_shape
            if out is None:
                out = (self.k,) + (1,) * (len(self.in_shape) - 1)
            out = tuple(int(j) for j in out)
            if len(out) != len(self.in_shape) or any(j < 1 for j in out):
                raise InvalidSpec(f"out_shape {out} does not fit in_shape {self.in_shape}")
            if prod(out) != self.k:
                raise InvalidSpec(f"out_shape {out} has product {prod(out)}, expected k={self.k}")
            set_("out_shape", out)
        elif self.out_shape is not None:
            raise InvalidSpec("out_shape only applies to MPO variants")

        if self.variant is Variant.VERY_SPARSE:
            s = sqrt(self.input_size) if self.sparsity is None else float(self.sparsity)
            if not s >= 1.0:
                raise InvalidSpec(f"sparsity must be >= 1, got {s}")
            set_("sparsity", s)
        elif self.sparsity is not None:
            raise InvalidSpec("sparsity only applies to VerySparse")

    @property
    def order(self) -> int:
        return len(self.in_shape)

    @property
    def input_size(self) -> int:
        return prod(self.in_shape)

    @property
    def scale(self) -> float:
        """Total normalization applied to the raw contractions."""
        if self.variant.is_matrix:
            return 1.0 / sqrt(self.k)
        return 1.0 / sqrt(self.k * float(self.rank) ** (self.order - 1))

    def with_seed(self, seed: int) -> ProjectionSpec:
        return dataclasses.replace(self, seed=seed)


@dataclass(frozen=True)
class OpCounts:
    """Floating-point operations performed by one ``apply`` call.

    ``core_*`` counts the step that combines random core (or matrix) entries
    with data; for the Rademacher sign path this is the sign-application step
    and ``core_mul`` is zero. ``data_*`` counts products between data and
    accumulated intermediates, and ``scale_mul`` the final normalization.
    """

    core_mul: int = 0
    core_add: int = 0
    data_mul: int = 0
    data_add: int = 0
    scale_mul: int = 0

    @property
    def mul(self) -> int:
        return self.core_mul + self.data_mul + self.scale_mul

    @property
    def add(self) -> int:
        return self.core_add + self.data_add


@dataclass(frozen=True)
class ApplyResult:
    values: np.ndarray
    op_counts: OpCounts


@dataclass(frozen=True, eq=False)
class SampledProjection:
    """A projection with its random materials drawn.

    Exactly one of ``tt_cores`` (TT variants; ``tt_cores[n]`` stacks the
    ``k`` draws along axis 0), ``mpo`` or ``matrix`` is set.
    """

    spec: ProjectionSpec
    tt_cores: tuple[np.ndarray, ...] | None = None
    mpo: MpoTensor | None = None
    matrix: np.ndarray | None = field(default=None, repr=False)

    @property
    def draws(self) -> list[TtTensor]:
        """The ``k`` unnormalized tensor trains of a TT projection."""
        if self.tt_cores is None:
            raise AttributeError(f"{self.spec.variant.value} has no tensor-train draws")
        return [TtTensor(tuple(c[i] for c in self.tt_cores)) for i in range(self.spec.k)]


def _matrix_elements(spec: ProjectionSpec) -> int:
    return spec.k * spec.input_size


def _sample_tt_cores(spec: ProjectionSpec, seeds) -> list[np.ndarray]:
    """Cores for draws ``0..k-1`` of every projection seed in ``seeds``."""
    draw_seeds = rng.split_seeds(np.asarray(seeds, dtype=np.uint64)[..., None], np.arange(spec.k))
    shapes = rng.tt_core_shapes(spec.in_shape, spec.rank)
    return rng.sample_cores(spec.variant.distribution, shapes, draw_seeds)


def _sample_mpo_cores(spec: ProjectionSpec, seeds) -> list[np.ndarray]:
    shapes = rng.mpo_core_shapes(spec.in_shape, spec.out_shape, spec.rank)
    return rng.sample_cores(spec.variant.distribution, shapes, seeds)


def _sample_matrix(spec: ProjectionSpec, seeds) -> np.ndarray:
    seeds = np.asarray(seeds, dtype=np.uint64)
    n = _matrix_elements(spec)
    if spec.variant is Variant.DENSE_GAUSSIAN:
        values = rng.sample_values(CoreDistribution.GAUSSIAN, seeds, n)
    else:
        u = rng.words_to_uniform(rng.raw_words(seeds, n))
        s = spec.sparsity
        half = 1.0 / (2.0 * s)
        values = np.zeros_like(u)
        values[u < half] = sqrt(s)
        values[u >= 1.0 - half] = -sqrt(s)
    return values.reshape(seeds.shape + (spec.k, spec.input_size))


def sample_projection(
    spec: ProjectionSpec, element_cap: int | None = DEFAULT_ELEMENT_CAP
) -> SampledProjection:
    """Draw the random materials determined by ``spec``."""
    if not isinstance(spec, ProjectionSpec):
        raise InvalidSpec(f"expected a ProjectionSpec, got {type(spec).__name__}")
    if spec.variant.is_tt:
        cores = _sample_tt_cores(spec, spec.seed)
        return SampledProjection(spec, tt_cores=tuple(cores))
    if spec.variant.is_mpo:
        return SampledProjection(spec, mpo=MpoTensor(tuple(_sample_mpo_cores(spec, spec.seed))))
    check_element_cap(_matrix_elements(spec), element_cap, "projection matrix")
    matrix = _sample_matrix(spec, spec.seed)
    matrix.setflags(write=False)
    return SampledProjection(spec, matrix=matrix)


# --------------------------------------------------------------------------
# multiplication-free contraction for {-1, +1} cores

def _signed_sum(signs: np.ndarray, z: np.ndarray) -> np.ndarray:
    """``swapaxes(signs) @ z`` for ``signs`` in {-1, +1}, using only selects and adds.

    ``signs`` is ``(*b, m, r)`` and ``z`` is ``(*b, m, n)``; returns ``(*b, r, n)``.
    """
    positive = signs > 0
    negated = np.negative(z)
    r = signs.shape[-1]
    out = np.empty(np.broadcast_shapes(signs.shape[:-2], z.shape[:-2]) + (r, z.shape[-1]))
    for j in range(r):
        selected = np.where(positive[..., :, j, None], z, negated)
        out[..., j, :] = selected.sum(axis=-2)
    return out


def _signed_tt_inner(cores: Sequence[np.ndarray], x: TtTensor) -> np.ndarray:
    batch = cores[0].shape[:-3]
    state = np.ones(batch + (1, 1))
    for g, h in zip(cores, x.cores):
        r, d, r2 = g.shape[-3:]
        s, _, s2 = h.shape
        z = (state @ h.reshape(s, d * s2)).reshape(batch + (r * d, s2))
        state = _signed_sum(g.reshape(batch + (r * d, r2)), z)
    return state[..., 0, 0]


def _signed_tt_dense_inner(cores: Sequence[np.ndarray], x: DenseTensor) -> np.ndarray:
    batch = cores[0].shape[:-3]
    state = x.values.reshape(1, -1)
    for g in cores:
        r, d, r2 = g.shape[-3:]
        rest = state.shape[-1] // d
        z = state.reshape(state.shape[:-2] + (r * d, rest))
        state = _signed_sum(g.reshape(batch + (r * d, r2)), z)
    return state[..., 0, 0]


def _tt_op_counts(spec: ProjectionSpec, x: Tensor, signs: bool) -> OpCounts:
    ranks = [1] + [spec.rank] * (spec.order - 1) + [1]
    core_mul = core_add = data_mul = data_add = 0
    if isinstance(x, TtTensor):
        xr = x.ranks
        for n, d in enumerate(spec.in_shape):
            r, r2, s, s2 = ranks[n], ranks[n + 1], xr[n], xr[n + 1]
            data_mul += r * d * s2 * s
            data_add += r * d * s2 * (s - 1)
            core_mul += r2 * s2 * r * d
            core_add += r2 * s2 * (r * d - 1)
    else:
        rest = x.size
        for n, d in enumerate(spec.in_shape):
            r, r2 = ranks[n], ranks[n + 1]
            rest //= d
            core_mul += r2 * rest * r * d
            core_add += r2 * rest * (r * d - 1)
    k = spec.k
    return OpCounts(
        core_mul=0 if signs else k * core_mul,
        core_add=k * core_add,
        data_mul=k * data_mul,
        data_add=k * data_add,
        scale_mul=k,
    )


def _mpo_op_counts(spec: ProjectionSpec, x: Tensor) -> OpCounts:
    ranks = [1] + [spec.rank] * (spec.order - 1) + [1]
    core_mul = data_mul = 0
    if isinstance(x, TtTensor):
        xr = x.ranks
        n_out = 1
        for n in reversed(range(spec.order)):
            a2, d, kn, a = ranks[n], spec.in_shape[n], spec.out_shape[n], ranks[n + 1]
            c2, c = xr[n], xr[n + 1]
            core_mul += a2 * d * kn * a * c * n_out
            data_mul += a2 * kn * n_out * c2 * d * c
            n_out *= kn
    else:
        rest, n_out = spec.input_size, 1
        for n in range(spec.order):
            a, d, kn, b = ranks[n], spec.in_shape[n], spec.out_shape[n], ranks[n + 1]
            rest //= d
            core_mul += n_out * kn * b * rest * a * d
            n_out *= kn
    # every product feeds one sum; additions equal products minus the outputs
    return OpCounts(
        core_mul=core_mul,
        core_add=max(core_mul - spec.k, 0),
        data_mul=data_mul,
        data_add=data_mul,
        scale_mul=spec.k,
    )


def _check_input(spec: ProjectionSpec, x: Tensor) -> None:
    if not isinstance(x, (TtTensor, DenseTensor)):
        raise TypeError(f"expected TtTensor or DenseTensor, got {type(x).__name__}")
    if tuple(x.shape) != spec.in_shape:
        raise ShapeMismatch(f"input shape {tuple(x.shape)} does not match {spec.in_shape}")


def _chunks(n: int, per_item: int):
    step = max(1, CHUNK_FLOATS // max(per_item, 1))
    for start in range(0, n, step):
        yield slice(start, min(n, start + step))


def _tt_raw(cores: Sequence[np.ndarray], x: Tensor, signs: bool) -> np.ndarray:
    """Unscaled inner products for a stack of TT draws, chunked over axis 0."""
    n = cores[0].shape[0]
    if isinstance(x, TtTensor):
        per_item = max(g.shape[-3] * g.shape[-2] * h.shape[2] for g, h in zip(cores, x.cores))
        kernel = _signed_tt_inner if signs else batch_tt_inner
    else:
        per_item = cores[0].shape[-1] * x.size // cores[0].shape[-2] + x.size
        kernel = _signed_tt_dense_inner if signs else batch_tt_dense_inner
    per_item *= prod(cores[0].shape[1:-3])
    out = np.empty(cores[0].shape[:-3])
    for sl in _chunks(n, per_item):
        out[sl] = kernel([c[sl] for c in cores], x)
    return out


def _resolve_method(variant: Variant, method: str) -> bool:
    if method not in ("auto", "generic", "signs"):
        raise ValueError(f"unknown method {method!r}")
    if method == "signs" and variant is not Variant.TT_RADEMACHER:
        raise ValueError("the sign path needs Rademacher tensor-train cores")
    return method == "signs" or (method == "auto" and variant is Variant.TT_RADEMACHER)


def apply_counted(p: SampledProjection, x: Tensor, method: str = "auto") -> ApplyResult:
    """Evaluate the projection on ``x`` and report the operations it took.

    ``method`` selects the contraction for TT variants: ``"signs"`` is the
    multiplication-free path (TtRademacher only), ``"generic"`` multiplies
    core entries, and ``"auto"`` picks the sign path whenever it applies.
    """
    spec = p.spec
    _check_input(spec, x)
    variant = spec.variant
    if variant.is_tt:
        signs = _resolve_method(variant, method)
        raw = _tt_raw(p.tt_cores, x, signs)
        counts = _tt_op_counts(spec, x, signs)
    elif variant.is_mpo:
        _resolve_method(variant, method)
        if isinstance(x, TtTensor):
            raw = batch_mpo_apply_tt(p.mpo.cores, x)
        else:
            raw = batch_mpo_apply_dense(p.mpo.cores, x)
        counts = _mpo_op_counts(spec, x)
    else:
        _resolve_method(variant, method)
        dense = x if isinstance(x, DenseTensor) else _densify(x)
        raw = p.matrix @ dense.values
        nnz = int(np.count_nonzero(p.matrix))
        counts = OpCounts(core_mul=nnz, core_add=max(nnz - spec.k, 0), scale_mul=spec.k)
    return ApplyResult(raw * spec.scale, counts)


def apply(p: SampledProjection, x: Tensor, method: str = "auto") -> np.ndarray:
    """The embedding ``f(x)`` as a length-``k`` vector."""
    return apply_counted(p, x, method).values


def _densify(x: TtTensor, element_cap: int | None = DEFAULT_ELEMENT_CAP) -> DenseTensor:
    return tt_to_dense(x, element_cap)


def apply_batch(
    spec: ProjectionSpec,
    x: Tensor,
    seeds,
    element_cap: int | None = DEFAULT_ELEMENT_CAP,
) -> np.ndarray:
    """Embeddings of ``x`` under many independent projections at once.

    Row ``b`` equals ``apply(sample_projection(spec.with_seed(seeds[b])), x)``
    up to floating-point summation order. Used by the Monte Carlo estimators.
    """
    _check_input(spec, x)
    seeds = np.asarray(seeds, dtype=np.uint64).reshape(-1)
    out = np.empty((seeds.size, spec.k))
    variant = spec.variant
    if variant.is_tt:
        n_entries = sum(prod(s) for s in rng.tt_core_shapes(spec.in_shape, spec.rank))
        for sl in _chunks(seeds.size, spec.k * n_entries * 2):
            cores = _sample_tt_cores(spec, seeds[sl])
            out[sl] = _tt_raw(cores, x, variant is Variant.TT_RADEMACHER)
    elif variant.is_mpo:
        shapes = rng.mpo_core_shapes(spec.in_shape, spec.out_shape, spec.rank)
        for sl in _chunks(seeds.size, sum(prod(s) for s in shapes) * 4):
            cores = _sample_mpo_cores(spec, seeds[sl])
            if isinstance(x, TtTensor):
                out[sl] = batch_mpo_apply_tt(cores, x)
            else:
                out[sl] = batch_mpo_apply_dense(cores, x)
    else:
        check_element_cap(_matrix_elements(spec), element_cap, "projection matrix")
        dense = x if isinstance(x, DenseTensor) else _densify(x, element_cap)
        for sl in _chunks(seeds.size, _matrix_elements(spec) * 2):
            out[sl] = _sample_matrix(spec, seeds[sl]) @ dense.values
    return out * spec.scale


def distortion(fx, x_norm_sq: float) -> float:
    """``| ||fx||^2 / x_norm_sq - 1 |``."""
    if not x_norm_sq > 0:
        raise ZeroNormInput(f"input squared norm must be positive, got {x_norm_sq}")
    fx = np.asarray(fx, dtype=np.float64)
    return abs(float(fx @ fx) / x_norm_sq - 1.0)
