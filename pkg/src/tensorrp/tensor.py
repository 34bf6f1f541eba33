"""Dense, tensor-train and matrix-product-operator tensors and their contractions.

Every contraction here comes in two flavours. The plain functions
(``tt_inner``, ``mpo_apply_tt``, ...) act on single objects. The ``batch_*``
kernels take raw core arrays carrying arbitrary leading batch axes, which is
how the projection module evaluates thousands of independent random draws
against one input without a Python loop.

Dense data is always row-major (last index fastest).
"""
from __future__ import annotations

from dataclasses import dataclass
from math import prod
from typing import Sequence

import numpy as np

from .errors import ContractionError, ElementCapExceeded, ShapeMismatch

DEFAULT_ELEMENT_CAP = 10**8

# tt_norm_sq clamps negatives down to this magnitude; anything larger is a bug
NEGATIVE_NORM_TOLERANCE = 1e-14


def _frozen(array) -> np.ndarray:
    out = np.array(array, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out


def check_element_cap(n_elements: int, cap: int | None, what: str = "tensor") -> None:
    if cap is not None and n_elements > cap:
        raise ElementCapExceeded(n_elements, cap, what)


@dataclass(frozen=True, eq=False)
class DenseTensor:
    """A full tensor stored as a flat row-major buffer plus its shape."""

    shape: tuple[int, ...]
    values: np.ndarray

    def __post_init__(self):
        shape = tuple(int(d) for d in self.shape)
        if not shape or any(d < 1 for d in shape):
            raise ValueError(f"shape must be non-empty with positive dims, got {shape}")
        values = _frozen(self.values).reshape(-1)
        if values.size != prod(shape):
            raise ValueError(
                f"{values.size} values do not fill a tensor of shape {shape}"
            )
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_array(cls, array) -> DenseTensor:
        array = np.asarray(array, dtype=np.float64)
        if array.ndim == 0:
            array = array.reshape(1)
        return cls(array.shape, array.reshape(-1))

    @property
    def array(self) -> np.ndarray:
        """Read-only N-d view of the values."""
        return self.values.reshape(self.shape)

    @property
    def order(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        return self.values.size

    def norm_sq(self) -> float:
        return float(self.values @ self.values)


@dataclass(frozen=True, eq=False)
class TtTensor:
    """Tensor train: core ``n`` has shape ``(R_{n-1}, d_n, R_n)`` with ``R_0 = R_N = 1``."""

    cores: tuple[np.ndarray, ...]

    def __post_init__(self):
        cores = tuple(_frozen(c) for c in self.cores)
        if not cores:
            raise ValueError("a tensor train needs at least one core")
        for n, core in enumerate(cores):
            if core.ndim != 3:
                raise ValueError(f"core {n} has {core.ndim} dims, expected 3")
            if core.shape[1] < 1:
                raise ValueError(f"core {n} has empty mode dimension")
        if cores[0].shape[0] != 1 or cores[-1].shape[2] != 1:
            raise ValueError("boundary ranks must be 1")
        for n in range(len(cores) - 1):
            if cores[n].shape[2] != cores[n + 1].shape[0]:
                raise ValueError(
                    f"rank mismatch between cores {n} and {n + 1}: "
                    f"{cores[n].shape[2]} != {cores[n + 1].shape[0]}"
                )
        object.__setattr__(self, "cores", cores)

    @property
    def order(self) -> int:
        return len(self.cores)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(c.shape[1] for c in self.cores)

    @property
    def ranks(self) -> tuple[int, ...]:
        return (1,) + tuple(c.shape[2] for c in self.cores)

    @classmethod
    def zeros(cls, shape: Sequence[int], rank: int = 1) -> TtTensor:
        ranks = [1] + [rank] * (len(shape) - 1) + [1]
        return cls(tuple(np.zeros((ranks[n], d, ranks[n + 1])) for n, d in enumerate(shape)))

    @classmethod
    def ones(cls, shape: Sequence[int], rank: int = 1) -> TtTensor:
        ranks = [1] + [rank] * (len(shape) - 1) + [1]
        return cls(tuple(np.ones((ranks[n], d, ranks[n + 1])) for n, d in enumerate(shape)))

    def scaled(self, factor: float) -> TtTensor:
        """Return ``factor * self`` (the factor is folded into the first core)."""
        cores = list(self.cores)
        cores[0] = cores[0] * factor
        return TtTensor(tuple(cores))


@dataclass(frozen=True, eq=False)
class MpoTensor:
    """Matrix product operator with cores of shape ``(R_{n-1}, d_n, k_n, R_n)``.

    ``d_n`` is the input leg and ``k_n`` the output leg; ``k_n == 1`` encodes a
    core without an effective output.
    """

    cores: tuple[np.ndarray, ...]

    def __post_init__(self):
        cores = tuple(_frozen(c) for c in self.cores)
        if not cores:
            raise ValueError("an MPO needs at least one core")
        for n, core in enumerate(cores):
            if core.ndim != 4:
                raise ValueError(f"core {n} has {core.ndim} dims, expected 4")
            if core.shape[1] < 1 or core.shape[2] < 1:
                raise ValueError(f"core {n} has an empty leg")
        if cores[0].shape[0] != 1 or cores[-1].shape[3] != 1:
            raise ValueError("boundary ranks must be 1")
        for n in range(len(cores) - 1):
            if cores[n].shape[3] != cores[n + 1].shape[0]:
                raise ValueError(f"rank mismatch between cores {n} and {n + 1}")
        object.__setattr__(self, "cores", cores)

    @property
    def order(self) -> int:
        return len(self.cores)

    @property
    def in_shape(self) -> tuple[int, ...]:
        return tuple(c.shape[1] for c in self.cores)

    @property
    def out_shape(self) -> tuple[int, ...]:
        return tuple(c.shape[2] for c in self.cores)

    @property
    def ranks(self) -> tuple[int, ...]:
        return (1,) + tuple(c.shape[3] for c in self.cores)


def _check_same_shape(a: tuple[int, ...], b: tuple[int, ...]) -> None:
    if tuple(a) != tuple(b):
        raise ShapeMismatch(f"shape {tuple(a)} does not match {tuple(b)}")


# --------------------------------------------------------------------------
# densification

def tt_to_dense(t: TtTensor, element_cap: int | None = DEFAULT_ELEMENT_CAP) -> DenseTensor:
    """Multiply out all cores of ``t`` into a full tensor."""
    check_element_cap(prod(t.shape), element_cap)
    state = np.ones((1, 1))
    for core in t.cores:
        r, d, r2 = core.shape
        state = (state @ core.reshape(r, d * r2)).reshape(-1, r2)
    return DenseTensor(t.shape, state.reshape(-1))


def mpo_to_dense(m: MpoTensor, element_cap: int | None = DEFAULT_ELEMENT_CAP) -> DenseTensor:
    """Full operator tensor, with legs interleaved as ``(d_1, k_1, ..., d_N, k_N)``."""
    shape = tuple(x for pair in zip(m.in_shape, m.out_shape) for x in pair)
    check_element_cap(prod(shape), element_cap)
    state = np.ones((1, 1))
    for core in m.cores:
        r, d, k, r2 = core.shape
        state = (state @ core.reshape(r, d * k * r2)).reshape(-1, r2)
    return DenseTensor(shape, state.reshape(-1))


# --------------------------------------------------------------------------
# batched kernels; ``cores[n]`` carries leading batch axes

def _batch_shape(cores: Sequence[np.ndarray], core_ndim: int) -> tuple[int, ...]:
    return cores[0].shape[: cores[0].ndim - core_ndim]


def batch_tt_inner(cores: Sequence[np.ndarray], x: TtTensor) -> np.ndarray:
    """Inner products of a batch of tensor trains with one tensor train ``x``.

    ``cores[n]`` has shape ``(*batch, R_{n-1}, d_n, R_n)``. The sweep runs left
    to right over a ``(R_a, R_x)`` transfer matrix, so the cost is linear in
    the order and nothing is densified.
    """
    if len(cores) != x.order:
        raise ShapeMismatch(f"order {len(cores)} does not match {x.order}")
    batch = _batch_shape(cores, 3)
    _check_same_shape(tuple(c.shape[-2] for c in cores), x.shape)
    state = np.ones(batch + (1, 1))
    for g, h in zip(cores, x.cores):
        r, d, r2 = g.shape[-3:]
        s, _, s2 = h.shape
        z = (state @ h.reshape(s, d * s2)).reshape(batch + (r * d, s2))
        state = np.swapaxes(g.reshape(batch + (r * d, r2)), -1, -2) @ z
    return state[..., 0, 0]


def batch_tt_dense_inner(cores: Sequence[np.ndarray], x: DenseTensor) -> np.ndarray:
    """Inner products of a batch of tensor trains with a dense tensor."""
    if len(cores) != x.order:
        raise ShapeMismatch(f"order {len(cores)} does not match {x.order}")
    batch = _batch_shape(cores, 3)
    _check_same_shape(tuple(c.shape[-2] for c in cores), x.shape)
    # first core broadcasts against the unbatched data, avoiding a batch copy of x
    g = cores[0]
    d = g.shape[-2]
    state = np.swapaxes(g.reshape(batch + (d, g.shape[-1])), -1, -2) @ x.values.reshape(d, -1)
    for g in cores[1:]:
        r, d, r2 = g.shape[-3:]
        rest = state.shape[-1] // d
        z = state.reshape(batch + (r * d, rest))
        state = np.swapaxes(g.reshape(batch + (r * d, r2)), -1, -2) @ z
    return state[..., 0, 0]


def batch_mpo_apply_tt(cores: Sequence[np.ndarray], x: TtTensor) -> np.ndarray:
    """Apply a batch of MPOs to a tensor train; returns ``(*batch, k)``.

    The output legs are vectorized row-major over ``(k_1, ..., k_N)``. The
    sweep runs right to left so the open output legs only grow once the rank
    legs to their right have been contracted away; with the default
    ``(k, 1, ..., 1)`` layout the large leg appears at the very last step.
    """
    if len(cores) != x.order:
        raise ShapeMismatch(f"order {len(cores)} does not match {x.order}")
    batch = _batch_shape(cores, 4)
    _check_same_shape(tuple(c.shape[-3] for c in cores), x.shape)
    state = np.ones(batch + (1, 1, 1))  # (*batch, a, c, K)
    for g, h in zip(reversed(cores), reversed(x.cores)):
        a2, d, kn, a = g.shape[-4:]
        c2, _, c = h.shape
        n_out = state.shape[-1]
        u = g.reshape(batch + (a2 * d * kn, a)) @ state.reshape(batch + (a, c * n_out))
        u = u.reshape(batch + (a2, d, kn, c, n_out))
        state = np.einsum("...aikcK,eic->...aekK", u, h, optimize=True)
        state = state.reshape(batch + (a2, c2, kn * n_out))
    return state[..., 0, 0, :]


def batch_mpo_apply_dense(cores: Sequence[np.ndarray], x: DenseTensor) -> np.ndarray:
    """Apply a batch of MPOs to a dense tensor; returns ``(*batch, k)``."""
    if len(cores) != x.order:
        raise ShapeMismatch(f"order {len(cores)} does not match {x.order}")
    batch = _batch_shape(cores, 4)
    _check_same_shape(tuple(c.shape[-3] for c in cores), x.shape)
    state = x.values.reshape(1, -1)  # (K, a * i * rest), broadcast over batch
    for g in cores:
        a, d, kn, b = g.shape[-4:]
        rest = state.shape[-1] // (a * d)
        state = state.reshape(state.shape[:-1] + (a * d, rest))
        gt = np.swapaxes(g.reshape(batch + (a * d, kn * b)), -1, -2)[..., None, :, :]
        state = gt @ state  # (*batch, K, kn * b, rest)
        n_out = state.shape[-3]
        state = state.reshape(state.shape[:-3] + (n_out * kn, b * rest))
    return state[..., 0].reshape(batch + (-1,))


# --------------------------------------------------------------------------
# single-object operations

def _canonical_pair(a: TtTensor, b: TtTensor) -> tuple[TtTensor, TtTensor]:
    # fixes operand order so tt_inner(a, b) and tt_inner(b, a) run the same sweep
    def key(t: TtTensor):
        return t.ranks, b"".join(c.tobytes() for c in t.cores)

    return (b, a) if key(b) < key(a) else (a, b)


def tt_inner(a: TtTensor, b: TtTensor) -> float:
    """Frobenius inner product of two tensor trains of the same shape."""
    _check_same_shape(a.shape, b.shape)
    a, b = _canonical_pair(a, b)
    return float(batch_tt_inner(a.cores, b))


def tt_norm_sq(a: TtTensor) -> float:
    """Squared Frobenius norm, clamped at zero for rounding-level negatives."""
    value = tt_inner(a, a)
    if value < 0.0:
        if value < -NEGATIVE_NORM_TOLERANCE:
            raise ContractionError(f"squared norm came out as {value!r}")
        return 0.0
    return value


def tt_dense_inner(a: TtTensor, x: DenseTensor) -> float:
    _check_same_shape(a.shape, x.shape)
    return float(batch_tt_dense_inner(a.cores, x))


def mpo_apply_tt(m: MpoTensor, x: TtTensor) -> TtTensor:
    """Contract the input legs of ``m`` with ``x``.

    The result is a tensor train over the output legs ``(k_1, ..., k_N)``
    whose rank at each cut is the product of the operand ranks.
    """
    _check_same_shape(m.in_shape, x.shape)
    cores = []
    for g, h in zip(m.cores, x.cores):
        a, _, kn, b = g.shape
        c, _, e = h.shape
        core = np.einsum("aikb,cie->ackbe", g, h, optimize=True)
        cores.append(core.reshape(a * c, kn, b * e))
    return TtTensor(tuple(cores))


def mpo_apply_dense(m: MpoTensor, x: DenseTensor) -> DenseTensor:
    _check_same_shape(m.in_shape, x.shape)
    return DenseTensor(m.out_shape, batch_mpo_apply_dense(m.cores, x))
