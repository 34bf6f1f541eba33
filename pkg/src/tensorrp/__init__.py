"""Tensorized random projections in tensor-train and MPO formats."""
from .errors import (
    ContractionError,
    ElementCapExceeded,
    InvalidSpec,
    ShapeMismatch,
    TensorRPError,
    TooLargeToEnumerate,
    ZeroNormInput,
)
from .projection import (
    ApplyResult,
    OpCounts,
    ProjectionSpec,
    SampledProjection,
    Variant,
    apply,
    apply_batch,
    apply_counted,
    distortion,
    sample_projection,
)
from .rng import CoreDistribution, Stream, sample_mpo, sample_tt, split_seed
from .tensor import (
    DEFAULT_ELEMENT_CAP,
    DenseTensor,
    MpoTensor,
    TtTensor,
    mpo_apply_dense,
    mpo_apply_tt,
    mpo_to_dense,
    tt_dense_inner,
    tt_inner,
    tt_norm_sq,
    tt_to_dense,
)

__version__ = "0.1.0"
