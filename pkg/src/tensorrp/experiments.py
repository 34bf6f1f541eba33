"""Experiment runners producing flat CSV records.

All runners share one record schema::

    experiment,variant,N,d,R,k,trial,value_kind,value

Per-trial rows carry ``trial >= 0``; aggregates use ``trial = -1``. Matrix
variants (DenseGaussian, VerySparse) have no rank and are recorded with
``R = 0``.

Seeding: the synthetic input is drawn from ``split_seed(seed, 0)``. The
projection of trial ``t`` in the cell ``(variant, R, k)`` uses
``split_seed(cell_root, t)`` where ``cell_root`` depends on the variant and
rank but not on ``k``, so curves over ``k`` share random numbers.
"""
from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import analysis, rng
from .errors import InvalidSpec
from .projection import (
    ProjectionSpec,
    Variant,
    apply,
    apply_counted,
    distortion,
    sample_projection,
)
from .rng import CoreDistribution
from .tensor import DEFAULT_ELEMENT_CAP, TtTensor, check_element_cap, tt_norm_sq, tt_to_dense

REGIMES = {"small": (15, 3), "medium": (3, 12), "high": (3, 25)}

DEFAULT_RANKS = (1, 2, 5, 10)
DEFAULT_KS = (2, 8, 32, 128, 512, 2048)
TT_VARIANTS = (Variant.TT_GAUSSIAN, Variant.TT_RADEMACHER)
MPO_COMPARE_VARIANTS = (Variant.TT_GAUSSIAN, Variant.MPO_GAUSSIAN, Variant.MPO_RADEMACHER_RANK1)

VALUE_KINDS = frozenset(
    {
        "distortion",
        "norm_sq",
        "variance",
        "mean",
        "failure_rate",
        "wall_ns",
        "mul_count",
        "add_count",
        # emitted by run_checks
        "rel_error",
        "bound_ratio",
        "z_score",
    }
)
NONNEGATIVE_KINDS = frozenset(
    {"distortion", "variance", "wall_ns", "mul_count", "add_count", "rel_error", "bound_ratio", "z_score"}
)

CSV_HEADER = ("experiment", "variant", "N", "d", "R", "k", "trial", "value_kind", "value")

# upper tolerance for every (experiment, value_kind) emitted by run_checks
CHECK_TOLERANCES = {
    ("fourth_moment", "rel_error"): 1e-12,
    ("fourth_moment", "bound_ratio"): 1.0,
    ("frobenius_moment", "rel_error"): 1e-12,
    ("frobenius_moment", "bound_ratio"): 1.0,
    ("mpo_variance", "rel_error"): 0.05,
    ("tt_isometry", "z_score"): 4.0,
    ("tt_variance", "bound_ratio"): 1.0,
    ("jlt_loose", "failure_rate"): 0.0,
    ("jlt_bound", "failure_rate"): 0.1,
}


@dataclass(frozen=True)
class ExperimentConfig:
    regime: str = "small"
    dim: int | None = None
    order: int | None = None
    input_rank: int = 10
    variants: tuple[Variant, ...] = TT_VARIANTS
    rank_grid: tuple[int, ...] = DEFAULT_RANKS
    k_grid: tuple[int, ...] = DEFAULT_KS
    trials: int = 100
    seed: int = 0
    element_cap: int | None = DEFAULT_ELEMENT_CAP
    out_path: str | None = None

    def __post_init__(self):
        if self.regime == "custom":
            if self.dim is None or self.order is None:
                raise InvalidSpec("the custom regime needs both dim and order")
        elif self.regime in REGIMES:
            d, n = REGIMES[self.regime]
            object.__setattr__(self, "dim", d if self.dim is None else self.dim)
            object.__setattr__(self, "order", n if self.order is None else self.order)
        else:
            raise InvalidSpec(f"unknown regime {self.regime!r}")
        if self.dim < 1 or self.order < 1:
            raise InvalidSpec("regime dimensions must be positive")
        object.__setattr__(
            self, "variants", tuple(Variant.parse(v) if isinstance(v, str) else v for v in self.variants)
        )
        if not self.variants:
            raise InvalidSpec("at least one variant is required")
        if self.trials < 1:
            raise InvalidSpec("trials must be >= 1")
        if self.input_rank < 1:
            raise InvalidSpec("input_rank must be >= 1")
        if not self.rank_grid or not self.k_grid:
            raise InvalidSpec("rank and k grids must be non-empty")
        if any(v < 1 for v in self.rank_grid) or any(v < 1 for v in self.k_grid):
            raise InvalidSpec("grid values must be >= 1")
        try:
            rng.as_seed(self.seed)
        except ValueError as exc:
            raise InvalidSpec(str(exc)) from None

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.dim,) * self.order


@dataclass(frozen=True)
class ResultRecord:
    experiment: str
    variant: str
    N: int
    d: int
    R: int
    k: int
    trial: int
    value_kind: str
    value: float

    def __post_init__(self):
        if self.value_kind not in VALUE_KINDS:
            raise ValueError(f"unknown value kind {self.value_kind!r}")
        if not math.isfinite(self.value):
            raise ValueError(f"non-finite value in {self}")
        if self.value_kind in NONNEGATIVE_KINDS and self.value < 0:
            raise ValueError(f"negative {self.value_kind} in {self}")

    def sort_key(self):
        return (self.experiment, self.variant, self.N, self.d, self.R, self.k, self.trial, self.value_kind)


# --------------------------------------------------------------------------
# CSV

def _format_value(value: float) -> str:
    return format(value, ".17g")


def write_csv(records: Iterable[ResultRecord], stream) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in sorted(records, key=ResultRecord.sort_key):
        writer.writerow(
            (r.experiment, r.variant, r.N, r.d, r.R, r.k, r.trial, r.value_kind, _format_value(r.value))
        )


def records_to_csv(records: Iterable[ResultRecord]) -> str:
    buffer = io.StringIO()
    write_csv(records, buffer)
    return buffer.getvalue()


def read_csv(stream) -> list[ResultRecord]:
    reader = csv.reader(stream)
    header = next(reader)
    if tuple(header) != CSV_HEADER:
        raise ValueError(f"unexpected CSV header {header}")
    return [
        ResultRecord(exp, var, int(n), int(d), int(r), int(k), int(t), kind, float(v))
        for exp, var, n, d, r, k, t, kind, v in reader
    ]


# --------------------------------------------------------------------------
# runners

def synthetic_input(cfg: ExperimentConfig) -> TtTensor:
    """Input tensor with i.i.d. Gaussian cores at rank ``cfg.input_rank``."""
    return rng.sample_tt(CoreDistribution.GAUSSIAN, cfg.shape, cfg.input_rank, rng.split_seed(cfg.seed, 0))


def cell_root(seed: int, variant: Variant, rank: int) -> int:
    return rng.split_seed(rng.split_seed(rng.split_seed(seed, 1), variant.code), rank)


def _check_matrix_caps(cfg: ExperimentConfig) -> None:
    for variant in cfg.variants:
        if variant.is_matrix:
            size = math.prod(cfg.shape)
            check_element_cap(size, cfg.element_cap, f"{variant.value} input")
            check_element_cap(max(cfg.k_grid) * size, cfg.element_cap, f"{variant.value} matrix")


def _cells(cfg: ExperimentConfig):
    for variant in cfg.variants:
        ranks = (0,) if variant.is_matrix else cfg.rank_grid
        for rank in ranks:
            for k in cfg.k_grid:
                spec = ProjectionSpec(variant, k, cfg.shape, rank=max(rank, 1))
                yield variant, rank, k, spec


def _run_distortion_cells(cfg: ExperimentConfig, experiment: str) -> list[ResultRecord]:
    _check_matrix_caps(cfg)
    for _ in _cells(cfg):
        pass  # validate every spec before spending time on trials
    x = synthetic_input(cfg)
    x_norm_sq = tt_norm_sq(x)
    x_dense = None
    if any(v.is_matrix for v in cfg.variants):
        x_dense = tt_to_dense(x, cfg.element_cap)
    records = []
    for variant, rank, k, spec in _cells(cfg):
        root = cell_root(cfg.seed, variant, rank)
        data = x_dense if variant.is_matrix else x
        values = []
        for t in range(cfg.trials):
            p = sample_projection(spec.with_seed(rng.split_seed(root, t)), cfg.element_cap)
            value = distortion(apply(p, data), x_norm_sq)
            values.append(value)
            records.append(
                ResultRecord(experiment, variant.value, cfg.order, cfg.dim, rank, k, t, "distortion", value)
            )
        records.append(
            ResultRecord(experiment, variant.value, cfg.order, cfg.dim, rank, k, -1, "mean", float(np.mean(values)))
        )
    return sorted(records, key=ResultRecord.sort_key)


def run_distortion(cfg: ExperimentConfig) -> list[ResultRecord]:
    """Distortion of every variant over the rank and k grids."""
    return _run_distortion_cells(cfg, "distortion")


def run_mpo_comparison(cfg: ExperimentConfig) -> list[ResultRecord]:
    """Distortion of MPO maps next to the TT Gaussian map."""
    return _run_distortion_cells(cfg, "mpo-compare")


def run_timing(cfg: ExperimentConfig) -> list[ResultRecord]:
    """Median apply time and core-step operation counts for the TT maps.

    ``mul_count``/``add_count`` count the step that combines core entries
    with data, which for TtRademacher is the multiplication-free sign step.
    """
    bad = [v.value for v in cfg.variants if not v.is_tt]
    if bad:
        raise InvalidSpec(f"timing supports TtGaussian and TtRademacher only, got {bad}")
    x = synthetic_input(cfg)
    records = []
    for variant, rank, k, spec in _cells(cfg):
        root = cell_root(cfg.seed, variant, rank)
        projections = (sample_projection(spec.with_seed(rng.split_seed(root, t))) for t in range(cfg.trials))
        times = []
        counts = None
        for t, p in enumerate(projections):
            if t == 0:
                counts = apply_counted(p, x).op_counts  # doubles as warm-up
            start = time.perf_counter_ns()
            apply(p, x)
            times.append(time.perf_counter_ns() - start)
        head = ("timing", variant.value, cfg.order, cfg.dim, rank, k, -1)
        records.append(ResultRecord(*head, "wall_ns", float(max(np.median(times), 1))))
        records.append(ResultRecord(*head, "mul_count", float(counts.core_mul)))
        records.append(ResultRecord(*head, "add_count", float(counts.core_add)))
    return sorted(records, key=ResultRecord.sort_key)


def _rel_error(value: float, reference: float) -> float:
    if reference == 0:
        return abs(value)
    return abs(value - reference) / abs(reference)


def run_checks(cfg: ExperimentConfig) -> list[ResultRecord]:
    """Numeric checks of the moment identities and bounds.

    Tolerances live in ``CHECK_TOLERANCES``. Monte Carlo checks use
    ``cfg.trials`` trials, except the MPO variance check which uses ten times
    as many and the JLT checks which use at most 200.
    """
    seed = cfg.seed
    gen = np.random.default_rng(rng.split_seed(seed, 2))
    records = []

    for i in range(20):
        m = int(gen.integers(1, 4))
        n = int(gen.integers(1, 12 // m + 1))
        b = gen.standard_normal((m, n))
        enum = analysis.enumerate_rademacher_expectation(
            (m, n), lambda a: np.einsum("sij,ij->s", a, b) ** 4, vectorized=True
        )
        exact = analysis.rademacher_fourth_moment_exact(b)
        fro4 = float(np.sum(b * b)) ** 2
        head = ("fourth_moment", "Rademacher", m, n, 0, 0, i)
        records.append(ResultRecord(*head, "rel_error", _rel_error(enum, exact)))
        records.append(ResultRecord(*head, "bound_ratio", enum / (3 * fro4)))

    for i in range(20):
        p = int(gen.integers(1, 4))
        d = int(gen.integers(1, 4))
        rank = int(gen.integers(1, min(4, 12 // d) + 1))
        b = gen.standard_normal((p, d))
        enum = analysis.enumerate_rademacher_expectation(
            (d, rank), lambda a: np.sum((b @ a) ** 2, axis=(1, 2)) ** 2, vectorized=True
        )
        exact = analysis.lemma2_exact(b, rank)
        bound = analysis.lemma2_bound(float(np.sum(b * b)) ** 2, rank)
        head = ("frobenius_moment", "Rademacher", p, d, rank, 0, i)
        records.append(ResultRecord(*head, "rel_error", _rel_error(enum, exact)))
        records.append(ResultRecord(*head, "bound_ratio", enum / bound if bound else 0.0))

    x_mat = analysis.gaussian_dense_input((3, 3), rng.split_seed(seed, 3))
    for k in (1, 2, 4):
        for rank in (1, 2, 4):
            spec = ProjectionSpec(Variant.MPO_GAUSSIAN, k, (3, 3), rank=rank)
            stats = analysis.monte_carlo_norm_stats(spec, x_mat, 10 * cfg.trials, cell_root(seed, spec.variant, rank))
            closed = analysis.mpo_variance_closed_form(x_mat.array, k, rank)
            head = ("mpo_variance", spec.variant.value, 2, 3, rank, k, -1)
            records.append(ResultRecord(*head, "variance", stats.variance))
            records.append(ResultRecord(*head, "rel_error", _rel_error(stats.variance, closed)))

    for order in (2, 4):
        x = analysis.gaussian_dense_input((3,) * order, rng.split_seed(seed, 4 + order))
        norm_sq = x.norm_sq()
        for variant in TT_VARIANTS:
            for rank in (1, 3):
                for k in (4, 16):
                    spec = ProjectionSpec(variant, k, x.shape, rank=rank)
                    trial_seed = rng.split_seed(cell_root(seed, variant, rank), k)
                    stats = analysis.monte_carlo_norm_stats(spec, x, max(cfg.trials, 3), trial_seed)
                    bound = analysis.tt_variance_bound(order, rank, k, norm_sq**2)
                    slack = 1 + 4 * stats.stderr_variance / stats.variance
                    z = abs(stats.mean - norm_sq) / stats.stderr_mean
                    key = (variant.value, order, 3, rank, k, -1)
                    records.append(ResultRecord("tt_isometry", *key, "z_score", z))
                    records.append(
                        ResultRecord("tt_variance", *key, "bound_ratio", stats.variance / (bound * slack))
                    )

    jlt_trials = min(cfg.trials, 200)
    inputs = [analysis.gaussian_dense_input((4, 4), rng.split_seed(seed, 10 + i)) for i in range(5)]
    loose = analysis.JltCheckConfig(5, 1e6, 0.1, ProjectionSpec(Variant.TT_GAUSSIAN, 4, (4, 4), rank=2), jlt_trials)
    rate = analysis.jlt_embedding_check(loose, inputs, rng.split_seed(seed, 20))
    records.append(ResultRecord("jlt_loose", "TtGaussian", 2, 4, 2, 4, -1, "failure_rate", rate))
    k_needed = math.ceil(analysis.jlt_k_lower_bound(2, 10, 0.5, 5, 0.1))
    tight = analysis.JltCheckConfig(
        5, 0.5, 0.1, ProjectionSpec(Variant.TT_GAUSSIAN, k_needed, (4, 4), rank=10), jlt_trials
    )
    rate = analysis.jlt_embedding_check(tight, inputs, rng.split_seed(seed, 21))
    records.append(ResultRecord("jlt_bound", "TtGaussian", 2, 4, 10, k_needed, -1, "failure_rate", rate))
    return sorted(records, key=ResultRecord.sort_key)


def check_failures(records: Sequence[ResultRecord]) -> list[ResultRecord]:
    """Records from ``run_checks`` whose value exceeds its tolerance."""
    failed = []
    for r in records:
        tolerance = CHECK_TOLERANCES.get((r.experiment, r.value_kind))
        if tolerance is not None and r.value > tolerance:
            failed.append(r)
    return failed
