"""Experiment runners, CSV records and the command-line front end."""
import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tensorrp import cli, experiments
from tensorrp.errors import ElementCapExceeded, InvalidSpec
from tensorrp.experiments import ExperimentConfig, ResultRecord
from tensorrp.projection import Variant


def small(**overrides):
    base = dict(regime="custom", dim=3, order=3, input_rank=2, rank_grid=(1, 2), k_grid=(2, 4), trials=3, seed=5)
    base.update(overrides)
    return ExperimentConfig(**base)


# ---- configuration ----

def test_regime_presets():
    assert ExperimentConfig(regime="small").shape == (15,) * 3
    assert ExperimentConfig(regime="medium").shape == (3,) * 12
    assert ExperimentConfig(regime="high").shape == (3,) * 25


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(regime="huge"),
        dict(regime="custom", dim=3),
        dict(regime="custom", dim=0, order=2),
        dict(trials=0),
        dict(rank_grid=(0,)),
        dict(k_grid=()),
        dict(variants=()),
        dict(variants=("Bogus",)),
        dict(seed=-3),
    ],
)
def test_invalid_configs(kwargs):
    with pytest.raises(InvalidSpec):
        ExperimentConfig(**kwargs)


@pytest.mark.parametrize(
    "kind,value", [("distortion", -0.1), ("variance", -1.0), ("mul_count", -1.0), ("mean", math.nan), ("bogus", 1.0)]
)
def test_invalid_records(kind, value):
    with pytest.raises(ValueError):
        ResultRecord("distortion", "TtGaussian", 3, 3, 1, 2, 0, kind, value)


# ---- counting contracts ----

def test_distortion_single_cell_counts():
    cfg = ExperimentConfig(regime="small", variants=(Variant.TT_RADEMACHER,), rank_grid=(1,), k_grid=(4,), trials=2)
    records = experiments.run_distortion(cfg)
    assert [r.trial for r in records] == [-1, 0, 1]
    assert [r.value_kind for r in records] == ["mean", "distortion", "distortion"]
    assert records[0].value == pytest.approx(np.mean([records[1].value, records[2].value]), rel=1e-15)


def test_mpo_comparison_record_count():
    cfg = small(variants=experiments.MPO_COMPARE_VARIANTS, trials=4)
    records = experiments.run_mpo_comparison(cfg)
    assert len(records) == 3 * 2 * 2 * (4 + 1)
    assert {r.experiment for r in records} == {"mpo-compare"}


def test_matrix_variants_have_one_rank_cell():
    cfg = small(variants=(Variant.DENSE_GAUSSIAN, Variant.VERY_SPARSE))
    records = experiments.run_distortion(cfg)
    assert {r.R for r in records} == {0}
    assert len(records) == 2 * 2 * (3 + 1)


def test_high_regime_rejects_dense_variants():
    for variant in (Variant.DENSE_GAUSSIAN, Variant.VERY_SPARSE):
        cfg = ExperimentConfig(regime="high", variants=(variant,), k_grid=(2,), rank_grid=(1,), trials=1)
        with pytest.raises(ElementCapExceeded):
            experiments.run_distortion(cfg)


def test_timing_records():
    cfg = small(trials=3)
    records = experiments.run_timing(cfg)
    assert len(records) == 2 * 2 * 2 * 3
    for r in records:
        if r.value_kind == "wall_ns":
            assert r.value > 0
        if r.value_kind == "mul_count":
            assert (r.value == 0) == (r.variant == "TtRademacher")
    with pytest.raises(InvalidSpec):
        experiments.run_timing(small(variants=(Variant.MPO_GAUSSIAN,)))


def test_checks_pass_at_moderate_trials():
    records = experiments.run_checks(small(trials=400))
    kinds = {(r.experiment, r.value_kind) for r in records}
    assert kinds == set(experiments.CHECK_TOLERANCES) | {("mpo_variance", "variance")}
    # the MPO variance check needs far more trials; everything else must hold
    failed = [r for r in experiments.check_failures(records) if r.experiment != "mpo_variance"]
    assert failed == []


def test_check_failures_uses_tolerances():
    good = ResultRecord("fourth_moment", "Rademacher", 1, 1, 0, 0, 0, "rel_error", 1e-13)
    bad = ResultRecord("mpo_variance", "MpoGaussian", 2, 3, 1, 1, -1, "rel_error", 0.06)
    other = ResultRecord("mpo_variance", "MpoGaussian", 2, 3, 1, 1, -1, "variance", 1e9)
    assert experiments.check_failures([good, bad, other]) == [bad]


# ---- CSV ----

def test_csv_round_trip_is_exact():
    records = experiments.run_distortion(small(variants=(Variant.TT_GAUSSIAN, Variant.VERY_SPARSE)))
    text = experiments.records_to_csv(records)
    assert text.splitlines()[0] == ",".join(experiments.CSV_HEADER)
    assert "\r" not in text
    assert experiments.read_csv(io.StringIO(text)) == records


@given(value=st.floats(min_value=0, allow_nan=False, allow_infinity=False))
def test_value_serialization_round_trips(value):
    r = ResultRecord("x", "TtGaussian", 1, 1, 1, 1, -1, "variance", value)
    assert experiments.read_csv(io.StringIO(experiments.records_to_csv([r]))) == [r]


def test_read_csv_rejects_foreign_header():
    with pytest.raises(ValueError):
        experiments.read_csv(io.StringIO("a,b\n1,2\n"))


# ---- determinism ----

@pytest.mark.parametrize("runner", [experiments.run_distortion, experiments.run_mpo_comparison])
def test_same_seed_same_bytes(runner):
    cfg = small(variants=(Variant.TT_GAUSSIAN, Variant.MPO_GAUSSIAN, Variant.DENSE_GAUSSIAN))
    assert experiments.records_to_csv(runner(cfg)) == experiments.records_to_csv(runner(cfg))
    other = experiments.records_to_csv(runner(small(variants=cfg.variants, seed=6)))
    assert other != experiments.records_to_csv(runner(cfg))


def test_curves_over_k_share_the_trial_seeds():
    cfg = small(variants=(Variant.TT_GAUSSIAN,), rank_grid=(2,), k_grid=(4,))
    wide = small(variants=(Variant.TT_GAUSSIAN,), rank_grid=(1, 2), k_grid=(2, 4, 8))
    pick = lambda recs: [r for r in recs if r.R == 2 and r.k == 4]  # noqa: E731
    assert pick(experiments.run_distortion(cfg)) == pick(experiments.run_distortion(wide))


# ---- command line ----

def test_cli_writes_csv(tmp_path):
    out = tmp_path / "d.csv"
    code = cli.main(["distortion", "--regime", "custom", "--dim", "3", "--order", "2", "--ks", "2,4",
                     "--ranks", "1", "--trials", "2", "--out", str(out)])
    assert code == 0
    records = experiments.read_csv(out.open())
    assert len(records) == 2 * 1 * 2 * 3


def test_cli_stdout(capsys):
    code = cli.main(["timing", "--regime", "custom", "--dim", "2", "--order", "2", "--ks", "2", "--ranks", "1",
                     "--trials", "2"])
    assert code == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == ",".join(experiments.CSV_HEADER)
    assert len(lines) == 1 + 2 * 3


def test_cli_exit_code_for_config_errors(capsys):
    assert cli.main(["distortion", "--regime", "high", "--variants", "DenseGaussian", "--ks", "2"]) == 1
    assert "ElementCapExceeded" in capsys.readouterr().err
    assert cli.main(["distortion", "--regime", "custom", "--dim", "3"]) == 1
    assert cli.main(["timing", "--variants", "MpoGaussian"]) == 1


@pytest.mark.parametrize(
    "argv", [["distortion", "--variants", "Nope"], ["distortion", "--ks", "2,x"], ["bogus"], []]
)
def test_cli_argument_errors_exit_1(argv):
    with pytest.raises(SystemExit) as info:
        cli.main(argv)
    assert info.value.code == 1


def test_cli_checks_exit_code_reflects_failures(monkeypatch, capsys):
    failing = [ResultRecord("mpo_variance", "MpoGaussian", 2, 3, 1, 1, -1, "rel_error", 0.5)]
    monkeypatch.setitem(cli.RUNNERS, "checks", lambda cfg: failing)
    assert cli.main(["checks"]) == 2
    assert "mpo_variance" in capsys.readouterr().err
    monkeypatch.setitem(cli.RUNNERS, "checks", lambda cfg: [])
    assert cli.main(["checks"]) == 0


def test_cli_subcommand_defaults():
    parser = cli.build_parser()
    cfg = cli.config_from_args(parser.parse_args(["mpo-compare"]))
    assert cfg.regime == "high" and cfg.variants == experiments.MPO_COMPARE_VARIANTS
    cfg = cli.config_from_args(parser.parse_args(["checks"]))
    assert cfg.trials == 10**5
    cfg = cli.config_from_args(parser.parse_args(["distortion", "--variants", "TtRademacher,VerySparse"]))
    assert cfg.variants == (Variant.TT_RADEMACHER, Variant.VERY_SPARSE)
    assert cfg.k_grid == (2, 8, 32, 128, 512, 2048) and cfg.rank_grid == (1, 2, 5, 10)
