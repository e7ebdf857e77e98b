import numpy as np
import pytest

from nmcbounds.chain import Distribution, PolynomialKernel, evaluate_kernel, validate_kernel
from nmcbounds.errors import KernelInvalidError
from nmcbounds.experiments import (
    EXAMPLE1_P,
    ComparisonTable,
    ExperimentConfig,
    builtin_example,
    compare_bounds,
    export_report,
    parse_report,
    tv_envelope,
)


def test_config_invariants():
    ExperimentConfig(1, 0.2, 10, 5, 0)
    with pytest.raises(ValueError):
        ExperimentConfig(3, 0.1, 10, 5, 0)
    with pytest.raises(ValueError):
        ExperimentConfig(1, 0.3, 10, 5, 0)
    with pytest.raises(ValueError):
        ExperimentConfig(1, 0.1, 0, 5, 0)


def test_builtin_example1_matches_published_entries():
    K = builtin_example(1, 0.1)
    row = evaluate_kernel(K, Distribution([1, 0, 0, 0])).entries[0]
    assert row == pytest.approx([0.3, 0.2, 0.3, 0.2], abs=1e-15)


def test_builtin_example1_kappa_zero_is_linear():
    K = builtin_example(1, 0.0)
    assert (K.coeff[1] == 0).all()
    for mu in (Distribution([1, 0, 0, 0]), Distribution([0.25] * 4)):
        assert np.allclose(evaluate_kernel(K, mu).entries, EXAMPLE1_P)


def test_builtin_example2_validates_at_02():
    report = validate_kernel(builtin_example(2, 0.2), grid=500)
    assert report.ok


def test_builtin_example2_printed_variant_is_not_stochastic():
    # row 2's printed nonlinear term reads coordinate 3, which breaks the
    # row sum whenever mu[2] != mu[3]
    K = builtin_example(2, 0.1, printed_mu4_variant=True)
    report = validate_kernel(K, grid=200)
    assert not report.ok
    with pytest.raises(KernelInvalidError):
        evaluate_kernel(K, Distribution([0.0, 0.0, 1.0, 0.0, 0.0]))


def test_envelope_zero_at_fixed_point():
    from nmcbounds.chain import stationary
    K = builtin_example(1, 0.1)
    pi = stationary(K).distribution
    env = tv_envelope(K, trials=1, steps=5, rng=0, mu0_override=pi)
    assert (env.tv_max < 1e-8).all()


def test_envelope_statistics_shape_and_trend():
    K = builtin_example(1, 0.1)
    env = tv_envelope(K, trials=1000, steps=15, rng=1)
    assert env.tv_min.shape == (16,)
    assert (env.tv_min <= env.tv_mean + 1e-15).all()
    assert (env.tv_mean <= env.tv_max + 1e-15).all()
    assert (env.tv_max <= 2.0).all()
    assert (np.diff(env.tv_mean) < 0).all()     # geometric mixing


def test_envelope_rank_one_collapses():
    K = PolynomialKernel.linear(np.tile([0.25, 0.25, 0.25, 0.25], (4, 1)))
    env = tv_envelope(K, trials=50, steps=4, rng=2)
    assert (env.tv_max[1:] < 1e-12).all()


def test_compare_bounds_columns_and_domination():
    K = builtin_example(1, 0.1)
    table, report = compare_bounds(K, steps=10, trials=200, seed=3)
    assert table.columns[0] == "n"
    md_col = table.columns.index("md")
    assert table.rows[0][md_col] == pytest.approx(0.8, abs=0.005)
    t4 = table.columns.index("combined_small_n")
    mx = table.columns.index("tv_max")
    for row in table.rows:
        assert row[mx] <= row[t4] + 1e-9
    spec_col = table.columns.index("spectral")
    assert table.rows[0][spec_col] == pytest.approx(0.54, abs=0.02)


def test_compare_bounds_deterministic():
    K = builtin_example(1, 0.2)
    t1, _ = compare_bounds(K, steps=5, trials=50, seed=11)
    t2, _ = compare_bounds(K, steps=5, trials=50, seed=11)
    assert t1.rows == t2.rows


def test_export_roundtrip(tmp_path):
    K = builtin_example(1, 0.1)
    table, _ = compare_bounds(K, steps=6, trials=50, seed=5)
    path = tmp_path / "report.csv"
    export_report(table, path)
    data1 = path.read_bytes()
    assert b"\r" not in data1
    parsed = parse_report(path)
    assert parsed.columns == table.columns
    export_report(parsed, path)
    assert path.read_bytes() == data1


def test_export_empty_table(tmp_path):
    path = tmp_path / "empty.csv"
    export_report(ComparisonTable(["a", "b"], []), path)
    assert path.read_text(encoding="utf-8") == "a,b\n"


def test_export_missing_directory(tmp_path):
    table = ComparisonTable(["a"], [[1.0]])
    target = tmp_path / "nope" / "out.csv"
    with pytest.raises(FileNotFoundError):
        export_report(table, target)
    assert not target.exists()
    assert not (tmp_path / "nope").exists()
