import io
import logging

import numpy as np
import pytest

from cfaudit.data import (ColumnSpec, Dataset, binarize_score, dataset_from_arrays,
                          default_spec, enumerate_groups, group_codes, load_dataset,
                          write_dataset)
from cfaudit.errors import (DomainError, EmptyInputError, RowParseError, SchemaError)

SPEC2 = ColumnSpec(protected_columns=("race", "sex"), treatment_column="d",
                   outcome_column="y", covariate_columns=("age",),
                   score_column="score", score_threshold=0.5)


def _table(rows, header="race,sex,d,y,age,score"):
    return io.StringIO(header + "\n" + "\n".join(rows) + "\n")


def test_load_small_table():
    src = _table([
        "b,f,0,1,41,0.73",
        "w,m,1,0,52,0.10",
        "b,m,0,0,33,0.40",
        "w,f,0,1,27,0.90",
    ])
    ds = load_dataset(src, SPEC2)
    assert ds.n == 4
    assert ds.n_characteristics == 2
    assert ds.n_covariates == 1
    # codes follow first appearance: b=0, w=1; f=0, m=1
    assert ds.level_maps[0] == {"b": 0, "w": 1}
    assert ds.level_maps[1] == {"f": 0, "m": 1}
    # score 0.73 at threshold 0.5 binarizes to 1
    assert list(ds.s) == [1, 0, 0, 1]
    assert list(ds.d) == [0, 1, 0, 0]
    assert list(ds.y) == [1, 0, 0, 1]
    assert ds.x[0, 0] == 41.0


def test_missing_outcome_column_names_the_role():
    src = io.StringIO("race,sex,d,age,score\nb,f,0,41,0.7\n")
    with pytest.raises(SchemaError) as exc:
        load_dataset(src, SPEC2)
    assert "outcome_column 'y' not found" in str(exc.value)


def test_non_binary_treatment_token_reports_row():
    src = _table(["b,f,0,1,41,0.73", "w,m,2,0,52,0.10"])
    with pytest.raises(RowParseError) as exc:
        load_dataset(src, SPEC2)
    assert "row 3" in str(exc.value)


def test_missing_values_reject_rows_with_log(caplog):
    src = _table(["b,f,0,1,,0.73", "w,m,1,0,52,0.10"])
    with caplog.at_level(logging.WARNING, logger="cfaudit.data"):
        ds = load_dataset(src, SPEC2)
    assert ds.n == 1
    assert any("rejected 1" in r.getMessage() for r in caplog.records)


def test_all_rows_rejected_is_empty_input():
    src = _table(["b,f,,1,41,0.73"])
    with pytest.raises(EmptyInputError):
        load_dataset(src, SPEC2)


def test_empty_stream_is_empty_input():
    with pytest.raises(EmptyInputError):
        load_dataset(io.StringIO(""), SPEC2)


def test_score_out_of_range_is_domain_error_with_row():
    src = _table(["b,f,0,1,41,1.5"])
    with pytest.raises(DomainError) as exc:
        load_dataset(src, SPEC2)
    assert "row 2" in str(exc.value)


def test_binarize_score_threshold_rule():
    assert binarize_score(0.5, 0.5) == 1      # ties go to 1
    assert binarize_score(0.49, 0.5) == 0
    assert binarize_score(1.0, 0.5) == 1
    assert binarize_score(0.0, 0.5) == 0
    with pytest.raises(DomainError):
        binarize_score(1.5, 0.5)
    with pytest.raises(DomainError):
        binarize_score(-0.1, 0.5)
    with pytest.raises(DomainError):
        binarize_score(0.3, 1.0)


def test_column_spec_validation():
    with pytest.raises(SchemaError):
        ColumnSpec(protected_columns=())
    with pytest.raises(SchemaError):
        ColumnSpec(protected_columns=("a", "a"))
    with pytest.raises(SchemaError):
        ColumnSpec(protected_columns=("d",))       # clashes with treatment
    with pytest.raises(DomainError):
        ColumnSpec(protected_columns=("a",), score_threshold=0.0)


def _random_dataset(rng, n=40, n_levels=(2, 3)):
    m = len(n_levels)
    a = np.column_stack([rng.integers(0, L, n) for L in n_levels])
    # make sure every level actually appears so level maps are full
    for j, L in enumerate(n_levels):
        a[:L, j] = np.arange(L)
    return dataset_from_arrays(a=a, d=rng.integers(0, 2, n),
                               y=rng.integers(0, 2, n),
                               x=rng.normal(size=(n, 2)),
                               s=rng.integers(0, 2, n))


def test_enumerate_groups_counts_and_pairs():
    rng = np.random.default_rng(7)
    ds = _random_dataset(rng, n=50, n_levels=(2, 2))
    gi = enumerate_groups(ds)
    assert gi.n_groups == 4
    assert len(gi.pairs) == 6
    assert sum(gi.counts) == ds.n

    ds3 = _random_dataset(rng, n=50, n_levels=(3,))
    gi3 = enumerate_groups(ds3)
    assert gi3.n_groups == 3
    assert len(gi3.pairs) == 3

    ds23 = _random_dataset(rng, n=60, n_levels=(2, 3))
    gi23 = enumerate_groups(ds23)
    assert gi23.n_groups == 6
    assert len(gi23.pairs) == 15


def test_enumerate_groups_keeps_empty_intersections():
    # 2x2 design but one combination never occurs
    a = np.array([[0, 0], [0, 1], [1, 0], [0, 0], [1, 0]])
    ds = dataset_from_arrays(a=a, d=[0] * 5, y=[0, 1, 0, 1, 0],
                             x=np.zeros((5, 1)), s=[0, 1, 0, 1, 0])
    gi = enumerate_groups(ds)
    assert gi.n_groups == 4
    assert gi.counts[gi.position((1, 1))] == 0


def test_group_enumeration_invariant_under_row_permutation():
    rng = np.random.default_rng(11)
    for _ in range(20):
        ds = _random_dataset(rng)
        gi = enumerate_groups(ds)
        perm = rng.permutation(ds.n)
        gi2 = enumerate_groups(ds.subset(perm))
        assert gi.groups == gi2.groups
        assert gi.counts == gi2.counts
        assert sum(gi.counts) == ds.n


def test_group_codes_align_with_enumeration():
    rng = np.random.default_rng(3)
    ds = _random_dataset(rng, n=30, n_levels=(2, 3))
    gi = enumerate_groups(ds)
    flat = group_codes(ds)
    for i in range(ds.n):
        assert gi.groups[flat[i]] == tuple(ds.a[i])


def test_round_trip_write_then_load_is_identity():
    src = _table([
        "b,f,0,1,41.25,0.73",
        "w,m,1,0,52.5,0.10",
        "b,m,0,0,33.125,0.40",
    ])
    ds = load_dataset(src, SPEC2)
    buf = io.StringIO()
    write_dataset(ds, buf)
    ds2 = load_dataset(io.StringIO(buf.getvalue()), SPEC2)
    assert np.array_equal(ds.a, ds2.a)
    assert np.array_equal(ds.d, ds2.d)
    assert np.array_equal(ds.y, ds2.y)
    assert np.array_equal(ds.x, ds2.x)
    assert np.array_equal(ds.s, ds2.s)
    assert ds.level_maps == ds2.level_maps
    # a second cycle is byte-identical
    buf2 = io.StringIO()
    write_dataset(ds2, buf2)
    assert buf.getvalue() == buf2.getvalue()


def test_dataset_rejects_non_binary_and_nan():
    with pytest.raises(DomainError):
        dataset_from_arrays(a=[[0], [1]], d=[0, 2], y=[0, 1],
                            x=np.zeros((2, 1)), s=[0, 1])
    with pytest.raises(DomainError):
        dataset_from_arrays(a=[[0], [1]], d=[0, 1], y=[0, 1],
                            x=np.array([[np.nan], [0.0]]), s=[0, 1])


def test_dataset_arrays_are_readonly():
    ds = dataset_from_arrays(a=[[0], [1]], d=[0, 1], y=[0, 1],
                             x=np.zeros((2, 1)), s=[0, 1])
    with pytest.raises(ValueError):
        ds.d[0] = 1


def test_with_protected_and_subset():
    rng = np.random.default_rng(5)
    ds = _random_dataset(rng, n=20, n_levels=(2, 2))
    perm = rng.permutation(ds.n)
    ds_p = ds.with_protected(ds.a[perm])
    assert np.array_equal(np.sort(ds_p.a[:, 0]), np.sort(ds.a[:, 0]))
    assert np.array_equal(ds_p.y, ds.y)
    sub = ds.subset(np.arange(5))
    assert sub.n == 5
    assert sub.level_maps == ds.level_maps
    # groups of a subset still cover the full cross-product
    assert enumerate_groups(sub).n_groups == 4


def test_default_spec_names():
    sp = default_spec(2, 4)
    assert sp.protected_columns == ("a1", "a2")
    assert sp.covariate_columns == ("x1", "x2", "x3", "x4")
    assert sp.score_column == "s"
