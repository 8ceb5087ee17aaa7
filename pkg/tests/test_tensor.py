"""Sparse tensor container, COO text I/O and dataset splitting."""

import io

import numpy as np
import pytest

from trafficfill import (
    CooFormatError,
    DatasetSplit,
    Entry,
    EntryIndex,
    SparseTensor3,
    load_coo,
    mode_axis,
    parse_ratios,
    save_coo,
    split,
)

from helpers import random_tensor


def small_tensor():
    return SparseTensor3(
        (3, 2, 4),
        [0, 1, 2, 0],
        [0, 1, 0, 1],
        [0, 2, 3, 1],
        [1.0, 2.5, 0.0, 4.25],
    )


# ----------------------------------------------------------------------
# construction


def test_basic_attributes():
    t = small_tensor()
    assert t.dims == (3, 2, 4)
    assert t.n_entries == 4
    assert t.ii.dtype == np.int64
    assert t.values.dtype == np.float64
    np.testing.assert_array_equal(t.values, [1.0, 2.5, 0.0, 4.25])


def test_entries_round_trip():
    t = small_tensor()
    es = t.entries()
    assert es[1] == Entry(1, 1, 2, 2.5)
    assert es[1].index == EntryIndex(1, 1, 2)
    again = SparseTensor3.from_entries(t.dims, es)
    np.testing.assert_array_equal(again.ii, t.ii)
    np.testing.assert_array_equal(again.values, t.values)


def test_arrays_are_read_only():
    t = small_tensor()
    for arr in (t.ii, t.jj, t.kk, t.values):
        with pytest.raises((ValueError, RuntimeError)):
            arr[0] = 9


def test_zero_values_allowed():
    t = SparseTensor3((1, 1, 1), [0], [0], [0], [0.0])
    assert t.values[0] == 0.0


@pytest.mark.parametrize(
    "dims, ii, jj, kk, vv, match",
    [
        ((0, 2, 2), [], [], [], [], "positive"),
        ((2, 2), [0], [0], [0], [1.0], "positive"),
        ((2, 2, 2), [0, 1], [0], [0, 0], [1.0, 1.0], "same length"),
        ((2, 2, 2), [0], [0], [2], [1.0], "time indices"),
        ((2, 2, 2), [-1], [0], [0], [1.0], "sensor indices"),
        ((2, 2, 2), [0], [0], [0], [-1.0], "nonnegative"),
        ((2, 2, 2), [0], [0], [0], [float("nan")], "finite"),
        ((2, 2, 2), [0, 0], [1, 1], [0, 0], [1.0, 2.0], "duplicate"),
    ],
)
def test_constructor_rejects_bad_input(dims, ii, jj, kk, vv, match):
    with pytest.raises(ValueError, match=match):
        SparseTensor3(dims, ii, jj, kk, vv)


# ----------------------------------------------------------------------
# mode slices


def test_mode_axis_names():
    assert mode_axis("sensor") == 0
    assert mode_axis("day") == 1
    assert mode_axis("time") == 2
    assert mode_axis(1) == 1
    with pytest.raises(ValueError, match="unknown mode"):
        mode_axis("week")
    with pytest.raises(ValueError, match="0, 1 or 2"):
        mode_axis(3)


def test_mode_slice_by_hand():
    t = small_tensor()
    assert t.mode_slice("sensor", 0) == [
        Entry(0, 0, 0, 1.0),
        Entry(0, 1, 1, 4.25),
    ]
    assert t.mode_slice("day", 1) == [
        Entry(1, 1, 2, 2.5),
        Entry(0, 1, 1, 4.25),
    ]
    assert t.mode_slice("time", 3) == [Entry(2, 0, 3, 0.0)]
    assert t.mode_slice("time", 0) == [Entry(0, 0, 0, 1.0)]


def test_mode_slices_partition_entries():
    rng = np.random.default_rng(7)
    t = random_tensor(rng, (6, 5, 4), 50)
    for mode in ("sensor", "day", "time"):
        seen = []
        for index in range(t.dims[mode_axis(mode)]):
            seen.extend(t.mode_positions(mode, index).tolist())
        assert sorted(seen) == list(range(t.n_entries))


def test_mode_slice_index_out_of_range():
    t = small_tensor()
    with pytest.raises(IndexError, match="day index 2"):
        t.mode_slice("day", 2)
    with pytest.raises(IndexError):
        t.mode_slice("sensor", -1)


def test_take_keeps_dims():
    t = small_tensor()
    sub = t.take([2, 0])
    assert sub.dims == t.dims
    assert sub.n_entries == 2
    assert sub.entries() == [Entry(2, 0, 3, 0.0), Entry(0, 0, 0, 1.0)]


# ----------------------------------------------------------------------
# COO text


def test_coo_text_round_trip():
    t = small_tensor()
    text = t.to_coo_text()
    assert text.splitlines()[0] == "#dims,3,2,4"
    back = load_coo(text)
    assert back.dims == t.dims
    np.testing.assert_array_equal(back.ii, t.ii)
    np.testing.assert_array_equal(back.jj, t.jj)
    np.testing.assert_array_equal(back.kk, t.kk)
    np.testing.assert_array_equal(back.values, t.values)


def test_coo_round_trip_preserves_float_bits():
    rng = np.random.default_rng(11)
    t = random_tensor(rng, (9, 8, 7), 60)
    back = load_coo(t.to_coo_text())
    np.testing.assert_array_equal(back.values, t.values)


def test_load_coo_from_file(tmp_path):
    t = small_tensor()
    path = tmp_path / "demo.coo"
    save_coo(t, path)
    back = load_coo(path)
    assert back.dims == t.dims
    assert back.n_entries == t.n_entries
    # str paths work too
    again = load_coo(str(path))
    assert again.n_entries == t.n_entries


def test_load_coo_comments_and_blanks():
    text = "#dims,2,2,2\n\n# a comment\n0,0,0,1.5\n\n1,1,1,2.0\n"
    t = load_coo(text)
    assert t.n_entries == 2
    assert t.dims == (2, 2, 2)


def test_load_coo_infers_dims_from_entries():
    t = load_coo("0,0,0,1.0\n2,1,4,2.0\n")
    assert t.dims == (3, 2, 5)


def test_load_coo_explicit_dims():
    t = load_coo("0,0,0,1.0\n", dims=(4, 4, 4))
    assert t.dims == (4, 4, 4)


def test_load_coo_from_stream():
    t = load_coo(io.StringIO("#dims,2,2,2\n0,1,0,3.0\n"))
    assert t.entries() == [Entry(0, 1, 0, 3.0)]


def test_load_coo_empty_with_header():
    t = load_coo("#dims,3,4,5\n")
    assert t.dims == (3, 4, 5)
    assert t.n_entries == 0


def test_load_coo_empty_without_dims_fails():
    with pytest.raises(CooFormatError, match="cannot infer dims"):
        load_coo("# nothing here\n")


@pytest.mark.parametrize(
    "text, match",
    [
        ("0,0,1.0\n", "line 1: expected"),
        ("0,0,a,1.0\n", "integers"),
        ("0,0,0,ten\n", "decimal"),
        ("0,0,0,nan\n", "finite"),
        ("0,0,0,-2.0\n", "negative value"),
        ("0,-1,0,2.0\n", "negative index"),
        ("#dims,2,2\n0,0,0,1.0\n", "dims header"),
        ("#dims,2,2,x\n", "integers"),
    ],
)
def test_load_coo_format_errors(text, match):
    with pytest.raises(CooFormatError, match=match):
        load_coo(text)


def test_load_coo_duplicate_reports_both_lines():
    text = "#dims,2,2,2\n0,0,0,1.0\n1,1,1,2.0\n0,0,0,3.0\n"
    with pytest.raises(CooFormatError, match="line 4.*first seen at line 2"):
        load_coo(text)


def test_load_coo_out_of_range_reports_line():
    with pytest.raises(CooFormatError, match="line 2.*outside dims"):
        load_coo("#dims,2,2,2\n0,0,5,1.0\n")


def test_load_coo_dims_conflict():
    with pytest.raises(CooFormatError, match="conflicts"):
        load_coo("#dims,2,2,2\n0,0,0,1.0\n", dims=(3, 3, 3))


# ----------------------------------------------------------------------
# ratios and splitting


def test_parse_ratios():
    assert parse_ratios("10:20:70") == (10.0, 20.0, 70.0)
    assert parse_ratios("33.4:33.3:33.3") == (33.4, 33.3, 33.3)


@pytest.mark.parametrize(
    "text", ["10:90", "a:b:c", "0:30:70", "-10:40:70", "30:30:30"]
)
def test_parse_ratios_rejects(text):
    with pytest.raises(ValueError):
        parse_ratios(text)


def test_split_sizes_floor_rule():
    # train and validation round down, test takes the remainder
    t = SparseTensor3(
        (49925, 1, 1),
        np.arange(49925),
        np.zeros(49925, dtype=np.int64),
        np.zeros(49925, dtype=np.int64),
        np.ones(49925),
    )
    parts = split(t, (10, 20, 70), seed=42)
    assert parts.sizes() == (4992, 9985, 34948)
    assert sum(parts.sizes()) == t.n_entries


def test_split_sizes_within_one_entry_of_exact():
    rng = np.random.default_rng(3)
    for n in (17, 100, 1003):
        t = random_tensor(rng, (40, 30, 20), n)
        parts = split(t, (10, 20, 70), seed=1)
        for size, ratio in zip(parts.sizes()[:2], (10.0, 20.0)):
            assert 0 <= n * ratio / 100.0 - size < 1.0


def test_split_is_a_partition():
    rng = np.random.default_rng(5)
    t = random_tensor(rng, (10, 9, 8), 300)
    parts = split(t, (10, 20, 70), seed=9)

    def keyset(part):
        return set(zip(part.ii.tolist(), part.jj.tolist(), part.kk.tolist()))

    train, val, test = map(keyset, (parts.train, parts.validation, parts.test))
    assert not train & val
    assert not train & test
    assert not val & test
    assert train | val | test == keyset(t)
    for part in (parts.train, parts.validation, parts.test):
        assert part.dims == t.dims


def test_split_deterministic_per_seed():
    rng = np.random.default_rng(6)
    t = random_tensor(rng, (12, 11, 10), 400)
    a = split(t, (10, 20, 70), seed=123)
    b = split(t, (10, 20, 70), seed=123)
    for left, right in zip(
        (a.train, a.validation, a.test), (b.train, b.validation, b.test)
    ):
        np.testing.assert_array_equal(left.ii, right.ii)
        np.testing.assert_array_equal(left.jj, right.jj)
        np.testing.assert_array_equal(left.kk, right.kk)
        np.testing.assert_array_equal(left.values, right.values)
    c = split(t, (10, 20, 70), seed=124)
    assert not np.array_equal(a.train.ii, c.train.ii) or not np.array_equal(
        a.train.kk, c.train.kk
    )


def test_split_rejects_bad_ratios():
    t = small_tensor()
    with pytest.raises(ValueError, match="sum to 100"):
        split(t, (10, 20, 60), seed=0)
    with pytest.raises(ValueError, match="positive"):
        split(t, (0, 30, 70), seed=0)


def test_dataset_split_fields():
    t = small_tensor()
    parts = split(t, (25, 25, 50), seed=0)
    assert isinstance(parts, DatasetSplit)
    assert parts.sizes() == (1, 1, 2)
