from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cgsp.data import (
    CrossDomainData,
    InteractionSet,
    Split,
    SplitSpec,
    detect_overlap,
    load_interactions,
    normalize,
    prune,
    split,
    subsample_overlap,
)
from cgsp.exceptions import ConfigError, DataError
from cgsp.oracle import generate_synthetic

from conftest import write_log


def iset(name, pairs):
    return InteractionSet.from_records(name, pairs)


# ---------------------------------------------------------------- loading

def test_load_small_log(tmp_path):
    path = write_log(tmp_path / "t.tsv", [("a", "x"), ("a", "y"), ("b", "y"), ("b", "z")])
    s = load_interactions(path)
    assert (s.n_users, s.n_items, len(s)) == (2, 3, 4)
    assert s.users == ("a", "b") and s.items == ("x", "y", "z")


def test_duplicates_collapse(tmp_path):
    path = write_log(tmp_path / "t.tsv", [("a", "x"), ("a", "x"), ("b", "x")])
    assert len(load_interactions(path)) == 2


def test_pruning_removes_user_and_orphaned_items():
    pairs = [("u1", "i1"), ("u1", "i2"), ("u2", "i1"), ("u2", "i3"),
             ("u3", "i2"), ("u3", "i3"), ("u4", "i1"), ("u4", "i2"), ("u5", "i4")]
    kept = prune(pairs, min_user_deg=2)
    assert {u for u, _ in kept} == {"u1", "u2", "u3", "u4"}
    assert {i for _, i in kept} == {"i1", "i2", "i3"}
    assert len(kept) == 8


def test_pruning_cascades():
    # dropping item c leaves user 2 with a single interaction
    pairs = [("1", "a"), ("1", "b"), ("2", "a"), ("2", "c"), ("3", "a"), ("3", "b")]
    kept = prune(pairs, min_user_deg=2, min_item_deg=2)
    assert kept == [("1", "a"), ("1", "b"), ("3", "a"), ("3", "b")]


def test_csv_with_values_binarizes(tmp_path):
    path = tmp_path / "r.csv"
    path.write_text("user,item,rating\na,x,5\na,y,0\nb,y,3.5\n", encoding="utf-8")
    s = load_interactions(path, format="csv", header=True)
    assert s.key_pairs() == [("a", "x"), ("b", "y")]


def test_malformed_row_reports_line(tmp_path):
    path = tmp_path / "bad.tsv"
    path.write_text("a\tx\nb\ty\tz\tw\n", encoding="utf-8")
    with pytest.raises(DataError, match=r"bad.tsv:2"):
        load_interactions(path)


def test_non_numeric_value(tmp_path):
    path = tmp_path / "bad.tsv"
    path.write_text("a\tx\t1\nb\ty\tlots\n", encoding="utf-8")
    with pytest.raises(DataError, match=":2"):
        load_interactions(path)


def test_missing_file_and_empty_result(tmp_path):
    with pytest.raises(DataError):
        load_interactions(tmp_path / "nope.tsv")
    path = write_log(tmp_path / "t.tsv", [("a", "x"), ("b", "y")])
    with pytest.raises(DataError, match="no interactions"):
        load_interactions(path, min_user_deg=2)


def test_unknown_format(tmp_path):
    path = write_log(tmp_path / "t.tsv", [("a", "x")])
    with pytest.raises(ConfigError):
        load_interactions(path, format="parquet")


# ---------------------------------------------------------------- overlap

def test_detect_overlap_examples():
    src = iset("s", [("a", "1"), ("b", "1"), ("c", "2")])
    tgt = iset("t", [("b", "x"), ("c", "x"), ("d", "y")])
    assert detect_overlap(src, tgt).overlap_keys == ("b", "c")
    assert detect_overlap(tgt, src).overlap_keys == ("b", "c")
    other = iset("t", [("e", "x")])
    assert len(detect_overlap(src, other)) == 0


def test_identical_users_full_overlap():
    pairs = [(f"u{k}", f"i{k % 3}") for k in range(7)]
    data = CrossDomainData.from_interactions(iset("s", pairs), iset("t", pairs))
    assert data.n_overlap == 7
    assert data.overlap_ratio == 1.0


# ---------------------------------------------------------- normalization

def test_normalize_example():
    R = normalize(np.array([[1, 1], [0, 1]])).toarray()
    np.testing.assert_allclose(R, [[2 ** -0.5, 0.5], [0.0, 2 ** -0.5]], atol=1e-12)
    assert normalize(np.array([[1]])).toarray().tolist() == [[1.0]]


def test_normalize_zero_degree():
    with pytest.raises(DataError):
        normalize(np.array([[1, 0], [0, 0]]))
    R = normalize(np.array([[1, 0], [0, 0]]), allow_empty=True)
    assert R.toarray().tolist() == [[1.0, 0.0], [0.0, 0.0]]


def test_normalized_entries_match_degrees(small_data):
    for binary, R in ((small_data.source_binary, small_data.R_S), (small_data.target_binary, small_data.R_T)):
        B = binary.toarray()
        du, di = B.sum(axis=1), B.sum(axis=0)
        coo = R.tocoo()
        expected = 1.0 / np.sqrt(du[coo.row] * di[coo.col])
        assert np.max(np.abs(coo.data - expected)) <= 1e-12


def test_overlap_slices_are_rows_of_full_matrices(small_data):
    d = small_data
    np.testing.assert_array_equal(d.R_OS.toarray(), d.R_S.toarray()[d.overlap.source_rows])
    np.testing.assert_array_equal(d.R_OT.toarray(), d.R_T.toarray()[d.overlap.target_rows])


# ------------------------------------------------------------------ split

def test_intra_five_interactions():
    tgt = iset("t", [("u", f"i{k}") for k in range(5)])
    src = iset("s", [("u", "x")])
    s = split(tgt, src, SplitSpec("intra", validation_ratio=0.0, seed=1))
    assert (len(s.target), len(s.test), len(s.validation)) == (4, 1, 0)
    s = split(tgt, src, SplitSpec("intra", seed=1))
    assert (len(s.target), len(s.test), len(s.validation)) == (3, 1, 1)


def test_intra_partition(small_sets):
    src, tgt = small_sets
    s = split(tgt, src, SplitSpec("intra", seed=4))
    train = set(s.target.key_pairs())
    val, test = set(s.validation), set(s.test)
    assert not (train & val) and not (train & test) and not (val & test)
    assert train | val | test == set(tgt.key_pairs())
    assert s.source is src


def test_inter_ten_overlap_users():
    src = iset("s", [(f"o{k}", f"x{k % 4}") for k in range(12)])
    tgt = iset("t", [(f"o{k}", f"y{k % 3}") for k in range(10)] + [(f"o{k}", "z") for k in range(10)]
               + [("t1", "y0")])
    s = split(tgt, src, SplitSpec("inter", validation_ratio=0.0, seed=2))
    test_users = {u for u, _ in s.test}
    assert len(test_users) == 5
    data = s.train_data()
    for key in test_users:
        assert data.target_binary[data.target_row(key)].nnz == 0
        assert data.source_binary[data.source_row(key)].nnz > 0
    assert set(s.test) == {p for p in tgt.key_pairs() if p[0] in test_users}


def test_inter_validation_users_disjoint(small_sets):
    src, tgt = small_sets
    s = split(tgt, src, SplitSpec("inter", seed=0))
    val_users = {u for u, _ in s.validation}
    test_users = {u for u, _ in s.test}
    assert val_users and not (val_users & test_users)
    assert s.train_data().n_overlap > 0


def test_inter_without_overlap_fails():
    src = iset("s", [("a", "x")])
    tgt = iset("t", [("b", "y")])
    with pytest.raises(DataError):
        split(tgt, src, SplitSpec("inter"))


def test_split_spec_validation():
    with pytest.raises(ConfigError):
        SplitSpec("both")
    with pytest.raises(ConfigError):
        SplitSpec(train_ratio=0.0)
    with pytest.raises(ConfigError):
        SplitSpec(validation_ratio=1.0)


def test_split_is_seed_deterministic(small_sets, tmp_path):
    src, tgt = small_sets
    a = split(tgt, src, SplitSpec("intra", seed=7))
    b = split(tgt, src, SplitSpec("intra", seed=7))
    c = split(tgt, src, SplitSpec("intra", seed=8))
    a.save(tmp_path / "a.json")
    b.save(tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert a.test != c.test


def test_split_manifest_roundtrip(small_sets, tmp_path):
    src, tgt = small_sets
    s = split(tgt, src, SplitSpec("inter", seed=5))
    s.save(tmp_path / "m.json")
    back = Split.load(tmp_path / "m.json")
    assert back.test == s.test and back.validation == s.validation
    assert back.train_data().fingerprint() == s.train_data().fingerprint()
    assert back.relevance("test") == s.relevance("test")


def test_seen_includes_validation_only_for_test(small_sets):
    src, tgt = small_sets
    s = split(tgt, src, SplitSpec("intra", seed=1))
    u, item = s.validation[0]
    j = s.target.items.index(item)
    assert j in s.seen("test")[u]
    assert j not in s.seen("validation").get(u, set())


# -------------------------------------------------------------- subsample

def test_subsample_endpoints(small_data):
    assert subsample_overlap(small_data, 1.0, seed=3) is small_data
    empty = subsample_overlap(small_data, 0.0, seed=3)
    assert empty.n_overlap == 0 and empty.R_OS.shape[0] == 0
    np.testing.assert_array_equal(empty.R_T.toarray(), small_data.R_T.toarray())


def test_subsample_exact_count():
    src, tgt = generate_synthetic(150, 120, 100, 60, 60, density=0.2, seed=1)
    data = CrossDomainData.from_interactions(src, tgt)
    assert data.n_overlap == 100
    assert subsample_overlap(data, 0.2, seed=9).n_overlap == 20


def test_subsample_renormalizes_source(small_data):
    sub = subsample_overlap(small_data, 0.5, seed=0)
    B = sub.source_binary.toarray()
    du, di = B.sum(axis=1), B.sum(axis=0)
    coo = sub.R_S.tocoo()
    np.testing.assert_allclose(coo.data, 1.0 / np.sqrt(du[coo.row] * di[coo.col]), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(r1=st.floats(0, 1), r2=st.floats(0, 1), seed=st.integers(0, 1000))
def test_subsample_monotone(small_data, r1, r2, seed):
    lo, hi = sorted((r1, r2))
    a = set(subsample_overlap(small_data, lo, seed).overlap.overlap_keys)
    b = set(subsample_overlap(small_data, hi, seed).overlap.overlap_keys)
    assert a <= b
