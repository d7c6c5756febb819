import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rfsc import dataset as D


def raw(x, labels):
    return D.RawDataset(np.asarray(x, dtype=float), np.asarray(labels))


def test_normalize_maps_columns_to_unit_interval():
    ds = D.normalize(raw([[1, 10], [3, 20], [2, 15]], [1, 2, 1]))
    np.testing.assert_allclose(ds.features, [[0, 0], [1, 1], [0.5, 0.5]])
    np.testing.assert_array_equal(ds.norm_params.minimum, [1, 10])
    np.testing.assert_array_equal(ds.norm_params.maximum, [3, 20])


def test_constant_column_becomes_zero():
    ds = D.normalize(raw([[5, 1], [5, 2], [5, 3]], [1, 2, 2]))
    np.testing.assert_array_equal(ds.features[:, 0], 0.0)


def test_apply_normalization_clamps_out_of_range_rows():
    params = D.NormParams(np.array([0.0, 0.0]), np.array([2.0, 4.0]))
    u = D.apply_normalization([[-1.0, 8.0], [1.0, 1.0]], params)
    np.testing.assert_allclose(u, [[0.0, 1.0], [0.5, 0.25]])


def test_apply_normalization_rejects_wrong_width():
    params = D.NormParams(np.zeros(3), np.ones(3))
    with pytest.raises(ValueError):
        D.apply_normalization([1.0, 2.0], params)


def test_recode_one_vs_rest():
    ds = D.normalize(raw([[0], [1], [2], [3]], [1, 2, 3, 2]))
    np.testing.assert_array_equal(D.recode(ds, 2).y, [-1, 1, -1, 1])
    with pytest.raises(ValueError):
        D.recode(ds, 4)


def test_modeled_classes_binary_and_multiclass():
    assert D.modeled_classes(2) == [1]
    assert D.modeled_classes(3) == [1, 2, 3]


def test_labels_must_be_contiguous():
    with pytest.raises(ValueError):
        raw([[0], [1]], [1, 3])


def test_parse_with_header_and_string_labels():
    text = "a,b,kind\n1,2,x\n3,4,y\n5,6,x\n"
    ds = D.loads(text)
    assert ds.feature_names == ["a", "b"]
    assert ds.class_names == ["x", "y"]
    np.testing.assert_array_equal(ds.labels, [1, 2, 1])


def test_parse_mixed_delimiters_and_comments():
    text = "# comment\n1 2\t1\n\n3;4,2\n"
    ds = D.loads(text)
    np.testing.assert_array_equal(ds.features, [[1, 2], [3, 4]])
    assert ds.feature_names is None


def test_malformed_row_reports_line_number():
    with pytest.raises(D.DataFormatError) as err:
        D.loads("1,2,a\n3,4,b\n5,x,a\n")
    assert err.value.line == 3
    with pytest.raises(D.DataFormatError) as err:
        D.loads("1,2,a\n3,b\n")
    assert err.value.line == 2


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        D.load(tmp_path / "nope.csv")


@pytest.mark.parametrize("name,n,nf,nc", [
    ("iris", 150, 4, 3), ("wine", 178, 13, 3), ("wdbc", 569, 30, 2),
    ("bupa", 345, 6, 2), ("sonar", 208, 60, 2), ("ionosphere", 351, 33, 2),
])
def test_bundled_shapes(name, n, nf, nc):
    ds = D.load_bundled(name)
    assert (ds.n_samples, ds.n_features, ds.n_classes) == (n, nf, nc)


def test_resolve_prefers_existing_path(tmp_path):
    p = tmp_path / "iris"
    p.write_text("1,a\n2,b\n")
    assert D.resolve(str(p)).n_samples == 2
    assert D.resolve("iris").n_samples == 150


def test_stratified_folds_balance_and_partition():
    labels = np.repeat([1, 2, 3], [50, 30, 7])
    plan = D.stratified_folds(labels, 10, seed=3)
    sizes = np.bincount(plan.assignments)[1:]
    assert sizes.max() - sizes.min() <= 1
    for c in (1, 2, 3):
        per = np.bincount(plan.assignments[labels == c], minlength=11)[1:]
        assert per.max() - per.min() <= 1
    tests = np.concatenate([plan.split(f)[1] for f in range(1, 11)])
    np.testing.assert_array_equal(np.sort(tests), np.arange(labels.size))
    train, test = plan.split(4)
    assert not set(train) & set(test)


def test_stratified_folds_deterministic():
    labels = np.repeat([1, 2], [20, 13])
    a = D.stratified_folds(labels, 5, seed=11).assignments
    b = D.stratified_folds(labels, 5, seed=11).assignments
    np.testing.assert_array_equal(a, b)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(1, 4), min_size=12, max_size=80), st.integers(2, 12), st.integers(0, 2**31))
def test_fold_sizes_within_one(labels, k, seed):
    labels = np.array(labels)
    plan = D.stratified_folds(labels, k, seed)
    sizes = np.bincount(plan.assignments, minlength=k + 1)[1:]
    assert sizes.max() - sizes.min() <= 1
    for c in np.unique(labels):
        per = np.bincount(plan.assignments[labels == c], minlength=k + 1)[1:]
        assert per.max() - per.min() <= 1


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 30), st.integers(1, 5), st.integers(0, 2**31))
def test_normalized_values_in_unit_interval(n, nf, seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, nf)) * rng.uniform(0.1, 100, size=nf)
    ds = D.normalize(raw(x, np.arange(n) % 2 + 1))
    assert ds.features.min() >= 0.0 and ds.features.max() <= 1.0
