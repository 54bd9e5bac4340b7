import numpy as np
import pytest

from mukit.datagen import (
    CsvFormatError,
    CsvSchema,
    SyntheticSpec,
    balanced_subsample,
    gen_synthetic,
    load_csv,
    stream,
    write_csv,
)


def test_shapes_at_full_scale():
    X, y, beta = gen_synthetic(SyntheticSpec(n=10000, d=100))
    assert X.shape == (10000, 100) and y.shape == (10000,) and beta.shape == (100,)
    assert np.linalg.norm(beta) == pytest.approx(1.0)
    assert set(np.unique(y)) == {-1.0, 1.0}


def test_noise_free_labels_are_signs():
    X, y, beta = gen_synthetic(SyntheticSpec(n=500, d=5, seed=2, noise_std=0.0))
    np.testing.assert_array_equal(y, np.where(X @ beta > 0, 1.0, -1.0))


def test_label_balance():
    for seed in range(20):
        _, y, _ = gen_synthetic(SyntheticSpec(n=10000, d=100, seed=seed))
        assert 0.45 <= np.mean(y > 0) <= 0.55


def test_prefix_consistency():
    X1, y1, b1 = gen_synthetic(SyntheticSpec(n=300, d=4, seed=7))
    X2, y2, b2 = gen_synthetic(SyntheticSpec(n=100, d=4, seed=7))
    np.testing.assert_array_equal(X1[:100], X2)
    np.testing.assert_array_equal(y1[:100], y2)
    np.testing.assert_array_equal(b1, b2)


def test_fixed_beta_is_normalised():
    _, _, beta = gen_synthetic(SyntheticSpec(n=10, d=2, beta=(3.0, 4.0)))
    np.testing.assert_allclose(beta, [0.6, 0.8])


@pytest.mark.parametrize(
    "kwargs",
    [{"n": 0, "d": 2}, {"n": 2, "d": 0}, {"n": 2, "d": 2, "noise_std": -1.0}, {"n": 2, "d": 2, "beta": (1.0,)}],
)
def test_spec_validation(kwargs):
    with pytest.raises(ValueError):
        SyntheticSpec(**kwargs)


def test_zero_fixed_beta_rejected():
    with pytest.raises(ValueError):
        gen_synthetic(SyntheticSpec(n=3, d=2, beta=(0.0, 0.0)))


def test_streams_are_independent_and_reproducible():
    a = stream(3, "matrix").standard_normal(5)
    b = stream(3, "matrix").standard_normal(5)
    c = stream(3, "noise").standard_normal(5)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    with pytest.raises(ValueError):
        stream(3, "other")


def _labelled(n_pos, n_neg):
    y = np.concatenate([np.ones(n_pos), -np.ones(n_neg)])
    X = np.arange(2.0 * y.size).reshape(-1, 2)
    return X, y


def test_subsample_balanced():
    X, y = _labelled(10, 90)
    _, ys = balanced_subsample(X, y, 20)
    assert (np.sum(ys > 0), np.sum(ys < 0)) == (10, 10)


def test_subsample_keeps_all_scarce_positives():
    X, y = _labelled(5, 95)
    _, ys = balanced_subsample(X, y, 20)
    assert (np.sum(ys > 0), np.sum(ys < 0)) == (5, 15)


def test_subsample_scarce_negatives():
    X, y = _labelled(95, 5)
    _, ys = balanced_subsample(X, y, 20)
    assert (np.sum(ys > 0), np.sum(ys < 0)) == (15, 5)


def test_subsample_full_is_permutation():
    X, y = _labelled(30, 70)
    Xs, ys = balanced_subsample(X, y, 100, seed=1)
    order = np.argsort(Xs[:, 0])
    np.testing.assert_array_equal(Xs[order], X)
    np.testing.assert_array_equal(ys[order], y)
    assert not np.array_equal(Xs, X)


def test_subsample_rows_stay_with_labels():
    X, y = _labelled(30, 70)
    Xs, ys = balanced_subsample(X, y, 40, seed=2)
    idx = (Xs[:, 0] / 2).astype(int)
    np.testing.assert_array_equal(ys, y[idx])


def test_subsample_size_checked():
    X, y = _labelled(3, 3)
    with pytest.raises(ValueError):
        balanced_subsample(X, y, 7)
    with pytest.raises(ValueError):
        balanced_subsample(X, y, 0)


def test_csv_roundtrip_is_bit_exact(tmp_path):
    X, y, _ = gen_synthetic(SyntheticSpec(n=50, d=3, seed=1))
    X[0, 0] = 1e-300
    X[1, 1] = -123456789.123456789
    path = tmp_path / "data.csv"
    write_csv(path, X, y)
    X2, y2 = load_csv(path)
    assert X2.tobytes() == X.tobytes()
    np.testing.assert_array_equal(y2, y)


def test_csv_roundtrip_without_header(tmp_path):
    X, y, _ = gen_synthetic(SyntheticSpec(n=5, d=2))
    path = tmp_path / "d.tsv"
    write_csv(path, X, y, delimiter="\t", header=False)
    X2, y2 = load_csv(path, CsvSchema(delimiter="\t", has_header=False))
    np.testing.assert_array_equal(X2, X)


def test_csv_named_tokens(tmp_path):
    path = tmp_path / "small.csv"
    path.write_text("a,b,cls\n1.5,2,pos\n-1,0.25,neg\n")
    X, y = load_csv(path, CsvSchema(label_column="cls", positive_labels=("pos",), negative_labels=("neg",)))
    np.testing.assert_array_equal(X, [[1.5, 2.0], [-1.0, 0.25]])
    np.testing.assert_array_equal(y, [1.0, -1.0])


def test_csv_unknown_label_names_token_and_line(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,label\n1,1\n2,maybe\n")
    with pytest.raises(CsvFormatError, match=r"line 3.*'maybe'") as info:
        load_csv(path)
    assert info.value.line == 3


def test_csv_ragged_rows(tmp_path):
    path = tmp_path / "ragged.csv"
    path.write_text("a,b,label\n1,2,1\n3,-1\n")
    with pytest.raises(CsvFormatError, match="line 3"):
        load_csv(path)


def test_csv_numeric_feature_selection(tmp_path):
    path = tmp_path / "mixed.csv"
    path.write_text("id,x,colour,label\n1,0.5,red,1\n2,1.5,blue,-1\n")
    X, _ = load_csv(path, CsvSchema(feature_columns="numeric"))
    np.testing.assert_array_equal(X, [[1.0, 0.5], [2.0, 1.5]])
    X, _ = load_csv(path, CsvSchema(feature_columns=["x"]))
    np.testing.assert_array_equal(X, [[0.5], [1.5]])
    with pytest.raises(CsvFormatError, match="non-numeric"):
        load_csv(path)


def test_csv_schema_errors(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("a,label\n1,1\n")
    with pytest.raises(CsvFormatError):
        load_csv(path, CsvSchema(label_column="missing"))
    with pytest.raises(CsvFormatError):
        load_csv(path, CsvSchema(label_column=5))
    with pytest.raises(ValueError):
        CsvSchema(positive_labels=("1",), negative_labels=("1",))
    empty = tmp_path / "empty.csv"
    empty.write_text("a,label\n")
    with pytest.raises(CsvFormatError):
        load_csv(empty)
