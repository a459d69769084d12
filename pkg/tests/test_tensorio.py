import numpy as np
import pytest

from sparselect.errors import FormatError, ParseError, TruncationError, ValidationError
from sparselect.tensorio import (
    HEADER_SIZE,
    load_indices,
    load_labels,
    load_matrix_bin,
    load_matrix_csv,
    save_indices,
    save_labels,
    save_matrix_bin,
    save_matrix_csv,
)


def test_csv_basic(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("1.0,2.0\n3.0,4.0")
    np.testing.assert_array_equal(load_matrix_csv(path), [[1.0, 2.0], [3.0, 4.0]])


def test_csv_header_skip(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("x,y\n1,2")
    np.testing.assert_array_equal(load_matrix_csv(path, has_header=True), [[1.0, 2.0]])


def test_csv_ragged_row_names_line(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("1,2\n3")
    with pytest.raises(ParseError, match="line 2"):
        load_matrix_csv(path)


def test_csv_non_numeric_names_row_and_col(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("1,2\n3,oops")
    with pytest.raises(ParseError, match="line 2, column 2"):
        load_matrix_csv(path)


def test_csv_rejects_non_finite(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("1,nan\n")
    with pytest.raises(ValidationError):
        load_matrix_csv(path)


def test_csv_empty_file_gives_empty_matrix(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("")
    assert load_matrix_csv(path).shape == (0, 0)


def test_bin_round_trip_bit_identical(tmp_path):
    rng = np.random.default_rng(0)
    m = rng.standard_normal((7, 5))
    first = tmp_path / "a.spfm"
    second = tmp_path / "b.spfm"
    save_matrix_bin(m, first)
    save_matrix_bin(load_matrix_bin(first), second)
    assert first.read_bytes() == second.read_bytes()


def test_bin_empty_matrix_is_header_only(tmp_path):
    path = tmp_path / "e.spfm"
    save_matrix_bin(np.zeros((0, 0)), path)
    assert path.stat().st_size == HEADER_SIZE == 25
    assert load_matrix_bin(path).shape == (0, 0)


def test_bin_bad_magic(tmp_path):
    path = tmp_path / "bad.spfm"
    save_matrix_bin(np.eye(2), path)
    blob = bytearray(path.read_bytes())
    blob[:4] = b"XXXX"
    path.write_bytes(bytes(blob))
    with pytest.raises(FormatError, match="magic"):
        load_matrix_bin(path)


def test_bin_bad_version_and_dtype(tmp_path):
    path = tmp_path / "bad.spfm"
    save_matrix_bin(np.eye(2), path)
    blob = bytearray(path.read_bytes())
    blob[4] = 9
    path.write_bytes(bytes(blob))
    with pytest.raises(FormatError, match="version"):
        load_matrix_bin(path)
    blob[4] = 1
    blob[24] = 7
    path.write_bytes(bytes(blob))
    with pytest.raises(FormatError, match="dtype"):
        load_matrix_bin(path)


def test_bin_truncated_payload(tmp_path):
    path = tmp_path / "short.spfm"
    save_matrix_bin(np.eye(3), path)
    blob = path.read_bytes()
    path.write_bytes(blob[:-8])
    with pytest.raises(TruncationError):
        load_matrix_bin(path)


def test_bin_f32_storage_loads_as_float64(tmp_path):
    m = np.array([[1.5, -2.25], [0.0, 8.0]])  # exactly representable in f32
    path = tmp_path / "f32.spfm"
    save_matrix_bin(m, path, storage="f32")
    loaded = load_matrix_bin(path)
    assert loaded.dtype == np.float64
    np.testing.assert_array_equal(loaded, m)


def test_csv_then_bin_identical_values(tmp_path):
    rng = np.random.default_rng(1)
    m = rng.standard_normal((6, 4))
    csv_path = tmp_path / "m.csv"
    bin_path = tmp_path / "m.spfm"
    save_matrix_csv(m, csv_path)
    from_csv = load_matrix_csv(csv_path)
    save_matrix_bin(from_csv, bin_path)
    np.testing.assert_array_equal(load_matrix_bin(bin_path), from_csv)
    np.testing.assert_array_equal(from_csv, m)  # repr round-trips doubles


def test_labels_basic(tmp_path):
    path = tmp_path / "y.txt"
    path.write_text("0\n1\n1\n")
    np.testing.assert_array_equal(load_labels(path), [0, 1, 1])


def test_labels_empty(tmp_path):
    path = tmp_path / "y.txt"
    path.write_text("")
    assert load_labels(path).shape == (0,)


def test_labels_negative_names_line(tmp_path):
    path = tmp_path / "y.txt"
    path.write_text("0\n-1\n")
    with pytest.raises(ParseError, match="line 2"):
        load_labels(path)


def test_labels_non_integer(tmp_path):
    path = tmp_path / "y.txt"
    path.write_text("1.5\n")
    with pytest.raises(ParseError, match="line 1"):
        load_labels(path)


def test_indices_round_trip(tmp_path):
    path = tmp_path / "mask.txt"
    save_indices([0, 3, 17], path)
    np.testing.assert_array_equal(load_indices(path), [0, 3, 17])
