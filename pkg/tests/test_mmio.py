import io
import os

import numpy as np
import pytest

from opalg import ParseError, Unsupported
from opalg.mmio import (read_matrix_market, write_matrix_market,
                        write_matrix_market_array)
from opalg.problems import tridiagonal

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")


def test_read_tridiagonal_fixture():
    with open(os.path.join(DATA_DIR, "tri3.mtx")) as fh:
        data = read_matrix_market(fh)
    assert tuple(data.size) == (3, 3)
    assert data.nnz == 7
    dense = data.to_dense_array()
    np.testing.assert_array_equal(dense, tridiagonal(3).to_dense_array())


def test_symmetric_expansion():
    text = ("%%MatrixMarket matrix coordinate real symmetric\n"
            "3 3 2\n"
            "2 1 5.5\n"
            "3 3 1.0\n")
    data = read_matrix_market(io.StringIO(text))
    triples = set(zip(data.rows.tolist(), data.cols.tolist(), data.vals.tolist()))
    assert (1, 0, 5.5) in triples
    assert (0, 1, 5.5) in triples
    assert (2, 2, 1.0) in triples
    assert data.nnz == 3  # diagonal entries are not mirrored


def test_write_read_round_trip_byte_identical():
    buf = io.StringIO()
    write_matrix_market(buf, tridiagonal(4, -1.25, 2.0, -0.75))
    text = buf.getvalue()
    again = io.StringIO()
    write_matrix_market(again, read_matrix_market(io.StringIO(text)))
    assert again.getvalue() == text


def test_golden_file_round_trip():
    path = os.path.join(DATA_DIR, "tri3.mtx")
    with open(path) as fh:
        original = fh.read()
    data = read_matrix_market(io.StringIO(original))
    rewritten = io.StringIO()
    write_matrix_market(rewritten, data)
    assert rewritten.getvalue() == original


def test_one_based_conversion():
    text = ("%%MatrixMarket matrix coordinate real general\n"
            "2 2 1\n"
            "2 2 3.0\n")
    data = read_matrix_market(io.StringIO(text))
    assert (data.rows[0], data.cols[0]) == (1, 1)


def test_parse_errors_carry_line_numbers():
    with pytest.raises(ParseError) as exc:
        read_matrix_market(io.StringIO("%%NotMatrixMarket\n1 1 1\n"))
    assert exc.value.line == 1

    bad_entry = ("%%MatrixMarket matrix coordinate real general\n"
                 "2 2 1\n"
                 "1 oops 3.0\n")
    with pytest.raises(ParseError) as exc:
        read_matrix_market(io.StringIO(bad_entry))
    assert exc.value.line == 3

    out_of_range = ("%%MatrixMarket matrix coordinate real general\n"
                    "2 2 1\n"
                    "5 1 3.0\n")
    with pytest.raises(ParseError) as exc:
        read_matrix_market(io.StringIO(out_of_range))
    assert exc.value.line == 3

    wrong_count = ("%%MatrixMarket matrix coordinate real general\n"
                   "2 2 3\n"
                   "1 1 3.0\n")
    with pytest.raises(ParseError):
        read_matrix_market(io.StringIO(wrong_count))


@pytest.mark.parametrize("header", [
    "%%MatrixMarket matrix coordinate complex general",
    "%%MatrixMarket matrix coordinate pattern general",
    "%%MatrixMarket matrix coordinate integer general",
    "%%MatrixMarket matrix coordinate real skew-symmetric",
    "%%MatrixMarket matrix coordinate real hermitian",
])
def test_unsupported_variants_rejected(header):
    with pytest.raises(Unsupported):
        read_matrix_market(io.StringIO(header + "\n1 1 1\n1 1 1.0\n"))


def test_comments_and_blank_lines_skipped():
    text = ("%%MatrixMarket matrix coordinate real general\n"
            "% a comment\n"
            "\n"
            "2 2 2\n"
            "% another\n"
            "1 1 1.0\n"
            "\n"
            "2 2 2.0\n")
    data = read_matrix_market(io.StringIO(text))
    assert data.nnz == 2


def test_array_format_column_major():
    text = ("%%MatrixMarket matrix array real general\n"
            "2 2\n"
            "1.0\n2.0\n3.0\n4.0\n")
    data = read_matrix_market(io.StringIO(text))
    np.testing.assert_array_equal(data.to_dense_array(), [[1.0, 3.0], [2.0, 4.0]])

    buf = io.StringIO()
    write_matrix_market_array(buf, [[1.0, 3.0], [2.0, 4.0]])
    again = read_matrix_market(io.StringIO(buf.getvalue()))
    np.testing.assert_array_equal(again.to_dense_array(), [[1.0, 3.0], [2.0, 4.0]])
