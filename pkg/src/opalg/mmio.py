"""Matrix Market exchange format.

Reads ``coordinate`` and ``array`` files with ``real`` values and ``general``
or ``symmetric`` structure; everything else (complex/pattern/integer fields,
skew-symmetric/hermitian structure) is rejected as unsupported. Written files
are canonical: coordinate/general, 1-based, entries sorted by (row, col), one
header line, so write(read(f)) is byte-identical on canonical files.
"""

from __future__ import annotations

import numpy as np

from .base import Dim2
from .errors import ParseError, Unsupported
from .formats import MatrixData

_HEADER_PREFIX = "%%MatrixMarket"
_WRITE_HEADER = "%%MatrixMarket matrix coordinate real general"


def _parse_header(line):
    parts = line.strip().split()
    if len(parts) != 5 or parts[0] != _HEADER_PREFIX or parts[1].lower() != "matrix":
        raise ParseError("expected '%%MatrixMarket matrix <format> <field> "
                         "<symmetry>' header", line=1)
    fmt, field, symmetry = (p.lower() for p in parts[2:])
    if fmt not in ("coordinate", "array"):
        raise ParseError(f"unknown format {fmt!r}", line=1)
    if field != "real":
        raise Unsupported(f"field {field!r} is not supported (only 'real')")
    if symmetry not in ("general", "symmetric"):
        raise Unsupported(f"symmetry {symmetry!r} is not supported "
                          "(only 'general'/'symmetric')")
    return fmt, field, symmetry


def read_matrix_market(stream) -> MatrixData:
    """Parse a Matrix Market stream into coordinate data.

    1-based indices become 0-based; symmetric files expand the off-diagonal
    mirror entries. ``array`` files are read column-major into dense triples.
    """
    lines = stream.read().splitlines()
    if not lines:
        raise ParseError("empty file", line=1)
    fmt, _, symmetry = _parse_header(lines[0])

    lineno = 1
    body = None
    for i in range(1, len(lines)):
        stripped = lines[i].strip()
        if stripped and not stripped.startswith("%"):
            body = i
            break
    if body is None:
        raise ParseError("missing size line", line=len(lines))

    size_parts = lines[body].split()
    lineno = body + 1
    if fmt == "coordinate":
        if len(size_parts) != 3:
            raise ParseError("coordinate size line needs 'rows cols nnz'",
                             line=lineno)
        try:
            rows, cols, nnz = (int(p) for p in size_parts)
        except ValueError:
            raise ParseError("malformed size line", line=lineno) from None
        return _read_coordinate(lines, body + 1, rows, cols, nnz, symmetry)

    if len(size_parts) != 2:
        raise ParseError("array size line needs 'rows cols'", line=lineno)
    try:
        rows, cols = (int(p) for p in size_parts)
    except ValueError:
        raise ParseError("malformed size line", line=lineno) from None
    return _read_array(lines, body + 1, rows, cols, symmetry)


def _read_coordinate(lines, start, rows, cols, nnz, symmetry):
    ri, ci, vals = [], [], []
    count = 0
    for idx in range(start, len(lines)):
        stripped = lines[idx].strip()
        if not stripped or stripped.startswith("%"):
            continue
        parts = stripped.split()
        if len(parts) != 3:
            raise ParseError("entry needs 'row col value'", line=idx + 1)
        try:
            r, c, v = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise ParseError("malformed entry", line=idx + 1) from None
        if not (1 <= r <= rows and 1 <= c <= cols):
            raise ParseError(f"index ({r},{c}) outside {rows}x{cols}",
                             line=idx + 1)
        ri.append(r - 1)
        ci.append(c - 1)
        vals.append(v)
        if symmetry == "symmetric" and r != c:
            ri.append(c - 1)
            ci.append(r - 1)
            vals.append(v)
        count += 1
    if count != nnz:
        raise ParseError(f"expected {nnz} entries, found {count}",
                         line=len(lines))
    return MatrixData(Dim2(rows, cols), ri, ci, vals)


def _read_array(lines, start, rows, cols, symmetry):
    if symmetry == "symmetric":
        raise Unsupported("symmetric array files are not supported")
    values = []
    for idx in range(start, len(lines)):
        stripped = lines[idx].strip()
        if not stripped or stripped.startswith("%"):
            continue
        try:
            values.append(float(stripped.split()[0]))
        except ValueError:
            raise ParseError("malformed array value", line=idx + 1) from None
    if len(values) != rows * cols:
        raise ParseError(f"expected {rows * cols} values, found {len(values)}",
                         line=len(lines))
    dense = np.asarray(values).reshape((cols, rows)).T  # column-major
    return MatrixData.from_dense_array(dense, drop_zeros=False)


def write_matrix_market(stream, data: MatrixData):
    """Write coordinate/real/general with 1-based sorted entries."""
    data = data.canonicalize()
    stream.write(_WRITE_HEADER + "\n")
    stream.write(f"{data.size.rows} {data.size.cols} {data.nnz}\n")
    for r, c, v in zip(data.rows, data.cols, data.vals):
        stream.write(f"{int(r) + 1} {int(c) + 1} {float(v)!r}\n")


def write_matrix_market_array(stream, dense_array):
    """Write a dense matrix in array/real/general form (column-major values)."""
    arr = np.asarray(dense_array, dtype=np.float64)
    stream.write("%%MatrixMarket matrix array real general\n")
    stream.write(f"{arr.shape[0]} {arr.shape[1]}\n")
    for v in arr.T.reshape(-1):
        stream.write(f"{float(v)!r}\n")


def read_matrix_market_file(path) -> MatrixData:
    with open(path, "r", encoding="ascii") as fh:
        return read_matrix_market(fh)
