"""Symmetric sparse matrices in CSR form at binary64 or binary32 precision.

Both halves of every off-diagonal entry are stored, column indices are
sorted within each row, and an explicit diagonal entry is required in every
row.  Matrix-vector products run entirely in the arithmetic of the stored
precision: a binary32 matrix multiplied by a binary32 vector accumulates in
binary32, in storage order along each row.  Matrices and vectors are
treated as immutable after construction, so they are safe to share.
"""

from __future__ import annotations

from typing import Iterable

import numpy as np
import scipy.sparse

from .errors import (
    AsymmetricInputError,
    DimensionMismatchError,
    DuplicateEntryError,
    MatrixMarketParseError,
    MissingDiagonalError,
    PrecisionMismatchError,
    SinglePrecisionOverflowError,
)

__all__ = [
    "SparseSymMatrix",
    "from_coordinates",
    "spmv",
    "downcast",
    "downcast_vector",
    "upcast_vector",
    "read_matrix_market",
    "write_matrix_market",
]

_VALUE_DTYPES = (np.float32, np.float64)


class SparseSymMatrix:
    """Square symmetric matrix stored in CSR with full (two-sided) structure.

    Attributes
    ----------
    row_starts : int64 array, length n + 1
    col_indices : int64 array, length nnz, strictly increasing per row
    values : float64 or float32 array, length nnz
    """

    __slots__ = ("row_starts", "col_indices", "values", "_csr", "_diag")

    def __init__(self, row_starts, col_indices, values, validate: bool = True):
        row_starts = np.ascontiguousarray(row_starts, dtype=np.int64)
        col_indices = np.ascontiguousarray(col_indices, dtype=np.int64)
        values = np.ascontiguousarray(values)
        if values.dtype not in _VALUE_DTYPES:
            values = values.astype(np.float64)
        self.row_starts = row_starts
        self.col_indices = col_indices
        self.values = values
        for arr in (row_starts, col_indices, values):
            arr.setflags(write=False)
        n = self.n
        self._csr = scipy.sparse.csr_matrix(
            (values, col_indices, row_starts), shape=(n, n)
        )
        self._diag = None
        if validate:
            self._validate()

    @property
    def n(self) -> int:
        return self.row_starts.size - 1

    @property
    def nnz(self) -> int:
        return self.col_indices.size

    @property
    def dtype(self):
        return self.values.dtype

    @property
    def precision(self) -> str:
        return "binary32" if self.dtype == np.float32 else "binary64"

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    def diagonal(self) -> np.ndarray:
        """Dense copy of the diagonal, in storage precision."""
        if self._diag is None:
            self._diag = self._csr.diagonal()
            self._diag.setflags(write=False)
        return self._diag

    def row_lengths(self) -> np.ndarray:
        return np.diff(self.row_starts)

    def toarray(self) -> np.ndarray:
        return self._csr.toarray()

    def __matmul__(self, x) -> np.ndarray:
        return spmv(self, x)

    def __repr__(self) -> str:
        return f"SparseSymMatrix(n={self.n}, nnz={self.nnz}, {self.precision})"

    def _validate(self) -> None:
        n, m = self.n, self.nnz
        rs, cols = self.row_starts, self.col_indices
        if n < 1:
            raise ValueError("matrix dimension must be at least 1")
        if rs[0] != 0 or rs[-1] != m or np.any(np.diff(rs) < 0):
            raise ValueError("row_starts must be nondecreasing from 0 to nnz")
        if m and (cols.min() < 0 or cols.max() >= n):
            raise IndexError("column index out of range")
        row_of = np.repeat(np.arange(n), np.diff(rs))
        if m > 1:
            same_row = row_of[1:] == row_of[:-1]
            if np.any(same_row & (cols[1:] == cols[:-1])):
                raise DuplicateEntryError("repeated (row, col) position")
            if np.any(same_row & (cols[1:] < cols[:-1])):
                raise ValueError("column indices not sorted within a row")
        transposed = self._csr.T.tocsr()
        transposed.sort_indices()
        if not (
            np.array_equal(transposed.indptr, rs)
            and np.array_equal(transposed.indices, cols)
        ):
            raise AsymmetricInputError("structure is not symmetric")
        width = self.values.dtype.itemsize
        bits = np.dtype(f"u{width}")
        if not np.array_equal(self.values.view(bits), transposed.data.view(bits)):
            raise AsymmetricInputError("mirrored entries differ in value")
        diag_mask = cols == row_of
        if np.any(np.diff(rs) == 0) or not np.all(
            np.add.reduceat(diag_mask, rs[:-1]) == 1
        ):
            raise MissingDiagonalError("every row needs an explicit diagonal entry")


def from_coordinates(
    triplets: Iterable[tuple[int, int, float]],
    n: int,
    mirror: bool = False,
    dtype=np.float64,
) -> SparseSymMatrix:
    """Build a matrix from (row, col, value) triplets.

    The input must contain both symmetric halves of each off-diagonal entry,
    or ``mirror=True`` to add the missing (col, row, value) copies.
    Duplicated positions are an error rather than being summed.
    """
    triplets = list(triplets)
    if not triplets:
        raise ValueError("at least one triplet is required")
    rows = np.fromiter((t[0] for t in triplets), dtype=np.int64, count=len(triplets))
    cols = np.fromiter((t[1] for t in triplets), dtype=np.int64, count=len(triplets))
    vals = np.fromiter((t[2] for t in triplets), dtype=dtype, count=len(triplets))
    if rows.min() < 0 or cols.min() < 0 or rows.max() >= n or cols.max() >= n:
        raise IndexError(f"triplet index out of range for n={n}")
    if mirror:
        off = rows != cols
        rows, cols = (
            np.concatenate([rows, cols[off]]),
            np.concatenate([cols, rows[off]]),
        )
        vals = np.concatenate([vals, vals[off]])
    order = np.lexsort((cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    dup = (rows[1:] == rows[:-1]) & (cols[1:] == cols[:-1])
    if np.any(dup):
        k = int(np.nonzero(dup)[0][0])
        raise DuplicateEntryError(f"position ({rows[k]}, {cols[k]}) appears twice")
    row_starts = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n), out=row_starts[1:])
    return SparseSymMatrix(row_starts, cols, vals)


def spmv(A: SparseSymMatrix, x: np.ndarray) -> np.ndarray:
    """y = A x in the arithmetic of A's storage precision, O(nnz)."""
    x = np.asarray(x)
    if x.ndim != 1 or x.size != A.n:
        raise DimensionMismatchError(f"expected vector of length {A.n}")
    if x.dtype != A.dtype:
        raise PrecisionMismatchError(
            f"vector is {x.dtype}, matrix stores {A.dtype}"
        )
    return A._csr @ x


def downcast(A: SparseSymMatrix) -> SparseSymMatrix:
    """Round every value to the nearest binary32; structure is shared.

    Raises SinglePrecisionOverflowError if any finite value lands outside
    the binary32 range, which means the reduced-precision stage cannot run.
    """
    if A.dtype == np.float32:
        raise ValueError("matrix is already binary32")
    with np.errstate(over="ignore"):
        values32 = A.values.astype(np.float32)
    if np.any(np.isinf(values32) & np.isfinite(A.values)):
        raise SinglePrecisionOverflowError("value exceeds binary32 range")
    return SparseSymMatrix(A.row_starts, A.col_indices, values32, validate=False)


def downcast_vector(x: np.ndarray) -> np.ndarray:
    """Round a binary64 vector to binary32, rejecting overflow to infinity."""
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(over="ignore"):
        x32 = x.astype(np.float32)
    if np.any(np.isinf(x32) & np.isfinite(x)):
        raise SinglePrecisionOverflowError("component exceeds binary32 range")
    return x32


def upcast_vector(x: np.ndarray) -> np.ndarray:
    """Exact embedding of a binary32 vector into binary64."""
    x = np.asarray(x)
    if x.dtype != np.float32:
        raise PrecisionMismatchError("upcast expects a binary32 vector")
    return x.astype(np.float64)


def write_matrix_market(A: SparseSymMatrix, path) -> None:
    """Write the lower triangle in coordinate format with a symmetric header.

    Values carry 17 significant digits, so binary64 round-trips exactly.
    """
    rs, cols, vals = A.row_starts, A.col_indices, A.values
    row_of = np.repeat(np.arange(A.n), np.diff(rs))
    keep = cols <= row_of
    lines = ["%%MatrixMarket matrix coordinate real symmetric"]
    lines.append(f"{A.n} {A.n} {int(keep.sum())}")
    for i, j, v in zip(row_of[keep], cols[keep], vals[keep]):
        lines.append(f"{i + 1} {j + 1} {v:.17g}")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def read_matrix_market(path) -> SparseSymMatrix:
    """Read a coordinate-format file with a symmetric or general header.

    Symmetric files are mirrored; general files must already contain both
    halves and are validated for symmetry.
    """
    with open(path, "r", encoding="ascii", errors="replace") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise MatrixMarketParseError("empty file", 1)
    header = lines[0].split()
    if (
        len(header) != 5
        or header[0].lower() != "%%matrixmarket"
        or [w.lower() for w in header[1:4]] != ["matrix", "coordinate", "real"]
        or header[4].lower() not in ("symmetric", "general")
    ):
        raise MatrixMarketParseError(
            "expected '%%MatrixMarket matrix coordinate real "
            "{symmetric|general}' header",
            1,
        )
    symmetric = header[4].lower() == "symmetric"

    body = (
        (lineno, line)
        for lineno, line in enumerate(lines[1:], start=2)
        if line.strip() and not line.lstrip().startswith("%")
    )
    try:
        lineno, size_line = next(body)
    except StopIteration:
        raise MatrixMarketParseError("missing size line", len(lines) + 1) from None
    parts = size_line.split()
    if len(parts) != 3:
        raise MatrixMarketParseError("size line needs 'rows cols entries'", lineno)
    try:
        n_rows, n_cols, n_entries = (int(p) for p in parts)
    except ValueError:
        raise MatrixMarketParseError("size line is not integral", lineno) from None
    if n_rows != n_cols or n_rows < 1 or n_entries < 0:
        raise MatrixMarketParseError("matrix must be square and nonempty", lineno)

    triplets = []
    for lineno, line in body:
        if len(triplets) == n_entries:
            raise MatrixMarketParseError("more entries than the size line declares", lineno)
        parts = line.split()
        if len(parts) != 3:
            raise MatrixMarketParseError("entry needs 'row col value'", lineno)
        try:
            i, j = int(parts[0]), int(parts[1])
            v = float(parts[2])
        except ValueError:
            raise MatrixMarketParseError("malformed entry", lineno) from None
        if not (1 <= i <= n_rows and 1 <= j <= n_cols):
            raise MatrixMarketParseError("index out of range", lineno)
        triplets.append((i - 1, j - 1, v))
    if len(triplets) != n_entries:
        raise MatrixMarketParseError(
            f"expected {n_entries} entries, found {len(triplets)}", len(lines) + 1
        )
    return from_coordinates(triplets, n_rows, mirror=symmetric)
