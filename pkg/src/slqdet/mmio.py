"""Matrix Market ingestion/export and the binary factor-file format.

Matrix Market support is deliberately strict: coordinate format, real values,
and a ``symmetric`` qualifier are required, and entries that contradict
symmetry are rejected rather than silently averaged.

Factor files store a low-rank-plus-identity operator as its (X, weights)
data, which is both smaller and more faithful than a materialized matrix for
large generated instances.  Layout (all little-endian):

    bytes 0..7    magic b"SLQDLRI1"
    uint64        n
    uint64        r
    float64       density   (generator metadata, 0 when unknown)
    int64         seed      (generator metadata, 0 when unknown)
    float64[r]    weights
    float64[n*r]  factors, row-major
"""

import struct

import numpy as np
import scipy.sparse as sp

from .errors import (
    BadConfigError,
    MatrixMarketInconsistentError,
    MatrixMarketNotSymmetricError,
    MatrixMarketParseError,
)
from .operators import LowRankPlusIdentityOperator, SparseOperator, SpdOperator

_FACTOR_MAGIC = b"SLQDLRI1"


def load_matrix_market(path) -> SparseOperator:
    """Read a symmetric real coordinate Matrix Market file.

    The stored triangle is mirrored, and explicitly doubled entries must agree
    exactly with their mirror images.
    """
    with open(path, "rt", encoding="ascii") as fh:
        header = fh.readline()
        if not header.startswith("%%MatrixMarket"):
            raise MatrixMarketParseError("missing %%MatrixMarket header")
        fields = header.strip().lower().split()
        if len(fields) != 5 or fields[1] != "matrix":
            raise MatrixMarketParseError(f"malformed header: {header.strip()!r}")
        _, _, fmt, field, symmetry = fields
        if fmt != "coordinate" or field != "real":
            raise MatrixMarketParseError("only 'coordinate real' files are supported")
        if symmetry != "symmetric":
            raise MatrixMarketNotSymmetricError(f"header declares {symmetry!r}, need 'symmetric'")

        size_line = None
        for line in fh:
            stripped = line.strip()
            if not stripped or stripped.startswith("%"):
                continue
            size_line = stripped
            break
        if size_line is None:
            raise MatrixMarketParseError("missing size line")
        parts = size_line.split()
        if len(parts) != 3:
            raise MatrixMarketParseError(f"malformed size line: {size_line!r}")
        try:
            nrows, ncols, nnz = (int(p) for p in parts)
        except ValueError as exc:
            raise MatrixMarketParseError(f"malformed size line: {size_line!r}") from exc
        if nrows != ncols:
            raise MatrixMarketParseError("matrix must be square")

        seen: dict[tuple[int, int], float] = {}
        count = 0
        for line in fh:
            stripped = line.strip()
            if not stripped or stripped.startswith("%"):
                continue
            parts = stripped.split()
            if len(parts) != 3:
                raise MatrixMarketParseError(f"malformed entry: {stripped!r}")
            try:
                i = int(parts[0])
                j = int(parts[1])
                val = float(parts[2])
            except ValueError as exc:
                raise MatrixMarketParseError(f"malformed entry: {stripped!r}") from exc
            if not (1 <= i <= nrows and 1 <= j <= ncols):
                raise MatrixMarketParseError(f"index out of range: {stripped!r}")
            if not np.isfinite(val):
                raise MatrixMarketParseError(f"non-finite value: {stripped!r}")
            key = (max(i, j) - 1, min(i, j) - 1)
            if key in seen and seen[key] != val:
                raise MatrixMarketInconsistentError(
                    f"entry ({i},{j}) contradicts an earlier value for its mirror")
            seen[key] = val
            count += 1
        if count != nnz:
            raise MatrixMarketParseError(f"size line promised {nnz} entries, found {count}")

    rows = np.fromiter((k[0] for k in seen), dtype=np.int64, count=len(seen))
    cols = np.fromiter((k[1] for k in seen), dtype=np.int64, count=len(seen))
    vals = np.fromiter(seen.values(), dtype=np.float64, count=len(seen))
    lower = sp.coo_matrix((vals, (rows, cols)), shape=(nrows, nrows)).tocsr()
    strict = sp.triu(lower.T, k=1)
    return SparseOperator(lower + strict)


def save_matrix_market(path, op: SpdOperator):
    """Write the lower triangle of a (materializable) operator."""
    dense = op.materialize()
    n = dense.shape[0]
    entries = []
    for i in range(n):
        for j in range(i + 1):
            if dense[i, j] != 0.0:
                entries.append((i + 1, j + 1, dense[i, j]))
    with open(path, "wt", encoding="ascii", newline="\n") as fh:
        fh.write("%%MatrixMarket matrix coordinate real symmetric\n")
        fh.write(f"{n} {n} {len(entries)}\n")
        for i, j, v in entries:
            fh.write(f"{i} {j} {v!r}\n")


def save_factor_file(path, op: LowRankPlusIdentityOperator):
    if not isinstance(op, LowRankPlusIdentityOperator):
        raise BadConfigError("factor files hold low-rank-plus-identity operators only")
    with open(path, "wb") as fh:
        fh.write(_FACTOR_MAGIC)
        fh.write(struct.pack("<QQdq", op.n, op.rank,
                             float(op.meta.get("density", 0.0)),
                             int(op.meta.get("seed", 0))))
        fh.write(np.ascontiguousarray(op.weights, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(op.factors, dtype="<f8").tobytes())


def load_factor_file(path) -> LowRankPlusIdentityOperator:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != _FACTOR_MAGIC:
            raise BadConfigError("not a factor file")
        n, r, density, seed = struct.unpack("<QQdq", fh.read(32))
        weights = np.frombuffer(fh.read(8 * r), dtype="<f8").astype(np.float64)
        factors = np.frombuffer(fh.read(8 * n * r), dtype="<f8").astype(np.float64)
    factors = factors.reshape(n, r)
    return LowRankPlusIdentityOperator(factors, weights,
                                       meta={"density": density, "seed": seed})


def is_factor_file(path) -> bool:
    try:
        with open(path, "rb") as fh:
            return fh.read(8) == _FACTOR_MAGIC
    except OSError:
        return False
