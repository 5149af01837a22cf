"""Dense tensors and the multilinear algebra the denoisers are built on.

Tensors are plain ``numpy.ndarray`` objects of dtype float64.  Modes are
0-based.  Whenever entries are linearized (reshapes, serialization) the first
index varies fastest, i.e. Fortran order.

Mode-n flattenings use a *cyclic* column order: the columns enumerate the
remaining modes ``n+1, ..., d-1, 0, ..., n-1`` with the first-listed mode
fastest.  This is the layout produced by rotating mode ``n`` to the front and
reshaping, which is how the stable-rank denoisers address each mode.
"""

from __future__ import annotations

from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

__all__ = [
    "DegenerateInputError",
    "SvdFactors",
    "as_tensor",
    "frobenius_norm",
    "inner_product",
    "transpose_q",
    "cyclic_order",
    "flatten",
    "fold",
    "n_mode_product",
    "multi_mode_product",
    "kronecker",
    "outer_product",
    "svd",
    "save_tensor",
    "load_tensor",
]


class DegenerateInputError(ValueError):
    """Raised when an operation is given an input it cannot act on (e.g. a zero tensor)."""


class SvdFactors(NamedTuple):
    """Thin SVD ``M = U @ diag(s) @ V.T`` with ``s`` non-increasing."""

    U: np.ndarray
    s: np.ndarray
    V: np.ndarray


def as_tensor(values, copy: bool = False) -> np.ndarray:
    """Validate ``values`` as a dense real tensor and return it as float64.

    Raises ``ValueError`` for non-finite entries or empty extents.
    """
    arr = np.array(values, dtype=np.float64) if copy else np.asarray(values, dtype=np.float64)
    if arr.ndim == 0:
        raise ValueError("a tensor needs at least one mode")
    if 0 in arr.shape:
        raise ValueError(f"all extents must be positive, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("tensor entries must be finite")
    return arr


def frobenius_norm(T: np.ndarray) -> float:
    return float(np.sqrt(np.sum(np.square(T))))


def inner_product(T: np.ndarray, S: np.ndarray) -> float:
    T = np.asarray(T)
    S = np.asarray(S)
    if T.shape != S.shape:
        raise ValueError(f"shape mismatch: {T.shape} vs {S.shape}")
    return float(np.vdot(T, S))


def _check_perm(q: Sequence[int], d: int) -> tuple[int, ...]:
    q = tuple(int(v) for v in q)
    if sorted(q) != list(range(d)):
        raise ValueError(f"{q} is not a permutation of 0..{d - 1}")
    return q


def transpose_q(T: np.ndarray, q: Sequence[int]) -> np.ndarray:
    """Permute the modes of ``T``: output mode ``k`` is input mode ``q[k]``.

    The result has shape ``(p[q[0]], ..., p[q[d-1]])``; transposing again by
    ``numpy.argsort(q)`` recovers ``T``.
    """
    q = _check_perm(q, np.ndim(T))
    return np.ascontiguousarray(np.transpose(T, q))


def cyclic_order(d: int, n: int) -> tuple[int, ...]:
    """Modes ``n, n+1, ..., d-1, 0, ..., n-1``."""
    return tuple((n + k) % d for k in range(d))


def _check_mode(n: int, d: int) -> int:
    if not 0 <= n < d:
        raise ValueError(f"mode {n} out of range for an order-{d} tensor")
    return n


def flatten(T: np.ndarray, n: int) -> np.ndarray:
    """Mode-``n`` flattening, shape ``p_n x (N / p_n)``, cyclic column order."""
    T = np.asarray(T)
    n = _check_mode(n, T.ndim)
    rotated = np.transpose(T, cyclic_order(T.ndim, n))
    return np.reshape(rotated, (T.shape[n], -1), order="F")


def fold(M: np.ndarray, shape: Sequence[int], n: int) -> np.ndarray:
    """Inverse of :func:`flatten`."""
    shape = tuple(int(p) for p in shape)
    n = _check_mode(n, len(shape))
    order = cyclic_order(len(shape), n)
    rotated_shape = tuple(shape[k] for k in order)
    M = np.asarray(M)
    if M.shape != (shape[n], int(np.prod(shape)) // shape[n]):
        raise ValueError(f"matrix of shape {M.shape} cannot fold into {shape} along mode {n}")
    rotated = np.reshape(M, rotated_shape, order="F")
    return np.transpose(rotated, np.argsort(order))


def n_mode_product(T: np.ndarray, A: np.ndarray, n: int) -> np.ndarray:
    """``T x_n A``: multiply every mode-``n`` fiber by ``A`` (``J x p_n``)."""
    T = np.asarray(T)
    A = np.asarray(A)
    n = _check_mode(n, T.ndim)
    if A.ndim != 2 or A.shape[1] != T.shape[n]:
        raise ValueError(f"matrix of shape {A.shape} does not act on mode {n} of extent {T.shape[n]}")
    out = np.tensordot(A, T, axes=([1], [n]))
    return np.moveaxis(out, 0, n)


def multi_mode_product(T: np.ndarray, matrices: Sequence[np.ndarray | None], transpose: bool = False) -> np.ndarray:
    """Apply ``T x_0 A_0 x_1 A_1 ...``; ``None`` entries skip a mode."""
    out = np.asarray(T)
    for n, A in enumerate(matrices):
        if A is None:
            continue
        out = n_mode_product(out, A.T if transpose else A, n)
    return out


def kronecker(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return np.kron(np.atleast_2d(A), np.atleast_2d(B))


def outer_product(T: np.ndarray, S: np.ndarray) -> np.ndarray:
    """Tensor of order ``d + e`` with entries ``t[i...] * s[j...]``."""
    return np.multiply.outer(np.asarray(T, dtype=np.float64), np.asarray(S, dtype=np.float64))


def svd(M: np.ndarray) -> SvdFactors:
    """Thin SVD.  ``numpy.linalg.LinAlgError`` propagates on non-convergence."""
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise ValueError("svd expects a matrix")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix entries must be finite")
    U, s, Vh = np.linalg.svd(M, full_matrices=False)
    return SvdFactors(U, s, Vh.T)


# -- serialization -----------------------------------------------------------
#
# Text container: first line "order,p_1,...,p_d", then one value per line in
# first-index-fastest order.  Values are written with 17 significant digits so
# a save/load round trip is exact.


def save_tensor(path: str | Path, T: np.ndarray) -> None:
    T = np.asarray(T, dtype=np.float64)
    path = Path(path)
    header = ",".join(str(v) for v in (T.ndim, *T.shape))
    with path.open("w") as fh:
        fh.write(header + "\n")
        np.savetxt(fh, np.ravel(T, order="F"), fmt="%.17g")


def load_tensor(path: str | Path) -> np.ndarray:
    path = Path(path)
    with path.open() as fh:
        header = fh.readline()
        fields = [int(v) for v in header.replace(" ", "").strip().split(",") if v]
        if not fields or fields[0] != len(fields) - 1:
            raise ValueError(f"{path}: malformed header {header.strip()!r}")
        shape = tuple(fields[1:])
        values = np.loadtxt(fh, dtype=np.float64, ndmin=1)
    if values.size != int(np.prod(shape)):
        raise ValueError(f"{path}: expected {int(np.prod(shape))} values, found {values.size}")
    return as_tensor(np.reshape(values, shape, order="F"))
