"""Pfaffians of real antisymmetric matrices.

The main routine reduces the matrix to tridiagonal form with the
Parlett-Reid congruence (Gaussian elimination with symmetric pivoting),
which costs O(n^3) and needs no complex arithmetic.  The brute-force
expansion is kept alongside as an oracle for small orders.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import InputError, StructureError

__all__ = [
    "pfaffian",
    "pfaffian_cond",
    "pfaffian_quotient",
    "quotient_matrix",
    "pfaffian_minor_expand",
    "pfaffian_brute",
    "MAX_EXPAND_ORDER",
]

MAX_EXPAND_ORDER = 12


def _as_antisymmetric(A, check: bool = True) -> np.ndarray:
    A = np.array(A, dtype=float, copy=True)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise StructureError(f"expected a square matrix, got shape {A.shape}")
    if A.shape[0] % 2:
        raise StructureError(f"Pfaffian needs even order, got {A.shape[0]}")
    if not np.all(np.isfinite(A)):
        raise InputError("matrix has non-finite entries")
    if check and A.size:
        scale = max(1.0, float(np.max(np.abs(A))))
        if np.max(np.abs(A + A.T)) > 1e-12 * scale:
            raise InputError("matrix is not antisymmetric")
    return A


def pfaffian(A, *, check: bool = True) -> float:
    """Pfaffian of a real antisymmetric matrix of even order.

    The sign convention is ``pfaffian([[0, a], [-a, 0]]) == a``.

    Parameters
    ----------
    A : array_like, shape (2n, 2n)
        Antisymmetric matrix.  Only the strict upper triangle is trusted
        numerically, but the full matrix is used by the elimination.
    check : bool
        Verify antisymmetry before reducing.

    Returns
    -------
    float
    """
    A = _as_antisymmetric(A, check)
    n = A.shape[0]
    if n == 0:
        return 1.0
    result = 1.0
    for k in range(0, n - 1, 2):
        # pivot: largest entry in column k below the diagonal
        kp = k + 1 + int(np.argmax(np.abs(A[k + 1:, k])))
        if kp != k + 1:
            A[[k + 1, kp], :] = A[[kp, k + 1], :]
            A[:, [k + 1, kp]] = A[:, [kp, k + 1]]
            result = -result
        pivot = A[k, k + 1]
        if pivot == 0.0:
            return 0.0
        result *= pivot
        if k + 2 < n:
            tau = A[k, k + 2:] / pivot
            col = A[k + 2:, k + 1]
            A[k + 2:, k + 2:] += np.outer(tau, col) - np.outer(col, tau)
    return float(result)


def pfaffian_cond(A) -> tuple[float, float]:
    """Pfaffian together with the 2-norm condition number of ``A``.

    Near-singular matrices are not an error here: intensities of a point
    process legitimately approach zero, so the value is returned and the
    caller decides what to do with a large condition number.
    """
    A = _as_antisymmetric(A)
    if A.shape[0] == 0:
        return 1.0, 1.0
    return pfaffian(A, check=False), float(np.linalg.cond(A))


def quotient_matrix(a: Sequence[float]) -> np.ndarray:
    """Antisymmetric matrix with ``A[i, j] = a[i] / a[j]`` for ``i < j``."""
    a = np.asarray(a, dtype=float)
    M = np.triu(np.divide.outer(a, a), k=1)
    return M - M.T


def pfaffian_quotient(a: Sequence[float]) -> float:
    """Closed form of the Pfaffian of :func:`quotient_matrix`.

    Equals ``(a[0] * a[2] * ...) / (a[1] * a[3] * ...)`` (zero-based).
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 1 or a.size % 2:
        raise StructureError("need an even number of entries")
    if not np.all(np.isfinite(a)):
        raise InputError("entries must be finite")
    if np.any(a == 0.0):
        raise InputError("entries must be nonzero")
    return float(np.prod(a[0::2] / a[1::2]))


def pfaffian_minor_expand(A, row: int = 0) -> list[tuple[int, float]]:
    """Cofactor expansion of the Pfaffian along one row.

    Returns one ``(sign, sub_pfaffian)`` pair for every column ``j != row``,
    in increasing ``j``, such that
    ``sum(sign * A[row, j] * sub)`` equals the Pfaffian.  Sub-Pfaffians are
    evaluated recursively by the same expansion, so this is exponential in
    the order and refused beyond ``MAX_EXPAND_ORDER``.
    """
    A = _as_antisymmetric(A)
    n = A.shape[0]
    if n > MAX_EXPAND_ORDER:
        raise StructureError(
            f"expansion limited to order {MAX_EXPAND_ORDER}, got {n}")
    if not 0 <= row < n:
        raise InputError(f"row {row} out of range for order {n}")
    terms = []
    for j in range(n):
        if j == row:
            continue
        sign = -1 if (row + j + 1 + (1 if row > j else 0)) % 2 else 1
        keep = [k for k in range(n) if k != row and k != j]
        terms.append((sign, _brute(A[np.ix_(keep, keep)])))
    return terms


def _brute(A: np.ndarray) -> float:
    n = A.shape[0]
    if n == 0:
        return 1.0
    total = 0.0
    rest = list(range(1, n))
    for idx, j in enumerate(rest):
        if A[0, j] == 0.0:
            continue
        keep = rest[:idx] + rest[idx + 1:]
        sign = 1.0 if idx % 2 == 0 else -1.0
        total += sign * A[0, j] * _brute(A[np.ix_(keep, keep)])
    return total


def pfaffian_brute(A) -> float:
    """Pfaffian by recursive expansion (order at most ``MAX_EXPAND_ORDER``)."""
    A = _as_antisymmetric(A)
    if A.shape[0] > MAX_EXPAND_ORDER:
        raise StructureError(
            f"expansion limited to order {MAX_EXPAND_ORDER}, got {A.shape[0]}")
    return float(_brute(A))
