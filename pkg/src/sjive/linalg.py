"""Dense-matrix primitives: norms, truncated SVD, QR, row-space projections.

Every function here is pure and deterministic. Singular vectors follow a
fixed sign convention (largest-magnitude entry of each left vector is made
positive, the paired right vector flips with it) so repeated calls return
bit-identical output.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegeneracyError, InputError, RankError, ShapeError

# Singular values below RANK_TOL * sigma_max are treated as zero.
RANK_TOL = 1e-10


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-d float array, rejecting non-finite or empty input."""
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ShapeError(f"{name} must have at least one row and one column, got {arr.shape}")
    if not np.isfinite(arr).all():
        raise InputError(f"{name} contains non-finite entries")
    return arr


def frobenius_sq(a) -> float:
    """Sum of squared entries of a matrix."""
    arr = as_matrix(a)
    return float(np.sum(arr * arr))


@dataclass(frozen=True)
class SvdFactors:
    """Rank-r factors: left (m x r), singvals (r,) nonincreasing, right (n x r)."""

    left: np.ndarray
    singvals: np.ndarray
    right: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.left * self.singvals) @ self.right.T


def _signed_svd(arr: np.ndarray):
    """Full thin SVD with stable descending order and fixed signs."""
    u, s, vt = np.linalg.svd(arr, full_matrices=False)
    order = np.argsort(-s, kind="stable")
    u, s, vt = u[:, order].copy(), s[order].copy(), vt[order].copy()
    for j in range(u.shape[1]):
        i = int(np.argmax(np.abs(u[:, j])))
        if u[i, j] < 0:
            u[:, j] = -u[:, j]
            vt[j, :] = -vt[j, :]
    return u, s, vt


def svd_truncated(a, r: int) -> SvdFactors:
    """Best rank-r approximation factors of a dense matrix.

    Raises RankError when r is outside 1..min(rows, cols) and InputError on
    non-finite entries.
    """
    arr = as_matrix(a)
    top = min(arr.shape)
    if not 1 <= r <= top:
        raise RankError(f"rank {r} outside valid range 1..{top} for shape {arr.shape}")
    u, s, vt = _signed_svd(arr)
    return SvdFactors(left=u[:, :r], singvals=s[:r], right=vt[:r].T)


def qr_orthonormalize(a) -> np.ndarray:
    """Orthonormal basis of the column space of a full-column-rank matrix.

    Signs are fixed so the triangular factor has a positive diagonal.
    Raises DegeneracyError when the columns are linearly dependent.
    """
    arr = as_matrix(a)
    m, n = arr.shape
    if n > m:
        raise ShapeError(f"need cols <= rows, got shape {arr.shape}")
    q, r = np.linalg.qr(arr)
    diag = np.diag(r)
    scale = np.max(np.abs(diag)) if diag.size else 0.0
    if scale == 0.0 or np.any(np.abs(diag) <= RANK_TOL * scale):
        raise DegeneracyError("input is rank-deficient; columns are linearly dependent")
    q = q * np.sign(diag)[None, :]
    return q


def row_space_basis(s, tol: float = RANK_TOL) -> np.ndarray:
    """Orthonormal basis (n x rank) of the row space of an r x n matrix."""
    arr = np.asarray(s, dtype=float)
    if arr.size == 0:
        return np.zeros((arr.shape[1] if arr.ndim == 2 else 0, 0))
    _, sv, vt = np.linalg.svd(arr, full_matrices=False)
    keep = sv > tol * sv[0] if sv.size and sv[0] > 0 else np.zeros(sv.shape, dtype=bool)
    return vt[keep].T


def proj_complement_rows(s) -> np.ndarray:
    """Projector onto the orthogonal complement of the row space of s.

    Returns the n x n symmetric idempotent matrix I - s^T (s s^T)^+ s; the
    pseudoinverse handles rank-deficient s, so a zero matrix maps to I.
    """
    arr = as_matrix(s)
    r, n = arr.shape
    if r > n:
        raise ShapeError(f"need r <= n for an r x n score matrix, got {arr.shape}")
    basis = row_space_basis(arr)
    return np.eye(n) - basis @ basis.T
