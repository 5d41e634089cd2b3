"""Dense linear-algebra kernels for gradient subspace projection.

Vectors are 1-D float64 arrays of length ``d``.  A collection of per-sample
gradients is stored column-wise as a ``(d, k)`` array, one gradient per
column.  Everything here is plain numpy and free of hidden state, so results
are bit-reproducible for identical inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "OrthonormalBasis",
    "default_drop_tol",
    "qr_orthonormal_basis",
    "project_onto_complement",
    "least_squares_residual",
    "cosine",
]


def default_drop_tol(dim: int) -> float:
    """Default rank tolerance for a basis over vectors of length ``dim``."""
    return 1e-10 * math.sqrt(dim)


@dataclass(frozen=True)
class OrthonormalBasis:
    """Orthonormal basis of the span of a set of column vectors.

    ``q`` has shape ``(d, r)`` with orthonormal columns; ``r`` may be zero
    when every input column was dropped as numerically dependent (or the
    input had no columns).  ``drop_tol`` records the tolerance used when the
    basis was built.
    """

    q: np.ndarray
    drop_tol: float

    @property
    def dim(self) -> int:
        return self.q.shape[0]

    @property
    def rank(self) -> int:
        return self.q.shape[1]


def _check_vector(v, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] < 1:
        raise ValueError(f"{name} must be a 1-D vector with at least one entry, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite entries")
    return v


def _check_matrix(g, name: str) -> np.ndarray:
    g = np.asarray(g, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] < 1 or g.shape[1] < 1:
        raise ValueError(f"{name} must be a (d, k) matrix with d, k >= 1, got shape {g.shape}")
    if not np.all(np.isfinite(g)):
        raise ValueError(f"{name} contains non-finite entries")
    return g


def qr_orthonormal_basis(g: np.ndarray, tol: float | None = None) -> OrthonormalBasis:
    """Orthonormal basis for the column span of ``g``.

    Modified Gram-Schmidt over the columns in left-to-right order, with one
    reorthogonalization pass per column for numerical robustness.  A column
    whose residual norm after orthogonalization is at most
    ``tol * max(norm(column), 1)`` is dropped, so near-dependent columns are
    discarded deterministically (earlier columns win).

    Parameters
    ----------
    g : (d, k) array, columns are the vectors to span.
    tol : positive rank tolerance; defaults to ``default_drop_tol(d)``.
    """
    g = _check_matrix(g, "g")
    d = g.shape[0]
    if tol is None:
        tol = default_drop_tol(d)
    if not (tol > 0.0):
        raise ValueError(f"tol must be positive, got {tol}")

    accepted: list[np.ndarray] = []
    for j in range(g.shape[1]):
        v = g[:, j].copy()
        orig_norm = float(np.linalg.norm(v))
        # two orthogonalization sweeps ("twice is enough")
        for _ in range(2):
            for q in accepted:
                v -= (q @ v) * q
        res_norm = float(np.linalg.norm(v))
        if res_norm <= tol * max(orig_norm, 1.0):
            continue
        accepted.append(v / res_norm)

    if accepted:
        q_mat = np.column_stack(accepted)
    else:
        q_mat = np.zeros((d, 0))
    return OrthonormalBasis(q=q_mat, drop_tol=float(tol))


def project_onto_complement(v: np.ndarray, basis: OrthonormalBasis) -> np.ndarray:
    """Component of ``v`` orthogonal to every basis vector.

    Returns ``v - sum_i <v, q_i> q_i``.  The subtraction is applied twice to
    keep the residual inner products at roundoff level even when ``v`` lies
    almost entirely inside the span.  A rank-0 basis returns ``v`` unchanged.
    """
    v = _check_vector(v, "v")
    if basis.dim != v.shape[0]:
        raise ValueError(f"dimension mismatch: v has length {v.shape[0]}, basis has dim {basis.dim}")
    if basis.rank == 0:
        return v.copy()
    q = basis.q
    out = v - q @ (q.T @ v)
    out -= q @ (q.T @ out)
    return out


def least_squares_residual(v: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Residual of the least-squares fit of ``v`` by the columns of ``g``.

    Solves the normal equations ``(g^T g + 1e-12 I) c = g^T v`` and returns
    ``v - g c``.  This is an independent oracle for the QR projection path:
    for full-rank ``g`` the two agree up to roundoff, but no code is shared.
    """
    v = _check_vector(v, "v")
    g = _check_matrix(g, "g")
    if g.shape[0] != v.shape[0]:
        raise ValueError(f"dimension mismatch: v has length {v.shape[0]}, g has {g.shape[0]} rows")
    gram = g.T @ g + 1e-12 * np.eye(g.shape[1])
    coef = np.linalg.solve(gram, g.T @ v)
    return v - g @ coef


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine of the angle between two vectors; 0.0 if either has zero norm."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(u @ v) / (nu * nv)
