"""Empirical orthogonal functions by the snapshot (Gram-matrix) method."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from qgrom.errors import DomainError, NumericError, ShapeError


@dataclass(frozen=True)
class EofBasis:
    """Leading EOFs as columns of ``eofs`` (shape ``(n, m)``)."""

    eofs: np.ndarray
    eigenvalues: np.ndarray
    total_variance: float
    mean_removed: bool = False
    stored_mean: np.ndarray | None = None
    grid_shape: tuple[int, int] | None = None

    def __post_init__(self):
        eofs = np.asarray(self.eofs, dtype=float)
        lam = np.asarray(self.eigenvalues, dtype=float)
        if eofs.ndim != 2 or eofs.shape[1] != lam.shape[0]:
            raise ShapeError(f"eofs {eofs.shape} and eigenvalues {lam.shape} disagree")
        mean = np.zeros(eofs.shape[0]) if self.stored_mean is None else np.asarray(self.stored_mean, float)
        if mean.shape != (eofs.shape[0],):
            raise ShapeError("stored mean has the wrong length")
        for name, value in (("eofs", eofs), ("eigenvalues", lam), ("stored_mean", mean)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def n(self) -> int:
        return self.eofs.shape[0]

    @property
    def m(self) -> int:
        return self.eofs.shape[1]

    def truncate(self, m: int) -> "EofBasis":
        if not 0 <= m <= self.m:
            raise DomainError(f"cannot keep {m} of {self.m} modes")
        return EofBasis(
            self.eofs[:, :m], self.eigenvalues[:m], self.total_variance,
            self.mean_removed, self.stored_mean, self.grid_shape,
        )

    def explained_fraction(self) -> np.ndarray:
        """Cumulative captured-variance fraction after each mode."""
        if self.total_variance <= 0:
            return np.ones(self.m)
        return np.cumsum(self.eigenvalues) / self.total_variance


def compute_eof(snapshots, mean_removed: bool = False, grid_shape=None) -> EofBasis:
    """EOF analysis of ``K`` snapshots given as rows (``(K, n)`` or ``(K, ny, nx)``).

    Eigendecomposes the ``K x K`` Gram matrix ``X^T X / K`` and maps the
    eigenvectors back to space. The spatial patterns are passed through a QR
    factorisation so the basis is orthonormal to round-off even when trailing
    eigenvalues are numerically zero. Returns all ``min(K, n)`` modes.
    """
    X = np.asarray(snapshots, dtype=float)
    if X.ndim == 3:
        grid_shape = grid_shape or X.shape[1:]
        X = X.reshape(X.shape[0], -1)
    if X.ndim != 2:
        raise ShapeError(f"snapshots must be 2-D or 3-D, got shape {X.shape}")
    K, n = X.shape
    if K < 2:
        raise DomainError("EOF analysis needs at least two snapshots")
    if not np.all(np.isfinite(X)):
        raise NumericError("snapshots contain non-finite values")

    mean = X.mean(axis=0) if mean_removed else np.zeros(n)
    A = (X - mean).T  # n x K
    gram = A.T @ A / K
    lam, V = np.linalg.eigh(gram)
    order = np.argsort(lam)[::-1]
    r = min(K, n)
    lam = np.clip(lam[order][:r], 0.0, None)
    V = V[:, order[:r]]

    Q, R = np.linalg.qr(A @ V)
    signs = np.where(np.diag(R) < 0, -1.0, 1.0)
    E = Q * signs
    # deterministic sign: largest-magnitude entry of every EOF is positive
    idx = np.argmax(np.abs(E), axis=0)
    E = E * np.sign(E[idx, np.arange(r)])

    total = float(np.sum(A * A) / K)
    return EofBasis(E, lam, total, mean_removed, mean, tuple(grid_shape) if grid_shape else None)


def select_mode_count(eigenvalues, fraction: float) -> int:
    """Smallest ``m`` whose leading eigenvalues carry ``fraction`` of the total."""
    lam = np.asarray(eigenvalues, dtype=float)
    if not 0 < fraction <= 1:
        raise DomainError("variance fraction must lie in (0, 1]")
    total = lam.sum()
    if total <= 0:
        return 0
    cum = np.cumsum(lam) / total
    # guard against round-off leaving the last partial sum a hair below 1
    return int(min(np.searchsorted(cum, fraction - 1e-14) + 1, len(lam)))


def project(x, basis: EofBasis) -> np.ndarray:
    """Principal components ``E^T (x - mean)`` of one field or a stack of fields."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1 or (x.ndim == 2 and basis.grid_shape == x.shape)
    flat = x.reshape(1 if single else x.shape[0], -1)
    if flat.shape[1] != basis.n:
        raise ShapeError(f"field has {flat.shape[1]} nodes, basis has {basis.n}")
    z = (flat - basis.stored_mean) @ basis.eofs
    return z[0] if single else z


def reconstruct(z, basis: EofBasis) -> np.ndarray:
    """Field(s) ``mean + sum_i z_i E_i``; flat vectors, one row per PC vector."""
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != basis.m:
        raise ShapeError(f"expected {basis.m} PCs, got {z.shape[-1]}")
    return basis.stored_mean + z @ basis.eofs.T
