"""Grid projection, pointwise statistics and phase-space distances."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from qgrom.errors import DomainError, ShapeError


@dataclass
class FieldSeries:
    """Time-ordered single-layer fields, ``fields`` shaped ``(K, ny, nx)``.

    Fields are stored in units of 1/f0 (PV anomaly divided by f0).
    """

    times: np.ndarray
    fields: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.fields = np.asarray(self.fields, dtype=float)
        if self.fields.ndim != 3:
            raise ShapeError(f"fields must be (K, ny, nx), got {self.fields.shape}")
        if len(self.times) != len(self.fields):
            raise ShapeError("times and fields have different lengths")
        if np.any(np.diff(self.times) <= 0):
            raise DomainError("times must be strictly increasing")

    def __len__(self):
        return len(self.times)

    @property
    def shape(self) -> tuple[int, int]:
        return self.fields.shape[1:]

    def window(self, t_start: float, t_stop: float) -> "FieldSeries":
        """Records with ``t_start <= t < t_stop``."""
        sel = (self.times >= t_start) & (self.times < t_stop)
        return FieldSeries(self.times[sel], self.fields[sel])

    def matrix(self) -> np.ndarray:
        """Snapshots as rows, ``(K, ny*nx)``."""
        return self.fields.reshape(len(self), -1)


def subsample(fine: np.ndarray, coarse_n: int) -> np.ndarray:
    """Point-to-point projection of the last two axes onto a coarser grid."""
    fine = np.asarray(fine)
    n_f = fine.shape[-1]
    if fine.shape[-2] != n_f:
        raise ShapeError(f"expected square fields, got {fine.shape}")
    if coarse_n < 2 or coarse_n > n_f or (n_f - 1) % (coarse_n - 1):
        raise ShapeError(f"cannot project {n_f} nodes onto {coarse_n} point-to-point")
    r = (n_f - 1) // (coarse_n - 1)
    return fine[..., ::r, ::r].copy()


def _records(series) -> np.ndarray:
    arr = series.fields if isinstance(series, FieldSeries) else np.asarray(series, dtype=float)
    if len(arr) == 0:
        raise DomainError("empty series")
    return arr


def time_mean(series) -> np.ndarray:
    return _records(series).mean(axis=0)


def std_field(series) -> np.ndarray:
    """Pointwise population standard deviation."""
    arr = _records(series)
    if len(arr) < 2:
        raise DomainError("standard deviation needs at least two records")
    return arr.std(axis=0)


def l2_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Plain node-sum Euclidean distance (no area weighting)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ShapeError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.sum((a - b) ** 2)))


def mean_phase_distance(series) -> float:
    """Average distance of the records from the series time-mean."""
    arr = _records(series)
    centre = arr.mean(axis=0)
    d = np.sqrt(np.sum((arr - centre) ** 2, axis=tuple(range(1, arr.ndim))))
    return float(d.mean())
