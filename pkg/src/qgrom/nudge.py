"""Euler integration of the reduced system with adaptive nudging.

The nudging term pulls the state toward the mean of its ``N`` nearest
training PC vectors; its strength ``eta`` is raised by ``eta_h`` whenever the
spread of the state components exceeds the largest spread seen in training
and lowered (never below zero) otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from qgrom.errors import ConfigurationError, DomainError, NumericError, ShapeError


@dataclass(frozen=True)
class NudgeConfig:
    neighbors: int = 5
    eta_h: float = 0.001
    eta0: float = 0.0
    dt: float = 1.0
    horizon: float = 0.0
    substeps: int = 1
    sigma_max: float | None = None
    fixed_eta: float | None = None
    index: str = "exhaustive"

    def __post_init__(self):
        if self.neighbors < 1:
            raise ConfigurationError("neighbour count must be at least 1")
        if self.eta_h <= 0:
            raise ConfigurationError("eta increment must be positive")
        if self.eta0 < 0:
            raise ConfigurationError("initial eta must be non-negative")
        if self.dt <= 0 or self.substeps < 1:
            raise ConfigurationError("step size must be positive")
        if self.index not in ("exhaustive", "kdtree"):
            raise ConfigurationError("index must be 'exhaustive' or 'kdtree'")


@dataclass(frozen=True)
class RomTrajectory:
    times: np.ndarray
    z: np.ndarray
    eta: np.ndarray
    sigma: np.ndarray


def nearest_neighbors(point, dataset, n: int) -> np.ndarray:
    """Indices of the ``n`` closest rows of ``dataset``; ties go to the lower index."""
    data = np.asarray(dataset, dtype=float)
    if n > len(data):
        raise DomainError(f"dataset has {len(data)} points, {n} neighbours requested")
    d2 = np.sum((data - np.asarray(point, dtype=float)) ** 2, axis=1)
    return np.argsort(d2, kind="stable")[:n]


class NeighborIndex:
    """Repeated neighbour queries against a fixed training set.

    ``method="kdtree"`` uses a k-d tree to shortlist candidates and re-ranks
    them with the same distance and tie rule as the exhaustive scan, falling
    back to a full scan whenever the shortlist could hide a tie.
    """

    def __init__(self, dataset, n: int, method: str = "exhaustive"):
        self.data = np.ascontiguousarray(dataset, dtype=float)
        if self.data.ndim != 2 or len(self.data) == 0:
            raise DomainError("neighbour search needs a non-empty 2-D dataset")
        if n > len(self.data):
            raise DomainError(f"dataset has {len(self.data)} points, {n} neighbours requested")
        self.n = n
        self.method = method
        self._tree = cKDTree(self.data) if method == "kdtree" else None

    def query(self, point) -> np.ndarray:
        if self._tree is None:
            return nearest_neighbors(point, self.data, self.n)
        point = np.asarray(point, dtype=float)
        k = min(len(self.data), self.n + 4)
        _, cand = self._tree.query(point, k=k)
        cand = np.sort(np.atleast_1d(cand))
        d2 = np.sum((self.data[cand] - point) ** 2, axis=1)
        order = np.argsort(d2, kind="stable")
        if k < len(self.data) and d2[order[-1]] <= d2[order[self.n - 1]] * (1 + 1e-12):
            return nearest_neighbors(point, self.data, self.n)
        return cand[order[: self.n]]


def neighborhood_mean(indices, dataset) -> np.ndarray:
    return np.asarray(dataset, dtype=float)[np.asarray(indices)].mean(axis=0)


def component_std(v) -> float:
    """Population standard deviation across the components of one state."""
    return float(np.std(np.asarray(v, dtype=float)))


def sigma_threshold(training) -> float:
    """Largest component spread over the training states."""
    return float(np.max(np.std(np.asarray(training, dtype=float), axis=1)))


def update_eta(eta_prev: float, sigma_z: float, sigma_max: float, eta_h: float) -> float:
    if sigma_z > sigma_max:
        return eta_prev + eta_h
    if eta_prev - eta_h < 0:
        return 0.0
    return eta_prev - eta_h


def integrate(rhs, training, config: NudgeConfig, z0=None, t0: float = 0.0) -> RomTrajectory:
    """Forward-Euler integration of ``z' = rhs(z, t) + eta (mean_N(z) - z)``.

    ``rhs`` is any callable ``(z, t) -> dz/dt`` (e.g. a fitted
    :class:`~qgrom.sysid.RhsModel`). ``training`` holds the training PC
    vectors as rows. Output is recorded every ``config.dt``; each output step
    is split into ``config.substeps`` Euler steps with their own neighbour
    search and eta update.
    """
    Y = np.asarray(training, dtype=float)
    if Y.ndim != 2 or len(Y) == 0:
        raise DomainError("training set is empty")
    m = Y.shape[1]
    z = np.array(Y[0] if z0 is None else z0, dtype=float)
    if z.shape != (m,):
        raise ShapeError(f"initial state has shape {z.shape}, expected ({m},)")
    sigma_max = sigma_threshold(Y) if config.sigma_max is None else config.sigma_max
    index = NeighborIndex(Y, config.neighbors, config.index)

    nout = int(round(config.horizon / config.dt))
    h = config.dt / config.substeps
    times = t0 + config.dt * np.arange(nout + 1)
    zs = np.empty((nout + 1, m))
    etas = np.empty(nout + 1)
    sigmas = np.empty(nout + 1)

    eta = config.eta0
    k = 0
    for i in range(nout + 1):
        for s in range(config.substeps):
            t = times[i] + s * h
            sigma = component_std(z)
            if config.fixed_eta is not None:
                eta = config.fixed_eta
            elif k > 0:
                eta = update_eta(eta, sigma, sigma_max, config.eta_h)
            if s == 0:
                zs[i], etas[i], sigmas[i] = z, eta, sigma
                if i == nout:
                    break
            dz = np.asarray(rhs(z, t), dtype=float)
            if eta != 0.0:
                dz = dz + eta * (neighborhood_mean(index.query(z), Y) - z)
            z = z + h * dz
            k += 1
            if not np.all(np.isfinite(z)):
                raise NumericError(f"reduced state became non-finite at step {k}")
    return RomTrajectory(times, zs, etas, sigmas)
