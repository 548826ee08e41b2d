"""PV inversion: solve ``lap(psi) - S psi = q`` with the mass constraint.

The layer system is diagonalised into vertical modes; every mode is a
Helmholtz problem with homogeneous Dirichlet data, solved exactly (for the
5-point operator) with a type-I discrete sine transform. Uniform boundary
values are added by superposition so that the layer-difference integrals
keep their reference values and ``sum(H_j * c_j) = 0``.
"""

from __future__ import annotations

import numpy as np
import scipy.fft as sfft

from qgrom.errors import NumericError, ShapeError
from qgrom.params import QgParams
from qgrom.qg.stencils import laplacian, trapezoid_weights


def dirichlet_laplacian_eigenvalues(n: int, h: float) -> np.ndarray:
    """Eigenvalues of the 5-point Laplacian on the ``(n-2)^2`` interior nodes."""
    k = np.arange(1, n - 1)
    lam1 = (2.0 * np.cos(np.pi * k / (n - 1)) - 2.0) / h**2
    return lam1[:, None] + lam1[None, :]


def helmholtz_dst(rhs: np.ndarray, lam: np.ndarray | float, lap_eigs: np.ndarray) -> np.ndarray:
    """Solve ``lap(u) - lam u = rhs`` on interior nodes, ``u = 0`` on the boundary.

    ``rhs`` holds interior values only, shape ``(..., n-2, n-2)``; ``lam`` is
    broadcast against the leading axes.
    """
    lam = np.asarray(lam, dtype=float)
    coeff = sfft.dstn(rhs, type=1, axes=(-2, -1))
    denom = lap_eigs - lam.reshape(lam.shape + (1, 1))
    return sfft.idstn(coeff / denom, type=1, axes=(-2, -1))


class PvInverter:
    """Precomputed inversion operator for one parameter set."""

    def __init__(self, params: QgParams, masses0=(0.0, 0.0)):
        self.params = params
        self.n = n = params.grid_n
        self.h = h = params.h
        self.lam, self.P, self.P_inv = params.vertical_modes()
        self.S = self.P @ np.diag(self.lam) @ self.P_inv
        self.lap_eigs = dirichlet_laplacian_eigenvalues(n, h)
        self.weights = trapezoid_weights(n, h)
        self.masses0 = np.asarray(masses0, dtype=float)
        if self.masses0.shape != (2,):
            raise ShapeError("masses0 must hold two layer-pair integrals")

        # Mode m with unit boundary value: 1 + chi_m, lap(chi) - lam chi = lam.
        ones = np.ones((3, n - 2, n - 2))
        chi = helmholtz_dst(ones * self.lam[:, None, None], self.lam, self.lap_eigs)
        mode_unit = np.ones((3, n, n))
        mode_unit[:, 1:-1, 1:-1] += chi
        # homog[k] is the layer field when layer k has boundary value 1.
        self.homog = np.einsum("jm,mk,myx->kjyx", self.P, self.P_inv, mode_unit)
        self.homog[:, :, [0, -1], :] = np.eye(3)[:, :, None, None]
        self.homog[:, :, :, [0, -1]] = np.eye(3)[:, :, None, None]

        Ih = np.einsum("kjyx,yx->kj", self.homog, self.weights)  # integral of layer j
        A = np.zeros((3, 3))
        A[0] = Ih[:, 0] - Ih[:, 1]
        A[1] = Ih[:, 1] - Ih[:, 2]
        A[2] = np.asarray(params.H)
        self.constraint_matrix = A
        self.constraint_inv = np.linalg.inv(A)

    def layer_integrals(self, psi: np.ndarray) -> np.ndarray:
        return psi.reshape(psi.shape[0], -1) @ self.weights.ravel()

    def masses(self, psi: np.ndarray) -> np.ndarray:
        """The two layer-difference integrals of ``psi``."""
        I = self.layer_integrals(psi)
        return np.array([I[0] - I[1], I[1] - I[2]])

    def invert(self, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(psi, boundary_constants)`` for PV anomaly ``q``.

        Only interior values of ``q`` are used.
        """
        n = self.n
        if q.shape != (3, n, n):
            raise ShapeError(f"expected q of shape {(3, n, n)}, got {q.shape}")
        q_modes = np.tensordot(self.P_inv, q[:, 1:-1, 1:-1], axes=1)
        phi = helmholtz_dst(q_modes, self.lam, self.lap_eigs)
        psi = np.zeros((3, n, n))
        psi[:, 1:-1, 1:-1] = np.tensordot(self.P, phi, axes=1)

        rhs = np.empty(3)
        rhs[:2] = self.masses0 - self.masses(psi)
        rhs[2] = 0.0
        c = self.constraint_inv @ rhs
        psi += np.tensordot(c, self.homog, axes=1)
        if not np.all(np.isfinite(psi)):
            raise NumericError("PV inversion produced non-finite streamfunction")
        return psi, c

    def residual(self, psi: np.ndarray, q: np.ndarray) -> float:
        """Max-norm of ``lap(psi) - S psi - q`` over interior nodes."""
        r = laplacian(psi, self.h) - np.tensordot(self.S, psi, axes=1) - q
        return float(np.max(np.abs(r[:, 1:-1, 1:-1])))


def invert_pv(q: np.ndarray, params: QgParams, masses0=(0.0, 0.0)) -> tuple[np.ndarray, np.ndarray]:
    """One-shot PV inversion; build a :class:`PvInverter` for repeated use."""
    return PvInverter(params, masses0).invert(q)
