"""Finite-difference stencils on a uniform square grid.

Arrays are indexed ``[..., iy, ix]``; the leading axis (if any) is the layer.
All operators fill interior nodes only and leave the outer ring at zero.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from qgrom.errors import ShapeError


@njit(cache=True)
def _arakawa_layer(f, g, out, scale):
    ny, nx = f.shape
    for j in range(1, ny - 1):
        for i in range(1, nx - 1):
            fe = f[j, i + 1]
            fw = f[j, i - 1]
            fn = f[j + 1, i]
            fs = f[j - 1, i]
            fne = f[j + 1, i + 1]
            fnw = f[j + 1, i - 1]
            fse = f[j - 1, i + 1]
            fsw = f[j - 1, i - 1]
            ge = g[j, i + 1]
            gw = g[j, i - 1]
            gn = g[j + 1, i]
            gs = g[j - 1, i]
            gne = g[j + 1, i + 1]
            gnw = g[j + 1, i - 1]
            gse = g[j - 1, i + 1]
            gsw = g[j - 1, i - 1]
            jpp = (fe - fw) * (gn - gs) - (fn - fs) * (ge - gw)
            jpx = (
                fe * (gne - gse)
                - fw * (gnw - gsw)
                - fn * (gne - gnw)
                + fs * (gse - gsw)
            )
            jxp = (
                gn * (fne - fnw)
                - gs * (fse - fsw)
                - ge * (fne - fse)
                + gw * (fnw - fsw)
            )
            out[j, i] = (jpp + jpx + jxp) * scale


@njit(cache=True)
def _laplacian_layer(f, out, scale):
    ny, nx = f.shape
    for j in range(1, ny - 1):
        for i in range(1, nx - 1):
            out[j, i] = (
                f[j, i + 1] + f[j, i - 1] + f[j + 1, i] + f[j - 1, i] - 4.0 * f[j, i]
            ) * scale


def _as_layers(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    if a.ndim == 2:
        return a[None]
    if a.ndim != 3:
        raise ShapeError(f"expected a 2-D field or a layer stack, got shape {a.shape}")
    return a


def arakawa_jacobian(f: np.ndarray, g: np.ndarray, h: float) -> np.ndarray:
    """Energy- and enstrophy-conserving Jacobian ``J(f, g) = f_x g_y - f_y g_x``.

    Arakawa's 9-point average of the three second-order forms. Values on the
    outer ring of nodes are set to zero.
    """
    if np.shape(f) != np.shape(g):
        raise ShapeError(f"grid mismatch: {np.shape(f)} vs {np.shape(g)}")
    ff, gg = _as_layers(f), _as_layers(g)
    if ff.shape[-1] < 3 or ff.shape[-2] < 3:
        raise ShapeError("need at least 3 nodes per side")
    out = np.zeros_like(ff)
    scale = 1.0 / (12.0 * h * h)
    for k in range(ff.shape[0]):
        _arakawa_layer(ff[k], gg[k], out[k], scale)
    return out.reshape(np.shape(f))


def laplacian(f: np.ndarray, h: float) -> np.ndarray:
    """Five-point Laplacian at interior nodes (boundary ring left at zero)."""
    ff = _as_layers(f)
    out = np.zeros_like(ff)
    scale = 1.0 / (h * h)
    for k in range(ff.shape[0]):
        _laplacian_layer(ff[k], out[k], scale)
    return out.reshape(np.shape(f))


@njit(cache=True)
def _max_abs_centred_diff(p):
    best = 0.0
    nl, ny, nx = p.shape
    for k in range(nl):
        for j in range(1, ny - 1):
            for i in range(1, nx - 1):
                du = abs(p[k, j + 1, i] - p[k, j - 1, i])
                dv = abs(p[k, j, i + 1] - p[k, j, i - 1])
                if du > best:
                    best = du
                if dv > best:
                    best = dv
    return best


def max_velocity(psi: np.ndarray, h: float) -> float:
    """Largest geostrophic velocity component from centred differences."""
    return _max_abs_centred_diff(_as_layers(psi)) / (2.0 * h)


def trapezoid_weights(n: int, h: float) -> np.ndarray:
    """2-D trapezoidal quadrature weights for an ``n x n`` node grid."""
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return np.outer(w, w)
