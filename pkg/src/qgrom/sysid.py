"""Least-squares reconstruction of the reduced right-hand side.

The library is ordered: constant, linear terms, upper-triangular quadratic
monomials, then the trigonometric block. In ``state`` mode the trig block is
``sin(k u_i), cos(k u_i)`` for every component ``i`` and harmonic ``k``
(component-major) with ``u_i = pi (y_i - mid_i) / halfrange_i``; in ``time``
mode it is ``sin(2 pi k t / T), cos(2 pi k t / T)`` over a retained harmonic
set.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from qgrom.errors import ConfigurationError, DomainError, NumericError, ShapeError

FOURIER_MODES = ("state", "time", "none")
EXTRAPOLATION_FACTOR = 10.0


class ExtrapolationWarning(UserWarning):
    """State lies far outside the range seen in training."""


@dataclass(frozen=True)
class FeatureConfig:
    m: int
    poly_degree: int = 2
    fourier_mode: str = "state"
    harmonics: int = 50
    mid: tuple[float, ...] = ()
    halfrange: tuple[float, ...] = ()
    base_period: float = 0.0
    harmonic_set: tuple[int, ...] = ()
    rcond: float = 1e-10
    ridge: float = 0.0

    def __post_init__(self):
        if self.m < 1:
            raise ConfigurationError("state dimension must be positive")
        if self.poly_degree not in (1, 2, 3):
            raise ConfigurationError("poly_degree must be 1, 2 or 3")
        if self.fourier_mode not in FOURIER_MODES:
            raise ConfigurationError(f"fourier_mode must be one of {FOURIER_MODES}")
        if self.harmonics < 0:
            raise ConfigurationError("harmonic count must be non-negative")
        if not self.mid:
            object.__setattr__(self, "mid", (0.0,) * self.m)
        if not self.halfrange:
            object.__setattr__(self, "halfrange", (np.pi,) * self.m)
        object.__setattr__(self, "mid", tuple(float(v) for v in self.mid))
        object.__setattr__(self, "halfrange", tuple(float(v) for v in self.halfrange))
        object.__setattr__(self, "harmonic_set", tuple(int(k) for k in self.harmonic_set))
        if len(self.mid) != self.m or len(self.halfrange) != self.m:
            raise ConfigurationError("normalisation vectors must have length m")
        if min(self.halfrange) <= 0:
            raise ConfigurationError("normalisation half-ranges must be positive")
        if self.fourier_mode == "time" and self.harmonics and self.base_period <= 0:
            raise ConfigurationError("time-mode Fourier terms need a positive base period")

    @property
    def time_harmonics(self) -> tuple[int, ...]:
        return self.harmonic_set or tuple(range(1, self.harmonics + 1))

    @property
    def n_poly(self) -> int:
        return sum(_n_monomials(self.m, d) for d in range(self.poly_degree + 1))

    @property
    def n_features(self) -> int:
        if self.fourier_mode == "state":
            return self.n_poly + 2 * self.harmonics * self.m
        if self.fourier_mode == "time":
            return self.n_poly + 2 * len(self.time_harmonics)
        return self.n_poly

    def with_normalisation(self, y) -> "FeatureConfig":
        """Copy with ``mid``/``halfrange`` taken from the min/max of ``y``."""
        y = np.asarray(y, dtype=float).reshape(-1, self.m)
        lo, hi = y.min(axis=0), y.max(axis=0)
        half = 0.5 * (hi - lo)
        half = np.where(half > 0, half, 1.0)
        return replace(self, mid=tuple(0.5 * (hi + lo)), halfrange=tuple(half))

    def to_dict(self) -> dict:
        return {
            "m": self.m, "poly_degree": self.poly_degree, "fourier_mode": self.fourier_mode,
            "harmonics": self.harmonics, "mid": list(self.mid), "halfrange": list(self.halfrange),
            "base_period": self.base_period, "harmonic_set": list(self.harmonic_set),
            "rcond": self.rcond, "ridge": self.ridge,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureConfig":
        d = dict(d)
        for key in ("mid", "halfrange", "harmonic_set"):
            d[key] = tuple(d.get(key, ()))
        return cls(**d)


def _n_monomials(m: int, degree: int) -> int:
    from math import comb

    return comb(m + degree - 1, degree)


def monomial_exponents(m: int, degree: int) -> list[tuple[int, ...]]:
    """Index tuples ``i <= j <= ...`` in library order for one degree."""
    return list(itertools.combinations_with_replacement(range(m), degree))


@dataclass(frozen=True)
class RhsModel:
    config: FeatureConfig
    coefficients: np.ndarray
    residual_norms: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        C = np.asarray(self.coefficients, dtype=float)
        if C.shape != (self.config.m, self.config.n_features):
            raise ShapeError(
                f"coefficients {C.shape} do not match ({self.config.m}, {self.config.n_features})"
            )
        if not np.all(np.isfinite(C)):
            raise NumericError("non-finite model coefficients")
        C.setflags(write=False)
        object.__setattr__(self, "coefficients", C)

    def __call__(self, y, t=0.0):
        return eval_rhs(self, y, t)


def estimate_derivatives(y, dt: float) -> np.ndarray:
    """Second-order finite differences along axis 0 (one-sided at the ends)."""
    y = np.asarray(y, dtype=float)
    if len(y) < 3:
        raise DomainError("derivative estimation needs at least three samples")
    d = np.empty_like(y)
    d[1:-1] = (y[2:] - y[:-2]) / (2.0 * dt)
    d[0] = (-3.0 * y[0] + 4.0 * y[1] - y[2]) / (2.0 * dt)
    d[-1] = (3.0 * y[-1] - 4.0 * y[-2] + y[-3]) / (2.0 * dt)
    return d


def build_features(y, t, config: FeatureConfig) -> np.ndarray:
    """Library rows for one state (``(m,)``) or a batch (``(K, m)``)."""
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    Y = y.reshape(-1, config.m) if not single else y[None]
    if Y.shape[1] != config.m:
        raise ShapeError(f"state has {Y.shape[1]} components, config expects {config.m}")
    K = Y.shape[0]
    t = np.broadcast_to(np.asarray(t, dtype=float), (K,))
    mid = np.asarray(config.mid)
    half = np.asarray(config.halfrange)
    if config.fourier_mode == "state" and np.any(np.abs(Y - mid) > EXTRAPOLATION_FACTOR * half):
        warnings.warn("state outside 10x the training range", ExtrapolationWarning, stacklevel=2)

    blocks = [np.ones((K, 1)), Y]
    if config.poly_degree >= 2:
        i, j = np.triu_indices(config.m)
        blocks.append(Y[:, i] * Y[:, j])
    if config.poly_degree >= 3:
        idx = np.array(monomial_exponents(config.m, 3)).T
        blocks.append(Y[:, idx[0]] * Y[:, idx[1]] * Y[:, idx[2]])

    if config.fourier_mode == "state" and config.harmonics:
        u = np.pi * (Y - mid) / half  # (K, m)
        k = np.arange(1, config.harmonics + 1)
        ku = u[:, :, None] * k[None, None, :]  # (K, m, H)
        trig = np.stack([np.sin(ku), np.cos(ku)], axis=-1)  # (K, m, H, 2)
        blocks.append(trig.reshape(K, -1))
    elif config.fourier_mode == "time" and config.time_harmonics:
        k = np.asarray(config.time_harmonics, dtype=float)
        phase = 2 * np.pi * t[:, None] * k[None, :] / config.base_period
        blocks.append(np.stack([np.sin(phase), np.cos(phase)], axis=-1).reshape(K, -1))

    theta = np.hstack(blocks)
    return theta[0] if single else theta


def lstsq_svd(theta: np.ndarray, target: np.ndarray, rcond: float = 1e-10, ridge: float = 0.0):
    """Minimum-norm (optionally ridge-filtered) solution of ``theta C^T = target``.

    Returns ``(C, residual_norms)`` with ``C`` shaped ``(targets, features)``.
    """
    theta = np.asarray(theta, dtype=float)
    target = np.asarray(target, dtype=float)
    if not (np.all(np.isfinite(theta)) and np.all(np.isfinite(target))):
        raise NumericError("non-finite values in least-squares inputs")
    U, s, Vt = np.linalg.svd(theta, full_matrices=False)
    keep = s > rcond * (s[0] if s.size else 0.0)
    filt = np.zeros_like(s)
    filt[keep] = s[keep] / (s[keep] ** 2 + ridge)
    C = (Vt.T * filt) @ (U.T @ target)
    resid = np.linalg.norm(theta @ C - target, axis=0)
    return C.T, resid


def fit(y, dydt, config: FeatureConfig, times=None) -> RhsModel:
    """Fit library coefficients to derivative data, one component per column."""
    y = np.asarray(y, dtype=float)
    dydt = np.asarray(dydt, dtype=float)
    if y.shape != dydt.shape or y.ndim != 2 or y.shape[1] != config.m:
        raise ShapeError(f"states {y.shape} and derivatives {dydt.shape} misaligned")
    if len(y) < 2:
        raise DomainError("need at least two samples to fit")
    times = np.zeros(len(y)) if times is None else np.asarray(times, dtype=float)
    if config.fourier_mode == "time" and config.harmonics and not config.harmonic_set:
        config = select_time_harmonics(y, dydt, times, config)
    theta = build_features(y, times, config)
    C, resid = lstsq_svd(theta, dydt, config.rcond, config.ridge)
    return RhsModel(config, C, resid)


def select_time_harmonics(y, dydt, times, config: FeatureConfig) -> FeatureConfig:
    """Keep the ``harmonics`` largest-amplitude periodic modes of the polynomial-fit residual."""
    poly_cfg = replace(config, fourier_mode="none")
    C, _ = lstsq_svd(build_features(y, times, poly_cfg), dydt, config.rcond, config.ridge)
    resid = dydt - build_features(y, times, poly_cfg) @ C.T
    kmax = max(config.harmonics, len(times) // 2)
    k = np.arange(1, kmax + 1)
    phase = 2 * np.pi * np.outer(times, k) / config.base_period
    amp = np.abs(np.cos(phase).T @ resid) ** 2 + np.abs(np.sin(phase).T @ resid) ** 2
    power = amp.sum(axis=1)
    chosen = np.sort(k[np.argsort(-power, kind="stable")[: config.harmonics]])
    return replace(config, harmonic_set=tuple(int(v) for v in chosen))


def eval_rhs(model: RhsModel, y, t=0.0) -> np.ndarray:
    """Fitted right-hand side at state(s) ``y``."""
    return build_features(y, t, model.config) @ model.coefficients.T
