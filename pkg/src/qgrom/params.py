"""Physical and numerical constants of the 3-layer double-gyre model."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from qgrom.errors import ConfigurationError

DAY = 86400.0
YEAR = 365.0 * DAY
KM = 1000.0

F0 = 0.83e-4  # s^-1

# km^-2, top to bottom
STRATIFICATION_KM = (
    (1.19e-3, -1.19e-3, 0.0),
    (-3.95e-4, 1.14e-3, -7.47e-4),
    (0.0, -1.87e-4, 1.87e-4),
)

# Eigenvalues below this fraction of the largest one are treated as the
# barotropic (zero) mode. The published matrix is rounded to three digits,
# which leaves a spurious -3.8e-7 km^-2 eigenvalue.
ZERO_MODE_RTOL = 1e-3


def default_dt(grid_n: int) -> float:
    """Time step in seconds: 1/40 day on 129^2, halved per grid doubling."""
    if grid_n < 3:
        raise ConfigurationError(f"grid_n must be odd and >= 3, got {grid_n}")
    return (DAY / 40.0) * 128.0 / (grid_n - 1)


@dataclass(frozen=True)
class QgParams:
    """Parameter set for one model configuration (SI units throughout).

    ``S`` is stored in m^-2. The default is the published km^-2 matrix
    converted to SI.
    """

    beta: float = 2e-11
    mu: float = 4e-8
    nu: float = 50.0
    tau0: float = 0.03
    L: float = 3840.0 * KM
    H: tuple[float, float, float] = (250.0, 750.0, 3000.0)
    S: tuple[tuple[float, ...], ...] = field(
        default_factory=lambda: tuple(
            tuple(v / KM**2 for v in row) for row in STRATIFICATION_KM
        )
    )
    alpha: float = 120.0 * KM
    f0: float = F0
    rho0: float = 1000.0
    forcing_scale: float | None = None
    dt: float | None = None
    grid_n: int = 129
    robert_asselin: float = 0.01
    cfl_max: float = 0.5

    def __post_init__(self):
        if self.dt is None:
            object.__setattr__(self, "dt", default_dt(self.grid_n))
        if self.forcing_scale is None:
            object.__setattr__(
                self, "forcing_scale", 1.0 / (self.rho0 * self.H[0] * self.L)
            )
        object.__setattr__(self, "H", tuple(float(h) for h in self.H))
        object.__setattr__(
            self, "S", tuple(tuple(float(v) for v in row) for row in self.S)
        )
        self.validate()

    def validate(self) -> None:
        if len(self.H) != 3 or min(self.H) <= 0:
            raise ConfigurationError(f"layer depths must be 3 positive values, got {self.H}")
        if self.L <= 0:
            raise ConfigurationError("basin size L must be positive")
        if self.grid_n < 3 or self.grid_n % 2 == 0:
            raise ConfigurationError(f"grid_n must be odd and >= 3, got {self.grid_n}")
        if self.dt <= 0:
            raise ConfigurationError("dt must be positive")
        if self.alpha <= 0:
            raise ConfigurationError("partial-slip length alpha must be positive")
        if np.asarray(self.S).shape != (3, 3):
            raise ConfigurationError("stratification matrix must be 3x3")
        self.vertical_modes()

    @property
    def h(self) -> float:
        """Grid spacing (m)."""
        return self.L / (self.grid_n - 1)

    @property
    def stratification(self) -> np.ndarray:
        return np.array(self.S, dtype=float)

    def vertical_modes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return ``(eigenvalues, P, P_inv)`` with ``S = P diag(eigenvalues) P_inv``.

        Eigenvalues are sorted ascending; the barotropic one is snapped to 0.
        """
        S = self.stratification
        lam, P = np.linalg.eig(S)
        if np.max(np.abs(np.imag(lam))) > 1e-12 * np.max(np.abs(lam)):
            raise ConfigurationError("stratification matrix has complex eigenvalues")
        lam = np.real(lam)
        P = np.real(P)
        order = np.argsort(lam)
        lam, P = lam[order], P[:, order]
        scale = np.max(np.abs(lam))
        lam = np.where(np.abs(lam) < ZERO_MODE_RTOL * scale, 0.0, lam)
        if np.any(lam < 0):
            raise ConfigurationError(f"stratification matrix has negative eigenvalues {lam}")
        try:
            P_inv = np.linalg.inv(P)
        except np.linalg.LinAlgError as exc:
            raise ConfigurationError("defective stratification matrix") from exc
        if np.linalg.cond(P) > 1e8:
            raise ConfigurationError("defective stratification matrix")
        return lam, P, P_inv

    @property
    def effective_stratification(self) -> np.ndarray:
        """The matrix actually inverted: S rebuilt from the snapped modes."""
        lam, P, P_inv = self.vertical_modes()
        return P @ np.diag(lam) @ P_inv

    def deformation_radii(self) -> np.ndarray:
        """Baroclinic deformation radii (m), largest first."""
        lam, _, _ = self.vertical_modes()
        lam = lam[lam > 0]
        return np.sort(1.0 / np.sqrt(lam))[::-1]

    def replace(self, **changes) -> "QgParams":
        if "grid_n" in changes and "dt" not in changes:
            changes["dt"] = None
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["H"] = list(self.H)
        d["S"] = [list(row) for row in self.S]
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def default_params(grid_n: int = 129, **overrides) -> QgParams:
    return QgParams(grid_n=grid_n, **overrides)
