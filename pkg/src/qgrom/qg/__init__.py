"""Dimensional 3-layer quasi-geostrophic solver."""

from qgrom.qg.elliptic import PvInverter, invert_pv
from qgrom.qg.model import (
    LayerStack,
    MemorySink,
    QgModel,
    SnapshotSeries,
    boundary_vorticity,
    grid_coordinates,
    run,
    step,
    wind_forcing,
)
from qgrom.qg.stencils import arakawa_jacobian, laplacian

__all__ = [
    "LayerStack",
    "MemorySink",
    "PvInverter",
    "QgModel",
    "SnapshotSeries",
    "arakawa_jacobian",
    "boundary_vorticity",
    "grid_coordinates",
    "invert_pv",
    "laplacian",
    "run",
    "step",
    "wind_forcing",
]
