"""On-disk formats. All binary data is little-endian; floats are 64-bit.

Snapshot file::

    b"QGSNAP01" | version u32 | nx u32 | ny u32 | nlayers u32 | record_count u64
    then per record: time_days f64 | nlayers*ny*nx f64 (layer, row, column)

EOF basis file::

    b"QGEOF001" | version u32 | ny u32 | nx u32 | m u32 | mean_removed u32
    | total_variance f64 | eigenvalues m*f64 | mean n*f64 | eofs m*n f64 (mode-major)

Reduced model file::

    b"QGRHS001" | version u32 | config_len u32 | config JSON (utf-8)
    | rows u32 | cols u32 | coefficients rows*cols f64 | residuals rows*f64

Model state (restart) file::

    b"QGSTATE1" | version u32 | n u32 | has_prev u32 | time f64 | masses0 2*f64
    | boundary_constants 3*f64 | q | psi [| q_prev | psi_prev], each 3*n*n f64
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import struct
from pathlib import Path

import numpy as np

from qgrom.eof import EofBasis
from qgrom.errors import ShapeError
from qgrom.fieldops import FieldSeries
from qgrom.nudge import RomTrajectory
from qgrom.qg.model import LayerStack
from qgrom.sysid import FeatureConfig, RhsModel

SNAP_MAGIC = b"QGSNAP01"
EOF_MAGIC = b"QGEOF001"
RHS_MAGIC = b"QGRHS001"
STATE_MAGIC = b"QGSTATE1"
VERSION = 1
DAY = 86400.0

_SNAP_HEADER = struct.Struct("<8sIIIIQ")
_F8 = np.dtype("<f8")


class FormatError(ValueError):
    """File does not have the expected layout."""


def _check_magic(got: bytes, want: bytes, path) -> None:
    if got != want:
        raise FormatError(f"{path}: bad magic {got!r}, expected {want!r}")


class SnapshotWriter:
    """Streaming writer for the snapshot format; usable as a model sink.

    ``write(time_seconds, state)`` stores the selected PV layers of a
    :class:`LayerStack`; ``append(time_days, fields)`` stores raw arrays.
    """

    def __init__(self, path, nx: int, ny: int, nlayers: int, layers=None):
        self.path = Path(path)
        self.nx, self.ny, self.nlayers = nx, ny, nlayers
        self.layers = list(range(nlayers)) if layers is None else list(layers)
        self.count = 0
        self._last_time = None
        self._fh = open(self.path, "wb")
        self._fh.write(_SNAP_HEADER.pack(SNAP_MAGIC, VERSION, nx, ny, nlayers, 0))

    def append(self, time_days: float, fields) -> None:
        arr = np.asarray(fields, dtype=_F8).reshape(self.nlayers, self.ny, self.nx)
        if self._last_time is not None and not time_days > self._last_time:
            raise ValueError("snapshot times must be strictly increasing")
        self._fh.write(struct.pack("<d", time_days))
        self._fh.write(np.ascontiguousarray(arr).tobytes())
        self._last_time = time_days
        self.count += 1

    def write(self, time: float, state: LayerStack) -> None:
        self.append(time / DAY, state.q[self.layers])

    def close(self) -> None:
        if self._fh.closed:
            return
        self._fh.seek(0)
        self._fh.write(
            _SNAP_HEADER.pack(SNAP_MAGIC, VERSION, self.nx, self.ny, self.nlayers, self.count)
        )
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_snapshot_header(path) -> dict:
    with open(path, "rb") as fh:
        raw = fh.read(_SNAP_HEADER.size)
    if len(raw) != _SNAP_HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, nx, ny, nl, count = _SNAP_HEADER.unpack(raw)
    _check_magic(magic, SNAP_MAGIC, path)
    return {"version": version, "nx": nx, "ny": ny, "nlayers": nl, "record_count": count}


def read_snapshots(path) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(times_days, fields)`` with fields ``(K, nlayers, ny, nx)``."""
    hdr = read_snapshot_header(path)
    nx, ny, nl, K = hdr["nx"], hdr["ny"], hdr["nlayers"], hdr["record_count"]
    rec = np.dtype([("t", _F8), ("f", _F8, (nl, ny, nx))])
    data = np.fromfile(path, dtype=rec, count=K, offset=_SNAP_HEADER.size)
    if len(data) != K:
        raise FormatError(f"{path}: expected {K} records, found {len(data)}")
    return data["t"].astype(float), data["f"].astype(float)


def write_field_series(path, series: FieldSeries) -> None:
    ny, nx = series.shape
    with SnapshotWriter(path, nx, ny, 1) as w:
        for t, f in zip(series.times, series.fields):
            w.append(float(t), f[None])


def read_field_series(path, layer: int = 0) -> FieldSeries:
    times, fields = read_snapshots(path)
    return FieldSeries(times, fields[:, layer])


def write_basis(path, basis: EofBasis) -> None:
    ny, nx = basis.grid_shape or (1, basis.n)
    if ny * nx != basis.n:
        raise ShapeError("basis grid shape does not match node count")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<8sIIIII", EOF_MAGIC, VERSION, ny, nx, basis.m, int(basis.mean_removed)))
        fh.write(struct.pack("<d", basis.total_variance))
        fh.write(np.asarray(basis.eigenvalues, _F8).tobytes())
        fh.write(np.asarray(basis.stored_mean, _F8).tobytes())
        fh.write(np.ascontiguousarray(basis.eofs.T, dtype=_F8).tobytes())


def read_basis(path) -> EofBasis:
    with open(path, "rb") as fh:
        magic, _, ny, nx, m, flag = struct.unpack("<8sIIIII", fh.read(28))
        _check_magic(magic, EOF_MAGIC, path)
        (total,) = struct.unpack("<d", fh.read(8))
        n = ny * nx
        lam = np.frombuffer(fh.read(8 * m), _F8).astype(float)
        mean = np.frombuffer(fh.read(8 * n), _F8).astype(float)
        eofs = np.frombuffer(fh.read(8 * n * m), _F8).astype(float).reshape(m, n).T
    return EofBasis(eofs, lam, total, bool(flag), mean, (ny, nx))


def write_model(path, model: RhsModel) -> None:
    cfg = json.dumps(model.config.to_dict(), sort_keys=True).encode()
    C = np.ascontiguousarray(model.coefficients, dtype=_F8)
    resid = np.zeros(C.shape[0]) if len(model.residual_norms) == 0 else model.residual_norms
    with open(path, "wb") as fh:
        fh.write(struct.pack("<8sII", RHS_MAGIC, VERSION, len(cfg)))
        fh.write(cfg)
        fh.write(struct.pack("<II", *C.shape))
        fh.write(C.tobytes())
        fh.write(np.asarray(resid, _F8).tobytes())


def read_model(path) -> RhsModel:
    with open(path, "rb") as fh:
        magic, _, clen = struct.unpack("<8sII", fh.read(16))
        _check_magic(magic, RHS_MAGIC, path)
        cfg = FeatureConfig.from_dict(json.loads(fh.read(clen).decode()))
        rows, cols = struct.unpack("<II", fh.read(8))
        C = np.frombuffer(fh.read(8 * rows * cols), _F8).astype(float).reshape(rows, cols)
        resid = np.frombuffer(fh.read(8 * rows), _F8).astype(float)
    return RhsModel(cfg, C, resid)


def write_state(path, state: LayerStack, masses0=(0.0, 0.0)) -> None:
    n = state.q.shape[-1]
    has_prev = state.q_prev is not None
    with open(path, "wb") as fh:
        fh.write(struct.pack("<8sIII", STATE_MAGIC, VERSION, n, int(has_prev)))
        fh.write(struct.pack("<d2d3d", state.time, *masses0, *state.boundary_constants))
        arrays = [state.q, state.psi] + ([state.q_prev, state.psi_prev] if has_prev else [])
        for a in arrays:
            fh.write(np.ascontiguousarray(a, dtype=_F8).tobytes())


def read_state(path) -> tuple[LayerStack, tuple[float, float]]:
    with open(path, "rb") as fh:
        magic, _, n, has_prev = struct.unpack("<8sIII", fh.read(20))
        _check_magic(magic, STATE_MAGIC, path)
        vals = struct.unpack("<d2d3d", fh.read(48))
        arrays = [
            np.frombuffer(fh.read(8 * 3 * n * n), _F8).astype(float).reshape(3, n, n)
            for _ in range(4 if has_prev else 2)
        ]
    state = LayerStack(
        arrays[0], arrays[1], vals[0], np.array(vals[3:6]),
        arrays[2] if has_prev else None, arrays[3] if has_prev else None,
    )
    return state, (vals[1], vals[2])


def _fmt(x: float) -> str:
    return repr(float(x))


def write_pcs(path, times, z) -> None:
    z = np.asarray(z)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"z{i + 1}" for i in range(z.shape[1])])
        for t, row in zip(times, z):
            w.writerow([_fmt(t)] + [_fmt(v) for v in row])


def read_pcs(path) -> tuple[np.ndarray, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1:]


def write_trajectory(path, traj: RomTrajectory) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "eta", "sigma"] + [f"z{i + 1}" for i in range(traj.z.shape[1])])
        for t, e, s, row in zip(traj.times, traj.eta, traj.sigma, traj.z):
            w.writerow([_fmt(t), _fmt(e), _fmt(s)] + [_fmt(v) for v in row])


def read_trajectory(path) -> RomTrajectory:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return RomTrajectory(data[:, 0], data[:, 3:], data[:, 1], data[:, 2])


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_json(path, obj) -> None:
    tmp = Path(str(path) + ".tmp")
    tmp.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    os.replace(tmp, path)


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())
