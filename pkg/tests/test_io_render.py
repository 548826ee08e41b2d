from pathlib import Path

import numpy as np
import pytest

from qgrom import io
from qgrom.eof import compute_eof
from qgrom.fieldops import FieldSeries
from qgrom.nudge import RomTrajectory
from qgrom.params import DAY, QgParams
from qgrom.qg import QgModel, run
from qgrom.render import colorize, decode_ppm, encode_ppm, render_field, render_panels
from qgrom.sysid import FeatureConfig, RhsModel

DATA = Path(__file__).parent / "data"


def test_snapshot_header_layout(tmp_path):
    path = tmp_path / "s.qgs"
    with io.SnapshotWriter(path, 4, 3, 2) as w:
        w.append(0.0, np.zeros((2, 3, 4)))
        w.append(1.0, np.ones((2, 3, 4)))
    raw = path.read_bytes()
    assert raw[:8] == b"QGSNAP01"
    assert np.frombuffer(raw[8:24], "<u4").tolist() == [1, 4, 3, 2]
    assert np.frombuffer(raw[24:32], "<u8")[0] == 2
    assert len(raw) == 32 + 2 * 8 * (1 + 24)
    times, fields = io.read_snapshots(path)
    np.testing.assert_array_equal(times, [0.0, 1.0])
    np.testing.assert_array_equal(fields[1], 1.0)


def test_snapshot_writer_rejects_unordered(tmp_path):
    with io.SnapshotWriter(tmp_path / "s.qgs", 2, 2, 1) as w:
        w.append(1.0, np.zeros((1, 2, 2)))
        with pytest.raises(ValueError):
            w.append(1.0, np.zeros((1, 2, 2)))


def test_snapshot_sink_from_model(tmp_path):
    p = QgParams(grid_n=17)
    path = tmp_path / "run.qgs"
    with io.SnapshotWriter(path, 17, 17, 2, layers=[0, 2]) as w:
        final = run(p, 0.0, 3 * DAY, DAY, None, w, model=QgModel(p))
    times, fields = io.read_snapshots(path)
    np.testing.assert_array_equal(times, [0.0, 1.0, 2.0, 3.0])
    np.testing.assert_array_equal(fields[-1], final.q[[0, 2]])


def test_bad_magic(tmp_path):
    path = tmp_path / "x"
    path.write_bytes(b"NOTASNAP" + bytes(24))
    with pytest.raises(io.FormatError):
        io.read_snapshots(path)


def test_field_series_round_trip(tmp_path):
    s = FieldSeries([0.5, 1.5], np.random.default_rng(0).standard_normal((2, 3, 3)))
    io.write_field_series(tmp_path / "f.qgs", s)
    back = io.read_field_series(tmp_path / "f.qgs")
    np.testing.assert_array_equal(back.times, s.times)
    np.testing.assert_array_equal(back.fields, s.fields)


def test_basis_round_trip(tmp_path):
    X = np.random.default_rng(1).standard_normal((6, 4, 5)) + 1.0
    basis = compute_eof(X, mean_removed=True).truncate(3)
    io.write_basis(tmp_path / "b.eof", basis)
    back = io.read_basis(tmp_path / "b.eof")
    np.testing.assert_array_equal(back.eofs, basis.eofs)
    np.testing.assert_array_equal(back.eigenvalues, basis.eigenvalues)
    np.testing.assert_array_equal(back.stored_mean, basis.stored_mean)
    assert back.grid_shape == (4, 5) and back.mean_removed and back.total_variance == basis.total_variance


def test_model_round_trip(tmp_path):
    cfg = FeatureConfig(m=2, harmonics=2, mid=(0.1, 0.2), halfrange=(1.0, 3.0))
    C = np.random.default_rng(2).standard_normal((2, cfg.n_features))
    model = RhsModel(cfg, C, np.array([0.5, 0.25]))
    io.write_model(tmp_path / "m.rhs", model)
    back = io.read_model(tmp_path / "m.rhs")
    assert back.config == cfg
    np.testing.assert_array_equal(back.coefficients, C)
    np.testing.assert_array_equal(back.residual_norms, [0.5, 0.25])


def test_state_round_trip(tmp_path):
    p = QgParams(grid_n=9, dt=DAY / 4)
    state = run(p, 0.0, 2 * DAY, DAY)
    io.write_state(tmp_path / "s.qgstate", state, (1.0, 2.0))
    back, masses = io.read_state(tmp_path / "s.qgstate")
    assert masses == (1.0, 2.0) and back.time == state.time
    for a, b in ((back.q, state.q), (back.psi, state.psi), (back.q_prev, state.q_prev), (back.psi_prev, state.psi_prev)):
        np.testing.assert_array_equal(a, b)


def test_csv_round_trips_are_exact(tmp_path):
    r = np.random.default_rng(3)
    t = np.arange(4.0)
    z = r.standard_normal((4, 3))
    io.write_pcs(tmp_path / "p.csv", t, z)
    t2, z2 = io.read_pcs(tmp_path / "p.csv")
    np.testing.assert_array_equal(z2, z)
    assert (tmp_path / "p.csv").read_text().splitlines()[0] == "t,z1,z2,z3"
    traj = RomTrajectory(t, z, np.array([0, 0.001, 0.002, 0.001]), r.random(4))
    io.write_trajectory(tmp_path / "tr.csv", traj)
    back = io.read_trajectory(tmp_path / "tr.csv")
    assert (tmp_path / "tr.csv").read_text().startswith("t,eta,sigma,z1,z2,z3\n")
    np.testing.assert_array_equal(back.z, z)
    np.testing.assert_array_equal(back.eta, traj.eta)


# --- rendering --------------------------------------------------------------

def golden_field():
    s = np.linspace(0, 1, 33)
    y, x = np.meshgrid(s, s, indexing="ij")
    return np.sin(2 * np.pi * x) * np.sin(np.pi * y) + 0.5 * y


def test_golden_image(tmp_path):
    out = render_field(tmp_path / "g.ppm", golden_field())
    assert out.read_bytes() == (DATA / "golden_field.ppm").read_bytes()


def test_colormap_anchors():
    rgb = colorize(np.array([[-1.0, 0.0, 1.0, 0.5]]), vmax=1.0)
    np.testing.assert_array_equal(rgb[0], [[0, 0, 255], [255, 255, 255], [255, 0, 0], [255, 128, 128]])


def test_constant_field_is_mid_colour():
    for c in (0.0, 2.5, -7.0):
        rgb = colorize(np.full((4, 5), c))
        assert np.all(rgb == 255)


def test_antisymmetric_field_is_inverted_mirror():
    f = np.random.default_rng(4).standard_normal((6, 7))
    f = f - f[::-1, ::-1]
    rgb = colorize(f)
    # f(-x) = -f(x): the image is its own rotated copy with red and blue swapped
    np.testing.assert_array_equal(rgb, rgb[::-1, ::-1, ::-1])
    np.testing.assert_array_equal(colorize(-f), rgb[..., ::-1])


def test_north_is_up():
    f = np.zeros((3, 3))
    f[-1] = 1.0  # northern row
    rgb = colorize(f)
    assert tuple(rgb[0, 0]) == (255, 0, 0)


def test_ppm_round_trip_and_scaling(tmp_path):
    rgb = colorize(golden_field())
    assert np.array_equal(decode_ppm(encode_ppm(rgb)), rgb)
    big = decode_ppm(render_field(tmp_path / "b.ppm", golden_field(), scale=3).read_bytes())
    assert big.shape == (99, 99, 3)


def test_panels_layout(tmp_path):
    f = golden_field()
    img = decode_ppm(render_panels(tmp_path / "p.ppm", [[f, -f, f], [f, f, f]], gap=2).read_bytes())
    assert img.shape == (2 * 33 + 2, 3 * 33 + 4, 3)
    assert np.all(img[33:35] == 255)
    np.testing.assert_array_equal(img[:33, 35:68], colorize(-f))
