import numpy as np
import pytest

from qgrom import cli
from qgrom.config import PipelineConfig
from qgrom.errors import ConfigurationError
from qgrom.params import KM


def test_defaults_are_desk_scale(tmp_path):
    cfg = PipelineConfig.load(env={})
    assert cfg["grids"]["high_n"] == 129 and cfg["grids"]["low_n"] == 33
    assert cfg["protocol"]["spinup_years"] == 10.0
    assert not cfg.full_scale
    hi = cfg.qg_params("high")
    assert hi.alpha == 120 * KM and hi.L == 3840 * KM and hi.H == (250.0, 750.0, 3000.0)
    np.testing.assert_allclose(hi.stratification[0, 0], 1.19e-3 / KM**2)


def test_full_preset():
    cfg = PipelineConfig.load(preset="full", env={})
    assert cfg["grids"]["high_n"] == 513 and cfg["protocol"]["spinup_years"] == 100.0
    assert cfg.full_scale


def test_precedence(tmp_path):
    ini = tmp_path / "c.ini"
    ini.write_text("[nudge]\nneighbors = 7\neta_h = 0.002\n[paths]\nworkdir = fromfile\n")
    cfg = PipelineConfig.load(ini, ["nudge.neighbors=9"], env={"QGROM_WORKDIR": str(tmp_path / "env")})
    assert cfg["nudge"]["neighbors"] == 9
    assert cfg["nudge"]["eta_h"] == 0.002
    assert cfg.workdir == tmp_path / "env"
    cfg = PipelineConfig.load(ini, ["paths.workdir=cli"], env={"QGROM_WORKDIR": "env"})
    assert cfg.workdir.name == "cli"
    assert PipelineConfig.load(ini, env={}).workdir == tmp_path / "fromfile"


@pytest.mark.parametrize("override", [
    "nudge.unknown=1", "nowhere.x=1", "protocol.run_years=1", "grids.low_n=32",
    "eof.variance_fraction=1.5", "protocol.snapshot_layers=2", "badformat",
])
def test_invalid_configuration(override):
    with pytest.raises(ConfigurationError):
        PipelineConfig.load(overrides=[override], env={})


def test_nudge_and_feature_configs():
    cfg = PipelineConfig.load(env={})
    n = cfg.nudge_config(sigma_max=2.0)
    assert n.neighbors == 5 and n.eta_h == 0.001 and n.dt == 1.0 and n.horizon == 4 * 365.0
    f = cfg.feature_config(4)
    assert f.harmonics == 50 and f.base_period == 730.0 and f.rcond == 1e-10


def test_digest_ignores_paths():
    a = PipelineConfig.load(overrides=["paths.workdir=/a"], env={})
    b = PipelineConfig.load(overrides=["paths.workdir=/b"], env={})
    c = PipelineConfig.load(overrides=["model.nu=60"], env={})
    assert a.digest() == b.digest() != c.digest()
    assert a.digest("eof") == c.digest("eof")


def test_dump_round_trip(tmp_path):
    cfg = PipelineConfig.load(overrides=["nudge.substeps=3"], env={})
    ini = tmp_path / "dump.ini"
    ini.write_text(cfg.dump())
    assert PipelineConfig.load(ini, env={}).sections == cfg.sections


def test_cli_show_config(capsys):
    assert cli.main(["show-config", "--set", "nudge.neighbors=6"]) == 0
    assert "neighbors = 6" in capsys.readouterr().out


def test_cli_error_names_stage(tmp_path, capsys):
    assert cli.main(["fit", "--workdir", str(tmp_path)]) == 1
    err = capsys.readouterr().err
    assert err.startswith("qgrom fit: DependencyError") and "basis.eof" in err


def test_cli_bad_config(capsys):
    assert cli.main(["eof", "--set", "eof.variance_fraction=2"]) == 1
    assert "ConfigurationError" in capsys.readouterr().err
