"""Pipeline configuration: INI file + command-line overrides + built-in defaults.

Precedence (highest first): ``--set section.key=value`` flags, the
``QGROM_WORKDIR`` environment variable (workdir only), the config file, the
preset defaults.
"""

from __future__ import annotations

import configparser
import copy
import hashlib
import json
import os
from io import StringIO
from pathlib import Path

from qgrom.errors import ConfigurationError
from qgrom.nudge import NudgeConfig
from qgrom.params import KM, STRATIFICATION_KM, QgParams
from qgrom.sysid import FeatureConfig

WORKDIR_ENV = "QGROM_WORKDIR"

DEFAULTS: dict[str, dict] = {
    "experiment": {"preset": "desk", "seed": 0},
    "model": {
        "beta": 2e-11,
        "mu": 4e-8,
        "nu": 50.0,
        "tau0": 0.03,
        "basin_km": 3840.0,
        "depths_m": "250, 750, 3000",
        "stratification_km2": "; ".join(", ".join(repr(v) for v in row) for row in STRATIFICATION_KM),
        "alpha_km": 120.0,
        "f0": 0.83e-4,
        "rho0": 1000.0,
        "forcing_scale": "",
        "robert_asselin": 0.01,
        "cfl_max": 0.5,
    },
    "grids": {"high_n": 129, "low_n": 33, "high_dt": "", "low_dt": ""},
    "protocol": {
        "spinup_years": 10.0,
        "train_years": 2.0,
        "run_years": 4.0,
        "snapshot_interval_days": 1.0,
        "snapshot_layers": "1",
    },
    "eof": {"variance_fraction": 0.98, "mean_removed": False},
    "features": {
        "poly_degree": 2,
        "fourier_mode": "state",
        "harmonics": 50,
        "rcond": 1e-10,
        "ridge": 0.0,
    },
    "nudge": {
        "neighbors": 5,
        "eta_h": 0.001,
        "eta0": 0.0,
        "substeps": 1,
        "fixed_eta": "",
        "index": "exhaustive",
    },
    "paths": {"workdir": "qgrom-work"},
}

PRESETS = {
    "desk": {},
    "full": {"grids": {"high_n": 513, "low_n": 129}, "protocol": {"spinup_years": 100.0}},
}

# Artifact file names inside the workdir.
ARTIFACTS = {
    "snap_high": "snapshots_high.qgs",
    "snap_low": "snapshots_low.qgs",
    "reference": "reference_q1.qgs",
    "lowres": "lowres_q1.qgs",
    "basis": "basis.eof",
    "pcs": "pcs_train.csv",
    "model": "model.rhs",
    "residuals": "fit_residuals.csv",
    "trajectory": "trajectory.csv",
    "reconstructed": "reconstructed_q1.qgs",
    "report": "report",
}


def _coerce(value: str, default):
    if isinstance(default, bool):
        v = value.strip().lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        raise ConfigurationError(f"not a boolean: {value!r}")
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float):
        return float(value)
    return value.strip()


class PipelineConfig:
    """Typed view over the merged configuration sections."""

    def __init__(self, sections: dict[str, dict], source: Path | None = None):
        self.sections = sections
        self.source = source
        self.validate()

    @classmethod
    def load(cls, path=None, overrides=(), preset: str | None = None, env=None) -> "PipelineConfig":
        env = os.environ if env is None else env
        file_values: dict[str, dict[str, str]] = {}
        if path is not None:
            parser = configparser.ConfigParser(interpolation=None)
            parser.optionxform = str
            if not parser.read(path):
                raise ConfigurationError(f"cannot read config file {path}")
            file_values = {s: dict(parser[s]) for s in parser.sections()}

        cli: dict[str, dict[str, str]] = {}
        for item in overrides:
            key, sep, value = item.partition("=")
            section, dot, name = key.strip().partition(".")
            if not sep or not dot:
                raise ConfigurationError(f"override must look like section.key=value, got {item!r}")
            cli.setdefault(section, {})[name] = value

        chosen = (
            preset
            or cli.get("experiment", {}).get("preset")
            or file_values.get("experiment", {}).get("preset")
            or "desk"
        ).strip()
        if chosen not in PRESETS:
            raise ConfigurationError(f"unknown preset {chosen!r}")
        sections = copy.deepcopy(DEFAULTS)
        for sec, vals in PRESETS[chosen].items():
            sections[sec].update(vals)
        sections["experiment"]["preset"] = chosen

        layers = [file_values]
        if env.get(WORKDIR_ENV):
            layers.append({"paths": {"workdir": env[WORKDIR_ENV]}})
        layers.append(cli)
        for layer in layers:
            for sec, vals in layer.items():
                if sec not in sections:
                    raise ConfigurationError(f"unknown config section [{sec}]")
                for k, v in vals.items():
                    if k not in DEFAULTS[sec]:
                        raise ConfigurationError(f"unknown key {sec}.{k}")
                    if sec == "experiment" and k == "preset":
                        continue
                    try:
                        sections[sec][k] = _coerce(str(v), DEFAULTS[sec][k])
                    except ValueError as exc:
                        raise ConfigurationError(f"{sec}.{k}: {exc}") from exc
        base = Path(path).resolve().parent if path is not None else Path.cwd()
        wd = Path(sections["paths"]["workdir"]).expanduser()
        sections["paths"]["workdir"] = str(wd if wd.is_absolute() else (base / wd).resolve())
        return cls(sections, Path(path) if path else None)

    def __getitem__(self, section: str) -> dict:
        return self.sections[section]

    @property
    def workdir(self) -> Path:
        return Path(self.sections["paths"]["workdir"])

    def path(self, artifact: str) -> Path:
        return self.workdir / ARTIFACTS[artifact]

    @property
    def full_scale(self) -> bool:
        return self["experiment"]["preset"] == "full"

    def validate(self) -> None:
        p = self["protocol"]
        if not p["run_years"] > p["train_years"] > 0:
            raise ConfigurationError("the integration horizon must exceed the training window")
        if p["spinup_years"] < 0 or p["snapshot_interval_days"] <= 0:
            raise ConfigurationError("invalid protocol times")
        hi, lo = self["grids"]["high_n"], self["grids"]["low_n"]
        if lo > hi or (hi - 1) % (lo - 1):
            raise ConfigurationError(f"grid {hi} cannot be projected point-to-point onto {lo}")
        frac = self["eof"]["variance_fraction"]
        if not 0 < frac <= 1:
            raise ConfigurationError("variance fraction must lie in (0, 1]")
        self.snapshot_layers()
        self.qg_params("high")
        self.qg_params("low")

    def snapshot_layers(self) -> list[int]:
        raw = str(self["protocol"]["snapshot_layers"]).strip().lower()
        layers = [0, 1, 2] if raw == "all" else [int(v) - 1 for v in raw.split(",")]
        if 0 not in layers or any(not 0 <= v < 3 for v in layers):
            raise ConfigurationError("snapshot_layers must include layer 1 and lie in 1..3")
        return sorted(set(layers))

    def qg_params(self, resolution: str) -> QgParams:
        if resolution not in ("high", "low"):
            raise ConfigurationError(f"resolution must be 'high' or 'low', got {resolution!r}")
        m = self["model"]
        g = self["grids"]
        try:
            depths = tuple(float(v) for v in m["depths_m"].split(","))
            strat = tuple(
                tuple(float(v) / KM**2 for v in row.split(","))
                for row in m["stratification_km2"].split(";")
            )
        except ValueError as exc:
            raise ConfigurationError(f"bad model vectors: {exc}") from exc
        dt = g[f"{resolution}_dt"]
        fs = m["forcing_scale"]
        return QgParams(
            beta=m["beta"], mu=m["mu"], nu=m["nu"], tau0=m["tau0"], L=m["basin_km"] * KM,
            H=depths, S=strat, alpha=m["alpha_km"] * KM, f0=m["f0"], rho0=m["rho0"],
            forcing_scale=float(fs) if fs else None, dt=float(dt) if dt else None,
            grid_n=g[f"{resolution}_n"], robert_asselin=m["robert_asselin"], cfl_max=m["cfl_max"],
        )

    def feature_config(self, m: int) -> FeatureConfig:
        f = self["features"]
        return FeatureConfig(
            m=m, poly_degree=f["poly_degree"], fourier_mode=f["fourier_mode"],
            harmonics=f["harmonics"], base_period=self["protocol"]["train_years"] * 365.0,
            rcond=f["rcond"], ridge=f["ridge"],
        )

    def nudge_config(self, sigma_max: float | None = None) -> NudgeConfig:
        n = self["nudge"]
        p = self["protocol"]
        return NudgeConfig(
            neighbors=n["neighbors"], eta_h=n["eta_h"], eta0=n["eta0"],
            dt=p["snapshot_interval_days"], horizon=p["run_years"] * 365.0,
            substeps=n["substeps"], sigma_max=sigma_max,
            fixed_eta=float(n["fixed_eta"]) if n["fixed_eta"] != "" else None, index=n["index"],
        )

    def digest(self, *sections: str) -> str:
        """Stable hash of the named sections (all but paths when none given)."""
        names = sections or tuple(s for s in self.sections if s != "paths")
        blob = json.dumps({s: self.sections[s] for s in names}, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def dump(self) -> str:
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        for sec, vals in self.sections.items():
            parser[sec] = {k: str(v).lower() if isinstance(v, bool) else str(v) for k, v in vals.items()}
        buf = StringIO()
        parser.write(buf)
        return buf.getvalue()
