"""Experiment stages, chained by files in one work directory.

simulate (high, low) -> project -> eof -> fit -> rom -> reconstruct -> diagnose

Every stage writes ``<artifact>.manifest.json`` next to its main output with
the grid, time window, a digest of the configuration sections it depends on
and SHA-256 checksums of everything it wrote. Downstream stages refuse to run
when an upstream manifest is missing or was produced under a different
configuration.
"""

from __future__ import annotations

import csv
import logging
from pathlib import Path

import numpy as np

from qgrom import eof, fieldops, io, nudge, sysid
from qgrom.config import PipelineConfig
from qgrom.errors import DependencyError, ManifestError
from qgrom.fieldops import FieldSeries
from qgrom.params import DAY, YEAR
from qgrom.qg.model import QgModel, run
from qgrom.render import render_field, render_panels

log = logging.getLogger(__name__)

# Configuration sections each stage depends on (cumulative).
STAGE_SECTIONS = {
    "simulate": ("model", "grids", "protocol"),
    "project": ("model", "grids", "protocol"),
    "eof": ("model", "grids", "protocol", "eof"),
    "fit": ("model", "grids", "protocol", "eof", "features"),
    "rom": ("model", "grids", "protocol", "eof", "features", "nudge"),
    "reconstruct": ("model", "grids", "protocol", "eof", "features", "nudge"),
    "diagnose": ("model", "grids", "protocol", "eof", "features", "nudge"),
}

# Published distances of the full-scale (513/129 grid) experiment, shown next to ours.
FULL_SCALE_REFERENCE = {
    "mean_dist_reference": 11.9,
    "mean_dist_lowres": 7.2,
    "mean_dist_rom": 12.6,
    "dist_means_reference_lowres": 12.92,
    "dist_means_reference_rom": 2.65,
}


def manifest_path(path: Path) -> Path:
    return path.with_name(path.name + ".manifest.json")


def _write_manifest(cfg: PipelineConfig, stage: str, main: Path, extra: dict, files=()) -> dict:
    files = [main, *files]
    manifest = {
        "stage": stage,
        "preset": cfg["experiment"]["preset"],
        "full_scale": cfg.full_scale,
        "config_digest": cfg.digest(*STAGE_SECTIONS[stage]),
        "checksums": {Path(f).name: io.sha256_file(f) for f in files},
        **extra,
    }
    io.write_json(manifest_path(main), manifest)
    return manifest


def _require(cfg: PipelineConfig, artifact: str, stage: str, expect: dict | None = None) -> dict:
    """Check an upstream artifact and its manifest; return the manifest."""
    path = cfg.path(artifact)
    mpath = manifest_path(path)
    for p in (path, mpath):
        if not p.exists():
            raise DependencyError(f"[{stage}] missing upstream artifact: {p}")
    manifest = io.read_json(mpath)
    upstream = manifest["stage"]
    want = cfg.digest(*STAGE_SECTIONS[upstream])
    if manifest["config_digest"] != want:
        raise ManifestError(
            f"[{stage}] {path.name} was produced with a different configuration "
            f"(digest {manifest['config_digest']} != {want}); re-run '{upstream}'"
        )
    if io.sha256_file(path) != manifest["checksums"][path.name]:
        raise ManifestError(f"[{stage}] {path.name} does not match its manifest checksum")
    for key, value in (expect or {}).items():
        if manifest.get(key) != value:
            raise ManifestError(f"[{stage}] {path.name}: {key}={manifest.get(key)!r}, expected {value!r}")
    return manifest


def _refuse_overwrite(path: Path, force: bool, stage: str) -> None:
    if path.exists() and not force:
        raise FileExistsError(f"[{stage}] {path} exists; pass --force to overwrite")


def cmd_simulate(cfg: PipelineConfig, resolution: str, force: bool = False) -> Path:
    """Spin up from rest, then write the production window as snapshots."""
    stage = "simulate"
    out = cfg.path(f"snap_{resolution}")
    _refuse_overwrite(out, force, stage)
    cfg.workdir.mkdir(parents=True, exist_ok=True)
    params = cfg.qg_params(resolution)
    proto = cfg["protocol"]
    spin = proto["spinup_years"] * YEAR
    end = spin + proto["run_years"] * YEAR
    interval = proto["snapshot_interval_days"] * DAY
    layers = cfg.snapshot_layers()
    model = QgModel(params)
    progress = int(YEAR / params.dt)

    log.info("[simulate:%s] spin-up %.1f years on %d^2", resolution, proto["spinup_years"], params.grid_n)
    state = run(params, 0.0, spin, interval, None, None, model=model, progress_every=progress)
    restart = cfg.workdir / f"state_{resolution}_spinup.qgstate"
    io.write_state(restart, state)

    log.info("[simulate:%s] production %.1f years", resolution, proto["run_years"])
    n = params.grid_n
    with io.SnapshotWriter(out, n, n, len(layers), layers) as writer:
        state = run(params, spin, end, interval, state, writer, model=model, progress_every=progress)
    final = cfg.workdir / f"state_{resolution}_final.qgstate"
    io.write_state(final, state)

    extra = {
        "resolution": resolution,
        "grid": [n, n],
        "layers": [v + 1 for v in layers],
        "window_days": [spin / DAY, end / DAY],
        "params": params.to_dict(),
        "params_digest": params.digest(),
        "records": writer.count,
    }
    _write_manifest(cfg, stage, out, extra, [restart, final])
    return out


def _layer1_series(cfg: PipelineConfig, artifact: str, coarse_n: int, f0: float) -> tuple[FieldSeries, dict]:
    manifest = _require(cfg, artifact, "project")
    times, fields = io.read_snapshots(cfg.path(artifact))
    q1 = fieldops.subsample(fields[:, 0], coarse_n) / f0
    return FieldSeries(times - manifest["window_days"][0], q1), manifest


def cmd_project(cfg: PipelineConfig) -> tuple[Path, Path]:
    """Layer-1 PV of both runs on the coarse grid in 1/f0 units, time from production start."""
    stage = "project"
    n_low = cfg["grids"]["low_n"]
    hi_params = cfg.qg_params("high")
    ref, mh = _layer1_series(cfg, "snap_high", n_low, hi_params.f0)
    low, ml = _layer1_series(cfg, "snap_low", n_low, cfg.qg_params("low").f0)
    if not np.array_equal(ref.times, low.times):
        raise ManifestError(f"[{stage}] high- and low-resolution snapshot times differ")
    outs = []
    for artifact, series, src in (("reference", ref, mh), ("lowres", low, ml)):
        path = cfg.path(artifact)
        io.write_field_series(path, series)
        _write_manifest(cfg, stage, path, {
            "grid": [n_low, n_low], "source_grid": src["grid"],
            "window_days": [float(series.times[0]), float(series.times[-1])],
            "records": len(series), "units": "1/f0",
        })
        outs.append(path)
    return tuple(outs)


def training_window(cfg: PipelineConfig, series: FieldSeries) -> FieldSeries:
    return series.window(0.0, cfg["protocol"]["train_years"] * 365.0)


def cmd_eof(cfg: PipelineConfig) -> Path:
    """EOFs of the training window of the reference; keeps the leading modes."""
    stage = "eof"
    n_low = cfg["grids"]["low_n"]
    _require(cfg, "reference", stage, {"grid": [n_low, n_low]})
    ref = io.read_field_series(cfg.path("reference"))
    train = training_window(cfg, ref)
    full = eof.compute_eof(train.fields, mean_removed=cfg["eof"]["mean_removed"])
    m = max(1, eof.select_mode_count(full.eigenvalues, cfg["eof"]["variance_fraction"]))
    basis = full.truncate(m)
    path = cfg.path("basis")
    io.write_basis(path, basis)
    z = eof.project(train.fields.reshape(len(train), -1), basis)
    io.write_pcs(cfg.path("pcs"), train.times, z)
    log.info("[eof] %d modes capture %.4f of the variance", m, basis.explained_fraction()[-1])
    _write_manifest(cfg, stage, path, {
        "grid": [n_low, n_low], "modes": m, "training_records": len(train),
        "window_days": [float(train.times[0]), float(train.times[-1])],
        "captured_fraction": float(basis.explained_fraction()[-1]),
    }, [cfg.path("pcs")])
    return path


def cmd_fit(cfg: PipelineConfig) -> Path:
    stage = "fit"
    _require(cfg, "basis", stage)
    times, y = io.read_pcs(cfg.path("pcs"))
    dt = cfg["protocol"]["snapshot_interval_days"]
    dydt = sysid.estimate_derivatives(y, dt)
    config = cfg.feature_config(y.shape[1]).with_normalisation(y)
    model = sysid.fit(y, dydt, config, times)
    path = cfg.path("model")
    io.write_model(path, model)
    with open(cfg.path("residuals"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["component", "residual_norm", "target_norm"])
        for i, (r, t) in enumerate(zip(model.residual_norms, np.linalg.norm(dydt, axis=0))):
            w.writerow([i + 1, repr(float(r)), repr(float(t))])
    _write_manifest(cfg, stage, path, {
        "modes": config.m, "features": config.n_features, "samples": len(y),
    }, [cfg.path("residuals")])
    return path


def cmd_rom(cfg: PipelineConfig, eta_zero: bool = False) -> Path:
    """Integrate the fitted system with adaptive nudging from the first training PC."""
    stage = "rom"
    _require(cfg, "model", stage)
    model = io.read_model(cfg.path("model"))
    _, y = io.read_pcs(cfg.path("pcs"))
    ncfg = cfg.nudge_config(nudge.sigma_threshold(y))
    if eta_zero:
        from dataclasses import replace

        ncfg = replace(ncfg, fixed_eta=0.0)
    traj = nudge.integrate(model, y, ncfg, z0=y[0])
    path = cfg.path("trajectory")
    io.write_trajectory(path, traj)
    _write_manifest(cfg, stage, path, {
        "steps": len(traj.times) - 1, "sigma_max": ncfg.sigma_max, "eta_zero": eta_zero,
        "max_eta": float(traj.eta.max()),
    })
    return path


def cmd_reconstruct(cfg: PipelineConfig) -> Path:
    stage = "reconstruct"
    _require(cfg, "trajectory", stage)
    _require(cfg, "basis", stage)
    basis = io.read_basis(cfg.path("basis"))
    traj = io.read_trajectory(cfg.path("trajectory"))
    ny, nx = basis.grid_shape
    fields = eof.reconstruct(traj.z, basis).reshape(-1, ny, nx)
    path = cfg.path("reconstructed")
    io.write_field_series(path, FieldSeries(traj.times, fields))
    _write_manifest(cfg, stage, path, {"grid": [ny, nx], "records": len(traj.times)})
    return path


def distance_table(reference: FieldSeries, lowres: FieldSeries, rom: FieldSeries) -> dict:
    """The five phase-space distances between the three solutions."""
    mr, ml, mt = (fieldops.time_mean(s) for s in (reference, lowres, rom))
    return {
        "mean_dist_reference": fieldops.mean_phase_distance(reference),
        "mean_dist_lowres": fieldops.mean_phase_distance(lowres),
        "mean_dist_rom": fieldops.mean_phase_distance(rom),
        "dist_means_reference_lowres": fieldops.l2_distance(mr, ml),
        "dist_means_reference_rom": fieldops.l2_distance(mr, mt),
    }


def write_report(path: Path, table: dict, full_scale: bool) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["quantity", "value", "full_scale_reference"])
        for key, value in table.items():
            w.writerow([key, repr(float(value)), FULL_SCALE_REFERENCE[key]])
        fh.write(
            "# full_scale_reference: published distances for the 513/129 grid, 100-year spin-up experiment; "
            f"this run is {'full scale' if full_scale else 'desk scale'}\n"
        )


def cmd_diagnose(cfg: PipelineConfig) -> Path:
    """Distance table (CSV) plus time-mean and standard-deviation heatmaps."""
    stage = "diagnose"
    for artifact in ("reference", "lowres", "reconstructed"):
        _require(cfg, artifact, stage)
    ref = io.read_field_series(cfg.path("reference"))
    low = io.read_field_series(cfg.path("lowres"))
    rom = io.read_field_series(cfg.path("reconstructed"))
    if len(rom) != len(ref) or not np.allclose(rom.times, ref.times):
        raise ManifestError(f"[{stage}] reconstructed and reference series cover different times")
    outdir = cfg.path("report")
    outdir.mkdir(parents=True, exist_ok=True)
    table = distance_table(ref, low, rom)
    report = outdir / "distances.csv"
    write_report(report, table, cfg.full_scale)

    names = ("reference", "lowres", "rom")
    series = (ref, low, rom)
    means = [fieldops.time_mean(s) for s in series]
    stds = [fieldops.std_field(s) for s in series]
    images = []
    for name, mean, std in zip(names, means, stds):
        images.append(render_field(outdir / f"{name}_mean.ppm", mean, scale=4))
        images.append(render_field(outdir / f"{name}_std.ppm", std, scale=4))
    images.append(render_panels(outdir / "panels.ppm", [means, stds], scale=4))
    for name, s in zip(names, series):
        images.append(render_panels(outdir / f"{name}_snapshots.ppm", [[s.fields[len(s) // 2], s.fields[-1]]], scale=4))
    _write_manifest(cfg, stage, report, {"distances": table}, images)
    return report


def cmd_render(field_file, out, record: str = "mean", vmax: float | None = None, scale: int = 1) -> Path:
    """Heatmap of one record (index), the time mean or the std of a field file."""
    series = io.read_field_series(field_file)
    if record == "mean":
        field = fieldops.time_mean(series)
    elif record == "std":
        field = fieldops.std_field(series)
    else:
        field = series.fields[int(record)]
    return render_field(out, field, vmax=vmax, scale=scale)


def cmd_all(cfg: PipelineConfig, force: bool = False) -> Path:
    for resolution in ("high", "low"):
        cmd_simulate(cfg, resolution, force=force)
    cmd_project(cfg)
    cmd_eof(cfg)
    cmd_fit(cfg)
    cmd_rom(cfg)
    cmd_reconstruct(cfg)
    return cmd_diagnose(cfg)
