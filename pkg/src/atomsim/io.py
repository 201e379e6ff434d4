"""File formats: CSV tables, JSON manifests and sidecars, gnuplot exports, config files."""

from __future__ import annotations

import hashlib
import json
import math
import os
from pathlib import Path

import numpy as np

from . import __version__, _kernels

TRAJECTORY_HEADER = "tau,x,p,g1,g2,G1,G2,H,norm,u"
MAP_HEADER = "delta,p0,lambda,converged"
PORTRAIT_HEADER = "tau,g1,g2"
ENSEMBLE_HEADER = "atom_id,x_final,p_final,g1,g2,G1,G2,norm"
HISTOGRAM_HEADER = "bin_left,count,density"
LYAPUNOV_HEADER = "tau,lambda"

FMT = "%.17g"


def _write_table(path, header: str, columns, fmt=FMT) -> Path:
    path = Path(path)
    data = np.column_stack([np.asarray(c) for c in columns]) if columns else np.empty((0, 0))
    np.savetxt(path, data, fmt=fmt, delimiter=",", header=header, comments="")
    return path


def read_table(path) -> dict[str, np.ndarray]:
    """Read any of the CSV tables back as a column dictionary."""
    with open(path) as fh:
        names = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return {n: data[:, k] for k, n in enumerate(names)}


def write_trajectory_csv(path, traj) -> Path:
    y = traj.y
    return _write_table(path, TRAJECTORY_HEADER,
                        [traj.tau, *(y[:, k] for k in range(6)), traj.H, traj.norm, traj.u])


def write_portrait_csv(path, tau, g1, g2) -> Path:
    return _write_table(path, PORTRAIT_HEADER, [tau, g1, g2])


def write_lyapunov_csv(path, result) -> Path:
    return _write_table(path, LYAPUNOV_HEADER, [result.times, result.convergence_series])


def write_map_csv(path, cmap) -> Path:
    D, P = np.meshgrid(cmap.delta_axis, cmap.p0_axis, indexing="ij")
    with open(path, "w") as fh:
        fh.write(MAP_HEADER + "\n")
        for d, p, lam, c in zip(D.ravel(), P.ravel(), cmap.lambda_grid.ravel(),
                                cmap.converged_grid.ravel()):
            fh.write(f"{d:.17g},{p:.17g},{lam:.17g},{int(bool(c))}\n")
    return Path(path)


def map_sidecar(cmap) -> dict:
    prof = {"kind": cmap.profile.kind}
    if prof["kind"] == "gaussian":
        prof["sigma_tau"] = cmap.profile.sigma_tau
    return {
        "delta_axis": [float(v) for v in cmap.delta_axis],
        "p0_axis": [float(v) for v in cmap.p0_axis],
        "resolution": [int(cmap.delta_axis.size), int(cmap.p0_axis.size)],
        "tau_total": float(cmap.tau_total),
        "method": cmap.method,
        "omega_r": float(cmap.omega_r),
        "x0": float(cmap.x0),
        "profile": prof,
        "failed_cells": cmap.n_failed,
    }


def read_map_csv(path):
    """Return (delta_axis, p0_axis, lambda_grid, converged_grid) from the long format."""
    t = read_table(path)
    deltas, p0s = np.unique(t["delta"]), np.unique(t["p0"])
    shape = (deltas.size, p0s.size)
    return deltas, p0s, t["lambda"].reshape(shape), t["converged"].reshape(shape).astype(bool)


def write_gnuplot_matrix(path, cmap) -> Path:
    """Gnuplot ``nonuniform matrix`` layout: first row p0 axis, first column Delta axis."""
    with open(path, "w") as fh:
        fh.write(" ".join([str(cmap.p0_axis.size)] + [f"{v:.17g}" for v in cmap.p0_axis]) + "\n")
        for d, row in zip(cmap.delta_axis, cmap.lambda_grid):
            fh.write(" ".join([f"{d:.17g}"] + [f"{v:.17g}" for v in row]) + "\n")
    return Path(path)


def gnuplot_script(kind: str, data_files: list[str]) -> str:
    if kind == "map":
        return ("set xlabel 'p0'\nset ylabel 'Delta'\nset cblabel 'lambda'\n"
                "set view map\n"
                f"plot '{data_files[0]}' nonuniform matrix using 1:2:3 with image notitle\n")
    if kind == "trajectory":
        plots = ", ".join(f"'{f}' using 1:($2/(2*pi)) with lines title '{f}'" for f in data_files)
        return ("set datafile separator ','\nset key autotitle columnhead\n"
                f"set xlabel 'tau'\nset ylabel 'x / wavelength'\nplot {plots}\n")
    if kind == "portrait":
        plots = ", ".join(f"'{f}' using 2:3 with dots title '{f}'" for f in data_files)
        return ("set datafile separator ','\nset size square\nset xrange [-1:1]\nset yrange [-1:1]\n"
                f"set xlabel 'g1'\nset ylabel 'g2'\nplot {plots}\n")
    if kind == "histogram":
        plots = ", ".join(f"'{f}' using ($1+0.5*bw):3 with steps title '{f}'" for f in data_files)
        return ("set datafile separator ','\n"
                f"bw = 0.25\nset xlabel 'x / wavelength'\nset ylabel 'density'\nplot {plots}\n")
    raise ValueError(f"unknown gnuplot kind {kind!r}")


def write_ensemble_csv(path, result) -> Path:
    f = result.final
    return _write_table(path, ENSEMBLE_HEADER,
                        [result.atom_id, f[:, 0], f[:, 1], f[:, 2], f[:, 3], f[:, 4], f[:, 5],
                         result.norm])


def write_histogram_csv(path, hist) -> Path:
    with open(path, "w") as fh:
        fh.write(HISTOGRAM_HEADER + "\n")
        for b, c, d in zip(hist.bin_left, hist.counts, hist.density):
            fh.write(f"{b:.17g},{int(c)},{d:.17g}\n")
    return Path(path)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True)


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(dumps(obj) + "\n")
    return path


def config_hash(config: dict) -> str:
    """SHA-256 of the canonical config; the output location is not part of the experiment."""
    cfg = {k: v for k, v in config.items() if k != "out"}
    canon = json.dumps(_jsonable(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def manifest(command: str, config: dict, results: dict, wall_time: float | None) -> dict:
    """Run record. ``wall_time`` is None under --deterministic so files are bitwise stable."""
    m = {
        "tool": "atomsim",
        "version": __version__,
        "kernel": _kernels.IMPLEMENTATION,
        "command": command,
        "config": config,
        "config_hash": config_hash(config),
        "results": results,
    }
    if wall_time is not None:
        m["wall_time_s"] = wall_time
    return m


class ConfigError(ValueError):
    pass


def parse_config(text: str) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment. Values stay strings."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        key = key.replace("-", "_").lower()
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def read_config(path) -> dict[str, str]:
    return parse_config(Path(path).read_text())


def write_config(path, config: dict) -> Path:
    lines = [f"{k} = {v}" for k, v in sorted(config.items()) if v is not None]
    Path(path).write_text("\n".join(lines) + "\n")
    return Path(path)


def env_overrides(keys, environ=None, prefix: str = "ATOMSIM_") -> dict[str, str]:
    environ = os.environ if environ is None else environ
    return {k: environ[prefix + k.upper()] for k in keys if prefix + k.upper() in environ}
