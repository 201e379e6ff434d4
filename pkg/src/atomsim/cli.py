"""Command-line interface.

Configuration layers, lowest to highest precedence: built-in defaults, a
``--paper-figN`` preset, a ``--config`` file, ``ATOMSIM_<KEY>`` environment
variables, explicit flags. Exit codes: 0 success, 1 numerical failure
(error JSON on stderr), 2 usage error (nothing written).
"""

from __future__ import annotations

import argparse
import json
import math
import re
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io
from .chaos import LyapunovOptions, lyapunov_map, max_lyapunov, predictability_time
from .dynamics import (AtomState, ConstantField, GaussianField, IntegratorOptions, SimParams,
                       frozen_rabi_excited, integrate, options_dict, resonance_solution)
from .ensemble import (EnsembleSpec, PhysicalSetup, histogram, normalize_physical,
                       recoil_frequency_from_mass, run_ensemble, velocity_for_sigma_tau)
from .errors import NumericalError
from .regimes import REFERENCE_CASES, classify_case, group_parameter_portrait, modulation_period

EXIT_OK, EXIT_NUMERICAL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- value types

def _bool(s):
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off", ""):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _range(s):
    """``lo:hi:n`` -> (lo, hi, n)."""
    parts = str(s).split(":")
    if len(parts) != 3:
        raise ValueError(f"expected lo:hi:n, got {s!r}")
    return float(parts[0]), float(parts[1]), int(parts[2])


def _interval(s):
    parts = str(s).split(":")
    if len(parts) != 2:
        raise ValueError(f"expected lo:hi, got {s!r}")
    lo, hi = float(parts[0]), float(parts[1])
    if not hi > lo:
        raise ValueError(f"empty interval {s!r}")
    return lo, hi


def _floats(s):
    items = [t for t in str(s).replace(";", ",").split(",") if t.strip()]
    return tuple(float(t) for t in items)


def _cases(s):
    """``label:delta:p0`` items separated by commas."""
    out = []
    for item in (t.strip() for t in str(s).split(",")):
        if not item:
            continue
        parts = item.split(":")
        if len(parts) != 3 or not re.fullmatch(r"[A-Za-z0-9_.+-]+", parts[0]):
            raise ValueError(f"expected label:delta:p0, got {item!r}")
        out.append((parts[0], float(parts[1]), float(parts[2])))
    return tuple(out)


def _opt_float(s):
    return None if s is None or str(s).strip().lower() in ("", "none") else float(s)


def _opt_str(s):
    return None if s is None or str(s).strip().lower() in ("", "none") else str(s)


@dataclass(frozen=True)
class Key:
    conv: object
    default: object
    help: str


def _common(tau_default):
    return {
        "omega_r": Key(float, 1e-3, "recoil frequency omega_r"),
        "x0": Key(float, 0.0, "initial position"),
        "tau": Key(float, tau_default, "integration time"),
        "rtol": Key(float, 1e-10, "relative tolerance"),
        "atol": Key(float, 1e-10, "absolute tolerance"),
        "profile": Key(str, "constant", "field profile: constant | gaussian"),
        "sigma_tau": Key(float, 400.0, "Gaussian interaction time (profile = gaussian)"),
        "out": Key(str, "atomsim_output", "output directory"),
        "jobs": Key(int, 1, "worker processes"),
        "seed": Key(int, 0, "random seed"),
        "deterministic": Key(_bool, False, "bitwise reproducible output (sequential, no wall time)"),
        "gnuplot": Key(_bool, False, "also emit gnuplot scripts"),
    }


_LYAP_KEYS = {
    "method": Key(str, "variational", "variational | two-trajectory"),
    "renorm_interval": Key(float, 1.0, "renormalization interval"),
    "d0": Key(float, 1e-8, "initial separation (two-trajectory)"),
}

SCHEMAS = {
    "simulate": {**_common(1000.0),
                 "delta": Key(_opt_float, None, "detuning Delta"),
                 "p0": Key(_opt_float, None, "initial momentum"),
                 "cases": Key(_cases, (), "several runs: label:delta:p0,..."),
                 "dt": Key(float, 0.1, "sampling interval"),
                 "project": Key(_bool, False, "project (g, G) back to unit norm"),
                 "check_analytic": Key(_bool, False, "compare with the closed-form solution"),
                 "portrait_taus": Key(_floats, (), "times at which to cut (g1, g2) portraits")},
    "lyap": {**_common(1e4), **_LYAP_KEYS,
             "delta": Key(_opt_float, None, "detuning Delta"),
             "p0": Key(_opt_float, None, "initial momentum"),
             "dx_confidence": Key(_opt_float, None, "confidence interval for predictability time"),
             "dx0": Key(_opt_float, None, "initial position error for predictability time")},
    "map": {**_common(1e4), **_LYAP_KEYS,
            "delta": Key(_range, None, "detuning axis lo:hi:n"),
            "p0": Key(_range, None, "momentum axis lo:hi:n")},
    "classify": {**_common(1e4),
                 "delta": Key(_opt_float, None, "detuning Delta"),
                 "p0": Key(_opt_float, None, "initial momentum"),
                 "cases": Key(_cases, (), "several runs: label:delta:p0,..."),
                 "dt": Key(float, 0.1, "sampling interval"),
                 "lambda_threshold": Key(float, 5e-3, "chaos threshold on lambda"),
                 "p_hyst": Key(float, 0.5, "momentum hysteresis for reversals")},
    "ensemble": {**_common(1000.0),
                 "delta": Key(_floats, (), "detuning(s), comma separated"),
                 "p0": Key(float, 10.0, "mean initial momentum"),
                 "n_atoms": Key(int, 10_000, "number of atoms"),
                 "sigma_x": Key(float, 2.0, "rms initial position"),
                 "sigma_p": Key(float, 2.0, "rms initial momentum"),
                 "bin_width": Key(float, 0.25, "histogram bin width (wavelengths)"),
                 "hist_range": Key(_interval, (-6.0, 6.0), "histogram range lo:hi (wavelengths)")},
    "convert": {"wavelength": Key(_opt_float, None, "transition wavelength [m]"),
                "rabi": Key(_opt_float, None, "Rabi frequency Omega0/2pi [Hz]"),
                "radius": Key(_opt_float, None, "beam radius [m]"),
                "sigma_tau": Key(_opt_float, None, "target sigma_tau (derives v_z)"),
                "velocity": Key(_opt_float, None, "longitudinal velocity v_z [m/s]"),
                "recoil": Key(_opt_float, 63e3, "recoil frequency [Hz]"),
                "mass": Key(_opt_float, None, "atomic mass [kg]; overrides recoil"),
                "out": Key(_opt_str, None, "optional output directory"),
                "seed": Key(int, 0, "unused; accepted for uniformity"),
                "deterministic": Key(_bool, False, "omit wall time")},
}

# --------------------------------------------------------------------- presets

_FIG_CASES = {k: f"{k}:{d}:{p}" for k, (d, p) in REFERENCE_CASES.items()}

PRESETS = {
    ("map", 1): {"delta": "-1:1:200", "p0": "0:60:200", "omega_r": "1e-3", "tau": "1e4"},
    ("classify", 2): {"cases": ",".join(_FIG_CASES.values()), "omega_r": "1e-3", "tau": "1e4"},
    ("simulate", 2): {"cases": ",".join(_FIG_CASES.values()), "omega_r": "1e-3", "tau": "1000"},
    ("simulate", 3): {"cases": ",".join(f"p{k:02d}:0.2:{p!r}" for k, p in
                                        enumerate(np.linspace(0.0, 50.0, 50).tolist())),
                      "omega_r": "1e-3", "tau": "1000"},
    ("simulate", 4): {"cases": f"{_FIG_CASES['T']},{_FIG_CASES['RF']}", "omega_r": "1e-3", "tau": "1000"},
    ("simulate", 5): {"cases": f"{_FIG_CASES['CF']},{_FIG_CASES['CW']}", "omega_r": "1e-3", "tau": "1000"},
    **{("simulate", n): {"cases": _FIG_CASES[lab], "omega_r": "1e-3", "tau": "1000",
                         "portrait_taus": "100,500,1000"}
       for n, lab in ((6, "T"), (7, "RF"), (8, "CF"), (9, "CW"))},
    ("ensemble", "10b"): {"delta": "0.2,1", "n_atoms": "10000", "x0": "0", "p0": "10",
                          "sigma_x": "2", "sigma_p": "2", "omega_r": "1e-3", "profile": "gaussian",
                          "sigma_tau": "400", "tau": "1000", "bin_width": "0.25",
                          "hist_range": "-6:6"},
}


# ---------------------------------------------------------------------- parser

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="atomsim", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, schema in SCHEMAS.items():
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="flat key = value file")
        for key, spec in schema.items():
            flag = "--" + key.replace("_", "-")
            if spec.conv is _bool:
                sp.add_argument(flag, dest=key, action="store_const", const="true",
                                default=argparse.SUPPRESS, help=spec.help)
            else:
                sp.add_argument(flag, dest=key, default=argparse.SUPPRESS, help=spec.help)
        figs = [f for (cmd, f) in PRESETS if cmd == name]
        if figs:
            grp = sp.add_mutually_exclusive_group()
            for f in figs:
                grp.add_argument(f"--paper-fig{f}", dest="preset", action="store_const", const=f,
                                 default=None, help=f"reproduce figure {f}")
    return p


_NEG_VALUE = re.compile(r"^-[\d.]")


def _join_negative_values(argv):
    """Let ``--delta -1:1:200`` through argparse by rewriting it as ``--delta=-1:1:200``."""
    out, i = [], 0
    while i < len(argv):
        a = argv[i]
        if a.startswith("--") and "=" not in a and i + 1 < len(argv) and _NEG_VALUE.match(argv[i + 1]):
            out.append(f"{a}={argv[i + 1]}")
            i += 2
        else:
            out.append(a)
            i += 1
    return out


def resolve_config(args: argparse.Namespace, environ=None) -> dict:
    schema = SCHEMAS[args.command]
    layers = [{k: s.default for k, s in schema.items()}]
    raw: dict = {}
    preset = getattr(args, "preset", None)
    if preset is not None:
        raw.update(PRESETS[(args.command, preset)])
    if args.config:
        try:
            file_cfg = io.read_config(args.config)
        except (OSError, io.ConfigError) as exc:
            raise UsageError(f"config file: {exc}") from exc
        unknown = sorted(set(file_cfg) - set(schema))
        if unknown:
            raise UsageError(f"unknown config keys for {args.command}: {', '.join(unknown)}")
        raw.update(file_cfg)
    raw.update(io.env_overrides(schema, environ))
    raw.update({k: v for k, v in vars(args).items() if k in schema})
    cfg = dict(layers[0])
    for k, v in raw.items():
        try:
            cfg[k] = schema[k].conv(v)
        except (TypeError, ValueError) as exc:
            raise UsageError(f"invalid value for {k}: {exc}") from exc
    if preset is not None:
        cfg["preset"] = f"fig{preset}"
    return cfg


# -------------------------------------------------------------------- helpers

def _profile(cfg):
    if cfg["profile"] == "constant":
        return ConstantField()
    if cfg["profile"] == "gaussian":
        return GaussianField(cfg["sigma_tau"])
    raise ValueError(f"profile must be constant or gaussian, got {cfg['profile']!r}")


def _iopts(cfg):
    return IntegratorOptions(rtol=cfg["rtol"], atol=cfg["atol"], dt=cfg.get("dt", 0.1),
                             project=cfg.get("project", False))


def _lopts(cfg):
    return LyapunovOptions(method=cfg["method"], renorm_interval=cfg["renorm_interval"],
                           rtol=cfg["rtol"], atol=cfg["atol"], d0=cfg["d0"])


def _cases_or_single(cfg):
    if cfg["cases"]:
        return list(cfg["cases"])
    if cfg["delta"] is None or cfg["p0"] is None:
        raise UsageError("--delta and --p0 are required (or --cases / a preset)")
    return [("trajectory", cfg["delta"], cfg["p0"])]


def _jobs(cfg):
    if cfg.get("deterministic"):
        return 1
    if cfg["jobs"] < 1:
        raise ValueError("jobs must be >= 1")
    return cfg["jobs"]


def _outdir(cfg) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _tag(x: float) -> str:
    return f"{x:g}".replace("-", "m")


# ------------------------------------------------------------------ commands
# Each command validates in ``prepare`` (ValueError -> exit 2, nothing written)
# and returns a ``run`` closure that writes files.

def prepare_simulate(cfg):
    cases = _cases_or_single(cfg)
    profile = _profile(cfg)
    opts = _iopts(cfg)
    runs = [(lab, SimParams(cfg["omega_r"], d, profile), AtomState.ground(cfg["x0"], p0), p0)
            for lab, d, p0 in cases]
    if not (cfg["tau"] > 0 and math.isfinite(cfg["tau"])):
        raise ValueError("tau must be positive")
    marks = sorted(cfg["portrait_taus"])
    if marks and marks[-1] > cfg["tau"]:
        raise ValueError("portrait times must not exceed tau")
    if cfg["check_analytic"]:
        for lab, params, _, _ in runs:
            if params.omega_r != 0 and not (params.delta == 0 and params.sigma_tau == 0):
                raise ValueError(f"case {lab}: no closed form (need delta = 0 with a constant "
                                 "field, or omega_r = 0)")

    def run():
        out = _outdir(cfg)
        results, files = {}, []
        for lab, params, state0, p0 in runs:
            traj = integrate(state0, params, cfg["tau"], opts)
            fname = "trajectory.csv" if lab == "trajectory" else f"trajectory_{lab}.csv"
            io.write_trajectory_csv(out / fname, traj)
            files.append(fname)
            r = {"delta": params.delta, "p0": p0, "file": fname, "drifts": traj.drifts(),
                 "nsteps": traj.nsteps, "modulation_period": modulation_period(traj.tau, traj.u)}
            if cfg["check_analytic"]:
                r["analytic_deviation"] = _analytic_deviation(traj, params, p0, cfg["x0"])
            portraits = []
            for pt in group_parameter_portrait(traj, marks):
                pname = f"portrait_{lab}_tau{pt.tau_mark:g}.csv"
                io.write_portrait_csv(out / pname, traj.tau[: pt.g1.size], pt.g1, pt.g2)
                portraits.append({"tau": pt.tau_mark, "file": pname, "coverage": pt.coverage})
            if portraits:
                r["portraits"] = portraits
            results[lab] = r
        if cfg["gnuplot"]:
            (out / "trajectory.gp").write_text(io.gnuplot_script("trajectory", files))
            pfiles = [p["file"] for r in results.values() for p in r.get("portraits", [])]
            if pfiles:
                (out / "portrait.gp").write_text(io.gnuplot_script("portrait", pfiles))
        return out, {"integrator": options_dict(opts), "runs": results}
    return run


def _analytic_deviation(traj, params, p0, x0) -> dict:
    if params.omega_r == 0:
        ref = frozen_rabi_excited(traj.tau, x0, params.delta)
        got = traj.y[:, 4] ** 2 + traj.y[:, 5] ** 2
        return {"oracle": "frozen-rabi", "max_abs_error_excited_population": float(np.max(np.abs(got - ref)))}
    ref = resonance_solution(traj.tau, p0, params.omega_r, x0)
    return {"oracle": "resonance", "max_abs_error_state": float(np.max(np.abs(traj.y - ref)))}


def prepare_lyap(cfg):
    if cfg["delta"] is None or cfg["p0"] is None:
        raise UsageError("--delta and --p0 are required")
    params = SimParams(cfg["omega_r"], cfg["delta"], _profile(cfg))
    state0 = AtomState.ground(cfg["x0"], cfg["p0"])
    lopts = _lopts(cfg)
    pred = cfg["dx_confidence"] is not None or cfg["dx0"] is not None
    if pred and (cfg["dx_confidence"] is None or cfg["dx0"] is None):
        raise UsageError("--dx-confidence and --dx0 go together")

    def run():
        res = max_lyapunov(state0, params, cfg["tau"], lopts)
        out = _outdir(cfg)
        io.write_lyapunov_csv(out / "lyapunov.csv", res)
        r = {"lambda": res.lambda_, "converged": res.converged, "method": res.method,
             "tau_total": res.tau_total, "file": "lyapunov.csv"}
        if pred:
            r["predictability_time"] = predictability_time(res.lambda_, cfg["dx_confidence"], cfg["dx0"])
        return out, r
    return run


def prepare_map(cfg):
    if cfg["delta"] is None or cfg["p0"] is None:
        raise UsageError("--delta lo:hi:n and --p0 lo:hi:n are required")
    (dlo, dhi, nd), (plo, phi, npp) = cfg["delta"], cfg["p0"]
    lopts = _lopts(cfg)
    profile = _profile(cfg)
    SimParams(cfg["omega_r"], 0.0, profile)
    if nd < 2 or npp < 2:
        raise ValueError("map resolution must be at least 2 per axis")
    jobs = _jobs(cfg)

    def run():
        cmap = lyapunov_map((dlo, dhi), (plo, phi), (nd, npp), omega_r=cfg["omega_r"],
                            tau_total=cfg["tau"], opts=lopts, profile=profile, x0=cfg["x0"],
                            jobs=jobs)
        out = _outdir(cfg)
        io.write_map_csv(out / "chaos_map.csv", cmap)
        io.write_json(out / "chaos_map.json", io.map_sidecar(cmap))
        if cfg["gnuplot"]:
            io.write_gnuplot_matrix(out / "chaos_map.matrix", cmap)
            (out / "chaos_map.gp").write_text(io.gnuplot_script("map", ["chaos_map.matrix"]))
        lam = cmap.lambda_grid
        return out, {"file": "chaos_map.csv", "failed_cells": cmap.n_failed,
                     "lambda_max": float(np.nanmax(lam)) if np.isfinite(lam).any() else None,
                     "converged_fraction": float(cmap.converged_grid.mean())}
    return run


def prepare_classify(cfg):
    cases = _cases_or_single(cfg)
    profile = _profile(cfg)
    opts = _iopts(cfg)
    runs = [(lab, SimParams(cfg["omega_r"], d, profile), p0) for lab, d, p0 in cases]
    AtomState.ground(cfg["x0"], 0.0)

    def run():
        reports = {}
        for lab, params, p0 in runs:
            c = classify_case(cfg["x0"], p0, params, cfg["tau"], opts,
                              LyapunovOptions(rtol=cfg["rtol"], atol=cfg["atol"]),
                              cfg["lambda_threshold"], cfg["p_hyst"])
            reports[lab] = c.report()
        out = _outdir(cfg)
        io.write_json(out / "classification.json", reports)
        return out, {"file": "classification.json",
                     "labels": {k: v["label"] for k, v in reports.items()}}
    return run


def prepare_ensemble(cfg):
    if not cfg["delta"]:
        raise UsageError("--delta is required (one or more comma-separated values)")
    profile = _profile(cfg)
    opts = IntegratorOptions(rtol=cfg["rtol"], atol=cfg["atol"])
    specs = [EnsembleSpec(n_atoms=cfg["n_atoms"], x0_mean=cfg["x0"], p0_mean=cfg["p0"],
                          sigma_x=cfg["sigma_x"], sigma_p=cfg["sigma_p"], seed=cfg["seed"],
                          params=SimParams(cfg["omega_r"], d, profile), tau_end=cfg["tau"], opts=opts)
             for d in cfg["delta"]]
    histogram([0.0], cfg["bin_width"], cfg["hist_range"])
    jobs = _jobs(cfg)

    def run():
        out = _outdir(cfg)
        results, hfiles = {}, []
        single = len(specs) == 1
        for spec in specs:
            res = run_ensemble(spec, jobs=jobs)
            sfx = "" if single else f"_delta{_tag(spec.params.delta)}"
            io.write_ensemble_csv(out / f"ensemble{sfx}.csv", res)
            w = res.positions_in_wavelengths
            r = {"spec": spec.as_dict(), "seed": spec.seed, "excluded": res.n_excluded,
                 "ensemble_file": f"ensemble{sfx}.csv"}
            if w.size:
                h = histogram(w, cfg["bin_width"], cfg["hist_range"])
                io.write_histogram_csv(out / f"histogram{sfx}.csv", h)
                hfiles.append(f"histogram{sfx}.csv")
                r.update(histogram_file=f"histogram{sfx}.csv", std_wavelengths=float(w.std()),
                         support_wavelengths=h.support_width(0.05))
            results[f"delta={spec.params.delta:g}"] = r
        if cfg["gnuplot"] and hfiles:
            (out / "histogram.gp").write_text(io.gnuplot_script("histogram", hfiles))
        return out, results
    return run


def prepare_convert(cfg):
    for k in ("wavelength", "rabi", "radius"):
        if cfg[k] is None:
            raise UsageError(f"--{k} is required")
    if (cfg["sigma_tau"] is None) == (cfg["velocity"] is None):
        raise UsageError("give exactly one of --sigma-tau and --velocity")
    recoil = (recoil_frequency_from_mass(cfg["wavelength"], cfg["mass"])
              if cfg["mass"] is not None else cfg["recoil"])
    v = cfg["velocity"]
    if v is None:
        v = velocity_for_sigma_tau(cfg["radius"], cfg["rabi"], cfg["sigma_tau"])
    setup = PhysicalSetup(cfg["wavelength"], recoil, cfg["rabi"], cfg["radius"], v)

    def run():
        omega_r, sigma_tau = normalize_physical(setup)
        r = {"omega_r": omega_r, "sigma_tau": sigma_tau, "longitudinal_velocity": v,
             "recoil_frequency": recoil}
        out = None
        if cfg["out"] is not None:
            out = _outdir(cfg)
        return out, r
    return run


PREPARE = {"simulate": prepare_simulate, "lyap": prepare_lyap, "map": prepare_map,
           "classify": prepare_classify, "ensemble": prepare_ensemble, "convert": prepare_convert}


def _error_json(kind: str, exc: BaseException, code: int) -> str:
    doc = {"error": kind, "type": type(exc).__name__, "message": str(exc), "exit_code": code}
    for attr in ("status", "tau"):
        if getattr(exc, attr, None) is not None:
            doc[attr] = getattr(exc, attr)
    return json.dumps(doc)


def main(argv=None, environ=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(_join_negative_values(argv))
        cfg = resolve_config(args, environ)
        run = PREPARE[args.command](cfg)
    except (UsageError, ValueError) as exc:
        print(_error_json("usage", exc, EXIT_USAGE), file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(_error_json("numerical", exc, EXIT_NUMERICAL), file=sys.stderr)
        return EXIT_NUMERICAL
    t0 = time.perf_counter()
    try:
        out, results = run()
    except NumericalError as exc:
        print(_error_json("numerical", exc, EXIT_NUMERICAL), file=sys.stderr)
        return EXIT_NUMERICAL
    except (UsageError, ValueError) as exc:
        print(_error_json("usage", exc, EXIT_USAGE), file=sys.stderr)
        return EXIT_USAGE
    wall = None if cfg.get("deterministic") else time.perf_counter() - t0
    m = io.manifest(args.command, cfg, results, wall)
    if out is not None:
        io.write_json(out / "manifest.json", m)
    print(io.dumps(results))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
