"""Acceptance gate: one test per criterion, each reporting a PASS/FAIL line.

Lines are printed as they run (visible with ``-s``) and collected into an
"acceptance criteria" section of the terminal summary.
"""

import math
import time

import numpy as np
import pytest

from atomsim import cli
from atomsim.chaos import LyapunovOptions, max_lyapunov
from atomsim.dynamics import (AtomState, IntegratorOptions, SimParams, frozen_rabi_excited,
                              integrate, resonance_solution)
from atomsim.ensemble import fig10b_spec, histogram, run_ensemble
from atomsim.regimes import (REFERENCE_CASES, ballistic_boundary, classify_case,
                             group_parameter_portrait, modulation_period)
from atomsim.su2 import GroupPair, evolution_matrix_half, representation_matrix

from conftest import ACCEPTANCE_LINES

OMEGA_R = 1e-3


def report(n: int, name: str, ok: bool, detail: str):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {name}  ({detail})"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


@pytest.fixture(scope="module")
def reference_runs():
    runs = {}
    for label, (delta, p0) in REFERENCE_CASES.items():
        t0 = time.perf_counter()
        traj = integrate(AtomState.ground(0.0, p0), SimParams(OMEGA_R, delta), 1000.0)
        runs[label] = (traj, time.perf_counter() - t0)
    return runs


def test_01_norm_conservation(reference_runs):
    worst = max(t.norm_drift for t, _ in reference_runs.values())
    slowest = max(dt for _, dt in reference_runs.values())
    report(1, "norm conservation", worst < 1e-8 and slowest < 1.0,
           f"max norm drift {worst:.2e} < 1e-8, slowest run {slowest:.3f} s < 1 s")


def test_02_energy_conservation(reference_runs):
    worst = max(t.energy_drift for t, _ in reference_runs.values())
    report(2, "energy conservation", worst < 1e-8, f"max |H - H0| {worst:.2e} < 1e-8")


def test_03_resonance_oracle():
    traj = integrate(AtomState.ground(0.0, 10.0), SimParams(OMEGA_R, 0.0), 1000.0)
    err = float(np.abs(traj.y - resonance_solution(traj.tau, 10.0, OMEGA_R)).max())
    report(3, "resonance oracle", err < 1e-6, f"max-norm error {err:.2e} < 1e-6")


def test_04_frozen_rabi_oracle():
    worst = 0.0
    for x0 in (0.0, 1.0):
        for delta in (0.0, 0.5, 2.0):
            traj = integrate(AtomState.ground(x0, 0.0), SimParams(0.0, delta), 100.0,
                             IntegratorOptions(dt=0.01))
            got = traj.y[:, 4] ** 2 + traj.y[:, 5] ** 2
            worst = max(worst, float(np.abs(got - frozen_rabi_excited(traj.tau, x0, delta)).max()))
    report(4, "frozen-position Rabi oracle", worst < 1e-8, f"max error {worst:.2e} < 1e-8")


def test_05_representation_matrices():
    rng = np.random.default_rng(20240501)
    t0 = time.perf_counter()
    unit_err = half_err = 0.0
    for _ in range(1000):
        v = rng.normal(size=4)
        v /= np.linalg.norm(v)
        pair = GroupPair(complex(v[0], v[1]), complex(v[2], v[3]))
        phase = rng.uniform(-10, 10)
        for two_j in range(11):
            U = representation_matrix(two_j, pair, phase)
            unit_err = max(unit_err, float(np.abs(U.conj().T @ U - np.eye(two_j + 1)).max()))
        half_err = max(half_err, float(np.abs(representation_matrix(1, pair, phase)
                                              - evolution_matrix_half(pair, phase)).max()))
    dt = time.perf_counter() - t0
    report(5, "representation matrices", unit_err < 1e-10 and half_err < 1e-10 and dt < 60,
           f"unitarity {unit_err:.1e}, j=1/2 agreement {half_err:.1e}, {dt:.1f} s")


_RESONANCE = {}


def _resonance_lambda(p0):
    if p0 not in _RESONANCE:
        _RESONANCE[p0] = max_lyapunov(AtomState.ground(0.0, p0), SimParams(OMEGA_R, 0.0), 1e5).lambda_
    return _RESONANCE[p0]


def test_06_integrability_at_resonance():
    lams = {p0: _resonance_lambda(p0) for p0 in (5.0, 10.0, 45.0)}
    detail = ", ".join(f"p0={p:g}: {v:.2e}" for p, v in lams.items())
    report(6, "integrability at resonance", all(v < 1e-3 for v in lams.values()), detail + " < 1e-3")


def test_07_chaos_positivity():
    parts, ok = [], True
    for p0 in (10.0, 45.0):
        s, P = AtomState.ground(0.0, p0), SimParams(OMEGA_R, 0.2)
        var = max_lyapunov(s, P, 1e5)
        two = max_lyapunov(s, P, 1e5, LyapunovOptions(method="two-trajectory"))
        base = _resonance_lambda(p0)
        agree = abs(var.lambda_ - two.lambda_) / var.lambda_
        ok &= (var.lambda_ > 0 and var.lambda_ >= 10 * base and var.converged and two.converged
               and agree < 0.2)
        parts.append(f"p0={p0:g}: lambda {var.lambda_:.4f} vs {two.lambda_:.4f}, "
                     f"{var.lambda_ / base:.0f}x baseline, rel diff {agree:.1%}")
    report(7, "chaos positivity", ok, "; ".join(parts))


def test_08_regime_taxonomy():
    labels = {}
    for tol in (1e-10, 1e-12):
        opts = IntegratorOptions(rtol=tol, atol=tol)
        for label, (delta, p0) in REFERENCE_CASES.items():
            c = classify_case(0.0, p0, SimParams(OMEGA_R, delta), opts=opts)
            labels[(label, tol)] = c.regime.value
    ok = all(v == k[0] for k, v in labels.items())
    report(8, "regime taxonomy", ok, ", ".join(f"{k[0]}@{k[1]:g}->{v}" for k, v in labels.items()))


def test_09_ballistic_threshold():
    target = math.sqrt(2.0 / OMEGA_R)
    boundary, _ = ballistic_boundary(np.arange(30.0, 56.0, 0.5), 0.05, OMEGA_R, tau_end=1e4)
    ok = abs(boundary - target) <= 0.1 * target
    report(9, "ballistic threshold", ok, f"boundary p0 = {boundary:g} vs {target:.1f} (+-10%)")


def test_10_flight_modulation_period():
    delta, p0 = REFERENCE_CASES["RF"]
    traj = integrate(AtomState.ground(0.0, p0), SimParams(OMEGA_R, delta), 1000.0)
    T = modulation_period(traj.tau, traj.u)
    target = math.pi / (OMEGA_R * p0)
    report(10, "flight modulation period", abs(T - target) <= 0.1 * target,
           f"period {T:.2f} vs pi/(omega_r p0) = {target:.2f} (+-10%)")


def test_11_scattering_contrast():
    t0 = time.perf_counter()
    chaotic = run_ensemble(fig10b_spec(0.2))
    regular = run_ensemble(fig10b_spec(1.0))
    wc, wr = chaotic.positions_in_wavelengths, regular.positions_in_wavelengths
    support = histogram(wc).support_width(0.05)
    ratio = wc.std() / wr.std()
    ok = 6.0 <= support <= 10.0 and ratio >= 2.0
    report(11, "scattering contrast", ok,
           f"support {support:.2f} wavelengths in [6, 10], std ratio {ratio:.2f} >= 2, "
           f"excluded {chaotic.n_excluded + regular.n_excluded}, {time.perf_counter() - t0:.0f} s")


@pytest.mark.xfail(strict=True, reason="unattainable as stated: the regular-flight orbit already "
                   "fills the annulus 0.35 < |g| < 1, so no portrait can reach twice its coverage; "
                   "see the decision ledger")
def test_12_portrait_coverage():
    cov, inside = {}, True
    for label in ("CW", "RF"):
        delta, p0 = REFERENCE_CASES[label]
        traj = integrate(AtomState.ground(0.0, p0), SimParams(OMEGA_R, delta), 1000.0)
        pt = group_parameter_portrait(traj, [1000.0])[0]
        cov[label] = pt.coverage
        inside &= bool(np.all(pt.g1 ** 2 + pt.g2 ** 2 <= 1 + 1e-9))
    ratio = cov["CW"] / cov["RF"]
    report(12, "portrait coverage", ratio >= 2.0 and inside,
           f"CW {cov['CW']:.3f} / RF {cov['RF']:.3f} = {ratio:.2f} (need >= 2), inside disk {inside}")


def test_13_determinism(tmp_path):
    commands = [
        ["simulate", "--delta", "0.2", "--p0", "10", "--tau", "200"],
        ["lyap", "--delta", "0.2", "--p0", "45", "--tau", "500", "--method", "two-trajectory"],
        ["map", "--delta", "-0.2:0.2:3", "--p0", "5:45:3", "--tau", "100", "--jobs", "2", "--gnuplot"],
        ["classify", "--delta", "-0.2", "--p0", "5", "--tau", "500"],
        ["ensemble", "--paper-fig10b", "--n-atoms", "40", "--tau", "200", "--seed", "99", "--jobs", "2"],
    ]
    mismatched = []
    for k, argv in enumerate(commands):
        out = tmp_path / str(k)
        argv = argv + ["--deterministic", "--out", str(out)]
        assert cli.main(argv, environ={}) == 0
        first = {p.name: p.read_bytes() for p in out.iterdir()}
        assert cli.main(argv, environ={}) == 0
        if {p.name: p.read_bytes() for p in out.iterdir()} != first:
            mismatched.append(argv[0])
    report(13, "determinism", not mismatched,
           f"{len(commands)} commands repeated, mismatched: {mismatched or 'none'}")
