"""Coupled internal/translational dynamics of a two-level atom in a standing wave.

State vector layout ``(x, p, g1, g2, G1, G2)`` with ``g = g1 + i g2`` and
``G = G1 + i G2``. Equations of motion (normalized time tau):

    dx/dtau = omega_r p
    dp/dtau = Omega(tau) u sin x,            u = g G* + g* G
    dg/dtau = i Omega(tau) G cos x
    dG/dtau = -i Delta G + i Omega(tau) g cos x

with Omega = 1 for a constant field and a Gaussian envelope centred at
1.5 sigma_tau otherwise. The norm |g|^2 + |G|^2 is conserved in both cases,
the energy only for a constant field.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field
from typing import Union

import numpy as np

from . import _kernels
from .errors import IntegrationError


@dataclass(frozen=True)
class AtomState:
    x: float
    p: float
    g: complex = 1.0 + 0j
    G: complex = 0j

    @classmethod
    def ground(cls, x0: float = 0.0, p0: float = 0.0) -> "AtomState":
        return cls(float(x0), float(p0), 1.0 + 0j, 0j)

    @classmethod
    def from_array(cls, y) -> "AtomState":
        return cls(float(y[0]), float(y[1]), complex(y[2], y[3]), complex(y[4], y[5]))

    def to_array(self) -> np.ndarray:
        g, G = complex(self.g), complex(self.G)
        return np.array([self.x, self.p, g.real, g.imag, G.real, G.imag], dtype=float)

    @property
    def norm(self) -> float:
        return abs(self.g) ** 2 + abs(self.G) ** 2

    def check_finite(self) -> None:
        if not np.all(np.isfinite(self.to_array())):
            raise ValueError(f"non-finite state {self}")


@dataclass(frozen=True)
class ConstantField:
    kind: str = field(default="constant", init=False)


@dataclass(frozen=True)
class GaussianField:
    sigma_tau: float
    kind: str = field(default="gaussian", init=False)

    def __post_init__(self):
        if not (self.sigma_tau > 0 and math.isfinite(self.sigma_tau)):
            raise ValueError(f"sigma_tau must be positive, got {self.sigma_tau}")


Profile = Union[ConstantField, GaussianField]


@dataclass(frozen=True)
class SimParams:
    """Control parameters. ``omega_r = 0`` freezes the atom in place (test mode)."""

    omega_r: float
    delta: float
    profile: Profile = ConstantField()

    def __post_init__(self):
        if not (math.isfinite(self.omega_r) and math.isfinite(self.delta)):
            raise ValueError("omega_r and delta must be finite")
        if self.omega_r < 0:
            raise ValueError(f"omega_r must be >= 0, got {self.omega_r}")

    @property
    def sigma_tau(self) -> float:
        return self.profile.sigma_tau if isinstance(self.profile, GaussianField) else 0.0

    @property
    def kernel_params(self) -> tuple[float, float, float]:
        return (float(self.omega_r), float(self.delta), float(self.sigma_tau))

    def as_dict(self) -> dict:
        d = {"omega_r": self.omega_r, "delta": self.delta, "profile": self.profile.kind}
        if isinstance(self.profile, GaussianField):
            d["sigma_tau"] = self.profile.sigma_tau
        return d


def field_amplitude(tau: float, params: SimParams) -> float:
    s = params.sigma_tau
    if s <= 0:
        return 1.0
    return math.exp(-(((tau - 1.5 * s) / s) ** 2))


def derivatives(state: AtomState, params: SimParams, tau: float = 0.0) -> AtomState:
    """Time derivative of the state, returned as an AtomState of rates."""
    state.check_finite()
    amp = field_amplitude(tau, params)
    g, G = complex(state.g), complex(state.G)
    u = interaction_energy(state)
    return AtomState(
        x=params.omega_r * state.p,
        p=amp * u * math.sin(state.x),
        g=1j * amp * G * math.cos(state.x),
        G=-1j * params.delta * G + 1j * amp * g * math.cos(state.x),
    )


def interaction_energy(state: AtomState) -> float:
    """u = g G* + g* G = 2 (g1 G1 + g2 G2); the dipole expectation is -u."""
    g, G = complex(state.g), complex(state.G)
    return 2.0 * (g.real * G.real + g.imag * G.imag)


def energy(state: AtomState, params: SimParams) -> float:
    """Total energy (omega_r/2) p^2 + u cos x - (Delta/2)(|G|^2 - |g|^2)."""
    state.check_finite()
    return (0.5 * params.omega_r * state.p**2
            + interaction_energy(state) * math.cos(state.x)
            - 0.5 * params.delta * (abs(state.G) ** 2 - abs(state.g) ** 2))


def _energy_array(y: np.ndarray, params: SimParams) -> np.ndarray:
    u = 2.0 * (y[:, 2] * y[:, 4] + y[:, 3] * y[:, 5])
    pop = y[:, 4] ** 2 + y[:, 5] ** 2 - y[:, 2] ** 2 - y[:, 3] ** 2
    return 0.5 * params.omega_r * y[:, 1] ** 2 + u * np.cos(y[:, 0]) - 0.5 * params.delta * pop


@dataclass(frozen=True)
class IntegratorOptions:
    rtol: float = 1e-10
    atol: float = 1e-10
    dt: float = 0.1
    max_step: float = math.inf
    max_steps: int = 10**8
    drift_abort: float = 1e-6
    project: bool = False

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0 and self.dt > 0 and self.max_step > 0):
            raise ValueError("tolerances, dt and max_step must be positive")


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled solution with monitored invariants."""

    tau: np.ndarray
    y: np.ndarray
    H: np.ndarray
    norm: np.ndarray
    u: np.ndarray
    params: SimParams
    options: IntegratorOptions
    nsteps: int = 0
    nfev: int = 0

    @property
    def x(self) -> np.ndarray:
        return self.y[:, 0]

    @property
    def p(self) -> np.ndarray:
        return self.y[:, 1]

    @property
    def g(self) -> np.ndarray:
        return self.y[:, 2] + 1j * self.y[:, 3]

    @property
    def G(self) -> np.ndarray:
        return self.y[:, 4] + 1j * self.y[:, 5]

    def state(self, k: int) -> AtomState:
        return AtomState.from_array(self.y[k])

    @property
    def norm_drift(self) -> float:
        return float(np.max(np.abs(self.norm - self.norm[0])))

    @property
    def energy_drift(self) -> float | None:
        if isinstance(self.params.profile, GaussianField):
            return None
        return float(np.max(np.abs(self.H - self.H[0])))

    def drifts(self) -> dict:
        return {"norm": self.norm_drift, "energy": self.energy_drift}


def sample_grid(tau_end: float, dt: float) -> np.ndarray:
    """0, dt, 2 dt, ... with ``tau_end`` always the last sample."""
    n = int(math.floor(tau_end / dt + 1e-9))
    t = dt * np.arange(n + 1)
    if tau_end - t[-1] > 1e-9 * max(1.0, tau_end):
        t = np.append(t, tau_end)
    else:
        t[-1] = tau_end
    return t


def _check_start(state0: AtomState, tol: float = 1e-9) -> None:
    state0.check_finite()
    if abs(state0.norm - 1.0) > tol:
        raise ValueError(f"initial state not normalized: |g|^2+|G|^2 = {state0.norm!r}")


def _raise_status(status: int, tau: float | None = None):
    raise IntegrationError(
        f"integration failed: {_kernels.STATUS_MESSAGES[status]}", status=status, tau=tau)


def integrate(state0: AtomState, params: SimParams, tau_end: float,
              opts: IntegratorOptions | None = None, t_eval=None) -> Trajectory:
    """Integrate from tau = 0 to ``tau_end`` and sample on a uniform grid.

    Raises IntegrationError on step-size underflow, exhausted step budget,
    or when the norm (any profile) or energy (constant profile) drifts by
    more than ``opts.drift_abort``.
    """
    opts = opts or IntegratorOptions()
    _check_start(state0)
    if not (tau_end > 0 and math.isfinite(tau_end)):
        raise ValueError(f"tau_end must be positive and finite, got {tau_end}")
    tau = sample_grid(tau_end, opts.dt) if t_eval is None else np.asarray(t_eval, dtype=float)
    y, status, nsteps, nfev = _kernels.integrate(
        _kernels.MODE_STATE, params.kernel_params, state0.to_array(), 0.0, tau,
        opts.rtol, opts.atol, opts.max_step, opts.max_steps, opts.drift_abort, opts.project)
    if status != _kernels.STATUS_OK:
        reached = np.isfinite(y[:, 0])
        _raise_status(status, float(tau[reached][-1]) if reached.any() else 0.0)
    traj = Trajectory(
        tau=tau, y=y, H=_energy_array(y, params),
        norm=np.sum(y[:, 2:6] ** 2, axis=1), u=2.0 * (y[:, 2] * y[:, 4] + y[:, 3] * y[:, 5]),
        params=params, options=opts, nsteps=int(nsteps), nfev=int(nfev))
    e = traj.energy_drift
    if e is not None and e > opts.drift_abort and not opts.project:
        raise IntegrationError(f"energy drift {e:.3e} exceeds abort threshold {opts.drift_abort:g}",
                               status=_kernels.STATUS_NORM_DRIFT, tau=tau_end)
    return traj


def integrate_final(y0: np.ndarray, params: SimParams, tau_end: float,
                    opts: IntegratorOptions | None = None) -> np.ndarray:
    """Final state only (no sampling); the ensemble fast path."""
    opts = opts or IntegratorOptions()
    y, status, _, _ = _kernels.integrate(
        _kernels.MODE_STATE, params.kernel_params, np.asarray(y0, dtype=float), 0.0,
        np.array([tau_end]), opts.rtol, opts.atol, opts.max_step, opts.max_steps,
        opts.drift_abort, opts.project)
    if status != _kernels.STATUS_OK:
        _raise_status(status)
    return y[-1]


def resonance_solution(tau, p0: float, omega_r: float, x0: float = 0.0) -> np.ndarray:
    """Closed-form trajectory at Delta = 0 from the ground state, rows (x, p, g1, g2, G1, G2).

    With u = 0 the atom flies freely, x = x0 + omega_r p0 tau, and the
    internal state rotates by theta = integral of cos x:
    g = cos theta, G = i sin theta.
    """
    tau = np.asarray(tau, dtype=float)
    v = omega_r * p0
    x = x0 + v * tau
    theta = tau * math.cos(x0) if v == 0 else (np.sin(x) - math.sin(x0)) / v
    z = np.zeros_like(tau)
    return np.stack([x, np.full_like(tau, p0), np.cos(theta), z, z, np.sin(theta)], axis=-1)


def frozen_rabi_excited(tau, x0: float, delta: float) -> np.ndarray:
    """|G(tau)|^2 for a motionless atom (omega_r = 0) starting in the ground state."""
    c2 = math.cos(x0) ** 2
    w = math.sqrt(0.25 * delta**2 + c2)
    if w == 0:
        return np.zeros_like(np.asarray(tau, dtype=float))
    return c2 / w**2 * np.sin(w * np.asarray(tau, dtype=float)) ** 2


def flight_time(p0: float, omega_r: float) -> float:
    """Time between adjacent nodes for uniform motion, pi / (omega_r p0)."""
    return math.pi / (omega_r * p0)


class InitialRegime(str, enum.Enum):
    BALLISTIC = "Ballistic"
    WALKING = "Walking"
    TRAPPED = "Trapped"


def ballistic_threshold(omega_r: float) -> float:
    """Initial momentum at which kinetic energy equals the maximal potential depth 1."""
    return math.sqrt(2.0 / omega_r)


def initial_regime_estimate(state0: AtomState, params: SimParams) -> InitialRegime:
    """Energy-based regime estimate, valid for small detuning.

    K0 > 1 means ballistic motion; otherwise H0 < 0 traps the atom in its
    first well and 0 <= H0 <= 1 gives walking.
    """
    K0 = 0.5 * params.omega_r * state0.p**2
    if K0 > 1.0:
        return InitialRegime.BALLISTIC
    if energy(state0, params) < 0.0:
        return InitialRegime.TRAPPED
    return InitialRegime.WALKING


def second_derivative_x(traj: Trajectory) -> np.ndarray:
    """Pendulum form of the translational equation: 2 omega_r (g1 G1 + g2 G2) Omega sin x."""
    amp = np.array([field_amplitude(t, traj.params) for t in traj.tau]) \
        if traj.params.sigma_tau > 0 else 1.0
    return traj.params.omega_r * amp * traj.u * np.sin(traj.x)


def options_dict(opts: IntegratorOptions) -> dict:
    d = asdict(opts)
    if math.isinf(d["max_step"]):
        d["max_step"] = None
    return d
