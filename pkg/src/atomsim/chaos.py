"""Maximum Lyapunov exponent, (Delta, p0) chaos maps and predictability time."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .dynamics import AtomState, ConstantField, Profile, SimParams, _check_start
from .errors import DomainError, IntegrationError

METHODS = ("variational", "two-trajectory")


@dataclass(frozen=True)
class LyapunovOptions:
    method: str = "variational"
    renorm_interval: float = 1.0
    rtol: float = 1e-10
    atol: float = 1e-10
    d0: float = 1e-8
    rel_tol: float = 0.05
    abs_tol: float = 1e-3
    max_steps: int = 10**9

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if not (self.renorm_interval > 0 and self.d0 > 0 and self.rtol > 0 and self.atol > 0):
            raise ValueError("renorm_interval, d0 and tolerances must be positive")


@dataclass(frozen=True)
class LyapunovResult:
    lambda_: float
    tau_total: float
    convergence_series: np.ndarray
    converged: bool
    method: str
    renorm_interval: float

    @property
    def times(self) -> np.ndarray:
        return self.renorm_interval * np.arange(1, self.convergence_series.size + 1)


# Generic unit direction; avoids aligning with any symmetry of the flow.
_TANGENT0 = np.array([1.0, 1.0, 1.0, 1.0, 1.0, 1.0]) / math.sqrt(6.0)


def is_converged(series: np.ndarray, rel_tol: float, abs_tol: float) -> bool:
    """Running estimates at 3/4 and at the end agree, or the exponent is negligible."""
    if series.size < 4 or not np.all(np.isfinite(series)):
        return False
    last = series[-1]
    three_q = series[(3 * series.size) // 4 - 1]
    return abs(last) < abs_tol or abs(last - three_q) < rel_tol * abs(last)


def max_lyapunov(state0: AtomState, params: SimParams, tau_total: float,
                 opts: LyapunovOptions | None = None) -> LyapunovResult:
    """Largest Lyapunov exponent by renormalized tangent or two-trajectory propagation.

    The separation is measured with the Euclidean norm in
    (x, p, g1, g2, G1, G2) and reset every ``opts.renorm_interval``.
    """
    opts = opts or LyapunovOptions()
    _check_start(state0)
    if not (tau_total >= opts.renorm_interval and math.isfinite(tau_total)):
        raise ValueError("tau_total must be finite and at least one renormalization interval")
    y = state0.to_array()
    if opts.method == "variational":
        mode, y0 = _kernels.MODE_TANGENT, np.concatenate([y, _TANGENT0])
    else:
        mode, y0 = _kernels.MODE_PAIR, np.concatenate([y, y + opts.d0 * _TANGENT0])
    logs, _, status, _, _ = _kernels.lyapunov(
        mode, params.kernel_params, y0, tau_total, opts.renorm_interval, opts.d0,
        opts.rtol, opts.atol, math.inf, opts.max_steps)
    if status != _kernels.STATUS_OK:
        raise IntegrationError(
            f"Lyapunov integration failed: {_kernels.STATUS_MESSAGES[status]}", status=status)
    series = np.cumsum(logs) / (opts.renorm_interval * np.arange(1, logs.size + 1))
    return LyapunovResult(
        lambda_=float(series[-1]), tau_total=float(logs.size * opts.renorm_interval),
        convergence_series=series, converged=is_converged(series, opts.rel_tol, opts.abs_tol),
        method=opts.method, renorm_interval=opts.renorm_interval)


def predictability_time(lam: float, dx_confidence: float, dx0: float) -> float:
    """Horizon (1/lambda) ln(dx / dx0) beyond which position forecasts fail."""
    if not lam > 0:
        raise DomainError("predictability time is unbounded for lambda <= 0 (regular motion)")
    if not (dx_confidence >= dx0 > 0):
        raise DomainError("need dx_confidence >= dx0 > 0")
    return math.log(dx_confidence / dx0) / lam


@dataclass(frozen=True)
class ChaosMap:
    delta_axis: np.ndarray
    p0_axis: np.ndarray
    lambda_grid: np.ndarray          # shape (len(delta_axis), len(p0_axis)); NaN marks failed cells
    converged_grid: np.ndarray
    omega_r: float
    profile: Profile
    tau_total: float
    method: str
    x0: float = 0.0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        shape = (self.delta_axis.size, self.p0_axis.size)
        if self.lambda_grid.shape != shape or self.converged_grid.shape != shape:
            raise ValueError("grid dimensions do not match axes")

    @property
    def n_failed(self) -> int:
        return int(np.isnan(self.lambda_grid).sum())


def _cell(args):
    delta, p0, omega_r, profile, tau_total, opts, x0 = args
    try:
        res = max_lyapunov(AtomState.ground(x0, p0), SimParams(omega_r, delta, profile),
                           tau_total, opts)
    except (IntegrationError, ValueError, FloatingPointError):
        return math.nan, False
    return res.lambda_, res.converged


def _axis(rng, n) -> np.ndarray:
    lo, hi = rng
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ValueError("axis ranges must be finite")
    if n < 2:
        raise ValueError("resolution must be at least 2 per axis")
    return np.linspace(lo, hi, n)


def lyapunov_map(delta_range, p0_range, resolution, omega_r: float = 1e-3,
                 tau_total: float = 1e4, opts: LyapunovOptions | None = None,
                 profile: Profile = ConstantField(), x0: float = 0.0,
                 jobs: int = 1) -> ChaosMap:
    """Grid of maximum Lyapunov exponents over (Delta, p0), ground-state start at ``x0``.

    Cells are independent; with ``jobs > 1`` they run in worker processes and
    are assembled by index, so the grid does not depend on scheduling.
    """
    opts = opts or LyapunovOptions()
    nd, npp = (resolution, resolution) if np.isscalar(resolution) else resolution
    deltas, p0s = _axis(delta_range, int(nd)), _axis(p0_range, int(npp))
    SimParams(omega_r, 0.0, profile)
    cells = [(float(d), float(p), omega_r, profile, tau_total, opts, x0) for d in deltas for p in p0s]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            out = list(ex.map(_cell, cells, chunksize=max(1, len(cells) // (4 * jobs))))
    else:
        out = [_cell(c) for c in cells]
    lam = np.array([o[0] for o in out], dtype=float).reshape(deltas.size, p0s.size)
    conv = np.array([o[1] for o in out], dtype=bool).reshape(deltas.size, p0s.size)
    return ChaosMap(deltas, p0s, lam, conv, omega_r, profile, tau_total, opts.method, x0)


def with_method(opts: LyapunovOptions, method: str) -> LyapunovOptions:
    return replace(opts, method=method)
