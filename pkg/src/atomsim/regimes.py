"""Post-hoc regime classification of trajectories and kinematic features.

Labels: regular flight (RF), chaotic flight (CF), chaotic walking (CW),
trapping (T) and chaotic oscillation in a well (CT, exploratory).
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.ndimage import maximum_filter1d, uniform_filter1d
from scipy.signal import find_peaks

from .dynamics import AtomState, IntegratorOptions, SimParams, Trajectory, integrate

P_HYST = 0.5
LAMBDA_THRESHOLD = 5e-3
CLASSIFY_TAU = 1e4
GRID_CELLS = 100


class Regime(str, enum.Enum):
    RF = "RF"
    CF = "CF"
    CW = "CW"
    T = "T"
    CT = "CT"


@dataclass(frozen=True)
class TrajectoryFeatures:
    node_crossings: int
    direction_reversals: int
    max_excursion: float
    confined_to_first_well: bool
    lambda_: float

    def as_dict(self) -> dict:
        return asdict(self)


def node_index(x) -> np.ndarray:
    """Index n of the cell (pi/2 + (n-1) pi, pi/2 + n pi] between nodes."""
    return np.floor((np.asarray(x) - 0.5 * math.pi) / math.pi).astype(np.int64)


def count_node_crossings(x: np.ndarray) -> int:
    n = node_index(x)
    return int(np.abs(np.diff(n)).sum())


def count_reversals(p: np.ndarray, p_hyst: float = P_HYST) -> int:
    """Sign changes of p, registered only once |p| exceeds ``p_hyst`` on the new side."""
    reversals = 0
    side = 0
    for v in p:
        if v > p_hyst:
            s = 1
        elif v < -p_hyst:
            s = -1
        else:
            continue
        if side and s != side:
            reversals += 1
        side = s
    return reversals


def extract_features(traj: Trajectory, lambda_: float, p_hyst: float = P_HYST) -> TrajectoryFeatures:
    x = traj.x
    if x.size < 2:
        raise ValueError("trajectory needs at least two samples")
    if np.max(np.abs(np.diff(x))) >= math.pi:
        raise ValueError("trajectory under-sampled: |dx| >= pi between samples may skip nodes")
    confined = bool(np.all(np.abs(x) < 0.5 * math.pi))
    return TrajectoryFeatures(
        node_crossings=count_node_crossings(x),
        direction_reversals=count_reversals(traj.p, p_hyst),
        max_excursion=float(np.max(np.abs(x - x[0]))),
        confined_to_first_well=confined,
        lambda_=float(lambda_),
    )


def classify(features: TrajectoryFeatures, lambda_threshold: float = LAMBDA_THRESHOLD) -> Regime:
    chaotic = features.lambda_ > lambda_threshold
    if features.confined_to_first_well:
        return Regime.CT if chaotic else Regime.T
    if chaotic:
        return Regime.CW if features.direction_reversals > 0 else Regime.CF
    return Regime.RF if features.node_crossings > 0 else Regime.T


def relative_threshold(lambda_grid: np.ndarray, fraction: float = 1e-2,
                       floor: float = LAMBDA_THRESHOLD) -> float:
    """Threshold as a fraction of the largest exponent in a map, never below ``floor``."""
    finite = lambda_grid[np.isfinite(lambda_grid)]
    return max(floor, fraction * float(finite.max())) if finite.size else floor


@dataclass(frozen=True)
class Portrait:
    tau_mark: float
    g1: np.ndarray
    g2: np.ndarray
    coverage: float


def disk_coverage(g1: np.ndarray, g2: np.ndarray, cells: int = GRID_CELLS) -> float:
    """Fraction of grid cells inside the unit disk visited by the (g1, g2) points."""
    edges = np.linspace(-1.0, 1.0, cells + 1)
    centres = 0.5 * (edges[1:] + edges[:-1])
    inside = (centres[:, None] ** 2 + centres[None, :] ** 2) <= 1.0
    i = np.clip(np.searchsorted(edges, g1, side="right") - 1, 0, cells - 1)
    j = np.clip(np.searchsorted(edges, g2, side="right") - 1, 0, cells - 1)
    hit = np.zeros((cells, cells), dtype=bool)
    hit[i, j] = True
    return float((hit & inside).sum() / inside.sum())


def group_parameter_portrait(traj: Trajectory, tau_marks, cells: int = GRID_CELLS) -> list[Portrait]:
    """Projections on the complex g plane truncated at each mark, with cell coverage."""
    marks = sorted(float(m) for m in tau_marks)
    if marks and marks[-1] > traj.tau[-1] + 1e-9:
        raise ValueError(f"trajectory ends at {traj.tau[-1]} before mark {marks[-1]}")
    out = []
    for m in marks:
        k = int(np.searchsorted(traj.tau, m + 1e-9, side="right"))
        g1, g2 = traj.y[:k, 2], traj.y[:k, 3]
        out.append(Portrait(m, g1, g2, disk_coverage(g1, g2, cells)))
    return out


def modulation_period(tau: np.ndarray, u: np.ndarray, fast_period: float = 15.0,
                      min_period: float = 20.0) -> float:
    """Spacing of the peaks of the slow envelope of |u(tau)|.

    The envelope is a sliding maximum over ``fast_period`` (longer than the
    internal oscillation) followed by a moving average of the same width.
    The period is the least-squares slope of peak time against peak index.
    """
    dt = float(tau[1] - tau[0])
    w = max(int(round(fast_period / dt)), 1)
    env = uniform_filter1d(maximum_filter1d(np.abs(u), size=w, mode="nearest"), size=w, mode="nearest")
    peaks, _ = find_peaks(env, distance=max(int(min_period / dt), 1),
                          prominence=0.1 * (env.max() - env.min()))
    if peaks.size < 2:
        return math.nan
    return float(np.polyfit(np.arange(peaks.size), tau[peaks], 1)[0])


def _half_cell_means(traj: Trajectory):
    """Mean of u over the first and second half of every complete inter-node cell."""
    cross = np.nonzero(np.diff(node_index(traj.x)))[0]
    cells = np.split(np.arange(traj.x.size), cross + 1)[1:-1]
    first = np.array([traj.u[c[: c.size // 2]].mean() for c in cells])
    second = np.array([traj.u[c[c.size // 2:]].mean() for c in cells])
    return first, second


def node_steps(traj: Trajectory) -> np.ndarray:
    """Change of the local mean of u across each interior node crossing."""
    first, second = _half_cell_means(traj)
    return np.abs(first[1:] - second[:-1])


def node_jump_ratio(traj: Trajectory) -> float:
    """Mean step of the local level of u across nodes over the mean step within cells.

    Local levels are half-cell means of u, which average out the fast internal
    oscillation; raw sample differences are dominated by it everywhere.
    """
    first, second = _half_cell_means(traj)
    if first.size < 2:
        return math.nan
    within = np.abs(second - first).mean()
    return float(np.abs(first[1:] - second[:-1]).mean() / within)


def jump_spread(traj: Trajectory) -> float:
    """Coefficient of variation of the node steps: ~0 for regular, large for chaotic flight."""
    steps = node_steps(traj)
    return float(steps.std() / steps.mean()) if steps.size > 1 else math.nan


def is_flight(features: TrajectoryFeatures) -> bool:
    return features.direction_reversals == 0 and not features.confined_to_first_well


def ballistic_boundary(p0_values, delta: float, omega_r: float = 1e-3,
                       tau_end: float = CLASSIFY_TAU, x0: float = 0.0,
                       opts: IntegratorOptions | None = None) -> tuple[float, np.ndarray]:
    """Smallest scanned p0 above which every atom flies without reversing.

    Returns ``(boundary, flight_flags)``.
    """
    p0_values = np.sort(np.asarray(p0_values, dtype=float))
    opts = opts or IntegratorOptions(dt=0.5)
    flags = np.empty(p0_values.size, dtype=bool)
    for k, p0 in enumerate(p0_values):
        traj = integrate(AtomState.ground(x0, p0), SimParams(omega_r, delta), tau_end, opts)
        flags[k] = count_reversals(traj.p) == 0 and count_node_crossings(traj.x) > 0
    walkers = np.nonzero(~flags)[0]
    if walkers.size == 0:
        return float(p0_values[0]), flags
    if walkers[-1] == p0_values.size - 1:
        return math.nan, flags
    return float(p0_values[walkers[-1] + 1]), flags


# one representative start per regime at omega_r = 1e-3: label -> (Delta, p0)
REFERENCE_CASES = {"RF": (0.8, 45.0), "CF": (0.2, 45.0), "CW": (0.2, 10.0), "T": (-0.2, 5.0)}


@dataclass(frozen=True)
class Classification:
    regime: Regime
    features: TrajectoryFeatures
    params: SimParams
    x0: float
    p0: float
    lambda_threshold: float
    p_hyst: float

    def report(self) -> dict:
        return {
            "parameters": {**self.params.as_dict(), "x0": self.x0, "p0": self.p0},
            "features": self.features.as_dict(),
            "label": self.regime.value,
            "lambda": self.features.lambda_,
            "thresholds": {"lambda": self.lambda_threshold, "p_hyst": self.p_hyst},
        }


def classify_case(x0: float, p0: float, params: SimParams, tau_end: float = CLASSIFY_TAU,
                  opts: IntegratorOptions | None = None, lyap_opts=None,
                  lambda_threshold: float = LAMBDA_THRESHOLD, p_hyst: float = P_HYST) -> Classification:
    """Integrate from the ground state, estimate lambda over the same span, and label."""
    from .chaos import LyapunovOptions, max_lyapunov

    opts = opts or IntegratorOptions()
    lyap_opts = lyap_opts or LyapunovOptions(rtol=opts.rtol, atol=opts.atol)
    state0 = AtomState.ground(x0, p0)
    traj = integrate(state0, params, tau_end, opts)
    lam = max_lyapunov(state0, params, tau_end, lyap_opts).lambda_
    feats = extract_features(traj, lam, p_hyst)
    return Classification(classify(feats, lambda_threshold), feats, params, x0, p0,
                          lambda_threshold, p_hyst)


def raw_node_jump_ratio(traj: Trajectory, window: float = 1.0) -> float:
    """Max |u[k+1] - u[k]| within ``window`` (in x) of a node over the max elsewhere."""
    du = np.abs(np.diff(traj.u))
    xm = 0.5 * (traj.x[1:] + traj.x[:-1])
    dist = np.abs((xm - 0.5 * math.pi + 0.5 * math.pi) % math.pi - 0.5 * math.pi)
    near = dist < window
    if not near.any() or near.all():
        return math.nan
    return float(du[near].max() / du[~near].max())
