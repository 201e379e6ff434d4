"""Monte Carlo ensembles, the Gaussian-beam scattering experiment, histograms, units.

Initial conditions come from a counter-based generator (Philox) keyed by
``(seed, atom_id)``: every atom's draws are fixed by its index alone, so
serial and parallel runs produce bitwise-identical results.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.constants import h as PLANCK

from .dynamics import GaussianField, IntegratorOptions, SimParams, integrate_final
from .errors import IntegrationError

# histogram defaults; positions in wavelengths x / 2 pi
HIST_BIN_WIDTH = 0.25
HIST_RANGE = (-6.0, 6.0)


@dataclass(frozen=True)
class EnsembleSpec:
    n_atoms: int
    x0_mean: float
    p0_mean: float
    sigma_x: float
    sigma_p: float
    seed: int
    params: SimParams
    tau_end: float
    opts: IntegratorOptions = field(default_factory=IntegratorOptions)

    def __post_init__(self):
        if int(self.n_atoms) < 1:
            raise ValueError("n_atoms must be >= 1")
        if self.sigma_x < 0 or self.sigma_p < 0:
            raise ValueError("sigmas must be >= 0")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")
        if not (self.tau_end > 0 and math.isfinite(self.tau_end)):
            raise ValueError("tau_end must be positive")

    def as_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k not in ("params", "opts")}
        d["params"] = self.params.as_dict()
        return d


def atom_rng(seed: int, atom_id: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=np.array([seed, atom_id], dtype=np.uint64)))


def draw_initial(spec: EnsembleSpec, atom_id: int) -> tuple[float, float]:
    z = atom_rng(int(spec.seed), int(atom_id)).standard_normal(2)
    return spec.x0_mean + spec.sigma_x * z[0], spec.p0_mean + spec.sigma_p * z[1]


@dataclass(frozen=True)
class EnsembleResult:
    spec: EnsembleSpec
    atom_id: np.ndarray
    initial: np.ndarray    # (n, 2): x0, p0
    final: np.ndarray      # (n, 6); NaN rows for excluded atoms
    failed: np.ndarray     # bool mask

    @property
    def n_excluded(self) -> int:
        return int(self.failed.sum())

    @property
    def x_final(self) -> np.ndarray:
        return self.final[~self.failed, 0]

    @property
    def positions_in_wavelengths(self) -> np.ndarray:
        return self.x_final / (2.0 * math.pi)

    @property
    def norm(self) -> np.ndarray:
        return np.sum(self.final[:, 2:6] ** 2, axis=1)


def _run_chunk(args):
    spec, ids = args
    init = np.empty((ids.size, 2))
    final = np.full((ids.size, 6), np.nan)
    failed = np.zeros(ids.size, dtype=bool)
    for k, i in enumerate(ids):
        x0, p0 = draw_initial(spec, i)
        init[k] = x0, p0
        try:
            final[k] = integrate_final(np.array([x0, p0, 1.0, 0.0, 0.0, 0.0]),
                                       spec.params, spec.tau_end, spec.opts)
        except IntegrationError:
            failed[k] = True
    return init, final, failed


def run_ensemble(spec: EnsembleSpec, jobs: int = 1) -> EnsembleResult:
    """Integrate every atom from the ground state; failures are excluded and counted."""
    ids = np.arange(int(spec.n_atoms), dtype=np.int64)
    if jobs > 1 and ids.size > 1:
        chunks = np.array_split(ids, min(ids.size, 8 * jobs))
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            parts = list(ex.map(_run_chunk, [(spec, c) for c in chunks]))
    else:
        parts = [_run_chunk((spec, ids))]
    return EnsembleResult(
        spec=spec, atom_id=ids,
        initial=np.concatenate([p[0] for p in parts]),
        final=np.concatenate([p[1] for p in parts]),
        failed=np.concatenate([p[2] for p in parts]))


@dataclass(frozen=True)
class Histogram:
    bin_left: np.ndarray
    counts: np.ndarray
    density: np.ndarray
    bin_width: float

    def support_width(self, fraction: float = 0.05) -> float:
        """Extent from the first to the last bin whose density is >= fraction * peak."""
        idx = np.nonzero(self.density >= fraction * self.density.max())[0]
        return float((idx[-1] - idx[0] + 1) * self.bin_width) if idx.size else 0.0

    def local_maxima(self) -> np.ndarray:
        d = self.density
        inner = (d[1:-1] > d[:-2]) & (d[1:-1] >= d[2:]) & (d[1:-1] > 0)
        return np.nonzero(inner)[0] + 1


def histogram(values, bin_width: float = HIST_BIN_WIDTH, range=HIST_RANGE) -> Histogram:
    """Left-closed, right-open bins; density integrates to one over in-range values."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("histogram of empty input")
    if not bin_width > 0:
        raise ValueError("bin_width must be positive")
    lo, hi = float(range[0]), float(range[1])
    nbins = int(round((hi - lo) / bin_width))
    if nbins < 1 or not math.isclose(lo + nbins * bin_width, hi, rel_tol=1e-9, abs_tol=1e-12):
        raise ValueError("range must span a whole number of bins")
    idx = np.floor((v - lo) / bin_width).astype(np.int64)
    ok = (idx >= 0) & (idx < nbins)
    counts = np.bincount(idx[ok], minlength=nbins)
    n_in = int(ok.sum())
    density = counts / (n_in * bin_width) if n_in else np.zeros(nbins)
    return Histogram(lo + bin_width * np.arange(nbins), counts, density, bin_width)


@dataclass(frozen=True)
class PhysicalSetup:
    """Laboratory parameters (SI units; frequencies in Hz, Rabi frequency as Omega0 / 2 pi)."""

    wavelength: float
    recoil_frequency: float
    rabi_frequency: float
    beam_radius: float
    longitudinal_velocity: float

    def __post_init__(self):
        for k, v in asdict(self).items():
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ValueError(f"{k} must be positive, got {v!r}")

    @property
    def omega0(self) -> float:
        return 2.0 * math.pi * self.rabi_frequency


def recoil_frequency_from_mass(wavelength: float, mass: float) -> float:
    """nu_rec = hbar k^2 / (2 m) / 2 pi = h / (2 m lambda^2)."""
    if not (wavelength > 0 and mass > 0):
        raise ValueError("wavelength and mass must be positive")
    return PLANCK / (2.0 * mass * wavelength**2)


def normalize_physical(setup: PhysicalSetup) -> tuple[float, float]:
    """Dimensionless (omega_r, sigma_tau).

    omega_r = hbar k^2 / (m Omega0) = 2 (2 pi nu_rec) / Omega0 and
    sigma_tau = r Omega0 / v_z, with Omega0 the angular Rabi frequency.
    """
    omega_r = 2.0 * 2.0 * math.pi * setup.recoil_frequency / setup.omega0
    sigma_tau = setup.beam_radius * setup.omega0 / setup.longitudinal_velocity
    return omega_r, sigma_tau


def velocity_for_sigma_tau(beam_radius: float, rabi_frequency: float, sigma_tau: float) -> float:
    """Longitudinal velocity giving the interaction time ``sigma_tau``."""
    if not (beam_radius > 0 and rabi_frequency > 0 and sigma_tau > 0):
        raise ValueError("beam_radius, rabi_frequency and sigma_tau must be positive")
    return beam_radius * 2.0 * math.pi * rabi_frequency / sigma_tau


def fig10b_spec(delta: float, n_atoms: int = 10_000, seed: int = 2010,
                opts: IntegratorOptions | None = None) -> EnsembleSpec:
    """Lithium beam crossing a Gaussian standing wave: sigma_x = sigma_p = 2, p0 = 10, tau = 1000."""
    return EnsembleSpec(n_atoms=n_atoms, x0_mean=0.0, p0_mean=10.0, sigma_x=2.0, sigma_p=2.0,
                        seed=seed, params=SimParams(1e-3, delta, GaussianField(400.0)),
                        tau_end=1000.0, opts=opts or IntegratorOptions())
