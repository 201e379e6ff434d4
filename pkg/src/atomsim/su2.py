"""SU(2) group-parameter algebra for a driven two-level system.

The evolution operator is written in the noncanonical product form

    U = exp[(g0 - i*phi) R0] exp(g_minus R_minus) exp(g_plus R_plus),
    phi(t) = integral of omega_a,

and everything follows from one complex parameter ``g = exp(g0/2)``. Internally
the second-order equation for ``g`` is integrated as the regular first-order pair

    dg/dt = Omega * w,        dw/dt = i*omega_a*w - conj(Omega)*g,

with ``w = (dg/dt)/Omega``. This form never divides by Omega or differentiates
it, and conserves ``|g|^2 + |w|^2`` exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.integrate import cumulative_simpson, solve_ivp

from .errors import ParameterizationError

EPS_G = 1e-6
NORM_TOL = 1e-9


@dataclass(frozen=True)
class GroupPair:
    """Group element as the complex pair (g, g_tilde) with |g|^2 + |g_tilde|^2 = 1."""

    g: complex
    g_tilde: complex

    @property
    def norm_defect(self) -> float:
        return abs(self.g) ** 2 + abs(self.g_tilde) ** 2 - 1.0

    def check(self, tol: float = NORM_TOL) -> None:
        if not (np.isfinite(self.g) and np.isfinite(self.g_tilde)):
            raise ValueError("group pair has non-finite entries")
        if abs(self.norm_defect) > tol:
            raise ValueError(f"group pair not normalized: |g|^2+|g~|^2-1 = {self.norm_defect:.3e}")


@dataclass(frozen=True)
class ReconstructedParams:
    """Secondary group parameters along a time series."""

    t: np.ndarray
    g_minus: np.ndarray
    g_plus: np.ndarray
    g0: np.ndarray


@dataclass(frozen=True)
class DrivingSpec:
    """Driven two-level Hamiltonian: level splitting ``omega_a`` and complex drive ``Omega(t)``."""

    omega_a: float
    Omega: Callable[[float], complex]

    def phase(self, t):
        return self.omega_a * np.asarray(t, dtype=float)


@dataclass(frozen=True)
class TwoLevelSolution:
    t: np.ndarray
    g: np.ndarray
    dg: np.ndarray
    omega: np.ndarray
    phase: np.ndarray

    @property
    def g_tilde(self) -> np.ndarray:
        return 1j * self.dg / self.omega * np.exp(-1j * self.phase)

    @property
    def norm_defect(self) -> np.ndarray:
        return np.abs(self.g) ** 2 + np.abs(self.g_tilde) ** 2 - 1.0

    def pair(self, k: int) -> GroupPair:
        return GroupPair(complex(self.g[k]), complex(self.g_tilde[k]))


def _drive_samples(spec: DrivingSpec, t: np.ndarray) -> np.ndarray:
    om = np.array([complex(spec.Omega(float(tk))) for tk in t])
    if not np.all(np.isfinite(om)):
        raise ValueError("drive Omega(t) returned non-finite values")
    scale = max(np.abs(om).max(), 1.0)
    if np.abs(om).min() <= 1e-12 * scale:
        raise ParameterizationError("drive Omega(t) vanishes on the integration interval")
    re = om.real
    if np.allclose(om.imag, 0.0) and np.any(np.sign(re[1:]) != np.sign(re[:-1])):
        raise ParameterizationError("drive Omega(t) changes sign on the integration interval")
    return om


def solve_two_level(spec: DrivingSpec, t_end: float, tol: float = 1e-10,
                    dt: float = 0.01) -> TwoLevelSolution:
    """Solve the group-parameter equation with g(0) = 1, dg/dt(0) = 0.

    Samples ``g`` and ``dg/dt`` on a uniform grid of spacing ``dt`` on
    ``[0, t_end]``. The drive is checked for zeros on that grid.
    """
    if not (np.isfinite(t_end) and np.isfinite(tol) and np.isfinite(spec.omega_a)):
        raise ValueError("non-finite input")
    if t_end < 0 or tol <= 0 or dt <= 0:
        raise ValueError("t_end must be >= 0 and tol, dt > 0")
    n = max(int(math.ceil(t_end / dt - 1e-9)), 1)
    t = np.linspace(0.0, t_end, n + 1)
    om = _drive_samples(spec, t)
    wa = float(spec.omega_a)

    def f(tk, y):
        o = complex(spec.Omega(tk))
        g = y[0] + 1j * y[1]
        w = y[2] + 1j * y[3]
        dg = o * w
        dw = 1j * wa * w - o.conjugate() * g
        return [dg.real, dg.imag, dw.real, dw.imag]

    if t_end == 0:
        y = np.array([[1.0], [0.0], [0.0], [0.0]])
    else:
        sol = solve_ivp(f, (0.0, t_end), [1.0, 0.0, 0.0, 0.0], method="DOP853",
                        rtol=tol, atol=tol, t_eval=t)
        if not sol.success:
            raise ParameterizationError(f"two-level integration failed: {sol.message}")
        y = sol.y
    g = y[0] + 1j * y[1]
    w = y[2] + 1j * y[3]
    return TwoLevelSolution(t=t[: g.size], g=g, dg=om[: g.size] * w, omega=om[: g.size],
                            phase=spec.phase(t[: g.size]))


def _chord_distance(g: np.ndarray) -> np.ndarray:
    """Distance from 0 to each chord g[k] -> g[k+1]; catches zeros stepped over by the grid."""
    if g.size < 2:
        return np.abs(g)
    a, d = g[:-1], np.diff(g)
    dd = np.abs(d) ** 2
    s = np.clip(np.where(dd > 0, -(a.conj() * d).real / np.where(dd > 0, dd, 1.0), 0.0), 0.0, 1.0)
    return np.abs(a + s * d)


def reconstruct_params(sol: TwoLevelSolution, spec: DrivingSpec,
                       eps_g: float = EPS_G) -> ReconstructedParams:
    """Recover g_minus (closed form), g0 = 2 log g, and g_plus by quadrature."""
    g = sol.g
    dist = _chord_distance(g)
    if dist.min() <= eps_g:
        k = int(np.argmax(dist <= eps_g))
        raise ParameterizationError(
            f"|g| <= {eps_g:g} at t = {sol.t[k]:.6g}; the product chart is singular there")
    phase = sol.phase
    g_minus = 1j * g * sol.dg / sol.omega * np.exp(-1j * phase)
    g0 = 2.0 * (np.log(np.abs(g)) + 1j * np.unwrap(np.angle(g)))
    integrand = -1j * sol.omega / g**2 * np.exp(1j * phase)
    if sol.t.size >= 3:
        # cumulative_simpson drops imaginary parts, so integrate the components separately
        g_plus = (cumulative_simpson(integrand.real, x=sol.t, initial=0.0)
                  + 1j * cumulative_simpson(integrand.imag, x=sol.t, initial=0.0))
    else:
        g_plus = np.concatenate([[0.0], np.cumsum(np.diff(sol.t) * 0.5 * (integrand[1:] + integrand[:-1]))])
    return ReconstructedParams(t=sol.t, g_minus=g_minus, g_plus=g_plus.astype(complex), g0=g0)


def evolution_matrix_half(pair: GroupPair, phase: float) -> np.ndarray:
    """Explicit 2x2 evolution matrix diag(e^{-i phase/2}, e^{i phase/2}) @ [[g, -g~*], [g~, g*]]."""
    g, gt = pair.g, pair.g_tilde
    d = np.diag([np.exp(-0.5j * phase), np.exp(0.5j * phase)])
    return d @ np.array([[g, -np.conj(gt)], [gt, np.conj(g)]])


def basis_m(two_j: int) -> list[Fraction]:
    """Magnetic quantum numbers labelling rows/columns: j, j-1, ..., -j."""
    return [Fraction(two_j - 2 * k, 2) for k in range(two_j + 1)]


def _poly_divide_by_one_minus_s(coeffs, power):
    """Exact division of sum c_q s^q by (1 - s)^power; coefficients lowest order first."""
    c = list(coeffs)
    for _ in range(power):
        # P(s) = (1 - s) Q(s): synthetic division with root s = 1
        n = len(c) - 1
        q = [Fraction(0)] * n
        acc = Fraction(0)
        for i in range(n):
            acc += c[i]
            q[i] = acc
        if acc + c[n] != 0:
            raise ArithmeticError("polynomial not divisible by (1 - s)")
        c = q
    return c


@lru_cache(maxsize=None)
def _element_terms(two_j: int, two_mp: int, two_m: int):
    """Precompute one matrix element as sqrt_pref * g^k * extra(d) * Q(|g~|^2).

    The literal factorial sum (terms with negative factorial arguments
    vanish) is regrouped by powers of s = |g~|^2. For k = m + m' < 0 the
    polynomial carries a factor (1 - s)^{-k} = |g|^{-2k}, which is divided out
    exactly so that the result is evaluated as conj(g)^{-k} without cancellation.
    """
    jm_p, jm = (two_j - two_mp) // 2, (two_j - two_m) // 2   # j - m', j - m
    jp_p, jp = (two_j + two_mp) // 2, (two_j + two_m) // 2   # j + m', j + m
    f = math.factorial
    sqrt_pref = math.sqrt(Fraction(f(jm_p) * f(jm), f(jp_p) * f(jp)))
    coeffs = [Fraction(0)] * (two_j + 1)
    two_lo = max(two_mp, two_m)
    for two_l in range(two_lo, two_j + 1, 2):
        a = (two_l - two_mp) // 2        # power of g~
        b = (two_l - two_m) // 2         # power of -conj(g~)
        c = Fraction(f((two_j + two_l) // 2), f((two_j - two_l) // 2) * f(b) * f(a))
        q = min(a, b)
        coeffs[q] += c * (-1) ** b
    while len(coeffs) > 1 and coeffs[-1] == 0:
        coeffs.pop()
    k = (two_m + two_mp) // 2
    d = (two_m - two_mp) // 2
    if k < 0:
        coeffs = _poly_divide_by_one_minus_s(coeffs, -k)
    return sqrt_pref, k, d, tuple(float(x) for x in coeffs)


def representation_matrix(two_j: int, pair: GroupPair, phase: float = 0.0,
                          tol: float = NORM_TOL) -> np.ndarray:
    """Unitary irreducible representation of dimension ``two_j + 1``.

    ``two_j`` is twice the (half-)integer spin. Rows and columns are ordered
    by ``basis_m(two_j)``, i.e. m = j first; for ``two_j = 1`` the result
    equals ``evolution_matrix_half``. ``phase`` is the accumulated integral of
    the level splitting.
    """
    if isinstance(two_j, bool) or not isinstance(two_j, (int, np.integer)) or two_j < 0:
        raise ValueError(f"two_j must be a nonnegative integer, got {two_j!r}")
    two_j = int(two_j)
    pair.check(tol)
    g, gt = complex(pair.g), complex(pair.g_tilde)
    s = abs(gt) ** 2
    dim = two_j + 1
    U = np.empty((dim, dim), dtype=complex)
    for r in range(dim):
        two_mp = two_j - 2 * r
        ph = np.exp(-0.5j * two_mp * phase)
        for c in range(dim):
            two_m = two_j - 2 * c
            sqrt_pref, k, d, q = _element_terms(two_j, two_mp, two_m)
            poly = 0.0
            for coef in reversed(q):
                poly = poly * s + coef
            gk = g**k if k >= 0 else g.conjugate() ** (-k)
            extra = gt**d if d >= 0 else gt.conjugate() ** (-d)
            U[r, c] = ph * sqrt_pref * gk * extra * poly
    return U


def matrix_to_json(U: np.ndarray, two_j: int | None = None) -> str:
    """Serialize as rows of [re, im] pairs in row-major order."""
    doc = {"matrix": [[[float(z.real), float(z.imag)] for z in row] for row in U]}
    if two_j is not None:
        doc["two_j"] = int(two_j)
        doc["basis_m"] = [str(m) for m in basis_m(two_j)]
    return json.dumps(doc)


def matrix_from_json(text: str) -> np.ndarray:
    doc = json.loads(text)
    return np.array([[complex(re, im) for re, im in row] for row in doc["matrix"]])
