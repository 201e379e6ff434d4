"""Pure-Python kernels: equations of motion and a DOP853 integrator.

This is the fallback used when the compiled extension is unavailable, and the
readable reference for ``_ckernels.pyx``. Both implement the same algorithm
with the same step-size controller, so they agree to round-off.
"""

import math

import numpy as np

from . import tableau
from .common import (
    MODE_PAIR,
    MODE_STATE,
    MODE_TANGENT,
    STATE_DIM,
    STATUS_MAX_STEPS,
    STATUS_NONFINITE,
    STATUS_NORM_DRIFT,
    STATUS_OK,
    STATUS_STEP_UNDERFLOW,
    mode_dim,
)

IMPLEMENTATION = "python"

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
ERROR_EXPONENT = -1.0 / 8.0

_NS = tableau.N_STAGES
_A = np.array(tableau.A)
_B = np.array(tableau.B)
_C = np.array(tableau.C)
_E3 = np.array(tableau.E3)
_E5 = np.array(tableau.E5)
_D = np.array(tableau.D)


def field_amplitude(t, sigma_tau):
    """Gaussian beam envelope centred at 1.5*sigma_tau; 1 when sigma_tau <= 0."""
    if sigma_tau <= 0.0:
        return 1.0
    z = (t - 1.5 * sigma_tau) / sigma_tau
    return math.exp(-z * z)


def _base(y, amp, omega_r, delta, out):
    x, p, g1, g2, G1, G2 = y
    c = amp * math.cos(x)
    s = math.sin(x)
    u = 2.0 * (g1 * G1 + g2 * G2)
    out[0] = omega_r * p
    out[1] = amp * u * s
    out[2] = -G2 * c
    out[3] = G1 * c
    out[4] = delta * G2 - g2 * c
    out[5] = -delta * G1 + g1 * c


def _tangent(y, v, amp, delta, omega_r, out):
    x, p, g1, g2, G1, G2 = y
    dx, dp, dg1, dg2, dG1, dG2 = v
    cx = math.cos(x)
    c = amp * cx
    a_s = amp * math.sin(x)
    u = 2.0 * (g1 * G1 + g2 * G2)
    out[0] = omega_r * dp
    out[1] = amp * u * cx * dx + 2.0 * a_s * (G1 * dg1 + G2 * dg2 + g1 * dG1 + g2 * dG2)
    out[2] = -c * dG2 + G2 * a_s * dx
    out[3] = c * dG1 - G1 * a_s * dx
    out[4] = delta * dG2 - c * dg2 + g2 * a_s * dx
    out[5] = -delta * dG1 + c * dg1 - g1 * a_s * dx


def rhs(mode, t, y, params):
    """Right-hand side for the selected mode; ``params = (omega_r, delta, sigma_tau)``."""
    omega_r, delta, sigma_tau = params
    y = np.asarray(y, dtype=float)
    out = np.empty(mode_dim(mode))
    amp = field_amplitude(t, sigma_tau)
    _base(y[:STATE_DIM], amp, omega_r, delta, out[:STATE_DIM])
    if mode == MODE_TANGENT:
        _tangent(y[:STATE_DIM], y[STATE_DIM:], amp, delta, omega_r, out[STATE_DIM:])
    elif mode == MODE_PAIR:
        _base(y[STATE_DIM:], amp, omega_r, delta, out[STATE_DIM:])
    return out


def _rms(v):
    return math.sqrt(float(np.dot(v, v)) / v.size)


def _internal_norm(y):
    return y[2] * y[2] + y[3] * y[3] + y[4] * y[4] + y[5] * y[5]


def _project(y, mode):
    blocks = (0, STATE_DIM) if mode == MODE_PAIR else (0,)
    for b in blocks:
        n = math.sqrt(_internal_norm(y[b:b + STATE_DIM]))
        y[b + 2:b + 6] /= n


class _Stepper:
    """DOP853 stepper with the Hairer step-size controller."""

    def __init__(self, mode, params, y0, t0, rtol, atol, max_step):
        self.mode = mode
        self.params = tuple(float(v) for v in params)
        self.fun = lambda t, y: rhs(mode, t, y, self.params)
        self.n = mode_dim(mode)
        self.rtol = rtol
        self.atol = atol
        self.max_step = max_step
        self.t = float(t0)
        self.y = np.array(y0, dtype=float)
        self.f = self.fun(self.t, self.y)
        self.nfev = 1
        self.nsteps = 0
        self.h_abs = None
        self.K = np.empty((tableau.N_STAGES_EXTENDED, self.n))

    def reset_state(self, y):
        self.y = np.array(y, dtype=float)
        self.f = self.fun(self.t, self.y)
        self.nfev += 1

    def initial_step(self, t_bound):
        interval = abs(t_bound - self.t)
        if interval == 0.0:
            return 0.0
        scale = self.atol + np.abs(self.y) * self.rtol
        d0 = _rms(self.y / scale)
        d1 = _rms(self.f / scale)
        h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
        h0 = min(h0, interval)
        f1 = self.fun(self.t + h0, self.y + h0 * self.f)
        self.nfev += 1
        d2 = _rms((f1 - self.f) / scale) / h0
        if d1 <= 1e-15 and d2 <= 1e-15:
            h1 = max(1e-6, h0 * 1e-3)
        else:
            h1 = (0.01 / max(d1, d2)) ** (1.0 / 8.0)
        return min(100 * h0, h1, interval, self.max_step)

    def step(self, t_bound):
        """Take one accepted step towards ``t_bound``; return a status code."""
        if self.h_abs is None:
            self.h_abs = self.initial_step(t_bound)
        t, y, K = self.t, self.y, self.K
        min_step = 10.0 * abs(math.nextafter(t, math.inf) - t)
        h_abs = min(self.h_abs, self.max_step)
        h_abs = max(h_abs, min_step)
        rejected = False
        while True:
            if h_abs < min_step:
                return STATUS_STEP_UNDERFLOW
            t_new = t + h_abs
            if t_new > t_bound:
                t_new = t_bound
            h = t_new - t
            h_abs = abs(h)

            K[0] = self.f
            for s in range(1, _NS):
                K[s] = self.fun(t + _C[s] * h, y + h * np.dot(_A[s, :s], K[:s]))
            y_new = y + h * np.dot(_B, K[:_NS])
            f_new = self.fun(t_new, y_new)
            K[_NS] = f_new
            self.nfev += _NS

            scale = self.atol + np.maximum(np.abs(y), np.abs(y_new)) * self.rtol
            err5 = np.dot(_E5, K[:_NS + 1]) / scale
            err3 = np.dot(_E3, K[:_NS + 1]) / scale
            e5 = float(np.dot(err5, err5))
            e3 = float(np.dot(err3, err3))
            if e5 == 0.0 and e3 == 0.0:
                err = 0.0
            else:
                err = h_abs * e5 / math.sqrt((e5 + 0.01 * e3) * self.n)
            if not math.isfinite(err):
                return STATUS_NONFINITE

            if err < 1.0:
                factor = MAX_FACTOR if err == 0.0 else min(MAX_FACTOR, SAFETY * err ** ERROR_EXPONENT)
                if rejected:
                    factor = min(1.0, factor)
                self.h_abs = h_abs * factor
                break
            h_abs *= max(MIN_FACTOR, SAFETY * err ** ERROR_EXPONENT)
            rejected = True

        self.t_old, self.y_old, self.f_old = t, y, self.f
        self.h_prev = h
        self.t, self.y, self.f = t_new, y_new, f_new
        self.nsteps += 1
        self._F = None
        return STATUS_OK

    def dense(self, t):
        """Evaluate the 7th-order interpolant of the last step at ``t``."""
        if t == self.t:
            return self.y.copy()
        if self._F is None:
            K, h = self.K, self.h_prev
            for s in range(_NS + 1, tableau.N_STAGES_EXTENDED):
                K[s] = self.fun(self.t_old + _C[s] * h, self.y_old + h * np.dot(_A[s, :s], K[:s]))
            self.nfev += tableau.N_STAGES_EXTENDED - _NS - 1
            dy = self.y - self.y_old
            F = np.empty((tableau.INTERPOLATOR_POWER, self.n))
            F[0] = dy
            F[1] = h * self.f_old - dy
            F[2] = 2.0 * dy - h * (self.f + self.f_old)
            F[3:] = h * np.dot(_D, K)
            self._F = F
        x = (t - self.t_old) / self.h_prev
        out = np.zeros(self.n)
        for i, f in enumerate(self._F[::-1]):
            out += f
            out *= x if i % 2 == 0 else 1.0 - x
        return out + self.y_old

    def advance_to(self, t1, max_steps):
        while self.t < t1:
            if self.nsteps >= max_steps:
                return STATUS_MAX_STEPS
            status = self.step(t1)
            if status != STATUS_OK:
                return status
        return STATUS_OK


def integrate(mode, params, y0, t0, t_eval, rtol, atol, max_step=math.inf,
              max_steps=10**8, norm_tol=math.inf, project=False):
    """Integrate from ``t0`` and sample at the sorted times ``t_eval``.

    Returns ``(samples, status, nsteps, nfev)``. On failure the rows past the
    last reached sample are NaN.
    """
    t_eval = np.asarray(t_eval, dtype=float)
    st = _Stepper(mode, params, y0, t0, rtol, atol, max_step)
    n0 = _internal_norm(st.y)
    out = np.full((t_eval.size, st.n), np.nan)
    k = 0
    while k < t_eval.size and t_eval[k] <= st.t:
        out[k] = st.y
        k += 1
    status = STATUS_OK
    t_end = t_eval[-1] if t_eval.size else t0
    while k < t_eval.size:
        if st.nsteps >= max_steps:
            status = STATUS_MAX_STEPS
            break
        status = st.step(t_end)
        if status != STATUS_OK:
            break
        if not np.all(np.isfinite(st.y)):
            status = STATUS_NONFINITE
            break
        while k < t_eval.size and t_eval[k] <= st.t:
            out[k] = st.dense(t_eval[k])
            if project:
                _project(out[k], mode)
            k += 1
        if project:
            _project(st.y, mode)
            st.reset_state(st.y)
        elif abs(_internal_norm(st.y) - n0) > norm_tol:
            status = STATUS_NORM_DRIFT
            break
    return out, status, st.nsteps, st.nfev


def lyapunov(mode, params, y0, tau_total, renorm_dt, d0, rtol, atol,
             max_step=math.inf, max_steps=10**9):
    """Renormalized log-stretch series for the tangent or two-trajectory method.

    ``y0`` holds 12 components. In tangent mode the second block is the
    tangent vector; in pair mode it is the shadow trajectory at distance
    ``d0``. Returns ``(log_stretch, y_final, status, nsteps, nfev)``.
    """
    n_int = int(round(tau_total / renorm_dt))
    y = np.array(y0, dtype=float)
    ref = 1.0 if mode == MODE_TANGENT else d0
    sep = y[STATE_DIM:] if mode == MODE_TANGENT else y[STATE_DIM:] - y[:STATE_DIM]
    y[STATE_DIM:] = y[:STATE_DIM] * (mode == MODE_PAIR) + sep * (ref / math.sqrt(float(np.dot(sep, sep))))
    st = _Stepper(mode, params, y, 0.0, rtol, atol, max_step)
    logs = np.full(n_int, np.nan)
    status = STATUS_OK
    for i in range(n_int):
        status = st.advance_to((i + 1) * renorm_dt, max_steps)
        if status != STATUS_OK:
            break
        y = st.y.copy()
        sep = y[STATE_DIM:] if mode == MODE_TANGENT else y[STATE_DIM:] - y[:STATE_DIM]
        dist = math.sqrt(float(np.dot(sep, sep)))
        if not math.isfinite(dist) or dist == 0.0:
            status = STATUS_NONFINITE
            break
        logs[i] = math.log(dist / ref)
        y[STATE_DIM:] = y[:STATE_DIM] * (mode == MODE_PAIR) + sep * (ref / dist)
        st.reset_state(y)
    return logs, st.y.copy(), status, st.nsteps, st.nfev
