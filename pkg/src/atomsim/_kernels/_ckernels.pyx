# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: equations of motion and a DOP853 integrator.

Line-for-line twin of ``_purepy.py``; see there for the reference algorithm.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, exp, sqrt, log, fabs, fmin, fmax, pow, nextafter, INFINITY, isfinite

from . import tableau
from .common import (MODE_STATE, MODE_TANGENT, MODE_PAIR, STATUS_OK, STATUS_STEP_UNDERFLOW,
                     STATUS_MAX_STEPS, STATUS_NORM_DRIFT, STATUS_NONFINITE)

cnp.import_array()

IMPLEMENTATION = "cython"

cdef enum:
    NMAX = 12
    NS = 12
    NSX = 16
    NPOW = 7
    SD = 6

cdef double SAFETY = 0.9
cdef double MIN_FACTOR = 0.2
cdef double MAX_FACTOR = 10.0
cdef double ERROR_EXPONENT = -1.0 / 8.0

cdef double A[NSX][NSX]
cdef double B[NS]
cdef double C[NSX]
cdef double E3[NS + 1]
cdef double E5[NS + 1]
cdef double D[4][NSX]


def _load_tableau():
    cdef int i, j
    for i in range(NSX):
        C[i] = tableau.C[i]
        for j in range(NSX):
            A[i][j] = tableau.A[i][j]
    for i in range(NS):
        B[i] = tableau.B[i]
    for i in range(NS + 1):
        E3[i] = tableau.E3[i]
        E5[i] = tableau.E5[i]
    for i in range(4):
        for j in range(NSX):
            D[i][j] = tableau.D[i][j]


_load_tableau()


cdef struct Params:
    double omega_r
    double delta
    double sigma_tau


cdef struct Stepper:
    int mode
    int n
    Params prm
    double rtol
    double atol
    double max_step
    double t
    double y[NMAX]
    double f[NMAX]
    double t_old
    double y_old[NMAX]
    double f_old[NMAX]
    double h_prev
    double h_abs
    int have_h
    int have_F
    long nsteps
    long nfev
    double K[NSX][NMAX]
    double F[NPOW][NMAX]


cdef inline double field_amp(double t, double sigma_tau) nogil:
    cdef double z
    if sigma_tau <= 0.0:
        return 1.0
    z = (t - 1.5 * sigma_tau) / sigma_tau
    return exp(-z * z)


cdef inline void base_rhs(const double* y, double amp, double omega_r, double delta, double* out) nogil:
    cdef double c = amp * cos(y[0])
    cdef double s = sin(y[0])
    cdef double u = 2.0 * (y[2] * y[4] + y[3] * y[5])
    out[0] = omega_r * y[1]
    out[1] = amp * u * s
    out[2] = -y[5] * c
    out[3] = y[4] * c
    out[4] = delta * y[5] - y[3] * c
    out[5] = -delta * y[4] + y[2] * c


cdef inline void tangent_rhs(const double* y, const double* v, double amp, double delta,
                             double omega_r, double* out) nogil:
    cdef double cx = cos(y[0])
    cdef double c = amp * cx
    cdef double a_s = amp * sin(y[0])
    cdef double u = 2.0 * (y[2] * y[4] + y[3] * y[5])
    out[0] = omega_r * v[1]
    out[1] = amp * u * cx * v[0] + 2.0 * a_s * (y[4] * v[2] + y[5] * v[3] + y[2] * v[4] + y[3] * v[5])
    out[2] = -c * v[5] + y[5] * a_s * v[0]
    out[3] = c * v[4] - y[4] * a_s * v[0]
    out[4] = delta * v[5] - c * v[3] + y[3] * a_s * v[0]
    out[5] = -delta * v[4] + c * v[2] - y[2] * a_s * v[0]


cdef inline void crhs(int mode, double t, const double* y, double* out, Params* P) nogil:
    cdef double amp = field_amp(t, P.sigma_tau)
    base_rhs(y, amp, P.omega_r, P.delta, out)
    if mode == 1:
        tangent_rhs(y, y + SD, amp, P.delta, P.omega_r, out + SD)
    elif mode == 2:
        base_rhs(y + SD, amp, P.omega_r, P.delta, out + SD)


def rhs(int mode, double t, y, params):
    """Right-hand side for the selected mode; ``params = (omega_r, delta, sigma_tau)``."""
    cdef Params P
    cdef int n = SD if mode == 0 else 2 * SD
    cdef double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    out = np.empty(n)
    cdef double[::1] ov = out
    P.omega_r, P.delta, P.sigma_tau = params
    crhs(mode, t, &yv[0], &ov[0], &P)
    return out


cdef inline double internal_norm(const double* y) nogil:
    return y[2] * y[2] + y[3] * y[3] + y[4] * y[4] + y[5] * y[5]


cdef inline void project_block(double* y) nogil:
    cdef double n = sqrt(internal_norm(y))
    cdef int i
    for i in range(2, 6):
        y[i] /= n


cdef inline void project(double* y, int mode) nogil:
    project_block(y)
    if mode == 2:
        project_block(y + SD)


cdef inline double rms_scaled(const double* v, const double* scale, int n) nogil:
    cdef double acc = 0.0, q
    cdef int i
    for i in range(n):
        q = v[i] / scale[i]
        acc += q * q
    return sqrt(acc / n)


cdef void st_init(Stepper* st, int mode, Params prm, const double* y0, double t0,
                  double rtol, double atol, double max_step) nogil:
    cdef int i
    st.mode = mode
    st.n = SD if mode == 0 else 2 * SD
    st.prm = prm
    st.rtol = rtol
    st.atol = atol
    st.max_step = max_step
    st.t = t0
    for i in range(st.n):
        st.y[i] = y0[i]
    crhs(mode, t0, st.y, st.f, &st.prm)
    st.nfev = 1
    st.nsteps = 0
    st.have_h = 0
    st.have_F = 0


cdef void st_reset(Stepper* st) nogil:
    crhs(st.mode, st.t, st.y, st.f, &st.prm)
    st.nfev += 1


cdef double st_initial_step(Stepper* st, double t_bound) nogil:
    cdef double interval = fabs(t_bound - st.t)
    cdef double scale[NMAX]
    cdef double y1[NMAX]
    cdef double f1[NMAX]
    cdef double df[NMAX]
    cdef double d0, d1, d2, h0, h1
    cdef int i, n = st.n
    if interval == 0.0:
        return 0.0
    for i in range(n):
        scale[i] = st.atol + fabs(st.y[i]) * st.rtol
    d0 = rms_scaled(st.y, scale, n)
    d1 = rms_scaled(st.f, scale, n)
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    h0 = fmin(h0, interval)
    for i in range(n):
        y1[i] = st.y[i] + h0 * st.f[i]
    crhs(st.mode, st.t + h0, y1, f1, &st.prm)
    st.nfev += 1
    for i in range(n):
        df[i] = f1[i] - st.f[i]
    d2 = rms_scaled(df, scale, n) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = fmax(1e-6, h0 * 1e-3)
    else:
        h1 = pow(0.01 / fmax(d1, d2), 1.0 / 8.0)
    return fmin(fmin(100 * h0, h1), fmin(interval, st.max_step))


cdef int st_step(Stepper* st, double t_bound) nogil:
    cdef double t = st.t
    cdef double min_step, h_abs, t_new, h, acc, sc, e5, e3, err, factor, a5, a3
    cdef double ytmp[NMAX]
    cdef double y_new[NMAX]
    cdef int rejected = 0
    cdef int i, s, k, n = st.n
    if not st.have_h:
        st.h_abs = st_initial_step(st, t_bound)
        st.have_h = 1
    min_step = 10.0 * fabs(nextafter(t, INFINITY) - t)
    h_abs = st.h_abs
    if h_abs > st.max_step:
        h_abs = st.max_step
    elif h_abs < min_step:
        h_abs = min_step
    while True:
        if h_abs < min_step:
            return 1
        t_new = t + h_abs
        if t_new > t_bound:
            t_new = t_bound
        h = t_new - t
        h_abs = fabs(h)

        for i in range(n):
            st.K[0][i] = st.f[i]
        for s in range(1, NS):
            for i in range(n):
                acc = 0.0
                for k in range(s):
                    acc += A[s][k] * st.K[k][i]
                ytmp[i] = st.y[i] + h * acc
            crhs(st.mode, t + C[s] * h, ytmp, st.K[s], &st.prm)
        for i in range(n):
            acc = 0.0
            for k in range(NS):
                acc += B[k] * st.K[k][i]
            y_new[i] = st.y[i] + h * acc
        crhs(st.mode, t_new, y_new, st.K[NS], &st.prm)
        st.nfev += NS

        e5 = 0.0
        e3 = 0.0
        for i in range(n):
            sc = st.atol + fmax(fabs(st.y[i]), fabs(y_new[i])) * st.rtol
            a5 = 0.0
            a3 = 0.0
            for k in range(NS + 1):
                a5 += E5[k] * st.K[k][i]
                a3 += E3[k] * st.K[k][i]
            a5 /= sc
            a3 /= sc
            e5 += a5 * a5
            e3 += a3 * a3
        if e5 == 0.0 and e3 == 0.0:
            err = 0.0
        else:
            err = h_abs * e5 / sqrt((e5 + 0.01 * e3) * n)
        if not isfinite(err):
            return 4

        if err < 1.0:
            if err == 0.0:
                factor = MAX_FACTOR
            else:
                factor = fmin(MAX_FACTOR, SAFETY * pow(err, ERROR_EXPONENT))
            if rejected:
                factor = fmin(1.0, factor)
            st.h_abs = h_abs * factor
            break
        h_abs *= fmax(MIN_FACTOR, SAFETY * pow(err, ERROR_EXPONENT))
        rejected = 1

    st.t_old = t
    st.h_prev = h
    for i in range(n):
        st.y_old[i] = st.y[i]
        st.f_old[i] = st.f[i]
        st.y[i] = y_new[i]
        st.f[i] = st.K[NS][i]
    st.t = t_new
    st.nsteps += 1
    st.have_F = 0
    return 0


cdef void st_dense(Stepper* st, double t, double* out) nogil:
    cdef double ytmp[NMAX]
    cdef double h = st.h_prev
    cdef double acc, x, dy
    cdef int i, s, k, j, n = st.n
    if t == st.t:
        for i in range(n):
            out[i] = st.y[i]
        return
    if not st.have_F:
        for s in range(NS + 1, NSX):
            for i in range(n):
                acc = 0.0
                for k in range(s):
                    acc += A[s][k] * st.K[k][i]
                ytmp[i] = st.y_old[i] + h * acc
            crhs(st.mode, st.t_old + C[s] * h, ytmp, st.K[s], &st.prm)
        st.nfev += NSX - NS - 1
        for i in range(n):
            dy = st.y[i] - st.y_old[i]
            st.F[0][i] = dy
            st.F[1][i] = h * st.f_old[i] - dy
            st.F[2][i] = 2.0 * dy - h * (st.f[i] + st.f_old[i])
            for j in range(4):
                acc = 0.0
                for k in range(NSX):
                    acc += D[j][k] * st.K[k][i]
                st.F[3 + j][i] = h * acc
        st.have_F = 1
    x = (t - st.t_old) / h
    for i in range(n):
        acc = 0.0
        for j in range(NPOW):
            acc += st.F[NPOW - 1 - j][i]
            if j % 2 == 0:
                acc *= x
            else:
                acc *= 1.0 - x
        out[i] = acc + st.y_old[i]


cdef inline int all_finite(const double* y, int n) nogil:
    cdef int i
    for i in range(n):
        if not isfinite(y[i]):
            return 0
    return 1


def integrate(int mode, params, y0, double t0, t_eval, double rtol, double atol,
              double max_step=INFINITY, long max_steps=10**8, double norm_tol=INFINITY,
              bint project=False):
    """Integrate from ``t0`` and sample at the sorted times ``t_eval``.

    Returns ``(samples, status, nsteps, nfev)``; rows past a failure are NaN.
    """
    cdef Params P
    cdef Stepper st
    cdef double[::1] yv = np.ascontiguousarray(y0, dtype=np.float64)
    cdef double[::1] tv = np.ascontiguousarray(t_eval, dtype=np.float64)
    cdef Py_ssize_t m = tv.shape[0], k = 0
    cdef int i
    cdef int n = SD if mode == 0 else 2 * SD
    cdef int status = 0
    cdef double n0, t_end
    out = np.full((m, n), np.nan)
    cdef double[:, ::1] ov = out
    P.omega_r, P.delta, P.sigma_tau = params
    with nogil:
        st_init(&st, mode, P, &yv[0], t0, rtol, atol, max_step)
        n0 = internal_norm(st.y)
        while k < m and tv[k] <= st.t:
            for i in range(n):
                ov[k, i] = st.y[i]
            k += 1
        t_end = tv[m - 1] if m > 0 else t0
        while k < m:
            if st.nsteps >= max_steps:
                status = 2
                break
            status = st_step(&st, t_end)
            if status != 0:
                break
            if not all_finite(st.y, n):
                status = 4
                break
            while k < m and tv[k] <= st.t:
                st_dense(&st, tv[k], &ov[k, 0])
                if project:
                    project_block(&ov[k, 0])
                    if mode == 2:
                        project_block(&ov[k, SD])
                k += 1
            if project:
                project_block(st.y)
                if mode == 2:
                    project_block(st.y + SD)
                st_reset(&st)
            elif fabs(internal_norm(st.y) - n0) > norm_tol:
                status = 3
                break
    return out, status, st.nsteps, st.nfev


cdef double _renorm(double* y, int mode, double ref, double* sep) nogil:
    """Rescale the separation block to length ``ref``; return its prior length."""
    cdef double dist = 0.0
    cdef int i
    for i in range(SD):
        sep[i] = y[SD + i] if mode == 1 else y[SD + i] - y[i]
        dist += sep[i] * sep[i]
    dist = sqrt(dist)
    if dist == 0.0 or not isfinite(dist):
        return dist
    for i in range(SD):
        y[SD + i] = sep[i] * (ref / dist)
        if mode == 2:
            y[SD + i] += y[i]
    return dist


def lyapunov(int mode, params, y0, double tau_total, double renorm_dt, double d0,
             double rtol, double atol, double max_step=INFINITY, long max_steps=10**9):
    """Renormalized log-stretch series; see ``_purepy.lyapunov``."""
    cdef Params P
    cdef Stepper st
    cdef Py_ssize_t n_int = <Py_ssize_t>round(tau_total / renorm_dt)
    cdef Py_ssize_t j
    cdef int i, status = 0
    cdef double ref = 1.0 if mode == 1 else d0
    cdef double dist, q
    cdef double y[NMAX]
    cdef double sep[SD]
    cdef double[::1] yv = np.ascontiguousarray(y0, dtype=np.float64)
    logs = np.full(n_int, np.nan)
    cdef double[::1] lv = logs
    P.omega_r, P.delta, P.sigma_tau = params
    with nogil:
        for i in range(2 * SD):
            y[i] = yv[i]
        _renorm(y, mode, ref, sep)
        st_init(&st, mode, P, y, 0.0, rtol, atol, max_step)
        for j in range(n_int):
            while st.t < (j + 1) * renorm_dt:
                if st.nsteps >= max_steps:
                    status = 2
                    break
                status = st_step(&st, (j + 1) * renorm_dt)
                if status != 0:
                    break
            if status != 0:
                break
            dist = _renorm(st.y, mode, ref, sep)
            if not isfinite(dist) or dist == 0.0:
                status = 4
                break
            lv[j] = log(dist / ref)
            st_reset(&st)
    yf = np.array([st.y[i] for i in range(2 * SD)])
    return logs, yf, status, st.nsteps, st.nfev
