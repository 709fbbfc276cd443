# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled implementation of the integration inner loop.

Mirrors _pyloop.run_loop operation for operation; keep both in lockstep.
Built with -ffp-contract=off so the compiler cannot fuse multiply-adds and
drift away from the reference results.
"""

from libc.math cimport exp, fabs, isfinite, log

OK = 0
CAPACITY = 1
TAU_RANGE = 2
TIME_ORDER = 3
NOT_FINITE = 4


cdef inline double _hill(double xv, double lo, double hi, double theta, double p) noexcept nogil:
    cdef double w, z
    if lo == hi:
        return lo
    if xv <= 0.0:
        return lo
    w = p * log(xv / theta)
    if w > 700.0:
        return hi
    if w < -700.0:
        return lo
    z = exp(w)
    return (lo + hi * z) / (1.0 + z)


cdef inline double _read(double[::1] lt, double[::1] lx, double[::1] ld,
                         int n, double tq, int* hint) noexcept nogil:
    # delayed-state lookup: clamp below the table, linear predictor above
    # it (stage arguments may poke past the newest node by O(h))
    cdef int last = n - 1
    cdef int i = hint[0]
    cdef double tl = lt[last]
    cdef double ta, dt, th, u, a00, a10, a01, a11
    if tq >= tl:
        hint[0] = last
        return lx[last] + (tq - tl) * ld[last]
    if tq <= lt[0]:
        hint[0] = 0
        return lx[0]
    if i > last - 1:
        i = last - 1
    while i > 0 and tq < lt[i]:
        i -= 1
    while tq > lt[i + 1]:
        i += 1
    hint[0] = i
    ta = lt[i]
    dt = lt[i + 1] - ta
    th = (tq - ta) / dt
    u = 1.0 - th
    a00 = (1.0 + 2.0 * th) * (u * u)
    a10 = th * (u * u)
    a01 = (th * th) * (3.0 - 2.0 * th)
    a11 = (th * th) * (th - 1.0)
    return a00 * lx[i] + a10 * dt * ld[i] + a01 * lx[i + 1] + a11 * dt * ld[i + 1]


cdef inline void _rhs(double tq, double xv, double tauv,
                      double beta, double mu, double gamma,
                      double g_lo, double g_hi, double g_theta, double g_p,
                      double v_lo, double v_hi, double v_theta, double v_p,
                      double[::1] lt, double[::1] lx, double[::1] ld, int n,
                      int* hint, double* out) noexcept nogil:
    cdef double xd = _read(lt, lx, ld, n, tq - tauv, hint)
    cdef double vx = _hill(xv, v_lo, v_hi, v_theta, v_p)
    cdef double vd = _hill(xd, v_lo, v_hi, v_theta, v_p)
    cdef double gd = _hill(xd, g_lo, g_hi, g_theta, g_p)
    cdef double ratio = vx / vd
    out[0] = beta * exp(-mu * tauv) * ratio * gd - gamma * xv
    out[1] = 1.0 - ratio
    out[2] = xd


def run_loop(double beta, double mu, double gamma,
             double g_lo, double g_hi, double g_theta, double g_p,
             double v_lo, double v_hi, double v_theta, double v_p,
             double t_end, double h_base, double band_g, double band_v,
             double tau_lo, double tau_hi,
             int n0, double[::1] hist_t, double[::1] hist_x, double[::1] hist_dx,
             double[::1] tau_arr, double[::1] dtau_arr):
    """Advance from node n0-1 (which holds t0, x0, tau0) until t_end.

    Same contract as _pyloop.run_loop: nodes append at index n0 onward,
    node derivatives fill as each step's first stage is evaluated, and the
    return value is (status, n_total).
    """
    cdef int cap = <int> hist_t.shape[0]
    cdef int n = n0
    cdef int status = OK
    cdef int hint = 0
    cdef double t = hist_t[n - 1]
    cdef double x = hist_x[n - 1]
    cdef double tau = tau_arr[n - 1]
    cdef double h, th2, t4, xn, taun, tn
    cdef double k1x, k1t, k2x, k2t, k3x, k3t, k4x, k4t, xd
    cdef double f[3]
    while t < t_end:
        _rhs(t, x, tau, beta, mu, gamma, g_lo, g_hi, g_theta, g_p,
             v_lo, v_hi, v_theta, v_p, hist_t, hist_x, hist_dx, n, &hint, f)
        k1x = f[0]
        k1t = f[1]
        xd = f[2]
        hist_dx[n - 1] = k1x
        dtau_arr[n - 1] = k1t
        h = h_base
        if band_g > 0.0 and fabs(xd - g_theta) < band_g:
            h = 0.5 * h_base
        if band_v > 0.0 and (fabs(x - v_theta) < band_v or fabs(xd - v_theta) < band_v):
            h = 0.5 * h_base
        if t + h > t_end:
            h = t_end - t
        if h <= 0.0 or t + h == t:
            break
        if n >= cap:
            status = CAPACITY
            break
        th2 = t + 0.5 * h
        _rhs(th2, x + 0.5 * h * k1x, tau + 0.5 * h * k1t, beta, mu, gamma,
             g_lo, g_hi, g_theta, g_p, v_lo, v_hi, v_theta, v_p,
             hist_t, hist_x, hist_dx, n, &hint, f)
        k2x = f[0]
        k2t = f[1]
        _rhs(th2, x + 0.5 * h * k2x, tau + 0.5 * h * k2t, beta, mu, gamma,
             g_lo, g_hi, g_theta, g_p, v_lo, v_hi, v_theta, v_p,
             hist_t, hist_x, hist_dx, n, &hint, f)
        k3x = f[0]
        k3t = f[1]
        t4 = t + h
        _rhs(t4, x + h * k3x, tau + h * k3t, beta, mu, gamma,
             g_lo, g_hi, g_theta, g_p, v_lo, v_hi, v_theta, v_p,
             hist_t, hist_x, hist_dx, n, &hint, f)
        k4x = f[0]
        k4t = f[1]
        xn = x + (h / 6.0) * ((k1x + k4x) + 2.0 * (k2x + k3x))
        taun = tau + (h / 6.0) * ((k1t + k4t) + 2.0 * (k2t + k3t))
        tn = t + h
        if not (isfinite(xn) and isfinite(taun)):
            status = NOT_FINITE
        elif taun < tau_lo or taun > tau_hi:
            status = TAU_RANGE
        elif tn - taun <= t - tau:
            status = TIME_ORDER
        hist_t[n] = tn
        hist_x[n] = xn
        hist_dx[n] = 0.0
        tau_arr[n] = taun
        dtau_arr[n] = 0.0
        n += 1
        t = tn
        x = xn
        tau = taun
        if status != OK:
            break
    if status == OK:
        _rhs(t, x, tau, beta, mu, gamma, g_lo, g_hi, g_theta, g_p,
             v_lo, v_hi, v_theta, v_p, hist_t, hist_x, hist_dx, n, &hint, f)
        hist_dx[n - 1] = f[0]
        dtau_arr[n - 1] = f[1]
    return status, n
