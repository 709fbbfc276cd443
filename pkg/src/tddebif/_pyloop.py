"""Pure-Python reference implementation of the integration inner loop.

Mirrors _core.pyx operation for operation so both backends produce the same
floating-point results; keep any change here in lockstep with the compiled
version.  The loop advances the pair (x, tau) with classical RK4, where tau
obeys the differentiated threshold relation tau' = 1 - v(x(t))/v(x(t-tau)),
and reads delayed values from a cubic Hermite table of all accepted nodes.
"""

from math import exp, isfinite, log

OK = 0
CAPACITY = 1
TAU_RANGE = 2
TIME_ORDER = 3
NOT_FINITE = 4


def run_loop(beta, mu, gamma,
             g_lo, g_hi, g_theta, g_p,
             v_lo, v_hi, v_theta, v_p,
             t_end, h_base, band_g, band_v,
             tau_lo, tau_hi,
             n0, hist_t, hist_x, hist_dx, tau_arr, dtau_arr):
    """Advance from node n0-1 (which holds t0, x0, tau0) until t_end.

    The five arrays share one capacity; entries [0, n0) are the preloaded
    history whose last node is the initial point.  New nodes are appended
    starting at index n0; node derivatives are filled as each step's first
    stage is computed (the final node gets one extra evaluation).  Returns
    (status, n_total); on a monitor failure the offending node is still
    appended so the caller can report where the run died.
    """
    cap = int(hist_t.shape[0])
    n = int(n0)
    # work on plain lists: exact float64 round-trip, much faster than
    # element-wise numpy indexing in an interpreted loop
    lt = hist_t[:n].tolist()
    lx = hist_x[:n].tolist()
    ld = hist_dx[:n].tolist()
    ltau = tau_arr[:n].tolist()
    ldtau = dtau_arr[:n].tolist()

    def hill_g(xv):
        if g_lo == g_hi:
            return g_lo
        if xv <= 0.0:
            return g_lo
        w = g_p * log(xv / g_theta)
        if w > 700.0:
            return g_hi
        if w < -700.0:
            return g_lo
        z = exp(w)
        return (g_lo + g_hi * z) / (1.0 + z)

    def hill_v(xv):
        if v_lo == v_hi:
            return v_lo
        if xv <= 0.0:
            return v_lo
        w = v_p * log(xv / v_theta)
        if w > 700.0:
            return v_hi
        if w < -700.0:
            return v_lo
        z = exp(w)
        return (v_lo + v_hi * z) / (1.0 + z)

    def read(tq, i):
        # delayed-state lookup: clamp below the table, linear predictor above
        # it (stage arguments may poke past the newest node by O(h))
        last = len(lt) - 1
        tl = lt[last]
        if tq >= tl:
            return lx[last] + (tq - tl) * ld[last], last
        if tq <= lt[0]:
            return lx[0], 0
        if i > last - 1:
            i = last - 1
        while i > 0 and tq < lt[i]:
            i -= 1
        while tq > lt[i + 1]:
            i += 1
        ta = lt[i]
        dt = lt[i + 1] - ta
        th = (tq - ta) / dt
        u = 1.0 - th
        a00 = (1.0 + 2.0 * th) * (u * u)
        a10 = th * (u * u)
        a01 = (th * th) * (3.0 - 2.0 * th)
        a11 = (th * th) * (th - 1.0)
        val = a00 * lx[i] + a10 * dt * ld[i] + a01 * lx[i + 1] + a11 * dt * ld[i + 1]
        return val, i

    def rhs(tq, xv, tauv, i):
        xd, i = read(tq - tauv, i)
        vx = hill_v(xv)
        vd = hill_v(xd)
        gd = hill_g(xd)
        ratio = vx / vd
        fx = beta * exp(-mu * tauv) * ratio * gd - gamma * xv
        ft = 1.0 - ratio
        return fx, ft, xd, i

    status = OK
    t = lt[n - 1]
    x = lx[n - 1]
    tau = ltau[n - 1]
    hint = 0
    while t < t_end:
        k1x, k1t, xd, hint = rhs(t, x, tau, hint)
        ld[n - 1] = k1x
        ldtau[n - 1] = k1t
        h = h_base
        if band_g > 0.0 and abs(xd - g_theta) < band_g:
            h = 0.5 * h_base
        if band_v > 0.0 and (abs(x - v_theta) < band_v or abs(xd - v_theta) < band_v):
            h = 0.5 * h_base
        if t + h > t_end:
            h = t_end - t
        if h <= 0.0 or t + h == t:
            break
        if n >= cap:
            status = CAPACITY
            break
        th2 = t + 0.5 * h
        k2x, k2t, xd2, hint = rhs(th2, x + 0.5 * h * k1x, tau + 0.5 * h * k1t, hint)
        k3x, k3t, xd3, hint = rhs(th2, x + 0.5 * h * k2x, tau + 0.5 * h * k2t, hint)
        t4 = t + h
        k4x, k4t, xd4, hint = rhs(t4, x + h * k3x, tau + h * k3t, hint)
        xn = x + (h / 6.0) * ((k1x + k4x) + 2.0 * (k2x + k3x))
        taun = tau + (h / 6.0) * ((k1t + k4t) + 2.0 * (k2t + k3t))
        tn = t + h
        if not (isfinite(xn) and isfinite(taun)):
            status = NOT_FINITE
        elif taun < tau_lo or taun > tau_hi:
            status = TAU_RANGE
        elif tn - taun <= t - tau:
            status = TIME_ORDER
        lt.append(tn)
        lx.append(xn)
        ld.append(0.0)
        ltau.append(taun)
        ldtau.append(0.0)
        n += 1
        t = tn
        x = xn
        tau = taun
        if status != OK:
            break
    if status == OK:
        k1x, k1t, xd, hint = rhs(t, x, tau, hint)
        ld[n - 1] = k1x
        ldtau[n - 1] = k1t
    hist_t[:n] = lt
    hist_x[:n] = lx
    hist_dx[:n] = ld
    tau_arr[:n] = ltau
    dtau_arr[:n] = ldtau
    return status, n
