"""Time integration of the threshold-delay model and periodic-orbit metrics.

The delay is advanced through its differentiated threshold relation
tau'(t) = 1 - v(x(t))/v(x(t - tau(t))) alongside the state equation, with a
classical fourth-order Runge-Kutta step and a cubic Hermite dense history
feeding the delayed reads.  threshold_residual puts the undifferentiated
integral condition back on the result as an independent drift check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson

from . import _kernels
from . import _pyloop as _codes
from .errors import (
    HistoryTooShortError,
    NoOscillationError,
    RegimeError,
    StepFailureError,
)
from .model import ModelParams, corner_gammas, eval_nl

__all__ = [
    "InitialData",
    "Trajectory",
    "OrbitMetrics",
    "init_delay",
    "make_initial",
    "integrate",
    "threshold_residual",
    "orbit_metrics",
    "csv_rows",
]


def _require_finite_exponents(params: ModelParams) -> None:
    for name, nl in (("g", params.g), ("v", params.v)):
        if not nl.is_constant and math.isinf(nl.exponent):
            raise RegimeError(
                f"{name} is a step nonlinearity; integration needs a finite exponent"
            )


def _hermite_vec(ts, xs, ds, t):
    """Cubic Hermite evaluation on a node table, clamped to its span."""
    tq = np.clip(np.asarray(t, dtype=float), ts[0], ts[-1])
    idx = np.clip(np.searchsorted(ts, tq, side="right") - 1, 0, len(ts) - 2)
    ta = ts[idx]
    dt = ts[idx + 1] - ta
    th = (tq - ta) / dt
    u = 1.0 - th
    a00 = (1.0 + 2.0 * th) * (u * u)
    a10 = th * (u * u)
    a01 = (th * th) * (3.0 - 2.0 * th)
    a11 = (th * th) * (th - 1.0)
    out = a00 * xs[idx] + a10 * dt * ds[idx] + a01 * xs[idx + 1] + a11 * dt * ds[idx + 1]
    if np.ndim(t) == 0:
        return float(out)
    return out


def _adaptive_simpson(f, a, b, tol):
    fa = f(a)
    fm = f(0.5 * (a + b))
    fb = f(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    return _asr(f, a, b, fa, fm, fb, whole, tol, 50)


def _asr(f, a, b, fa, fm, fb, whole, tol, depth):
    m = 0.5 * (a + b)
    lm = 0.5 * (a + m)
    rm = 0.5 * (m + b)
    flm = f(lm)
    frm = f(rm)
    left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    err = left + right - whole
    if depth <= 0 or abs(err) <= 15.0 * tol:
        return left + right + err / 15.0
    half = 0.5 * tol
    return (_asr(f, a, m, fa, flm, fm, left, half, depth - 1)
            + _asr(f, m, b, fm, frm, fb, right, half, depth - 1))


def _integral_on_table(v_nl, ts, xs, ds, lo, hi, tol):
    """Integral of v(x(s)) over [lo, hi] on a Hermite table, split at nodes."""
    if hi <= lo:
        return 0.0

    def f(s):
        return float(eval_nl(v_nl, _hermite_vec(ts, xs, ds, s)))

    cuts = ts[(ts > lo) & (ts < hi)]
    edges = np.concatenate(([lo], cuts, [hi]))
    total = 0.0
    span = hi - lo
    for aa, bb in zip(edges[:-1], edges[1:]):
        if bb > aa:
            total += _adaptive_simpson(f, float(aa), float(bb), tol * (bb - aa) / span)
    return total


@dataclass(frozen=True, eq=False)
class InitialData:
    """History table ready for the integrator.

    Hermite nodes cover [t0 - span, t0]; tau0 is the delay at t0, chosen so
    the threshold integral of v over [t0 - tau0, t0] equals a.
    """

    hist_t: np.ndarray
    hist_x: np.ndarray
    hist_dx: np.ndarray
    tau0: float
    t0: float
    x0: float
    kind: str


def _unpack_history(history):
    if len(history) == 2:
        ts, xs = history
        ds = None
    elif len(history) == 3:
        ts, xs, ds = history
    else:
        raise ValueError("history must be (times, values) or (times, values, derivs)")
    ts = np.asarray(ts, dtype=float)
    xs = np.asarray(xs, dtype=float)
    if ts.ndim != 1 or ts.shape != xs.shape or ts.size < 2:
        raise ValueError("history arrays must be 1-d, equal length, size >= 2")
    if not np.all(np.diff(ts) > 0):
        raise ValueError("history times must be strictly increasing")
    if not np.all(xs > 0):
        raise ValueError("history values must be positive")
    if ds is None:
        ds = np.gradient(xs, ts)
    else:
        ds = np.asarray(ds, dtype=float)
        if ds.shape != ts.shape:
            raise ValueError("history derivative array must match times")
    return ts, xs, ds


def _table_init_delay(params: ModelParams, ts, xs, ds) -> float:
    t0 = float(ts[-1])
    span = t0 - float(ts[0])
    if params.v.is_constant:
        tau0 = params.a / params.v.lo
        if span < tau0 * (1.0 - 1e-12):
            raise HistoryTooShortError(
                f"history spans {span:.6g} but the delay is {tau0:.6g}"
            )
        return tau0
    if span < params.tau_min:
        raise HistoryTooShortError(
            f"history spans {span:.6g}, below the shortest possible delay "
            f"{params.tau_min:.6g}"
        )
    tol = 1e-12 * params.a

    def integral(tau):
        return _integral_on_table(params.v, ts, xs, ds, t0 - tau, t0, tol)

    lo = params.tau_min
    hi = min(params.tau_max, span)
    if integral(lo) >= params.a:
        return lo
    if integral(hi) < params.a:
        if hi < params.tau_max:
            raise HistoryTooShortError(
                f"history spans {span:.6g}; the threshold integral over it "
                f"stays below a = {params.a:.6g}"
            )
        return hi
    while hi - lo > 1e-14 * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if integral(mid) < params.a:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def init_delay(params: ModelParams, history=None, value=None, t0=0.0) -> float:
    """Delay at the initial time, from the threshold integral of v.

    With history=None the history is constant (default value as in
    make_initial) and the integral inverts in closed form, tau0 = a/v(value).
    A tabulated (times, values[, derivs]) history is solved by bisection on
    the upper limit with adaptive Simpson quadrature (tolerance 1e-12*a);
    HistoryTooShortError when the table cannot span the delay.
    """
    _require_finite_exponents(params)
    if history is None:
        if value is None:
            value = 0.01 * corner_gammas(params).dL / params.gamma
        value = float(value)
        if not value > 0:
            raise ValueError("constant history value must be positive")
        return params.a / eval_nl(params.v, value)
    ts, xs, ds = _unpack_history(history)
    return _table_init_delay(params, ts, xs, ds)


def make_initial(params: ModelParams, value=None, history=None, t0=0.0) -> InitialData:
    """Prepare an initial history for integrate.

    history=None gives the constant history `value`, defaulting to
    1e-2*dL/gamma (strictly positive, well below the absorbing interval).
    Otherwise history is a (times, values) or (times, values, derivs) table;
    its last time becomes t0 and it must span the initial delay.  Step
    nonlinearities are rejected with RegimeError: the right-hand side is
    set-valued at their thresholds.
    """
    _require_finite_exponents(params)
    if history is None:
        if value is None:
            value = 0.01 * corner_gammas(params).dL / params.gamma
        value = float(value)
        if not value > 0:
            raise ValueError("constant history value must be positive")
        tau0 = params.a / eval_nl(params.v, value)
        pad = 1.05 * max(tau0, params.tau_max)
        hist_t = np.array([t0 - pad, float(t0)])
        hist_x = np.array([value, value])
        hist_dx = np.zeros(2)
        return InitialData(hist_t, hist_x, hist_dx, float(tau0), float(t0), value, "constant")
    ts, xs, ds = _unpack_history(history)
    tau0 = _table_init_delay(params, ts, xs, ds)
    return InitialData(ts.copy(), xs.copy(), ds.copy(), float(tau0),
                       float(ts[-1]), float(xs[-1]), "table")


@dataclass(eq=False)
class Trajectory:
    """Integration result with cubic Hermite dense output.

    times/x/dx/tau/dtau are the accepted nodes from t0 on; the full tables
    additionally hold the initial history, so eval can reach back before t0
    as far as the history was given.  monitor summarizes the invariant
    checks: the delay range seen, positivity, and the first time after
    which every sample stays inside the absorbing interval
    [dL/gamma - 1e-3, dU/gamma + 1e-3] (q_entry_time, None if the run ends
    outside it).
    """

    params: ModelParams
    backend: str
    h_base: float
    times: np.ndarray
    x: np.ndarray
    dx: np.ndarray
    tau: np.ndarray
    dtau: np.ndarray
    monitor: dict
    _full_t: np.ndarray
    _full_x: np.ndarray
    _full_dx: np.ndarray

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def eval(self, t):
        """x(t), scalar or array, clamped to the stored span."""
        return _hermite_vec(self._full_t, self._full_x, self._full_dx, t)

    def eval_tau(self, t):
        """tau(t) on [t0, t_end], clamped outside."""
        return _hermite_vec(self.times, self.tau, self.dtau, t)

    def crossings(self, section, t_from=None, direction="up"):
        """Times where x crosses the section value, refined by bisection on
        the dense output between bracketing nodes."""
        sec = float(section)
        t_from = self.t0 if t_from is None else float(t_from)
        sel = self.times >= t_from
        tw = self.times[sel]
        xw = self.x[sel]
        if tw.size < 2:
            return np.empty(0)
        if direction == "up":
            hit = (xw[:-1] < sec) & (xw[1:] >= sec)
        elif direction == "down":
            hit = (xw[:-1] > sec) & (xw[1:] <= sec)
        else:
            raise ValueError("direction must be 'up' or 'down'")
        out = [self._refine_crossing(float(tw[i]), float(tw[i + 1]), sec)
               for i in np.nonzero(hit)[0]]
        return np.asarray(out)

    def _refine_crossing(self, ta, tb, sec):
        fa = float(self.eval(ta)) - sec
        for _ in range(60):
            tm = 0.5 * (ta + tb)
            fm = float(self.eval(tm)) - sec
            if (fm < 0.0) == (fa < 0.0):
                ta, fa = tm, fm
            else:
                tb = tm
        return 0.5 * (ta + tb)


def integrate(params: ModelParams, init: InitialData, t_end,
              h=None, backend=None) -> Trajectory:
    """Integrate the model from the prepared history up to t_end.

    The default step is min(tau0, 1)/200, halved automatically whenever the
    current or delayed state sits within a steep-interface band
    |x - theta| < 5*theta/p, and capped so the delayed argument stays inside
    the already-computed history during the Runge-Kutta stages.  Raises
    StepFailureError when a monitor trips: the delay leaving
    [a/v_max, a/v_min] (with 1e-6 relative slack), the deviated argument
    t - tau(t) failing to increase, or a non-finite state.
    """
    _require_finite_exponents(params)
    t0 = init.t0
    t_end = float(t_end)
    if not (math.isfinite(t_end) and t_end > t0):
        raise ValueError("t_end must be finite and exceed the history end time")
    vmax = max(params.v.lo, params.v.hi)
    vmin = min(params.v.lo, params.v.hi)
    h_cap = 0.45 * params.a * vmin / (vmax * vmax)
    if h is None:
        h = min(init.tau0, 1.0) / 200.0
    h = min(float(h), h_cap)
    if not h > 0:
        raise ValueError("step size must be positive")
    band_g = 0.0 if params.g.is_constant else 5.0 * params.g.theta / params.g.exponent
    band_v = 0.0 if params.v.is_constant else 5.0 * params.v.theta / params.v.exponent
    tau_lo = params.tau_min - 1e-6 * params.tau_max
    tau_hi = params.tau_max * (1.0 + 1e-6)

    # the t0 node appears twice: once closing the history with its own slope,
    # once opening the integration with the right-hand-side slope (the
    # solution is only C0 at t0, so the dense table needs both)
    n0 = len(init.hist_t) + 1
    steps_max = int(math.ceil((t_end - t0) / (0.5 * h))) + 64
    cap = n0 + steps_max
    hist_t = np.empty(cap)
    hist_x = np.empty(cap)
    hist_dx = np.zeros(cap)
    tau_arr = np.zeros(cap)
    dtau_arr = np.zeros(cap)
    hist_t[:n0 - 1] = init.hist_t
    hist_x[:n0 - 1] = init.hist_x
    hist_dx[:n0 - 1] = init.hist_dx
    hist_t[n0 - 1] = init.t0
    hist_x[n0 - 1] = init.x0
    tau_arr[n0 - 1] = init.tau0

    name, loop = _kernels.select(backend)
    status, n = loop(params.beta, params.mu, params.gamma,
                     params.g.lo, params.g.hi, params.g.theta, params.g.exponent,
                     params.v.lo, params.v.hi, params.v.theta, params.v.exponent,
                     t_end, h, band_g, band_v, tau_lo, tau_hi,
                     n0, hist_t, hist_x, hist_dx, tau_arr, dtau_arr)
    if status == _codes.CAPACITY:
        raise RuntimeError("internal error: node capacity exhausted")
    if status != _codes.OK:
        reasons = {
            _codes.TAU_RANGE: "delay left its bracket",
            _codes.TIME_ORDER: "deviated argument stopped increasing",
            _codes.NOT_FINITE: "state lost finiteness",
        }
        raise StepFailureError(f"{reasons[status]} near t = {hist_t[n - 1]:.9g}")

    i0 = n0 - 1
    times = hist_t[i0:n]
    xs = hist_x[i0:n]
    taus = tau_arr[i0:n]
    cg = corner_gammas(params)
    qlo = cg.dL / params.gamma - 1e-3
    qhi = cg.dU / params.gamma + 1e-3
    inside = (xs >= qlo) & (xs <= qhi)
    if bool(inside[-1]):
        out_idx = np.nonzero(~inside)[0]
        q_entry = float(times[0]) if out_idx.size == 0 else float(times[out_idx[-1] + 1])
    else:
        q_entry = None
    monitor = {
        "tau_min": float(taus.min()),
        "tau_max": float(taus.max()),
        "x_min": float(xs.min()),
        "positive": bool(xs.min() > 0.0),
        "q_interval": (cg.dL / params.gamma, cg.dU / params.gamma),
        "q_entry_time": q_entry,
    }
    return Trajectory(
        params=params,
        backend=name,
        h_base=h,
        times=times,
        x=xs,
        dx=hist_dx[i0:n],
        tau=taus,
        dtau=dtau_arr[i0:n],
        monitor=monitor,
        _full_t=hist_t[:n],
        _full_x=hist_x[:n],
        _full_dx=hist_dx[:n],
    )


_GL_NODES = np.array([
    -0.9061798459386640, -0.5384693101056831, 0.0,
    0.5384693101056831, 0.9061798459386640,
])
_GL_WEIGHTS = np.array([
    0.23692688505618909, 0.47862867049936647, 0.56888888888888889,
    0.47862867049936647, 0.23692688505618909,
])


def _integral_v_dense(traj: Trajectory, lo: float, hi: float) -> float:
    """Integral of v(x(s)) over [lo, hi] by 5-point Gauss-Legendre on each
    dense-output segment (the integrand is smooth within a segment)."""
    ts = traj._full_t
    iA = int(np.clip(np.searchsorted(ts, lo, side="right") - 1, 0, len(ts) - 2))
    iB = int(np.clip(np.searchsorted(ts, hi, side="left") - 1, 0, len(ts) - 2))
    seg_lo = np.maximum(ts[iA:iB + 1], lo)
    seg_hi = np.minimum(ts[iA + 1:iB + 2], hi)
    half = 0.5 * (seg_hi - seg_lo)
    mid = 0.5 * (seg_hi + seg_lo)
    pts = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    vals = eval_nl(traj.params.v, traj.eval(pts.ravel())).reshape(pts.shape)
    return float(((vals @ _GL_WEIGHTS) * half).sum())


def threshold_residual(traj: Trajectory, t) -> float:
    """|integral of v(x) over [t - tau(t), t] minus a|, on the dense output.

    An independent drift check on the differentiated-delay integration.
    Raises ValueError when t is outside the integrated span or the stored
    history no longer reaches back to t - tau(t).
    """
    t = float(t)
    if not traj.t0 <= t <= traj.t_end:
        raise ValueError("t outside the integrated span")
    tau_t = float(traj.eval_tau(t))
    lo = t - tau_t
    if lo < float(traj._full_t[0]) - 1e-9 * max(1.0, abs(lo)):
        raise ValueError("stored history does not span t - tau(t)")
    val = _integral_v_dense(traj, lo, t)
    return abs(val - traj.params.a)


@dataclass(frozen=True)
class OrbitMetrics:
    """Post-transient oscillation statistics.

    l2 is sqrt(mean of x^2 over the last full period); residual is the
    sup-norm mismatch |x(t) - x(t - period)| over that period; blowup marks
    an inter-crossing gap beyond the cap."""

    period: float
    x_max: float
    x_min: float
    l2: float
    residual: float
    blowup: bool
    section: float
    n_crossings: int

    def to_json_dict(self) -> dict:
        return {
            "period": self.period,
            "x_max": self.x_max,
            "x_min": self.x_min,
            "l2": self.l2,
            "residual": self.residual,
            "blowup": self.blowup,
            "section": self.section,
            "n_crossings": self.n_crossings,
        }


def orbit_metrics(traj: Trajectory, section=None, transient=None, cap=1e3) -> OrbitMetrics:
    """Measure the oscillation after a transient cutoff.

    Upward crossings of x = section define the period; section defaults to
    the midrange of the samples past the cutoff (itself defaulting to the
    midpoint of the span).  The period is the mean of the last few
    inter-crossing gaps; max/min/l2 and the periodicity residual are taken
    over the last full period of the dense output.  Fewer than 3 upward
    crossings raise NoOscillationError; a gap (or trailing quiet stretch)
    longer than cap sets the blowup flag.
    """
    t_cut = 0.5 * (traj.t0 + traj.t_end) if transient is None else float(transient)
    sel = traj.times >= t_cut
    if int(sel.sum()) < 4:
        raise NoOscillationError("transient cutoff leaves too few samples")
    xw = traj.x[sel]
    if section is None:
        section = 0.5 * (float(xw.max()) + float(xw.min()))
    sec = float(section)
    cross = traj.crossings(sec, t_from=t_cut, direction="up")
    if cross.size < 3:
        raise NoOscillationError(
            f"only {cross.size} upward crossings of {sec:.6g} after t = {t_cut:.6g}"
        )
    gaps = np.diff(cross)
    blowup = bool((gaps > cap).any() or (traj.t_end - cross[-1]) > cap)
    k = min(4, gaps.size)
    period = float(gaps[-k:].mean())
    t_last = float(cross[-1])
    grid = np.linspace(t_last - period, t_last, 2001)
    vals = traj.eval(grid)
    x_max = float(vals.max())
    x_min = float(vals.min())
    l2 = math.sqrt(max(0.0, float(simpson(vals * vals, x=grid)) / period))
    residual = float(np.max(np.abs(vals - traj.eval(grid - period))))
    return OrbitMetrics(period, x_max, x_min, l2, residual, blowup, sec, int(cross.size))


def csv_rows(traj: Trajectory, every=1):
    """Trajectory rows (t, x, tau, threshold_residual), one per every-th
    node; the residual entry is None where the stored history no longer
    spans the delay interval."""
    rows = [("t", "x", "tau", "threshold_residual")]
    idx = list(range(0, len(traj.times), max(1, int(every))))
    if idx[-1] != len(traj.times) - 1:
        idx.append(len(traj.times) - 1)
    for i in idx:
        t = float(traj.times[i])
        try:
            res = threshold_residual(traj, t)
        except ValueError:
            res = None
        rows.append((t, float(traj.x[i]), float(traj.tau[i]), res))
    return rows
