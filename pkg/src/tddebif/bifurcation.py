"""Fold and Hopf point solvers, two-parameter curves, codimension-2 scans.

Point conditions are solved on the steady-state locus, where gamma is a
function of xi; a fold is a zero of the discriminant M(xi) and a Hopf point a
purely imaginary characteristic pair.  Two-parameter curves re-solve the point
condition on an adaptive grid of the second parameter and match solutions
between neighbouring grid values, so branch births and deaths (cusps, curve
noses) are events of the sweep rather than failures.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ContourError, CurveLostError, InconclusiveError, RegimeError
from .model import (ModelParams, fold_discriminant, gamma_of_xi, log_slope_at,
                    steady_delay)
from .spectrum import (_count_positive, _e_ratio, _e_ratio_deriv, char_deriv,
                       char_eval, find_roots, make_context,
                       real_roots_right_of)
from .steady import find_steady_states, state_at

__all__ = [
    "HopfPoint", "FoldPoint", "Annotation", "BifCurve",
    "find_folds", "hopf_const_delay", "hopf_sd_gconst", "hopf_general",
    "criticality", "trace_curve", "codim2_scan",
    "CONST_DELAY", "SD_GCONST", "GENERAL", "SUPER", "SUB", "UNKNOWN",
    "FOLD", "HOPF", "CUSP", "BT", "FOLD_HOPF", "BAUTIN",
]

CONST_DELAY = "CONST_DELAY"
SD_GCONST = "SD_GCONST"
GENERAL = "GENERAL"

SUPER = "SUPER"
SUB = "SUB"
UNKNOWN = "UNKNOWN"

FOLD = "FOLD"
HOPF = "HOPF"

CUSP = "CUSP"
BT = "BT"
FOLD_HOPF = "FOLD_HOPF"
BAUTIN = "BAUTIN"


@dataclass(frozen=True)
class HopfPoint:
    """A point where a conjugate characteristic pair sits at +-i*omega.

    k indexes the omega*tau window the pair belongs to; regime records which
    reduction produced the point.
    """

    xi: float
    gamma: float
    omega: float
    k: int
    regime: str
    criticality: str = UNKNOWN


@dataclass(frozen=True)
class FoldPoint:
    """A zero characteristic value: M(xi) = 0 on the steady locus."""

    xi: float
    gamma: float
    second_param: float | None = None


@dataclass(frozen=True)
class Annotation:
    """A codimension-2 event localized on a curve."""

    kind: str
    gamma: float
    second_param: float
    xi: float


@dataclass
class BifCurve:
    """A one- or two-parameter bifurcation curve.

    points is a polyline: sub-branches that die together (fold pairs at a
    cusp, the two ends of a Hopf loop) are stitched through their common
    turning point, so consecutive points stay within step_bounds inside each
    component.  component_offsets marks where independent components start.
    second_params and unstable_counts run parallel to points; counts exclude
    the defining critical root or pair.
    """

    kind: str
    param_name: str
    param_grid: tuple
    points: tuple
    second_params: tuple
    unstable_counts: tuple
    annotations: tuple
    step_bounds: dict
    component_offsets: tuple
    base_params: ModelParams
    k: int | None
    turning_events: tuple = ()

    def csv_rows(self):
        """Rows for the curve's CSV form; omega is blank on fold curves."""
        rows = [("second_param", "gamma", "xi", "omega", "kind",
                 "unstable_count", "annotation")]
        notes = {}
        for ann in self.annotations:
            best, dist = 0, math.inf
            for i, (pt, sp) in enumerate(zip(self.points, self.second_params)):
                d = abs(sp - ann.second_param) + abs(pt.gamma - ann.gamma)
                if d < dist:
                    best, dist = i, d
            notes.setdefault(best, []).append(ann.kind)
        for i, (pt, sp, cnt) in enumerate(zip(self.points, self.second_params,
                                              self.unstable_counts)):
            omega = getattr(pt, "omega", None)
            rows.append((sp, pt.gamma, pt.xi,
                         "" if omega is None else omega, self.kind,
                         "" if cnt is None else cnt,
                         "+".join(notes.get(i, ()))))
        return rows


def _apply_param(params: ModelParams, name: str, value: float) -> ModelParams:
    if name == "n":
        return params.with_exponents(n=value)
    if name == "m":
        return params.with_exponents(m=value)
    if name == "m=n":
        return params.with_exponents(n=value, m=value)
    raise ValueError("second parameter must be one of 'm', 'n', 'm=n'")


# ---------------------------------------------------------------------------
# folds

def _fold_grid(params: ModelParams) -> np.ndarray:
    thetas = [nl.theta for nl in (params.g, params.v) if not nl.is_constant]
    parts = [np.geomspace(1e-3 * min(thetas), 1e3 * max(thetas), 4096)]
    for nl in (params.g, params.v):
        if nl.is_constant:
            continue
        w = 12.0 / max(nl.exponent, 12.0)
        parts.append(np.linspace(nl.theta * math.exp(-w), nl.theta * math.exp(w), 1024))
    return np.unique(np.concatenate(parts))


def find_folds(params: ModelParams) -> list:
    """All fold points of the steady locus: zeros of M, gamma from the locus.

    Sign scan on a dense xi grid, bisection to 1e-12 relative, then a short
    guarded Newton polish so |M| lands at roundoff.  Needs finite exponents.
    """
    if params.g.is_constant and params.v.is_constant:
        return []
    grid = _fold_grid(params)
    vals = np.asarray(fold_discriminant(params, grid), dtype=float)
    sign = np.sign(vals)
    out = []
    for i in np.nonzero(sign[:-1] * sign[1:] < 0)[0]:
        lo, hi = float(grid[i]), float(grid[i + 1])
        f_lo = float(vals[i])
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            f_mid = float(fold_discriminant(params, mid))
            if f_mid == 0.0:
                lo = hi = mid
                break
            if (f_mid > 0.0) == (f_lo > 0.0):
                lo, f_lo = mid, f_mid
            else:
                hi = mid
            if hi - lo <= 1e-13 * hi:
                break
        xi = 0.5 * (lo + hi)
        for _ in range(4):
            h = 1e-7 * xi
            slope = (fold_discriminant(params, xi + h)
                     - fold_discriminant(params, xi - h)) / (2.0 * h)
            if slope == 0.0:
                break
            step = fold_discriminant(params, xi) / slope
            if abs(step) > 0.5 * (hi - lo) + 1e-9 * xi:
                break
            xi -= step
        out.append(FoldPoint(xi=float(xi), gamma=float(gamma_of_xi(params, xi))))
    for i in np.nonzero(sign == 0)[0]:
        xi = float(grid[i])
        out.append(FoldPoint(xi=xi, gamma=float(gamma_of_xi(params, xi))))
    out.sort(key=lambda f: f.xi)
    return out


# ---------------------------------------------------------------------------
# Hopf solvers: reduced regimes

def _xi_grid(nl, count=6000) -> np.ndarray:
    """Log grid around nl.theta, refined where the log-slope is active."""
    base = np.geomspace(1e-3 * nl.theta, 1e3 * nl.theta, count)
    w = 14.0 / max(nl.exponent, 14.0)
    near = np.linspace(nl.theta * math.exp(-w), nl.theta * math.exp(w), 1200)
    return np.unique(np.concatenate([base, near]))


def _bisect_arrays(func, lo, hi, iters=90):
    """Vectorized bisection; func is sign-definite-free on each bracket."""
    f_lo = func(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        f_mid = func(mid)
        same = np.sign(f_mid) == np.sign(f_lo)
        lo = np.where(same, mid, lo)
        f_lo = np.where(same, f_mid, f_lo)
        hi = np.where(same, hi, mid)
    return 0.5 * (lo + hi)


def _verified_hopf(params: ModelParams, xi: float, omega: float, k: int,
                   regime: str):
    """HopfPoint if the characteristic pair really sits at +-i*omega."""
    state = state_at(params, xi)
    ctx = make_context(params.with_gamma(state.gamma), state)
    if abs(char_eval(ctx, 1j * omega)) >= 1e-8:
        return None
    if abs(math.cos(omega * state.tau)) >= 1.0 - 1e-12:
        return None
    return HopfPoint(xi=float(xi), gamma=float(state.gamma),
                     omega=float(omega), k=int(k), regime=regime)


def hopf_const_delay(params: ModelParams, k: int) -> list:
    """Hopf points for constant v (constant delay), branch k.

    Sequential reduction: gamma(xi) from the locus; omega_k(gamma) from
    omega*cos(omega*tau) + gamma*sin(omega*tau) = 0 bisected inside the k-th
    window; then the log-slope equation
    xi g'/g = -+ sqrt(1 + (omega_k/gamma)^2) sign-scanned over xi.
    """
    if not params.v.is_constant:
        raise RegimeError("hopf_const_delay needs constant v")
    if k < 0:
        raise ValueError("branch index k must be >= 0")
    if params.g.is_constant:
        return []
    tau = params.a / params.v.lo
    down = params.g.decreasing
    if down:
        u_lo, u_hi = 0.5 * math.pi + 2.0 * k * math.pi, math.pi + 2.0 * k * math.pi
    else:
        u_lo, u_hi = 1.5 * math.pi + 2.0 * k * math.pi, 2.0 * math.pi + 2.0 * k * math.pi
    pad = 1e-9 * math.pi
    u_lo, u_hi = u_lo + pad, u_hi - pad
    sign = -1.0 if down else 1.0

    xis = _xi_grid(params.g)
    gammas = np.asarray(gamma_of_xi(params, xis), dtype=float)

    def phase_res(u):
        return (u / tau) * np.cos(u) + gammas * np.sin(u)

    u_roots = _bisect_arrays(phase_res,
                             np.full_like(gammas, u_lo),
                             np.full_like(gammas, u_hi))
    omegas = u_roots / tau
    slope_target = sign * np.sqrt(1.0 + (omegas / gammas) ** 2)
    res = np.asarray(log_slope_at(params.g, xis), dtype=float) - slope_target

    points = []
    res_sign = np.sign(res)
    for i in np.nonzero(res_sign[:-1] * res_sign[1:] < 0)[0]:
        lo, hi = float(xis[i]), float(xis[i + 1])

        def point_res(xi):
            gam = float(gamma_of_xi(params, xi))

            def pr(u):
                return (u / tau) * np.cos(u) + gam * np.sin(u)

            u = float(_bisect_arrays(pr, np.array([u_lo]), np.array([u_hi]))[0])
            return (float(log_slope_at(params.g, xi))
                    - sign * math.sqrt(1.0 + (u / (tau * gam)) ** 2)), u / tau

        f_lo, _ = point_res(lo)
        for _ in range(90):
            mid = 0.5 * (lo + hi)
            f_mid, _ = point_res(mid)
            if (f_mid > 0.0) == (f_lo > 0.0):
                lo, f_lo = mid, f_mid
            else:
                hi = mid
        xi = 0.5 * (lo + hi)
        _, omega = point_res(xi)
        pt = _verified_hopf(params, xi, omega, k, CONST_DELAY)
        if pt is not None:
            points.append(pt)
    points.sort(key=lambda p: p.gamma)
    return points


def _sd_window(decreasing: bool, k: int) -> tuple:
    if decreasing:
        return (2.0 * k + 1.0) * math.pi, (2.0 * k + 2.0) * math.pi
    return 2.0 * k * math.pi, (2.0 * k + 1.0) * math.pi


def _sd_g_eval(u, tau, gamma, mu):
    """Pole-free form of the half-angle phase condition, zero exactly where
    tan(u/2) = omega(gamma - mu)/(omega^2 + gamma mu), omega = u/tau."""
    om = u / tau
    return (np.sin(0.5 * u) * (om ** 2 + gamma * mu)
            - np.cos(0.5 * u) * om * (gamma - mu))


def _sd_g_deriv(u, tau, gamma, mu):
    om = u / tau
    return (0.5 * np.cos(0.5 * u) * (om ** 2 + gamma * mu)
            + np.sin(0.5 * u) * (2.0 * om / tau + 0.5 * om * (gamma - mu))
            - np.cos(0.5 * u) * (gamma - mu) / tau)


def _sd_omega_roots(u_grid, tau, gamma, mu):
    """All omega roots of the half-angle phase condition in one window.

    Multiple roots per window are possible for increasing v.
    """
    vals = _sd_g_eval(u_grid, tau, gamma, mu)
    sgn = np.sign(vals)
    roots = []
    idx = np.nonzero(sgn[:-1] * sgn[1:] < 0)[0]
    if idx.size:
        lo = u_grid[idx].astype(float)
        hi = u_grid[idx + 1].astype(float)
        for u in _bisect_arrays(lambda u: _sd_g_eval(u, tau, gamma, mu), lo, hi):
            roots.append(float(u) / tau)
    return roots


def hopf_sd_gconst(params: ModelParams, k: int) -> list:
    """Hopf points for constant g (state-dependent delay only), branch k.

    Sequential reduction: gamma(xi) from the locus; omega_k from the
    half-angle phase condition tan(omega tau/2) = omega(gamma-mu) /
    (omega^2 + gamma mu) inside the k-th window; then the log-slope equation
    xi v'/v = (omega_k^2 + gamma^2) / (2 gamma (gamma - mu)).  Decreasing v
    requires gamma < mu and increasing v gamma > mu; both are hard filters.
    """
    if not params.g.is_constant:
        raise RegimeError("hopf_sd_gconst needs constant g")
    if k < 0:
        raise ValueError("branch index k must be >= 0")
    if params.v.is_constant:
        return []
    down = params.v.decreasing
    u_lo, u_hi = _sd_window(down, k)
    pad = 1e-9 * math.pi
    u_grid = np.linspace(u_lo + pad, u_hi - pad, 240)

    xis = _xi_grid(params.v)
    gammas = np.asarray(gamma_of_xi(params, xis), dtype=float)
    taus = np.asarray(steady_delay(params, xis), dtype=float)
    slopes = np.asarray(log_slope_at(params.v, xis), dtype=float)
    mu = params.mu
    admitted = gammas < mu if down else gammas > mu

    # u-root matrix: rows xi, columns j-th root of the window, built in one
    # vectorized scan + bisection over every (row, bracket) pair at once
    per_row = [[] for _ in range(len(xis))]
    adm_idx = np.nonzero(admitted)[0]
    if adm_idx.size == 0:
        return []
    vals = _sd_g_eval(u_grid[None, :], taus[adm_idx, None], gammas[adm_idx, None], mu)
    sgn = np.sign(vals)
    r_loc, c_loc = np.nonzero(sgn[:, :-1] * sgn[:, 1:] < 0)
    if r_loc.size:
        tb = taus[adm_idx][r_loc]
        gb = gammas[adm_idx][r_loc]
        u_roots = _bisect_arrays(lambda u: _sd_g_eval(u, tb, gb, mu),
                                 u_grid[c_loc].astype(float),
                                 u_grid[c_loc + 1].astype(float))
        for loc, u in zip(r_loc, np.atleast_1d(u_roots)):
            per_row[adm_idx[loc]].append(float(u))
    max_j = max(len(r) for r in per_row)
    if max_j == 0:
        return []
    res = np.full((len(xis), max_j), np.nan)
    for i, roots in enumerate(per_row):
        gam = gammas[i]
        for j, u in enumerate(roots):
            om = u / taus[i]
            res[i, j] = slopes[i] - (om ** 2 + gam ** 2) / (2.0 * gam * (gam - mu))

    def u_near(tau, gam, u_seed, guard):
        # track one root continuously: Newton from the seed, full-scan fallback;
        # a result further than guard from the seed means the branch was lost
        u = u_seed
        for _ in range(60):
            d = _sd_g_deriv(u, tau, gam, mu)
            if d == 0.0 or not np.isfinite(d):
                break
            step = _sd_g_eval(u, tau, gam, mu) / d
            u2 = u - step
            if not (u_lo < u2 < u_hi):
                break
            if abs(step) < 1e-15 * (1.0 + abs(u2)):
                if abs(u2 - u_seed) <= guard:
                    return u2
                break
            u = u2
        cands = [om * tau for om in _sd_omega_roots(u_grid, tau, gam, mu)
                 if abs(om * tau - u_seed) <= guard]
        return min(cands, key=lambda x: abs(x - u_seed)) if cands else None

    points = []
    for j in range(max_j):
        col = res[:, j]
        ok = np.isfinite(col)
        for i in np.nonzero(ok[:-1] & ok[1:]
                            & (np.sign(col[:-1]) * np.sign(col[1:]) < 0))[0]:
            lo, hi = float(xis[i]), float(xis[i + 1])
            u_a, u_b = per_row[i][j], per_row[i + 1][j]
            f_lo = float(col[i])
            good = True
            for _ in range(90):
                mid = 0.5 * (lo + hi)
                gam = float(gamma_of_xi(params, mid))
                if (gam >= mu) if down else (gam <= mu):
                    good = False
                    break
                tau = float(steady_delay(params, mid))
                guard = abs(u_a - u_b) + 1e-3 * (u_hi - u_lo)
                u_mid = u_near(tau, gam, 0.5 * (u_a + u_b), guard)
                if u_mid is None:
                    good = False
                    break
                om = u_mid / tau
                f_mid = (float(log_slope_at(params.v, mid))
                         - (om ** 2 + gam ** 2) / (2.0 * gam * (gam - mu)))
                if (f_mid > 0.0) == (f_lo > 0.0):
                    lo, f_lo, u_a = mid, f_mid, u_mid
                else:
                    hi, u_b = mid, u_mid
            if not good:
                continue
            xi = 0.5 * (lo + hi)
            gam = float(gamma_of_xi(params, xi))
            if (gam >= mu) if down else (gam <= mu):
                continue
            tau = float(steady_delay(params, xi))
            pt = _verified_hopf(params, xi, 0.5 * (u_a + u_b) / tau, k, SD_GCONST)
            if pt is not None:
                points.append(pt)
    points.sort(key=lambda p: p.gamma)
    return points


# ---------------------------------------------------------------------------
# Hopf solver: general regime

def _general_residual(params: ModelParams, xi, omega):
    """D(i*omega) on the locus, vectorized over (xi, omega) arrays."""
    gam = np.asarray(gamma_of_xi(params, xi), dtype=float)
    tau = np.asarray(steady_delay(params, xi), dtype=float)
    q = gam * np.asarray(log_slope_at(params.g, xi), dtype=float)
    a_val = gam * np.asarray(log_slope_at(params.v, xi), dtype=float)
    z = 1j * omega * tau
    val = (1j * omega + gam - a_val - (q - a_val) * np.exp(-z)
           - params.mu * a_val * tau * _e_ratio(np.asarray(z, dtype=complex)))
    d_om = 1j * (1.0 + tau * (q - a_val) * np.exp(-z)
                 - params.mu * a_val * tau ** 2
                 * _e_ratio_deriv(np.asarray(z, dtype=complex)))
    return val, d_om


def _hopf_newton(params: ModelParams, xi0, om0, iters=50):
    """Vectorized 2-D Newton for D(i*omega) = 0 with gamma = gamma(xi).

    Analytic derivative in omega, central difference in xi; lanes leaving
    xi > 0, omega > 0 are parked and dropped.
    """
    xi = np.asarray(xi0, dtype=float).copy()
    om = np.asarray(om0, dtype=float).copy()
    alive = np.ones(xi.shape, dtype=bool)
    with np.errstate(all="ignore"):
        for _ in range(iters):
            val, d_om = _general_residual(params, xi, om)
            h = 1e-6 * (1.0 + xi)
            vp, _ = _general_residual(params, xi + h, om)
            vm, _ = _general_residual(params, np.maximum(xi - h, 1e-12), om)
            d_xi = (vp - vm) / (h + np.minimum(h, xi - 1e-12))
            det = d_xi.real * d_om.imag - d_om.real * d_xi.imag
            det = np.where(det == 0.0, np.nan, det)
            step_xi = (-val.real * d_om.imag + val.imag * d_om.real) / det
            step_om = (-val.imag * d_xi.real + val.real * d_xi.imag) / det
            cap = 0.35 * (1.0 + np.abs(xi))
            step_xi = np.clip(step_xi, -cap, cap)
            cap = 0.35 * (1.0 + np.abs(om))
            step_om = np.clip(step_om, -cap, cap)
            xi = xi + np.where(alive, step_xi, 0.0)
            om = om + np.where(alive, step_om, 0.0)
            bad = ~np.isfinite(xi) | ~np.isfinite(om) | (xi <= 0.0) | (om <= 0.0)
            xi = np.where(bad, 1.0, xi)
            om = np.where(bad, -1.0, om)
            alive &= ~bad
    return xi, om, alive


def hopf_general(params: ModelParams, k_max: int = 4,
                 extra_seeds=()) -> list:
    """All Hopf points of the mixed regime with omega tau below (k_max+1)
    full turns.

    2-D Newton on (xi, omega) from a log-xi by window-omega seed grid (plus
    any extra seeds), deduplicated, then verified against the characteristic
    function; k = floor(omega tau / 2 pi).
    """
    thetas = [nl.theta for nl in (params.g, params.v) if not nl.is_constant]
    if not thetas:
        return []
    xi_parts = [np.geomspace(0.02 * min(thetas), 50.0 * max(thetas), 24)]
    for nl in (params.g, params.v):
        if nl.is_constant:
            continue
        w = 15.0 / max(nl.exponent, 15.0)
        xi_parts.append(np.linspace(nl.theta * math.exp(-w), nl.theta * math.exp(w), 16))
    xi_seeds = np.unique(np.concatenate(xi_parts))
    taus = np.asarray(steady_delay(params, xi_seeds), dtype=float)
    # one window beyond k_max so edge roots (omega tau just under a multiple
    # of 2 pi) are reachable; the floor filter below still enforces k <= k_max
    u_seeds = []
    for k in range(k_max + 2):
        u_seeds.extend(2.0 * math.pi * (k + frac)
                       for frac in (0.04, 0.12, 0.25, 0.4, 0.55, 0.7, 0.82, 0.92, 0.985))
    u_seeds = np.array(u_seeds)
    xi0 = np.repeat(xi_seeds, len(u_seeds))
    om0 = (u_seeds[None, :] / taus[:, None]).ravel()
    if len(extra_seeds):
        extra = np.asarray(extra_seeds, dtype=float)
        xi0 = np.concatenate([xi0, extra[:, 0]])
        om0 = np.concatenate([om0, extra[:, 1]])

    xi, om, alive = _hopf_newton(params, xi0, om0)
    points = []
    seen = []
    for x, w, ok in zip(xi, om, alive):
        if not ok:
            continue
        if any(abs(x - sx) <= 1e-7 * (1.0 + sx) and abs(w - sw) <= 1e-7 * (1.0 + sw)
               for sx, sw in seen):
            continue
        seen.append((x, w))
        tau = float(steady_delay(params, x))
        k = int(math.floor(w * tau / (2.0 * math.pi)))
        if k > k_max:
            continue
        pt = _verified_hopf(params, float(x), float(w), k, GENERAL)
        if pt is not None:
            points.append(pt)
    points.sort(key=lambda p: (p.gamma, p.omega))
    dedup = []
    for pt in points:
        if any(abs(pt.gamma - q.gamma) <= 1e-9 * (1.0 + q.gamma)
               and abs(pt.omega - q.omega) <= 1e-9 * (1.0 + q.omega)
               for q in dedup):
            continue
        dedup.append(pt)
    return dedup


# ---------------------------------------------------------------------------
# criticality by simulation probe

def _steady_near(params: ModelParams, xi_guess: float):
    states = find_steady_states(params)
    if not states:
        return None
    return min(states, key=lambda s: abs(s.xi - xi_guess))


def _critical_pair(params: ModelParams, state, omega: float) -> complex:
    """Characteristic root continued from i*omega by Newton."""
    ctx = make_context(params, state)
    lam = 1j * omega
    for _ in range(60):
        d = char_deriv(ctx, lam)
        if d == 0.0:
            break
        step = char_eval(ctx, lam) / d
        lam -= step
        if abs(step) <= 1e-14 * (1.0 + abs(lam)):
            break
    return lam


def _probe_rate(params: ModelParams, hopf: HopfPoint, frac: float):
    """(rate, steady) at gamma*(1+frac), or (None, None) when the probe
    leaves the branch: no nearby steady state, or the continued pair no
    longer resembles the critical one (its frequency moved by over half)."""
    probe = params.with_gamma(hopf.gamma * (1.0 + frac))
    state = _steady_near(probe, hopf.xi)
    if state is None:
        return None, None
    lam = _critical_pair(probe, state, hopf.omega)
    if abs(lam.imag - hopf.omega) > 0.5 * hopf.omega:
        return None, None
    return lam.real, state


def criticality(params: ModelParams, hopf: HopfPoint) -> str:
    """SUPER or SUB by probing the unstable side of the Hopf point.

    Two gamma offsets in ratio 4:1 on the side where the critical pair has
    positive real part; a bounded small oscillation obeying the square-root
    amplitude law reads SUPER, escape from the local neighbourhood on both
    probes reads SUB, anything mixed raises InconclusiveError.  The offset
    size adapts downward (1%, 0.25%, 0.125% base) so that both probes stay
    on the branch through the Hopf point; folds sitting close to a Hopf
    otherwise capture the larger probes.
    """
    from . import simulate

    side = None
    for eps in (0.01, 0.0025, 0.00125):
        rates = {}
        for trial in (1.0, -1.0):
            rate, _ = _probe_rate(params, hopf, eps * trial)
            if rate is not None:
                rates[trial] = rate
        if rates:
            best = max(rates, key=lambda s: rates[s])
            if rates[best] > 0.0:
                side = best
                break
    if side is None:
        raise InconclusiveError("critical pair does not cross at this point")

    chosen = None
    for f in (0.01, 0.0025, 0.00125):
        pair = []
        for frac in (4.0 * f, f):
            rate, state = _probe_rate(params, hopf, frac * side)
            if rate is None or rate <= 0.0:
                pair = None
                break
            pair.append((frac, rate, state))
        if pair is not None:
            chosen = pair
            break
    if chosen is None:
        raise InconclusiveError("no offset window stays on the unstable branch")

    amplitudes = []
    for frac, rate, state in chosen:
        probe = params.with_gamma(hopf.gamma * (1.0 + frac * side))
        period = 2.0 * math.pi / hopf.omega
        t_end = 12.0 / rate + 25.0 * period
        init = simulate.make_initial(probe, state.xi * (1.0 + 1e-3))
        traj = simulate.integrate(probe, init, t_end)
        dev = np.abs(traj.x - state.xi)
        if np.max(dev) > 0.5 * state.xi:
            amplitudes.append(None)
        else:
            tail = traj.times >= 12.0 / rate
            amplitudes.append(float(np.max(dev[tail])))

    if amplitudes[0] is None and amplitudes[1] is None:
        return SUB
    if amplitudes[0] is not None and amplitudes[1] is not None:
        ratio = amplitudes[1] / amplitudes[0]
        if 0.3 <= ratio <= 0.72:
            return SUPER
        raise InconclusiveError(
            f"amplitude ratio {ratio:.3f} does not follow the sqrt law")
    raise InconclusiveError("probes disagree between offsets")


# ---------------------------------------------------------------------------
# curve tracing

def _point_coords(pt) -> tuple:
    if isinstance(pt, HopfPoint):
        return (pt.gamma, pt.xi, pt.omega)
    return (pt.gamma, pt.xi)


def _solve_set(params: ModelParams, kind: str, k: int | None,
               seeds=()) -> list:
    if kind == FOLD:
        return find_folds(params)
    if params.v.is_constant and not params.g.is_constant:
        return hopf_const_delay(params, k)
    if params.g.is_constant and not params.v.is_constant:
        return hopf_sd_gconst(params, k)
    pts = hopf_general(params, k_max=max(k, 0) + 1, extra_seeds=seeds)
    return [p for p in pts if p.k == k]


def _within_bounds(prev_pt, new_pt, bounds) -> bool:
    a, b = _point_coords(prev_pt), _point_coords(new_pt)
    names = ("gamma", "xi", "omega")
    return all(abs(x - y) <= bounds[nm] * (1.0 + abs(x))
               for x, y, nm in zip(a, b, names))


def _point_dist(a, b) -> float:
    # relative distance over every coordinate; gamma alone is ambiguous where
    # the gamma values of two branches cross (e.g. fold pairs above a cusp)
    return sum(abs(x - y) / (1.0 + abs(x))
               for x, y in zip(_point_coords(a), _point_coords(b)))


def _match(prev_pts: list, new_pts: list):
    """Greedy nearest-point matching; returns pairs plus unmatched indices."""
    pairs = []
    free_new = set(range(len(new_pts)))
    order = sorted(range(len(prev_pts)),
                   key=lambda i: prev_pts[i].gamma)
    for i in order:
        if not free_new:
            break
        j = min(free_new, key=lambda j: _point_dist(prev_pts[i], new_pts[j]))
        pairs.append((i, j))
        free_new.discard(j)
    matched_prev = {i for i, _ in pairs}
    if len(prev_pts) > len(new_pts):
        lost = [i for i in range(len(prev_pts)) if i not in matched_prev]
    else:
        lost = []
    born = sorted(free_new)
    return pairs, lost, born


class _Branch:
    __slots__ = ("entries", "open", "born_at")

    def __init__(self, born_at):
        self.entries = []
        self.open = True
        self.born_at = born_at


def trace_curve(params: ModelParams, kind: str, param_name: str,
                param_range: tuple, k: int = 0, *, steps: int = 64,
                step_bounds: dict | None = None) -> BifCurve:
    """Trace a fold or Hopf curve over a second parameter (m, n or m=n).

    Natural-parameter sweep: the point condition is re-solved on an adaptive
    grid, solutions matched to the previous step by gamma, and the step is
    halved whenever a branch moves more than the declared bounds or the
    branch count changes, down to 1e-4 of the range.  Sub-branches that die
    together are stitched through their turning point into one component.
    CurveLostError reports the last good point if matching fails outright.
    """
    if kind not in (FOLD, HOPF):
        raise ValueError("kind must be FOLD or HOPF")
    t_lo, t_hi = float(param_range[0]), float(param_range[1])
    if not t_hi > t_lo:
        raise ValueError("empty parameter range")
    span = t_hi - t_lo
    min_step = 1e-4 * span
    bounds = {"gamma": 0.08, "xi": 0.08, "omega": 0.08, "param": span / steps}
    if step_bounds:
        bounds.update(step_bounds)

    t = t_lo
    cur = _solve_set(_apply_param(params, param_name, t), kind, k)
    branches = [_Branch(t) for _ in cur]
    for br, pt in zip(branches, cur):
        br.entries.append((t, pt))
    alive = list(branches)
    order_grid = [t]
    events = []
    step = bounds["param"]

    while t < t_hi - 1e-12 * span:
        step = min(step, t_hi - t)
        t_new = t + step
        seeds = []
        for br in alive:
            if len(br.entries) >= 2:
                (ta, pa), (tb, pb) = br.entries[-2], br.entries[-1]
                if tb > ta:
                    w = (t_new - tb) / (tb - ta)
                    ca, cb = _point_coords(pa), _point_coords(pb)
                    xi_p = cb[1] + w * (cb[1] - ca[1])
                    if kind == HOPF and len(cb) == 3:
                        seeds.append((max(xi_p, 1e-9), cb[2] + w * (cb[2] - ca[2])))
            elif br.entries and kind == HOPF:
                pt = br.entries[-1][1]
                seeds.append((pt.xi, pt.omega))
        new_pts = _solve_set(_apply_param(params, param_name, t_new), kind, k,
                             seeds=tuple(seeds))

        prev_pts = [br.entries[-1][1] for br in alive]
        pairs, lost, born = _match(prev_pts, new_pts)
        smooth = all(_within_bounds(prev_pts[i], new_pts[j], bounds)
                     for i, j in pairs)
        if (len(new_pts) != len(prev_pts) or not smooth) and step > min_step:
            step = max(0.5 * step, min_step)
            continue
        if not smooth and len(new_pts) == len(prev_pts):
            last = prev_pts[0] if prev_pts else None
            raise CurveLostError(
                f"matching failed at {param_name}={t_new:.6g}", last_point=last)

        for i, j in pairs:
            alive[i].entries.append((t_new, new_pts[j]))
        if lost:
            dying = sorted(lost, key=lambda i: prev_pts[i].gamma)
            while len(dying) >= 2:
                i_a, i_b = dying.pop(0), dying.pop(0)
                events.append({"kind": "death", "t_lo": t, "t_hi": t_new,
                               "a": alive[i_a], "b": alive[i_b]})
                alive[i_a].open = False
                alive[i_b].open = False
            for i in dying:
                alive[i].open = False
            alive = [br for br in alive if br.open]
        if born:
            fresh = []
            for j in born:
                br = _Branch(t_new)
                br.entries.append((t_new, new_pts[j]))
                branches.append(br)
                fresh.append(br)
                alive.append(br)
            for a_br, b_br in zip(fresh[::2], fresh[1::2]):
                events.append({"kind": "birth", "t_lo": t, "t_hi": t_new,
                               "a": a_br, "b": b_br})
        t = t_new
        order_grid.append(t)
        step = min(2.0 * step, bounds["param"])

    # stitch components: death pairs join tail-to-tail, birth pairs head-to-head;
    # a branch joins at most one mate, death pairings taking precedence
    paired = {}
    for ev in events:
        if ev["kind"] == "death":
            paired.setdefault(id(ev["a"]), ("tail", ev["b"]))
            paired.setdefault(id(ev["b"]), ("tail", ev["a"]))
    for ev in events:
        if ev["kind"] == "birth":
            if id(ev["a"]) not in paired and id(ev["b"]) not in paired:
                paired[id(ev["a"])] = ("head", ev["b"])
                paired[id(ev["b"])] = ("head", ev["a"])
    consumed = set()
    components = []
    for br in branches:
        if id(br) in consumed or not br.entries:
            continue
        mate = paired.get(id(br))
        if mate is not None and id(mate[1]) not in consumed:
            mode, other = mate
            if mode == "tail":
                seq = br.entries + other.entries[::-1]
            else:
                seq = br.entries[::-1] + other.entries
            consumed.add(id(br))
            consumed.add(id(other))
        else:
            seq = list(br.entries)
            consumed.add(id(br))
        components.append(seq)

    pts, sps, offs = [], [], []
    for seq in components:
        offs.append(len(pts))
        for t_val, pt in seq:
            if isinstance(pt, FoldPoint):
                pt = replace(pt, second_param=t_val)
            pts.append(pt)
            sps.append(t_val)

    counts = [_curve_count(_apply_param(params, param_name, t_val), pt, kind)
              for pt, t_val in zip(pts, sps)]

    ev_out = tuple({"kind": ev["kind"], "t_lo": ev["t_lo"], "t_hi": ev["t_hi"],
                    "gamma": ev["a"].entries[-1][1].gamma
                    if ev["kind"] == "death" else ev["a"].entries[0][1].gamma,
                    "xi": ev["a"].entries[-1][1].xi
                    if ev["kind"] == "death" else ev["a"].entries[0][1].xi}
                   for ev in events)
    return BifCurve(kind=kind, param_name=param_name, param_grid=tuple(order_grid),
                    points=tuple(pts), second_params=tuple(sps),
                    unstable_counts=tuple(counts), annotations=(),
                    step_bounds=bounds, component_offsets=tuple(offs),
                    base_params=params, k=(None if kind == FOLD else k),
                    turning_events=ev_out)


# left-edge retreat factors (x scale) when a root sits on the contour; kept
# tiny so the count stays comparable between neighbouring curve points
_EPS_LADDER = (0.0, 3e-6, 1e-5, 3e-5, 1e-4)


def _count_near_axis(ctx, re_hi: float, im_hi: float):
    scale = 1.0 + ctx.gamma + abs(ctx.A) + abs(ctx.Q)
    for f in _EPS_LADDER:
        try:
            return _count_positive(ctx, re_hi, im_hi, re_lo=f * scale)
        except ContourError:
            continue
    return None


def _curve_count(params_t: ModelParams, pt, kind: str):
    """Unstable count at a curve point, excluding the defining critical part.

    A fold's zero root is excluded by the counting contour's left edge; at a
    Hopf point the critical pair sits on the axis, so the edge is pushed to
    1e-3 of the spectral scale to deflate it.
    """
    state = state_at(params_t, pt.xi)
    ctx = make_context(params_t.with_gamma(state.gamma), state)
    scale = 1.0 + ctx.gamma + abs(ctx.A) + abs(ctx.Q)
    re_hi = ctx.gamma + abs(ctx.A) + abs(ctx.Q) + 1.0
    im_hi = 40.0 * math.pi / ctx.tau
    if kind == HOPF:
        try:
            return _count_positive(ctx, re_hi, im_hi, re_lo=1e-3 * scale)
        except ContourError:
            return None
    return _count_near_axis(ctx, re_hi, im_hi)


# ---------------------------------------------------------------------------
# codimension-2 scan

def _fold_near(params_t: ModelParams, xi_lo: float, xi_hi: float):
    folds = [f for f in find_folds(params_t) if xi_lo <= f.xi <= xi_hi]
    return folds


def _lin(t, t0, t1, y0, y1):
    # two-point interpolation valid for either ordering of t0, t1
    if t1 == t0:
        return 0.5 * (y0 + y1)
    w = (t - t0) / (t1 - t0)
    return y0 + w * (y1 - y0)


def _axis_pairs(params_t: ModelParams, fold: FoldPoint) -> list:
    """Conjugate-pair representatives near the imaginary axis at a fold."""
    state = state_at(params_t, fold.xi)
    ctx = make_context(params_t.with_gamma(state.gamma), state)
    scale = 1.0 + ctx.gamma + abs(ctx.A) + abs(ctx.Q)
    rep = find_roots(ctx, (-0.4 * scale, 0.4 * scale, 40.0 * math.pi / ctx.tau))
    return [z for z in rep.roots if z.imag > 1e-9]


def _confirm_pair_crossing(params, name, window, t_a, xi_a, t_b, xi_b) -> bool:
    """True when some conjugate pair's real part changes sign from t_a to t_b.

    Pairs on the two sides are matched by frequency; this screens out
    pair-count jumps caused by counting artefacts rather than a crossing.
    """
    sides = []
    for t, xi_ref in ((t_a, xi_a), (t_b, xi_b)):
        params_t = _apply_param(params, name, t)
        folds = _fold_near(params_t, *window)
        if not folds:
            return False
        fold = min(folds, key=lambda f: abs(f.xi - xi_ref))
        try:
            sides.append(_axis_pairs(params_t, fold))
        except ContourError:
            return False
    for z in sides[0]:
        w = min(sides[1], key=lambda q: abs(q.imag - z.imag), default=None)
        if w is None or abs(w.imag - z.imag) > 0.25 * z.imag + 1e-9:
            continue
        if (z.real <= 0.0) != (w.real <= 0.0):
            return True
    return False


def _spectral_split(params_t: ModelParams, fold: FoldPoint):
    """(real count, pair count) to the right of the axis at a fold point."""
    state = state_at(params_t, fold.xi)
    ctx = make_context(params_t.with_gamma(state.gamma), state)
    re_hi = ctx.gamma + abs(ctx.A) + abs(ctx.Q) + 1.0
    n_real = len(real_roots_right_of(ctx, re_hi, re_lo=1e-6))
    total = _count_near_axis(ctx, re_hi, 40.0 * math.pi / ctx.tau)
    if total is None:
        return n_real, None
    return n_real, max(total - n_real, 0)


def _bisect_event(lo: float, hi: float, flag, span: float):
    """Shrink [lo, hi] to 1e-4*span on the boundary of flag(t)."""
    f_lo = flag(lo)
    while hi - lo > 1e-4 * span:
        mid = 0.5 * (lo + hi)
        if flag(mid) == f_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def codim2_scan(curve: BifCurve, *, bautin_samples: int = 14) -> BifCurve:
    """Annotate a curve with its codimension-2 events.

    Fold curves: cusps from branch-pair turning points; Bogdanov-Takens from
    a real characteristic root crossing zero (counted away from the fold's
    own root); fold-Hopf from a complex pair crossing.  Hopf curves: Bautin
    points from criticality flips.  Each event is bisected in the sweep
    parameter to 1e-4 of the traced range.
    """
    params = curve.base_params
    name = curve.param_name
    grid = curve.param_grid
    span = abs(grid[-1] - grid[0]) if len(grid) > 1 else 1.0
    anns = []

    if curve.kind == FOLD:
        for ev in curve.turning_events:
            window = (ev["xi"] / 1.6, ev["xi"] * 1.6)

            def has_pair(t):
                return len(_fold_near(_apply_param(params, name, t),
                                      *window)) >= 2

            exists_lo = ev["kind"] == "birth"
            lo, hi = ev["t_lo"], ev["t_hi"]
            t_star = _bisect_event(lo, hi, has_pair, span)
            side = hi if exists_lo else lo
            pair = _fold_near(_apply_param(params, name,
                                           t_star if has_pair(t_star) else side),
                              *window)
            if len(pair) >= 2:
                gam = 0.5 * (pair[0].gamma + pair[1].gamma)
                xi = 0.5 * (pair[0].xi + pair[1].xi)
            else:
                gam, xi = ev["gamma"], ev["xi"]
            anns.append(Annotation(kind=CUSP, gamma=gam, second_param=t_star,
                                   xi=xi))

        # walk each component for spectral-count changes
        start_offs = list(curve.component_offsets) + [len(curve.points)]
        for c in range(len(curve.component_offsets)):
            seg = range(start_offs[c], start_offs[c + 1])
            splits = {}
            for i in seg:
                t_val = curve.second_params[i]
                splits[i] = _spectral_split(_apply_param(params, name, t_val),
                                            curve.points[i])
            for i, j in zip(list(seg)[:-1], list(seg)[1:]):
                r0, p0 = splits[i]
                r1, p1 = splits[j]
                t0, t1 = curve.second_params[i], curve.second_params[j]
                if t0 == t1:
                    continue
                lo, hi = min(t0, t1), max(t0, t1)
                xi_win = (min(curve.points[i].xi, curve.points[j].xi) / 1.3,
                          max(curve.points[i].xi, curve.points[j].xi) * 1.3)

                def split_at(t, which):
                    folds = _fold_near(_apply_param(params, name, t), *xi_win)
                    if not folds:
                        return None
                    xi_ref = _lin(t, t0, t1,
                                  curve.points[i].xi, curve.points[j].xi)
                    fold = min(folds, key=lambda f: abs(f.xi - xi_ref))
                    got = _spectral_split(_apply_param(params, name, t), fold)
                    return got[which], fold

                if r0 != r1:
                    t_star = _bisect_event(
                        lo, hi, lambda t: (split_at(t, 0) or (r0, None))[0] == r0,
                        span)
                    got = split_at(t_star, 0)
                    fold = got[1] if got else curve.points[i]
                    anns.append(Annotation(kind=BT, gamma=fold.gamma,
                                           second_param=t_star, xi=fold.xi))
                if p0 is not None and p1 is not None and abs(p1 - p0) >= 2:
                    t_star = _bisect_event(
                        lo, hi, lambda t: (split_at(t, 1) or (p0, None))[0] == p0,
                        span)
                    got = split_at(t_star, 1)
                    fold = got[1] if got else curve.points[i]
                    pad = 5e-4 * span
                    t_a, t_b = max(lo, t_star - pad), min(hi, t_star + pad)
                    xi_a = _lin(t_a, t0, t1, curve.points[i].xi,
                                curve.points[j].xi)
                    xi_b = _lin(t_b, t0, t1, curve.points[i].xi,
                                curve.points[j].xi)
                    if _confirm_pair_crossing(params, name, xi_win,
                                              t_a, xi_a, t_b, xi_b):
                        anns.append(Annotation(kind=FOLD_HOPF, gamma=fold.gamma,
                                               second_param=t_star, xi=fold.xi))

    else:
        start_offs = list(curve.component_offsets) + [len(curve.points)]
        for c in range(len(curve.component_offsets)):
            seg = list(range(start_offs[c], start_offs[c + 1]))
            if len(seg) < 2:
                continue
            stride = max(1, len(seg) // bautin_samples)
            samples = seg[::stride]
            if samples[-1] != seg[-1]:
                samples.append(seg[-1])
            verdicts = {}
            for i in samples:
                verdicts[i] = _criticality_at(params, name, curve,
                                              curve.second_params[i],
                                              curve.points[i])
            known = [i for i in samples if verdicts[i] is not None]
            for i, j in zip(known[:-1], known[1:]):
                if verdicts[i] == verdicts[j]:
                    continue
                want = verdicts[i]
                idx_pair = (i, j)

                def flips(t):
                    got = _interp_criticality(params, name, curve, idx_pair, t)
                    return (got or want) == want

                lo = min(curve.second_params[i], curve.second_params[j])
                hi = max(curve.second_params[i], curve.second_params[j])
                t_star = _bisect_event(lo, hi, flips, span)
                t_i, t_j = curve.second_params[i], curve.second_params[j]
                w = 0.5 if t_j == t_i else (t_star - t_i) / (t_j - t_i)
                xi_ref = (curve.points[i].xi
                          + w * (curve.points[j].xi - curve.points[i].xi))
                pt = _hopf_on_branch(params, name, curve, t_star, xi_ref)
                if pt is not None:
                    anns.append(Annotation(kind=BAUTIN, gamma=pt.gamma,
                                           second_param=t_star, xi=pt.xi))

    return BifCurve(
        kind=curve.kind, param_name=curve.param_name, param_grid=curve.param_grid,
        points=curve.points, second_params=curve.second_params,
        unstable_counts=curve.unstable_counts, annotations=tuple(anns),
        step_bounds=curve.step_bounds, component_offsets=curve.component_offsets,
        base_params=curve.base_params, k=curve.k,
        turning_events=curve.turning_events)


def _hopf_on_branch(params, name, curve, t, xi_ref):
    pts = _solve_set(_apply_param(params, name, t), curve.kind, curve.k)
    if not pts:
        return None
    return min(pts, key=lambda p: abs(p.xi - xi_ref))


def _interp_criticality(params, name, curve, idx_pair, t):
    i, j = idx_pair
    t_i, t_j = curve.second_params[i], curve.second_params[j]
    if t_j == t_i:
        xi_ref = curve.points[i].xi
    else:
        w = (t - t_i) / (t_j - t_i)
        xi_ref = curve.points[i].xi + w * (curve.points[j].xi - curve.points[i].xi)
    pt = _hopf_on_branch(params, name, curve, t, xi_ref)
    if pt is None:
        return None
    try:
        return criticality(_apply_param(params, name, t), pt)
    except InconclusiveError:
        return None


def _criticality_at(params, name, curve, t, pt):
    try:
        return criticality(_apply_param(params, name, t), pt)
    except InconclusiveError:
        return None
