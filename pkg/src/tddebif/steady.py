"""Steady states: location, branches in (gamma, xi), and step-limit diagrams.

Steady states are the roots of h(xi) = beta e^{-mu tau(xi)} g(xi) - gamma xi
with tau(xi) = a / v(xi).  For piecewise-constant (INFINITY exponent)
nonlinearities the diagram is assembled analytically from plateau branches and
threshold-pinned singular segments; h is never evaluated at a set-valued point.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import RegimeError
from .model import (CornerGammas, ModelParams, corner_gammas, eval_nl,
                    fold_discriminant, gamma_of_xi, h_residual, log_slope_at,
                    steady_delay)

__all__ = [
    "SteadyState", "StableSegment", "SingularSegment", "LimitingDiagram",
    "find_steady_states", "state_at", "steady_branch", "limiting_diagram",
]


@dataclass(frozen=True)
class SteadyState:
    """One steady state with the characteristic-function ingredients.

    A = gamma xi v'(xi)/v(xi), Q = gamma xi g'(xi)/g(xi); M is the fold
    discriminant (h'(xi) = gamma M at the root).  unstable_count is None
    until a spectrum computation fills it in.
    """

    xi: float
    gamma: float
    tau: float
    A: float
    Q: float
    M: float
    unstable_count: int | None = None

    def with_unstable_count(self, count: int) -> "SteadyState":
        return replace(self, unstable_count=count)


@dataclass(frozen=True)
class StableSegment:
    """Plateau branch xi(gamma) = flux/gamma of a step-limit diagram."""

    gamma_lo: float
    gamma_hi: float
    flux: float  # beta e^{-mu tau} g on the plateau; xi(gamma) = flux/gamma
    xi_lo: float
    xi_hi: float

    def xi(self, gamma):
        return self.flux / np.asarray(gamma, dtype=float)


@dataclass(frozen=True)
class SingularSegment:
    """Threshold-pinned segment: xi == theta for gamma in the interval.

    Stability is deliberately not classified; the linearization does not
    exist at a set-valued point.
    """

    gamma_lo: float
    gamma_hi: float
    theta: float
    label: str = "SINGULAR"


@dataclass(frozen=True)
class LimitingDiagram:
    stable_segments: tuple[StableSegment, ...]
    singular_segments: tuple[SingularSegment, ...]
    corners: CornerGammas


def _steady_state_at(params: ModelParams, xi: float, gamma: float | None = None) -> SteadyState:
    gam = params.gamma if gamma is None else gamma
    tau = float(steady_delay(params, xi))
    q = gam * float(log_slope_at(params.g, xi))
    a_val = gam * float(log_slope_at(params.v, xi))
    m = float(fold_discriminant(params, xi))
    return SteadyState(xi=float(xi), gamma=gam, tau=tau, A=a_val, Q=q, M=m)


def state_at(params: ModelParams, xi: float) -> SteadyState:
    """The steady state pinned at xi, with gamma taken from the locus.

    The result is the steady state of params.with_gamma(result.gamma); folds
    (double roots, invisible to the sign scan) can be constructed this way.
    """
    if not xi > 0.0:
        raise ValueError("xi must be positive")
    return _steady_state_at(params, xi, float(gamma_of_xi(params, xi)))


def _scan_grid(params: ModelParams) -> tuple[np.ndarray, float, float]:
    """Mixed lin/log grid covering every possible root of h."""
    g_hi = max(params.g.lo, params.g.hi)
    xi_max = 1.05 * params.beta * g_hi / params.gamma
    xi_min = 1e-12 * xi_max
    grid = np.concatenate([
        np.geomspace(xi_min, xi_max, 2048),
        np.linspace(xi_min, xi_max, 2048),
    ])
    # extra resolution around each threshold, where the Hill factors move
    for nl in (params.g, params.v):
        if nl.is_constant or math.isinf(nl.exponent):
            continue
        w = 10.0 / nl.exponent
        lo = max(xi_min, nl.theta * (1.0 - w))
        hi = min(xi_max, nl.theta * (1.0 + w))
        if lo < hi:
            grid = np.concatenate([grid, np.linspace(lo, hi, 1024)])
    return np.unique(grid), xi_min, xi_max


def _h_derivative(params: ModelParams, xi: float) -> float:
    # h'(xi) = phi(xi) (g'/g + mu tau v'/v) - gamma  with phi = beta e^{-mu tau} g
    tau = float(steady_delay(params, xi))
    phi = params.beta * math.exp(-params.mu * tau) * float(eval_nl(params.g, xi))
    slope = (float(log_slope_at(params.g, xi))
             + params.mu * tau * float(log_slope_at(params.v, xi))) / xi
    return phi * slope - params.gamma


def _refine_root(params: ModelParams, lo: float, hi: float, f_lo: float, f_hi: float) -> float:
    # bisection to relative 1e-12, then a guarded Newton polish
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if hi - lo <= 1e-12 * max(1.0, mid):
            break
        f_mid = float(h_residual(params, mid))
        if f_mid == 0.0:
            return mid
        if (f_lo > 0) != (f_mid > 0):
            hi, f_hi = mid, f_mid
        else:
            lo, f_lo = mid, f_mid
    x = 0.5 * (lo + hi)
    for _ in range(4):
        d = _h_derivative(params, x)
        if d == 0.0:
            break
        step = float(h_residual(params, x)) / d
        x_new = x - step
        if not (lo <= x_new <= hi):
            break
        x = x_new
        if abs(step) <= 1e-15 * max(1.0, x):
            break
    return x


def find_steady_states(params: ModelParams) -> list[SteadyState]:
    """All steady states at params.gamma, sorted by xi.

    Sign-scans h on a dense mixed grid with threshold refinement, bisects each
    bracket and polishes with Newton.  Step-limit (INFINITY) plateaus are
    handled by excluding the set-valued threshold points from the scan.
    """
    grid, xi_min, xi_max = _scan_grid(params)

    # set-valued points of step limits: exclude, and never bracket across them
    breaks = sorted({nl.theta for nl in (params.g, params.v)
                     if math.isinf(nl.exponent) and not nl.is_constant
                     and xi_min < nl.theta < xi_max})
    if breaks:
        keep = np.ones(len(grid), dtype=bool)
        for b in breaks:
            keep &= grid != b
        grid = grid[keep]

    h_vals = np.asarray(h_residual(params, grid), dtype=float)
    roots: list[float] = []
    sign = np.sign(h_vals)
    for i in np.nonzero(sign[:-1] * sign[1:] < 0)[0]:
        lo, hi = float(grid[i]), float(grid[i + 1])
        if any(lo < b < hi for b in breaks):
            continue  # jump discontinuity, not a root
        roots.append(_refine_root(params, lo, hi, float(h_vals[i]), float(h_vals[i + 1])))
    roots.extend(float(grid[i]) for i in np.nonzero(sign == 0)[0])

    roots.sort()
    scale = max(params.g.theta, params.v.theta)
    merged: list[float] = []
    for r in roots:
        if merged and abs(r - merged[-1]) <= 1e-9 * scale:
            continue
        merged.append(r)
    return [_steady_state_at(params, r) for r in merged]


def steady_branch(params: ModelParams, xi_lo: float, xi_hi: float, count: int) -> list[SteadyState]:
    """The exact steady-state locus (xi, gamma(xi)) on a log grid in xi.

    Folds of the branch are interior extrema of gamma(xi); the returned states
    carry the branch gamma, not params.gamma.
    """
    if not (0.0 < xi_lo < xi_hi):
        raise ValueError("need 0 < xi_lo < xi_hi")
    xs = np.geomspace(xi_lo, xi_hi, count)
    gammas = np.asarray(gamma_of_xi(params, xs), dtype=float)
    return [_steady_state_at(params, float(x), float(gam))
            for x, gam in zip(xs, gammas)]


def _plateau_flux(params: ModelParams, g_val: float, v_val: float) -> float:
    return params.beta * math.exp(-params.mu * params.a / v_val) * g_val


def limiting_diagram(params: ModelParams, gamma_range: tuple[float, float]) -> LimitingDiagram:
    """Steady-state diagram for piecewise-constant nonlinearities.

    Every non-constant nonlinearity must have the INFINITY exponent; with both
    exponents finite the smooth tools (find_steady_states / steady_branch)
    apply instead and RegimeError is raised.  Stable plateau branches are the
    hyperbolas xi = flux/gamma clipped to their plateau, singular segments pin
    xi at a threshold for gamma between the corner constants.
    """
    g, v = params.g, params.v
    for nl in (g, v):
        if not nl.is_constant and not math.isinf(nl.exponent):
            raise RegimeError(
                "limiting diagram requires piecewise-constant nonlinearities; "
                "finite exponents are served by find_steady_states")
    gamma_lo_req, gamma_hi_req = gamma_range
    if not (0.0 < gamma_lo_req < gamma_hi_req):
        raise ValueError("gamma_range must be an increasing positive interval")

    corners = corner_gammas(params)

    thresholds = sorted({nl.theta for nl in (g, v) if not nl.is_constant})
    edges = [0.0, *thresholds, math.inf]

    def plateau(nl, lo_edge, hi_edge):
        # each region lies entirely on one side of every jump threshold
        if nl.is_constant or hi_edge <= nl.theta:
            return nl.lo
        return nl.hi

    stable: list[StableSegment] = []
    for lo_edge, hi_edge in zip(edges[:-1], edges[1:]):
        flux = _plateau_flux(params, plateau(g, lo_edge, hi_edge),
                             plateau(v, lo_edge, hi_edge))
        # xi = flux/gamma inside (lo_edge, hi_edge)
        seg_lo = flux / hi_edge if math.isfinite(hi_edge) else 0.0
        seg_hi = flux / lo_edge if lo_edge > 0.0 else math.inf
        seg_lo = max(seg_lo, gamma_lo_req)
        seg_hi = min(seg_hi, gamma_hi_req)
        if seg_lo < seg_hi:
            stable.append(StableSegment(
                gamma_lo=seg_lo, gamma_hi=seg_hi, flux=flux,
                xi_lo=flux / seg_hi, xi_hi=flux / seg_lo))

    singular: list[SingularSegment] = []
    for th in thresholds:
        g_jumps = (not g.is_constant) and g.theta == th
        v_jumps = (not v.is_constant) and v.theta == th
        if g_jumps and v_jumps:
            matched = g.decreasing == v.decreasing
            if matched:
                lo_val, hi_val = sorted((corners.gamma13, corners.gamma24))
            else:
                # opposite jumps: the set-valued flux spans the full product
                # range including the cross combinations
                g0, gU = min(g.lo, g.hi), max(g.lo, g.hi)
                v0, vU = min(v.lo, v.hi), max(v.lo, v.hi)
                lo_val = _plateau_flux(params, g0, v0) / th
                hi_val = _plateau_flux(params, gU, vU) / th
        elif g_jumps:
            lo_val, hi_val = sorted((corners.gamma1, corners.gamma2))
        else:
            lo_val, hi_val = sorted((corners.gamma3, corners.gamma4))
        seg_lo = max(lo_val, gamma_lo_req)
        seg_hi = min(hi_val, gamma_hi_req)
        if seg_lo < seg_hi:
            singular.append(SingularSegment(gamma_lo=seg_lo, gamma_hi=seg_hi, theta=th))

    return LimitingDiagram(tuple(stable), tuple(singular), corners)
