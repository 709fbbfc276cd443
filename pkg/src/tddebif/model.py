"""Parameters and closed-form scalar functions of the threshold-delay model.

The model is

    x'(t) = beta * exp(-mu*tau(t)) * (v(x(t))/v(x(t-tau(t)))) * g(x(t-tau(t)))
            - gamma * x(t),

with the delay tau(t) defined implicitly by the threshold condition

    integral_{t-tau(t)}^{t} v(x(s)) ds = a.

Both nonlinearities are monotone Hill functions

    nl(x) = (lo + hi*(x/theta)^p) / (1 + (x/theta)^p),

with the piecewise-constant step as the explicit exponent limit INFINITY.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DomainError

INFINITY = math.inf

__all__ = [
    "INFINITY",
    "Nonlinearity",
    "ModelParams",
    "CornerGammas",
    "SufficientConditions",
    "eval_nl",
    "eval_dnl",
    "log_slope",
    "log_slope_at",
    "steady_delay",
    "h_residual",
    "gamma_of_xi",
    "fold_discriminant",
    "corner_gammas",
    "sufficient_conditions",
]


@dataclass(frozen=True)
class Nonlinearity:
    """Monotone Hill nonlinearity.

    lo is the value as x -> 0, hi the value as x -> infinity; theta the
    threshold; exponent the Hill coefficient (INFINITY for the step limit).
    """

    lo: float
    hi: float
    theta: float
    exponent: float

    def __post_init__(self):
        if not (self.lo > 0 and self.hi > 0):
            raise ValueError("nonlinearity bounds lo, hi must be positive")
        if not self.theta > 0:
            raise ValueError("nonlinearity threshold must be positive")
        if not self.exponent > 0:
            raise ValueError("nonlinearity exponent must be positive or INFINITY")

    @property
    def is_constant(self) -> bool:
        return self.lo == self.hi

    @property
    def increasing(self) -> bool:
        return self.hi > self.lo

    @property
    def decreasing(self) -> bool:
        return self.lo > self.hi


@dataclass(frozen=True)
class ModelParams:
    """All scalar parameters plus both nonlinearity descriptions."""

    beta: float
    mu: float
    gamma: float
    a: float
    g: Nonlinearity
    v: Nonlinearity

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.mu < 0:
            raise ValueError("mu must be nonnegative")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if not self.a > 0:
            raise ValueError("a must be positive")

    # delays lie in [a/v_U, a/v_0]
    @property
    def tau_min(self) -> float:
        return self.a / max(self.v.lo, self.v.hi)

    @property
    def tau_max(self) -> float:
        return self.a / min(self.v.lo, self.v.hi)

    def with_gamma(self, gamma: float) -> "ModelParams":
        return ModelParams(self.beta, self.mu, gamma, self.a, self.g, self.v)

    def with_exponents(self, n: float | None = None, m: float | None = None) -> "ModelParams":
        g = self.g if n is None else Nonlinearity(self.g.lo, self.g.hi, self.g.theta, n)
        v = self.v if m is None else Nonlinearity(self.v.lo, self.v.hi, self.v.theta, m)
        return ModelParams(self.beta, self.mu, self.gamma, self.a, g, v)

    def to_json_dict(self) -> dict:
        def nl(d: Nonlinearity) -> dict:
            exp = "inf" if math.isinf(d.exponent) else d.exponent
            return {"lo": d.lo, "hi": d.hi, "theta": d.theta, "exp": exp}

        return {
            "beta": self.beta,
            "mu": self.mu,
            "gamma": self.gamma,
            "a": self.a,
            "g": nl(self.g),
            "v": nl(self.v),
        }

    @staticmethod
    def from_json_dict(d: dict) -> "ModelParams":
        def nl(obj, name):
            if not isinstance(obj, dict):
                raise ValueError(f"{name}: expected an object with lo/hi/theta/exp")
            missing = {"lo", "hi", "theta", "exp"} - set(obj)
            if missing:
                raise ValueError(f"{name}: missing keys {sorted(missing)}")
            exp = obj["exp"]
            if isinstance(exp, str):
                if exp.lower() not in ("inf", "infinity"):
                    raise ValueError(f"{name}.exp: string form must be 'inf'")
                exp = INFINITY
            return Nonlinearity(float(obj["lo"]), float(obj["hi"]), float(obj["theta"]), float(exp))

        missing = {"beta", "mu", "gamma", "a", "g", "v"} - set(d)
        if missing:
            raise ValueError(f"model: missing keys {sorted(missing)}")
        return ModelParams(
            beta=float(d["beta"]),
            mu=float(d["mu"]),
            gamma=float(d["gamma"]),
            a=float(d["a"]),
            g=nl(d["g"], "g"),
            v=nl(d["v"], "v"),
        )


@dataclass(frozen=True)
class CornerGammas:
    """Corner constants of the limiting piecewise-constant diagrams.

    gamma1/gamma2 sit at theta_g (g jump over a v plateau), gamma3/gamma4 at
    theta_v (tau jump over a g plateau); gamma13/gamma24/gamma_gv belong to the
    coincident-threshold case theta_g == theta_v and are computed with
    theta = theta_g. dL/dU bound the production flux (absorbing interval
    [dL/gamma, dU/gamma]).
    """

    gamma1: float
    gamma2: float
    gamma3: float
    gamma4: float
    gamma13: float
    gamma24: float
    gamma_gv: float
    dL: float
    dU: float


@dataclass(frozen=True)
class SufficientConditions:
    """Explicit closed-form thresholds; fields are None when the regime of the
    underlying formula does not apply."""

    hopf_exponent_name: str | None
    hopf_exponent_min: float | None
    fold_gamma_max: float | None


def _scalar_or_array(x, out):
    if np.ndim(x) == 0:
        return float(out)
    return out


def eval_nl(nl: Nonlinearity, x):
    """Hill value at x >= 0 (scalar or array), overflow-safe for any exponent.

    Raises DomainError at the set-valued point x == theta when the exponent is
    INFINITY and lo != hi.
    """
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0):
        raise DomainError("nonlinearity argument must be nonnegative")
    if nl.is_constant:
        return _scalar_or_array(x, np.full_like(xa, nl.lo))
    if math.isinf(nl.exponent):
        if np.any(xa == nl.theta):
            raise DomainError("set-valued point: x == theta with INFINITY exponent")
        return _scalar_or_array(x, np.where(xa < nl.theta, nl.lo, nl.hi))
    p, th = nl.exponent, nl.theta
    # branch on x <= theta so the power base never exceeds 1
    s_low = (np.minimum(xa, th) / th) ** p
    s_high = (th / np.maximum(xa, th)) ** p
    out = np.where(
        xa <= th,
        (nl.lo + nl.hi * s_low) / (1.0 + s_low),
        (nl.lo * s_high + nl.hi) / (s_high + 1.0),
    )
    return _scalar_or_array(x, out)


def eval_dnl(nl: Nonlinearity, x):
    """Exact Hill derivative p*theta^p*(hi-lo)*x^(p-1)/(theta^p+x^p)^2 at x > 0,
    in the same overflow-safe branched form."""
    if math.isinf(nl.exponent):
        raise DomainError("derivative undefined for INFINITY exponent")
    xa = np.asarray(x, dtype=float)
    if np.any(xa <= 0):
        raise DomainError("derivative argument must be positive")
    p, th = nl.exponent, nl.theta
    d = nl.hi - nl.lo
    s_low = (np.minimum(xa, th) / th) ** p
    s_high = (th / np.maximum(xa, th)) ** p
    out = np.where(
        xa <= th,
        p * d * s_low / (xa * (1.0 + s_low) ** 2),
        p * d * s_high / (xa * (s_high + 1.0) ** 2),
    )
    return _scalar_or_array(x, out)


def log_slope(x, p: float, r: float):
    """The unimodal log-slope function f(x, p, r) = p(1-r)x^p/((1+x^p)(r+x^p)).

    Satisfies xi*g'(xi)/g(xi) = f(xi/theta_g, n, g_lo/g_hi); overflow-safe for
    large p via the substitution u = x^(-p) for x > 1.
    """
    xa = np.asarray(x, dtype=float)
    if np.any(xa <= 0) or not p > 0 or not r > 0:
        raise DomainError("log_slope requires x, p, r > 0")
    s = np.minimum(xa, 1.0) ** p
    u = (1.0 / np.maximum(xa, 1.0)) ** p
    out = np.where(
        xa <= 1.0,
        p * (1.0 - r) * s / ((1.0 + s) * (r + s)),
        p * (1.0 - r) * u / ((u + 1.0) * (r * u + 1.0)),
    )
    return _scalar_or_array(x, out)


def log_slope_at(nl: Nonlinearity, x):
    """x*nl'(x)/nl(x), valid for constant (0) and INFINITY (0 off-threshold)
    nonlinearities as well."""
    if nl.is_constant:
        return _scalar_or_array(x, np.zeros_like(np.asarray(x, dtype=float)))
    if math.isinf(nl.exponent):
        xa = np.asarray(x, dtype=float)
        if np.any(xa == nl.theta):
            raise DomainError("log slope undefined at the set-valued point")
        return _scalar_or_array(x, np.zeros_like(xa))
    return log_slope(np.asarray(x, dtype=float) / nl.theta, nl.exponent, nl.lo / nl.hi)


def steady_delay(params: ModelParams, xi):
    """Delay at a constant solution: tau(xi) = a / v(xi), in [a/v_U, a/v_0]."""
    return params.a / eval_nl(params.v, xi)


def h_residual(params: ModelParams, xi):
    """Steady states are the zeros of
    h(xi) = beta*exp(-mu*tau(xi))*g(xi) - gamma*xi."""
    tau = steady_delay(params, xi)
    return params.beta * np.exp(-params.mu * tau) * eval_nl(params.g, xi) - params.gamma * xi


def gamma_of_xi(params: ModelParams, xi):
    """The unique gamma making xi a steady state:
    gamma(xi) = beta*exp(-mu*tau(xi))*g(xi)/xi."""
    tau = steady_delay(params, xi)
    return params.beta * np.exp(-params.mu * tau) * eval_nl(params.g, xi) / xi


def fold_discriminant(params: ModelParams, xi):
    """M(xi) = xi*g'/g + mu*tau(xi)*xi*v'/v - 1.

    M(xi) = 0 exactly at fold points (lambda = 0 characteristic value), and
    sign(gamma'(xi)) = sign(M(xi)) along the steady branch.
    """
    tau = steady_delay(params, xi)
    return log_slope_at(params.g, xi) + params.mu * tau * log_slope_at(params.v, xi) - 1.0


def _plateau_value(nl: Nonlinearity, own_theta: float, other_theta: float) -> float:
    """Limiting value of nl at the other nonlinearity's threshold.

    Below nl's own threshold the plateau is lo, above it hi; at a coincident
    threshold the limit family passes through the midpoint (lo+hi)/2 for every
    finite exponent.
    """
    if other_theta < own_theta:
        return nl.lo
    if other_theta > own_theta:
        return nl.hi
    return 0.5 * (nl.lo + nl.hi)


def corner_gammas(params: ModelParams) -> CornerGammas:
    """All corner constants of the limiting diagrams plus the flux bounds."""
    beta, mu, a = params.beta, params.mu, params.a
    g, v = params.g, params.v
    tau_lo = a / v.lo  # delay on the small-x plateau
    tau_hi = a / v.hi  # delay on the large-x plateau

    v_at_tg = _plateau_value(v, v.theta, g.theta)
    g_at_tv = _plateau_value(g, g.theta, v.theta)

    e_tg = math.exp(-mu * a / v_at_tg)
    gamma1 = beta * e_tg * g.hi / g.theta
    gamma2 = beta * e_tg * g.lo / g.theta
    gamma3 = beta * g_at_tv * math.exp(-mu * tau_hi) / v.theta
    gamma4 = beta * g_at_tv * math.exp(-mu * tau_lo) / v.theta

    # coincident-threshold constants, computed with theta = theta_g
    gamma13 = beta * math.exp(-mu * tau_hi) * g.hi / g.theta
    gamma24 = beta * math.exp(-mu * tau_lo) * g.lo / g.theta
    tau_mid = 2.0 * a / (v.lo + v.hi)
    gamma_gv = beta * math.exp(-mu * tau_mid) * 0.5 * (g.lo + g.hi) / g.theta

    v0, vU = min(v.lo, v.hi), max(v.lo, v.hi)
    g0, gU = min(g.lo, g.hi), max(g.lo, g.hi)
    dL = beta * (v0 / vU) * math.exp(-mu * a / v0) * g0
    dU = beta * gU * vU / v0
    return CornerGammas(gamma1, gamma2, gamma3, gamma4, gamma13, gamma24, gamma_gv, dL, dU)


def _fold_gamma_max_sd(params: ModelParams) -> float:
    """Numeric bound gamma <= max_xi [-beta*mu*tau'(xi)*e^{-mu*tau(xi)}*g] for
    constant g and increasing v: 2048-point log grid plus golden refinement."""
    g_val = params.g.lo

    def obj(ln_xi):
        xi = math.exp(ln_xi)
        tau = params.a / eval_nl(params.v, xi)
        # tau'(xi) = -a*v'(xi)/v(xi)^2
        dtau = -params.a * eval_dnl(params.v, xi) / eval_nl(params.v, xi) ** 2
        return -(-params.beta * params.mu * dtau * math.exp(-params.mu * tau) * g_val)

    th = params.v.theta
    grid = np.log(np.geomspace(th * 1e-3, th * 1e3, 2048))
    vals = np.array([obj(t) for t in grid])
    i = int(np.argmin(vals))
    best = vals[i]
    if 0 < i < len(grid) - 1 and vals[i] < vals[i - 1] and vals[i] < vals[i + 1]:
        res = minimize_scalar(obj, bracket=(grid[i - 1], grid[i], grid[i + 1]),
                              method="golden", options={"xtol": 1e-12})
        best = min(best, res.fun)
    return -best


def sufficient_conditions(params: ModelParams, k: int) -> SufficientConditions:
    """Closed-form sufficient thresholds for the k-th Hopf bifurcation and the
    necessary gamma bound for folds; fields None where the formula's regime
    hypothesis fails (both constant -> empty record)."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    g, v = params.g, params.v
    beta, mu = params.beta, params.mu
    name = None
    hopf_min = None
    fold_max = None

    if not g.is_constant and v.is_constant and not math.isinf(g.exponent):
        tau = params.a / v.lo
        r = g.lo / g.hi
        g0 = min(g.lo, g.hi)
        scale = beta * tau * math.exp(-mu * tau) * g0
        name = "n"
        if g.decreasing:
            hopf_min = 2.0 * (r + 1.0) / (r - 1.0) * math.sqrt(
                1.0 + (math.pi * g.theta * (2 * k + 1) / scale) ** 2)
        else:
            hopf_min = 2.0 * (1.0 + r) / (1.0 - r) * math.sqrt(
                1.0 + (2.0 * math.pi * g.theta * (k + 1) / scale) ** 2)
            n = g.exponent
            if n > 1.0:
                fold_max = (beta * math.exp(-mu * tau) * (g.hi - g.lo)
                            * (n + 1.0) ** (1.0 + 1.0 / n) * (n - 1.0) ** (1.0 - 1.0 / n)
                            / (4.0 * n * g.theta))
    elif g.is_constant and not v.is_constant and not math.isinf(v.exponent):
        tau_t = 2.0 * params.a / (v.lo + v.hi)  # tau at theta_v, exponent-free
        gam_t = beta * g.lo * math.exp(-mu * tau_t) / v.theta
        r_v = v.lo / v.hi
        if v.decreasing and gam_t < mu:
            name = "m"
            hopf_min = (2.0 * (r_v + 1.0) / (r_v - 1.0)
                        * (((2 * k + 2) * math.pi / tau_t) ** 2 + gam_t ** 2)
                        / (2.0 * gam_t * (mu - gam_t)))
        elif v.increasing and gam_t > mu:
            name = "m"
            hopf_min = (2.0 * (1.0 + r_v) / (1.0 - r_v)
                        * (((2 * k + 1) * math.pi / tau_t) ** 2 + gam_t ** 2)
                        / (2.0 * gam_t * (gam_t - mu)))
        if v.increasing and mu > 0:
            fold_max = _fold_gamma_max_sd(params)

    return SufficientConditions(name, hopf_min, fold_max)
