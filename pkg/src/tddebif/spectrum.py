"""Characteristic spectra at steady states.

The linearization at a steady state xi gives the characteristic function

    D(lambda) = lambda + gamma - A - (Q - A) e^{-lambda tau}
                - mu A (1 - e^{-lambda tau}) / lambda

with Q = gamma xi g'(xi)/g(xi) and A = gamma xi v'(xi)/v(xi).  The distributed
term is evaluated through E(z) = (1 - e^{-z})/z with a series fallback so the
removable singularity at lambda = 0 stays smooth; D(0) = -gamma M(xi).
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContourError
from .model import ModelParams, eval_dnl, steady_delay
from .steady import SteadyState

__all__ = ["CharContext", "SpectrumReport", "make_context", "char_eval",
           "char_deriv", "find_roots", "unstable_count", "real_roots_right_of"]

_SERIES_CUT = 1e-4


@dataclass(frozen=True)
class CharContext:
    """Steady state plus the cached ingredients of the linearization."""

    state: SteadyState
    mu: float
    production: float  # beta e^{-mu tau(xi)}
    dg: float          # g'(xi)
    dv: float          # v'(xi)

    @property
    def gamma(self) -> float:
        return self.state.gamma

    @property
    def tau(self) -> float:
        return self.state.tau

    @property
    def A(self) -> float:
        return self.state.A

    @property
    def Q(self) -> float:
        return self.state.Q


@dataclass(frozen=True)
class SpectrumReport:
    roots: tuple[complex, ...]       # Im >= 0 representatives
    residuals: tuple[float, ...]
    box: tuple[float, float, float]  # re_lo, re_hi, im_hi
    unstable_count: int
    rightmost: complex | None

    def to_json_dict(self) -> dict:
        return {
            "roots": [[z.real, z.imag, r] for z, r in zip(self.roots, self.residuals)],
            "box": {"re": [self.box[0], self.box[1]], "im": [0.0, self.box[2]]},
            "unstable_count": self.unstable_count,
            "rightmost": None if self.rightmost is None
            else [self.rightmost.real, self.rightmost.imag],
        }


def make_context(params: ModelParams, state: SteadyState) -> CharContext:
    tau = float(steady_delay(params, state.xi))
    return CharContext(
        state=state,
        mu=params.mu,
        production=params.beta * math.exp(-params.mu * tau),
        dg=float(eval_dnl(params.g, state.xi)),
        dv=float(eval_dnl(params.v, state.xi)),
    )


def _exp_neg(z):
    """e^{-z} with Re(z) clamped at -300.

    Diverged Newton lanes can wander to Re(z) << 0 where e^{-z} overflows; any
    root inside a usable box has Re(z) orders of magnitude above the clamp, so
    clamped lanes are garbage either way and get dropped by the residual filter.
    """
    re = np.maximum(np.real(z), -300.0)
    return np.exp(-(re + 1j * np.imag(z)))


def _e_ratio(z):
    """E(z) = (1 - e^{-z})/z, entire; series below the cancellation cut."""
    out = np.empty_like(z)
    small = np.abs(z) < _SERIES_CUT
    zs = z[small]
    out[small] = 1.0 + zs * (-0.5 + zs * (1.0 / 6.0 + zs * (-1.0 / 24.0)))
    zb = z[~small]
    out[~small] = (1.0 - _exp_neg(zb)) / zb
    return out


def _e_ratio_deriv(z):
    """E'(z), with series -1/2 + z/3 - z^2/8 + z^3/30 near zero."""
    out = np.empty_like(z)
    small = np.abs(z) < _SERIES_CUT
    zs = z[small]
    out[small] = -0.5 + zs * (1.0 / 3.0 + zs * (-1.0 / 8.0 + zs * (1.0 / 30.0)))
    zb = z[~small]
    out[~small] = (zb * _exp_neg(zb) - (1.0 - _exp_neg(zb))) / zb ** 2
    return out


def char_eval(ctx: CharContext, lam):
    """D(lambda); accepts scalars or arrays, smooth through lambda = 0."""
    lam_arr = np.asarray(lam, dtype=complex)
    z = lam_arr * ctx.tau
    val = (lam_arr + ctx.gamma - ctx.A - (ctx.Q - ctx.A) * _exp_neg(z)
           - ctx.mu * ctx.A * ctx.tau * _e_ratio(z))
    if np.ndim(lam) == 0:
        return complex(val)
    return val


def char_deriv(ctx: CharContext, lam):
    """dD/dlambda, analytic (no finite differencing)."""
    lam_arr = np.asarray(lam, dtype=complex)
    z = lam_arr * ctx.tau
    val = (1.0 + ctx.tau * (ctx.Q - ctx.A) * _exp_neg(z)
           - ctx.mu * ctx.A * ctx.tau ** 2 * _e_ratio_deriv(z))
    if np.ndim(lam) == 0:
        return complex(val)
    return val


def _newton_sweep(ctx: CharContext, seeds: np.ndarray, iterations: int = 60) -> np.ndarray:
    lam = seeds.astype(complex).ravel()
    # Runaway lanes may still hit inf/nan; they fail the residual filter later.
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(iterations):
            d = char_deriv(ctx, lam)
            d = np.where(np.abs(d) < 1e-300, 1e-300, d)
            step = char_eval(ctx, lam) / d
            lam = lam - step
            alive = np.isfinite(step) & np.isfinite(lam)
            if not alive.any():
                break
            if np.max(np.abs(step[alive])) < 1e-14 * (1.0 + np.max(np.abs(lam[alive]))):
                break
    return lam


def _dedupe_sorted(cands: list[complex], tol: float = 1e-7) -> list[complex]:
    cands.sort(key=lambda z: (z.real, z.imag))
    out: list[complex] = []
    for z in cands:
        if any(abs(z - w) <= tol * max(1.0, abs(w)) for w in out):
            continue
        out.append(z)
    return out


def _contour_points(re_lo: float, re_hi: float, im_lo: float, im_hi: float,
                    n: int = 4096) -> np.ndarray:
    """Counterclockwise rectangle boundary with n points."""
    per = max(n // 4, 8)
    bottom = re_lo + (re_hi - re_lo) * np.arange(per) / per + 1j * im_lo
    right = re_hi + 1j * (im_lo + (im_hi - im_lo) * np.arange(per) / per)
    top = re_hi - (re_hi - re_lo) * np.arange(per) / per + 1j * im_hi
    left = re_lo + 1j * (im_hi - (im_hi - im_lo) * np.arange(per) / per)
    return np.concatenate([bottom, right, top, left])


def _winding_number(ctx: CharContext, rect: tuple[float, float, float, float],
                    n: int = 4096) -> int:
    """Argument-principle root count inside the rectangle.

    Trapezoid accumulation of the phase of D along the boundary; segments with
    a phase step that cannot be tracked unambiguously are subdivided.  A near
    zero of D on the contour raises ContourError.
    """
    pts = _contour_points(*rect, n=n)
    vals = char_eval(ctx, pts)
    scale = 1e-8 * (1.0 + ctx.gamma + abs(ctx.A) + abs(ctx.Q))
    for _ in range(14):
        if np.min(np.abs(vals)) < scale:
            raise ContourError("characteristic value vanishes on the counting contour")
        phases = np.angle(vals)
        d_phase = np.diff(np.concatenate([phases, phases[:1]]))
        d_phase = (d_phase + math.pi) % (2.0 * math.pi) - math.pi
        wild = np.abs(d_phase) > 0.5 * math.pi
        if not np.any(wild):
            total = float(np.sum(d_phase))
            return int(round(total / (2.0 * math.pi)))
        # subdivide the offending segments
        nxt = np.concatenate([pts[1:], pts[:1]])
        mids = 0.5 * (pts[wild] + nxt[wild])
        order = np.argsort(np.concatenate([np.arange(len(pts)),
                                           np.nonzero(wild)[0] + 0.5]))
        pts = np.concatenate([pts, mids])[order]
        vals = char_eval(ctx, pts)
    raise ContourError("phase tracking on the counting contour did not converge")


def find_roots(ctx: CharContext, box: tuple[float, float, float],
               seed_grid: int = 60) -> SpectrumReport:
    """All characteristic roots in [re_lo, re_hi] x [0, im_hi].

    Newton from a seed_grid x seed_grid grid with the analytic derivative,
    deduplicated, residual-verified, cross-checked against the argument
    principle on the box.  Conjugate partners are implied, not stored.
    """
    re_lo, re_hi, im_hi = box
    if re_hi < 0.0:
        raise ValueError("box must reach Re >= 0")
    res = np.linspace(re_lo, re_hi, seed_grid)
    ims = np.linspace(0.0, im_hi, seed_grid)
    seeds = (res[:, None] + 1j * ims[None, :]).ravel()
    lam = _newton_sweep(ctx, seeds)

    tol_im = 1e-9
    cands: list[complex] = []
    for z in lam:
        if not np.isfinite(z):
            continue
        if z.imag < 0.0:
            z = z.conjugate()
        if abs(z.imag) <= tol_im * (1.0 + abs(z)):
            z = complex(z.real, 0.0)
        if re_lo - 1e-12 <= z.real <= re_hi + 1e-12 and z.imag <= im_hi + 1e-12:
            if abs(char_eval(ctx, z)) < 1e-9 * (1.0 + abs(z)):
                cands.append(z)
    roots = _dedupe_sorted(cands)
    residuals = tuple(abs(char_eval(ctx, z)) for z in roots)

    count = _count_positive(ctx, re_hi, im_hi, re_lo=re_lo)
    rightmost = max(roots, key=lambda z: z.real) if roots else None
    return SpectrumReport(tuple(roots), residuals, (re_lo, re_hi, im_hi),
                          count, rightmost)


def _count_positive(ctx: CharContext, re_hi: float, im_hi: float,
                    re_lo: float = 0.0) -> int:
    """Roots with Re > 0 in the box, conjugates counted individually.

    The contour is the symmetric rectangle [eps, re_hi] x [-im_hi, im_hi], so
    each complex pair contributes two and a positive real root one; the left
    edge eps excludes a root at the origin (fold points).
    """
    eps = 1e-6 * (1.0 + ctx.gamma + abs(ctx.A) + abs(ctx.Q))
    left = max(re_lo, eps)
    if left >= re_hi:
        return 0
    return _winding_number(ctx, (left, re_hi, -im_hi, im_hi))


def unstable_count(ctx: CharContext, re_max: float | None = None,
                   im_max: float | None = None) -> int:
    """Number of characteristic roots with positive real part.

    Default box Re in (0, gamma + |A| + |Q| + 1], Im in [-40 pi/tau, 40 pi/tau]
    (the k <= 19 root families); the contour inflates up to three times if a
    root sits too close to it.
    """
    if re_max is None:
        re_max = ctx.gamma + abs(ctx.A) + abs(ctx.Q) + 1.0
    if im_max is None:
        im_max = 40.0 * math.pi / ctx.tau
    last: ContourError | None = None
    for attempt in range(4):
        f = 1.25 ** attempt
        try:
            return _count_positive(ctx, re_max * f, im_max * f)
        except ContourError as exc:
            last = exc
    raise last


def real_roots_right_of(ctx: CharContext, re_hi: float,
                        re_lo: float = 0.0, n: int = 4001) -> list[float]:
    """Real characteristic roots in (re_lo, re_hi), by sign scan + bisection.

    Used to separate fold-type (real) crossings from Hopf-type pairs along
    branches.
    """
    xs = np.linspace(re_lo, re_hi, n)
    vals = np.real(char_eval(ctx, xs.astype(complex)))
    roots: list[float] = []
    sign = np.sign(vals)
    for i in np.nonzero(sign[:-1] * sign[1:] < 0)[0]:
        lo, hi = float(xs[i]), float(xs[i + 1])
        f_lo = float(vals[i])
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            f_mid = float(np.real(char_eval(ctx, complex(mid))))
            if f_mid == 0.0:
                lo = hi = mid
                break
            if (f_lo > 0) != (f_mid > 0):
                hi = mid
            else:
                lo, f_lo = mid, f_mid
            if hi - lo < 1e-13 * max(1.0, abs(mid)):
                break
        roots.append(0.5 * (lo + hi))
    return roots
