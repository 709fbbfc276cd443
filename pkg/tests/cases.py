"""Named parameter sets used across the test suite, plus random draw helpers.

Builders are named by their dynamical regime (which nonlinearity varies and in
which direction), not by any particular use.
"""

import zlib

import numpy as np

from tddebif.model import INFINITY, ModelParams, Nonlinearity


def const_nl(value, theta=1.0):
    return Nonlinearity(value, value, theta, 1.0)


# --- one-Hill regimes, g varying ------------------------------------------

def bubble_gdown(n=50.0, gamma=1.0):
    """Decreasing g, constant v; oscillation bubble opens at moderate n."""
    return ModelParams(beta=1.4, mu=0.2, gamma=gamma, a=1.0,
                       g=Nonlinearity(1.0, 0.5, 1.0, n),
                       v=const_nl(2.0))


def bistable_gup(n=10.0, gamma=1.0):
    """Increasing g, constant v; folds and unstable Hopf branches."""
    return ModelParams(beta=2.0, mu=0.02, gamma=gamma, a=2.0,
                       g=Nonlinearity(0.1, 1.0, 1.0, n),
                       v=const_nl(2.0))


# --- one-Hill regimes, v varying ------------------------------------------

def vdown_quiet(m=10.0, gamma=1.0):
    """Decreasing v, constant g, decay too fast for oscillation."""
    return ModelParams(beta=3.0, mu=0.5, gamma=gamma, a=2.0,
                       g=const_nl(1.0),
                       v=Nonlinearity(2.0, 1.0, 1.0, m))


def vdown_onset(m=120.0, gamma=0.4):
    """Decreasing v, constant g; first Hopf appears near m ~ 117."""
    return ModelParams(beta=3.0, mu=1.5, gamma=gamma, a=2.0,
                       g=const_nl(1.0),
                       v=Nonlinearity(2.0, 1.0, 1.0, m))


def vdown_deep(m=100.0, gamma=0.13):
    """Decreasing v, constant g, slow decay; k = 0,1,2 Hopf families."""
    return ModelParams(beta=3.0, mu=0.3, gamma=gamma, a=3.0,
                       g=const_nl(1.0),
                       v=Nonlinearity(0.5, 0.2, 1.0, m))


def vup_stable(m=10.0, gamma=1.0):
    """Increasing v, constant g, mu above both corners: never oscillates."""
    return ModelParams(beta=1.4, mu=0.8, gamma=gamma, a=1.0,
                       g=const_nl(1.0),
                       v=Nonlinearity(0.5, 1.0, 1.0, m))


def vup_rich(m=50.0, gamma=1.0):
    """Increasing v, constant g, mu between the corners; folds, Hopfs, BT."""
    return ModelParams(beta=1.4, mu=0.2, gamma=gamma, a=1.0,
                       g=const_nl(1.0),
                       v=Nonlinearity(0.1, 2.0, 1.0, m))


def vup_subfold(m=50.0, gamma=0.5):
    """Increasing v, constant g, mu below both corners; subcritical Hopfs."""
    return ModelParams(beta=1.0, mu=0.1, gamma=gamma, a=2.0,
                       g=const_nl(1.0),
                       v=Nonlinearity(0.2, 1.0, 1.0, m))


# --- two-Hill regimes -------------------------------------------------------

def twin_down(mn=200.0, gamma=1.3):
    """Both decreasing, coincident thresholds."""
    e = float(mn)
    return ModelParams(beta=3.0, mu=0.5, gamma=gamma, a=1.0,
                       g=Nonlinearity(1.0, 0.1, 1.0, e),
                       v=Nonlinearity(1.0, 0.5, 1.0, e))


def opposing_mild(m=100.0, n=500.0, gamma=0.548):
    """g decreasing, v increasing, coincident thresholds; up to 5 steady states."""
    return ModelParams(beta=1.4, mu=0.2, gamma=gamma, a=1.0,
                       g=Nonlinearity(1.0, 0.5, 1.0, float(n)),
                       v=Nonlinearity(0.1, 1.0, 1.0, float(m)))


def flat_m_locus(mn=200.0, gamma=0.4):
    """Coincident thresholds with a chosen so M(theta) = -1 for all m = n."""
    e = float(mn)
    return ModelParams(beta=10.0, mu=0.2, gamma=gamma, a=18.4091,
                       g=Nonlinearity(1.0, 0.1, 1.0, e),
                       v=Nonlinearity(1.0, 2.0, 1.0, e))


def split_thresholds(m=40.0, n=40.0, gamma=1.0):
    """g decreasing at theta_g=1, v increasing at theta_v=0.5."""
    return ModelParams(beta=1.4, mu=0.2, gamma=gamma, a=1.0,
                       g=Nonlinearity(1.0, 0.54, 1.0, float(n)),
                       v=Nonlinearity(0.1, 2.0, 0.5, float(m)))


def limit_exponent(params, g_inf=False, v_inf=False):
    """Replace exponents by INFINITY to build limiting-case params."""
    g = params.g if not g_inf else Nonlinearity(params.g.lo, params.g.hi, params.g.theta, INFINITY)
    v = params.v if not v_inf else Nonlinearity(params.v.lo, params.v.hi, params.v.theta, INFINITY)
    return ModelParams(params.beta, params.mu, params.gamma, params.a, g, v)


# --- random draws -----------------------------------------------------------

def random_nl(rng, direction, p_lo=1.0, p_hi=60.0):
    """direction: 'up', 'down' or 'const'."""
    theta = float(rng.uniform(0.3, 3.0))
    if direction == "const":
        c = float(rng.uniform(0.2, 4.0))
        return Nonlinearity(c, c, theta, 1.0)
    a_val = float(rng.uniform(0.2, 4.0))
    b_val = a_val * float(rng.uniform(1.5, 8.0))
    if direction == "down":
        lo, hi = b_val, a_val
    else:
        lo, hi = a_val, b_val
    return Nonlinearity(lo, hi, theta, float(rng.uniform(p_lo, p_hi)))


def random_params(rng, gdir="down", vdir="const", p_lo=1.0, p_hi=60.0):
    return ModelParams(
        beta=float(rng.uniform(0.5, 5.0)),
        mu=float(rng.uniform(0.02, 1.0)),
        gamma=float(rng.uniform(0.1, 3.0)),
        a=float(rng.uniform(0.3, 3.0)),
        g=random_nl(rng, gdir, p_lo, p_hi),
        v=random_nl(rng, vdir, p_lo, p_hi),
    )


def random_direction_pair(rng):
    """A uniformly drawn (gdir, vdir) pair with at least one non-constant."""
    opts = [("down", "const"), ("up", "const"), ("const", "down"), ("const", "up"),
            ("down", "down"), ("down", "up"), ("up", "down"), ("up", "up")]
    return opts[int(rng.integers(len(opts)))]


def rng_for(name):
    # crc32 keyed: stable across processes, unlike hash()
    return np.random.default_rng(zlib.crc32(name.encode()))
