"""Hill evaluation, log-slope identities, corner constants, bound formulas."""

import math

import numpy as np
import pytest

from cases import (bubble_gdown, bistable_gup, flat_m_locus, opposing_mild,
                   random_direction_pair, random_params, rng_for, split_thresholds,
                   twin_down, vdown_deep, vdown_quiet, vup_rich, vup_stable)
from tddebif.errors import DomainError
from tddebif.model import (INFINITY, ModelParams, Nonlinearity, corner_gammas,
                           eval_dnl, eval_nl, fold_discriminant, gamma_of_xi,
                           h_residual, log_slope, log_slope_at, steady_delay,
                           sufficient_conditions)


# --- Hill evaluation ---------------------------------------------------------

def test_eval_nl_midpoint_and_bounds():
    nl = Nonlinearity(1.0, 0.5, 2.0, 7.0)
    assert eval_nl(nl, 2.0) == pytest.approx(0.75, rel=1e-14)
    rng = rng_for("eval-bounds")
    for _ in range(50):
        lo, hi = sorted(rng.uniform(0.1, 5.0, size=2))
        nl = Nonlinearity(lo, hi, float(rng.uniform(0.3, 3.0)), float(rng.uniform(1.0, 300.0)))
        x = np.concatenate([rng.uniform(0.0, 10.0, size=40), [0.0, nl.theta]])
        y = eval_nl(nl, x)
        assert np.all(y >= lo - 1e-15) and np.all(y <= hi + 1e-15)


def test_eval_nl_monotone_matches_direction():
    # window where the Hill term is not yet flushed to its plateau in floats
    x = np.linspace(0.3, 4.0, 400)
    down = eval_nl(Nonlinearity(2.0, 0.3, 1.5, 9.0), x)
    up = eval_nl(Nonlinearity(0.3, 2.0, 1.5, 9.0), x)
    assert np.all(np.diff(down) < 0)
    assert np.all(np.diff(up) > 0)


def test_eval_nl_large_exponent_no_overflow():
    nl = Nonlinearity(1.0, 0.5, 1.0, 1e4)
    assert eval_nl(nl, 1.2) == pytest.approx(0.5, abs=1e-12)
    assert eval_nl(nl, 1.0 / 1.2) == pytest.approx(1.0, abs=1e-12)
    assert np.isfinite(eval_nl(nl, 1e6))
    assert np.isfinite(eval_nl(nl, 1e-6))


def test_eval_nl_step_limit():
    nl = Nonlinearity(1.0, 0.5, 2.0, INFINITY)
    assert eval_nl(nl, 1.9) == 1.0
    assert eval_nl(nl, 2.1) == 0.5
    with pytest.raises(DomainError):
        eval_nl(nl, 2.0)
    # constant with INFINITY exponent is still just the constant
    flat = Nonlinearity(0.7, 0.7, 2.0, INFINITY)
    assert eval_nl(flat, 2.0) == 0.7


def test_eval_dnl_against_central_difference():
    # oracle: 4th-order central difference on a well-scaled stencil
    rng = rng_for("dnl-fd")
    for _ in range(40):
        lo, hi = rng.uniform(0.1, 5.0, size=2)
        nl = Nonlinearity(float(lo), float(hi), float(rng.uniform(0.3, 3.0)),
                          float(rng.uniform(1.0, 40.0)))
        x = float(rng.uniform(0.2, 3.0) * nl.theta)
        h = 1e-5 * x
        fd = (-eval_nl(nl, x + 2 * h) + 8 * eval_nl(nl, x + h)
              - 8 * eval_nl(nl, x - h) + eval_nl(nl, x - 2 * h)) / (12 * h)
        scale = max(abs(fd), abs(hi - lo) / nl.theta)
        assert eval_dnl(nl, x) == pytest.approx(fd, abs=1e-8 * scale)


def test_eval_dnl_domain_errors():
    step = Nonlinearity(1.0, 0.5, 2.0, INFINITY)
    with pytest.raises(DomainError):
        eval_dnl(step, 1.0)
    nl = Nonlinearity(1.0, 0.5, 2.0, 3.0)
    with pytest.raises(DomainError):
        eval_dnl(nl, 0.0)
    with pytest.raises(DomainError):
        eval_dnl(nl, -1.0)
    assert eval_dnl(Nonlinearity(0.7, 0.7, 2.0, 3.0), 1.0) == 0.0


# --- log-slope ---------------------------------------------------------------

def test_log_slope_reference_values():
    assert log_slope(1.0, 4.0, 1.0) == 0.0
    # p (1 - r) / (2 (1 + r)) at x = 1
    assert log_slope(1.0, 4.0, 3.0) == pytest.approx(-1.0, rel=1e-14)
    assert log_slope(1.0, 10.0, 0.25) == pytest.approx(3.0, rel=1e-14)


def test_log_slope_extremum_against_grid_scan():
    # oracle: dense log-grid scan for the max of |f|, before the closed form
    rng = rng_for("log-slope-peak")
    for _ in range(30):
        p = float(rng.uniform(1.0, 80.0))
        r = float(rng.uniform(0.05, 20.0))
        if abs(r - 1.0) < 1e-3:
            continue
        x = np.geomspace(1e-4, 1e4, 200001)
        scanned = np.max(np.abs(log_slope(x, p, r)))
        x_peak = r ** (1.0 / (2.0 * p))
        peak = p * abs(1.0 - math.sqrt(r)) / (1.0 + math.sqrt(r))
        # grid maximum never exceeds the true one and approaches it
        assert scanned <= peak * (1.0 + 1e-12)
        assert scanned == pytest.approx(peak, rel=1e-4)
        assert abs(log_slope(x_peak, p, r)) == pytest.approx(peak, rel=1e-12)


def test_log_slope_identity_with_hill_derivative():
    # x g'(x)/g(x) == f(x/theta, p, lo/hi) on a wide log grid
    rng = rng_for("log-slope-identity")
    for _ in range(30):
        lo, hi = rng.uniform(0.1, 5.0, size=2)
        nl = Nonlinearity(float(lo), float(hi), float(rng.uniform(0.3, 3.0)),
                          float(rng.uniform(1.0, 60.0)))
        x = nl.theta * np.geomspace(1e-3, 1e3, 301)
        lhs = x * eval_dnl(nl, x) / eval_nl(nl, x)
        rhs = log_slope(x / nl.theta, nl.exponent, nl.lo / nl.hi)
        assert np.allclose(lhs, rhs, rtol=1e-10, atol=1e-300)
        assert np.allclose(log_slope_at(nl, x), rhs, rtol=1e-12, atol=0.0)


def test_log_slope_vanishes_far_from_threshold():
    for p in (2.0, 7.0, 31.0):
        for r in (0.05, 0.4, 2.5, 19.0):
            assert abs(log_slope(1e-6, p, r)) < 1e-6
            assert abs(log_slope(1e6, p, r)) < 1e-6


def test_log_slope_off_peak_decreases_in_large_p():
    for x in (0.5, 2.0):
        for r in (0.3, 4.0):
            vals = [abs(log_slope(x, p, r)) for p in (10.0, 100.0, 1000.0)]
            assert vals[0] > vals[1] > vals[2]
            assert vals[2] < 1e-10


def test_log_slope_at_step_limit():
    step = Nonlinearity(1.0, 0.5, 2.0, INFINITY)
    assert log_slope_at(step, 1.0) == 0.0
    assert log_slope_at(step, 3.0) == 0.0
    with pytest.raises(DomainError):
        log_slope_at(step, 2.0)


# --- steady-state scalar maps -----------------------------------------------

def test_steady_delay_plateaus():
    p = vup_rich()
    assert steady_delay(p, 1e-9) == pytest.approx(p.a / p.v.lo, rel=1e-12)
    assert steady_delay(p, 1e9) == pytest.approx(p.a / p.v.hi, rel=1e-12)
    assert steady_delay(p, p.v.theta) == pytest.approx(p.a / (0.5 * (p.v.lo + p.v.hi)), rel=1e-12)
    q = vup_stable()
    assert p.tau_min == pytest.approx(p.a / p.v.hi)
    assert q.tau_max == pytest.approx(q.a / q.v.lo)


def test_h_residual_sign_structure():
    rng = rng_for("h-signs")
    for _ in range(60):
        gdir, vdir = random_direction_pair(rng)
        p = random_params(rng, gdir, vdir)
        g_hi = max(p.g.lo, p.g.hi)
        assert h_residual(p, 1e-9) > 0.0
        assert h_residual(p, 2.0 * p.beta * g_hi / p.gamma) < 0.0


def test_gamma_of_xi_consistent_with_h():
    rng = rng_for("gamma-xi")
    for _ in range(40):
        gdir, vdir = random_direction_pair(rng)
        p = random_params(rng, gdir, vdir)
        xi = float(rng.uniform(0.2, 3.0))
        q = p.with_gamma(gamma_of_xi(p, xi))
        assert h_residual(q, xi) == pytest.approx(0.0, abs=1e-12 * q.gamma * xi)


def test_gamma_of_xi_strictly_decreasing_when_both_decline():
    rng = rng_for("gamma-monotone")
    for _ in range(200):
        p = random_params(rng, "down", "down")
        xi = np.geomspace(1e-4, 1e3, 400)
        gam = gamma_of_xi(p, xi)
        assert np.all(np.diff(gam) < 0.0)


def test_gamma_slope_sign_matches_discriminant():
    # oracle first: centered finite difference of gamma(xi)
    rng = rng_for("gamma-slope-sign")
    for _ in range(40):
        gdir, vdir = random_direction_pair(rng)
        p = random_params(rng, gdir, vdir, p_hi=20.0)
        for xi in rng.uniform(0.3, 2.5, size=8):
            h = 1e-7 * xi
            d_fd = (gamma_of_xi(p, xi + h) - gamma_of_xi(p, xi - h)) / (2 * h)
            m = fold_discriminant(p, xi)
            if abs(m) < 1e-4:
                continue
            assert math.copysign(1.0, d_fd) == math.copysign(1.0, m)


def test_fold_discriminant_constant_case():
    rng = rng_for("discriminant-const")
    for _ in range(20):
        p = random_params(rng, "const", "const")
        assert fold_discriminant(p, 1.0) == pytest.approx(-1.0, rel=1e-14)


def test_flat_m_locus_has_unit_discriminant_at_threshold():
    # a is tuned so that at xi = theta the two slope terms cancel for any m = n;
    # the rounding of a leaks a residue proportional to the common exponent
    for mn in (50.0, 200.0, 1000.0):
        p = flat_m_locus(mn=mn)
        assert fold_discriminant(p, 1.0) == pytest.approx(-1.0, abs=5e-7 * mn)


# --- corner constants --------------------------------------------------------

def test_corner_gammas_vdown_deep():
    c = corner_gammas(vdown_deep())
    assert c.gamma3 == pytest.approx(0.0333, abs=5e-4)
    assert c.gamma4 == pytest.approx(0.4959, abs=5e-4)


def test_corner_gammas_vup_rich():
    c = corner_gammas(vup_rich())
    assert c.gamma4 == pytest.approx(0.1895, abs=5e-4)
    assert c.gamma3 == pytest.approx(1.2668, abs=5e-4)


def test_corner_gammas_twin_down():
    c = corner_gammas(twin_down())
    assert c.gamma13 == pytest.approx(0.1104, abs=5e-4)
    assert c.gamma24 == pytest.approx(1.8196, abs=5e-4)


def test_corner_gammas_orderings():
    rng = rng_for("corner-order")
    for _ in range(50):
        gdir, vdir = random_direction_pair(rng)
        p = random_params(rng, gdir, vdir)
        c = corner_gammas(p)
        if not p.g.is_constant:
            assert (c.gamma1 < c.gamma2) == p.g.decreasing
        if not p.v.is_constant:
            assert (c.gamma3 < c.gamma4) == p.v.decreasing
        assert 0.0 < c.dL <= c.dU
        for val in (c.gamma1, c.gamma2, c.gamma3, c.gamma4,
                    c.gamma13, c.gamma24, c.gamma_gv):
            assert val > 0.0


def test_corner_gammas_off_threshold_plateaus():
    # split thresholds: the plateau entering each corner is fixed by ordering
    p = split_thresholds()
    c = corner_gammas(p)
    # theta_v < theta_g, so v sits on its large-x plateau at theta_g...
    tau_g = p.a / p.v.hi
    ex_g = math.exp(-p.mu * tau_g)
    assert c.gamma1 == pytest.approx(p.beta * ex_g * p.g.hi / p.g.theta, rel=1e-12)
    assert c.gamma2 == pytest.approx(p.beta * ex_g * p.g.lo / p.g.theta, rel=1e-12)
    # ...and g sits on its small-x plateau at theta_v
    g_at_v = p.g.lo
    assert c.gamma3 == pytest.approx(g_at_v * p.beta * math.exp(-p.mu * p.a / p.v.hi) / p.v.theta, rel=1e-12)
    assert c.gamma4 == pytest.approx(g_at_v * p.beta * math.exp(-p.mu * p.a / p.v.lo) / p.v.theta, rel=1e-12)


# --- sufficient conditions ---------------------------------------------------

def test_exponent_thresholds_vdown_deep():
    p = vdown_deep(gamma=0.13)
    vals = [sufficient_conditions(p, k).hopf_exponent_min for k in (0, 1, 2)]
    assert vals[0] == pytest.approx(84.0, abs=1.0)
    assert vals[1] == pytest.approx(316.0, abs=1.0)
    assert vals[2] == pytest.approx(703.0, abs=1.0)


def test_exponent_threshold_requires_feasible_decay():
    # decreasing v oscillates only if the locus decay at theta_v is below mu;
    # increasing v needs the opposite, so these two sets admit no bound at all
    assert sufficient_conditions(vdown_quiet(), 0).hopf_exponent_min is None
    assert sufficient_conditions(vup_stable(), 0).hopf_exponent_min is None


def test_exponent_threshold_gdown_finite_and_growing_in_k():
    p = bubble_gdown()
    vals = [sufficient_conditions(p, k).hopf_exponent_min for k in (0, 1, 2)]
    assert all(v is not None and v > 2.0 for v in vals)
    assert vals[0] < vals[1] < vals[2]


def test_fold_bound_matches_grid_maximum_gup():
    # oracle: the fold bound for increasing g + constant v is the max of
    # beta e^{-mu tau} g'(xi) over xi, computed here by dense scan
    p = bistable_gup(n=10.0)
    tau = p.a / p.v.lo
    x = p.g.theta * np.geomspace(1e-3, 1e3, 400001)
    scan = float(np.max(p.beta * math.exp(-p.mu * tau) * eval_dnl(p.g, x)))
    s = sufficient_conditions(p, 0)
    assert s.fold_gamma_max == pytest.approx(scan, rel=1e-8)


def test_fold_bound_matches_grid_maximum_vup():
    # oracle: for increasing v the bound maximises -beta mu tau'(xi) e^{-mu tau} g
    p = vup_rich(m=50.0)
    x = p.v.theta * np.geomspace(1e-3, 1e3, 400001)
    vv = eval_nl(p.v, x)
    dv = eval_dnl(p.v, x)
    tau = p.a / vv
    dtau = -p.a * dv / vv ** 2
    scan = float(np.max(-p.beta * p.mu * dtau * np.exp(-p.mu * tau) * p.g.lo))
    s = sufficient_conditions(p, 0)
    assert s.fold_gamma_max == pytest.approx(scan, rel=1e-6)


def test_fold_bound_absent_when_slope_cannot_fold():
    p = bistable_gup(n=1.0)  # fold needs n > 1
    assert sufficient_conditions(p, 0).fold_gamma_max is None
    q = bubble_gdown()  # decreasing g with constant v never folds
    assert sufficient_conditions(q, 0).fold_gamma_max is None


# --- parameter container -----------------------------------------------------

def test_params_validation():
    with pytest.raises(ValueError):
        Nonlinearity(-1.0, 0.5, 1.0, 2.0)
    with pytest.raises(ValueError):
        Nonlinearity(1.0, 0.5, -1.0, 2.0)
    with pytest.raises(ValueError):
        Nonlinearity(1.0, 0.5, 1.0, 0.0)
    with pytest.raises(ValueError):
        ModelParams(beta=-1.0, mu=0.2, gamma=1.0, a=1.0,
                    g=Nonlinearity(1.0, 0.5, 1.0, 2.0),
                    v=Nonlinearity(2.0, 2.0, 1.0, 1.0))


def test_params_json_round_trip():
    p = opposing_mild()
    q = ModelParams.from_json_dict(p.to_json_dict())
    assert q == p
    step = ModelParams(beta=1.0, mu=0.1, gamma=1.0, a=1.0,
                       g=Nonlinearity(1.0, 0.5, 1.0, INFINITY),
                       v=Nonlinearity(2.0, 2.0, 1.0, 1.0))
    r = ModelParams.from_json_dict(step.to_json_dict())
    assert r.g.exponent == INFINITY
    assert r == step


def test_params_delay_bracket():
    rng = rng_for("tau-bracket")
    for _ in range(30):
        gdir, vdir = random_direction_pair(rng)
        p = random_params(rng, gdir, vdir)
        x = np.linspace(1e-6, 10.0, 200)
        tau = steady_delay(p, x)
        assert np.all(tau >= p.tau_min - 1e-12)
        assert np.all(tau <= p.tau_max + 1e-12)
