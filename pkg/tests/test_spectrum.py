"""Characteristic-function and root-counting tests.

The argument-principle winding count is the independent oracle for Newton's
root set: any root the sweep misses shows up as a count mismatch on a sub-box.
"""

import math

import numpy as np
import pytest

from cases import (
    bubble_gdown,
    const_nl,
    random_direction_pair,
    random_nl,
    random_params,
    rng_for,
    twin_down,
    vup_rich,
)
from tddebif.errors import ContourError
from tddebif.model import ModelParams, Nonlinearity, fold_discriminant, gamma_of_xi
from tddebif.spectrum import (
    _e_ratio,
    _winding_number,
    char_deriv,
    char_eval,
    find_roots,
    make_context,
    real_roots_right_of,
    unstable_count,
)
from tddebif.steady import find_steady_states, state_at


def _contexts(params, limit=3):
    states = find_steady_states(params)
    return [make_context(params, s) for s in states[:limit]]


def test_constant_nonlinearities_single_root():
    params = ModelParams(beta=2.0, mu=0.3, gamma=0.8, a=1.5,
                         g=const_nl(1.0, 1.0), v=const_nl(2.0, 1.0))
    (ctx,) = _contexts(params)
    assert ctx.A == 0.0 and ctx.Q == 0.0
    report = find_roots(ctx, box=(-3.0, 2.0, 10.0))
    assert len(report.roots) == 1
    root = report.roots[0]
    assert abs(root - (-0.8)) < 1e-12
    assert report.unstable_count == 0
    assert report.rightmost == root
    assert unstable_count(ctx) == 0


def test_conjugate_symmetry_and_value_at_zero():
    # identity suite: D(conj l) = conj D(l) and D(0) = -gamma*M, 200 draws
    rng = rng_for("spectrum-identities")
    for _ in range(200):
        gdir, vdir = random_direction_pair(rng)
        params = random_params(rng, gdir, vdir)
        for ctx in _contexts(params, limit=2):
            at_zero = char_eval(ctx, 0.0)
            want = -ctx.gamma * ctx.state.M
            assert abs(at_zero.imag) <= 1e-10 * (1.0 + abs(want))
            assert abs(at_zero.real - want) <= 1e-10 * (1.0 + abs(want))
            for _ in range(2):
                lam = complex(rng.uniform(-3.0, 3.0), rng.uniform(0.0, 30.0))
                left = char_eval(ctx, lam.conjugate())
                right = char_eval(ctx, lam).conjugate()
                assert abs(left - right) <= 1e-10 * (1.0 + abs(right))


def test_derivative_matches_finite_difference():
    rng = rng_for("spectrum-deriv")
    for _ in range(30):
        gdir, vdir = random_direction_pair(rng)
        params = random_params(rng, gdir, vdir, p_lo=1.0, p_hi=20.0)
        for ctx in _contexts(params, limit=1):
            lam = complex(rng.uniform(-1.0, 1.0), rng.uniform(0.0, 5.0))
            h = 1e-6 * (1.0 + abs(lam))
            fd = (char_eval(ctx, lam + h) - char_eval(ctx, lam - h)) / (2.0 * h)
            an = char_deriv(ctx, lam)
            assert abs(an - fd) <= 1e-6 * (1.0 + abs(an))


def test_e_ratio_series_matches_long_expansion_at_cut():
    # independent oracle: 13-term alternating series, exact to ~1e-60 at |z|=1e-4
    for radius in (0.99e-4, 1.01e-4):
        for k in range(8):
            z = radius * np.exp(1j * (0.25 + k * math.pi / 4.0))
            term = complex(1.0)
            acc = complex(0.0)
            for j in range(13):
                acc += term / math.factorial(j + 1)
                term *= -z
            got = _e_ratio(np.array([z]))[0]
            assert abs(got - acc) <= 5e-12 * abs(acc)


def test_bubble_onset_count_is_two():
    (ctx,) = _contexts(bubble_gdown(50, 1.0))
    assert unstable_count(ctx) == 2


def test_newton_roots_match_winding_on_subboxes():
    rng = rng_for("spectrum-subbox")
    for params in (bubble_gdown(50, 1.0), twin_down(200, 1.3), vup_rich(50, 1.0)):
        for ctx in _contexts(params, limit=1):
            im_hi = 12.0 * math.pi / ctx.tau
            re_hi = ctx.gamma + abs(ctx.A) + abs(ctx.Q) + 1.0
            report = find_roots(ctx, box=(-1.5, re_hi, im_hi))
            assert report.roots, "expected roots in the default box"
            roots = np.array(report.roots)
            checked = 0
            while checked < 6:
                lo = rng.uniform(-1.4, 0.5 * re_hi)
                hi = rng.uniform(lo + 0.3, 0.95 * re_hi)
                top = rng.uniform(0.5, 0.9 * im_hi)
                edge_gap = np.minimum.reduce([
                    np.abs(roots.real - lo), np.abs(roots.real - hi),
                    np.abs(np.abs(roots.imag) - top)])
                if np.min(edge_gap) < 0.05:
                    continue
                inside = ((roots.real > lo) & (roots.real < hi)
                          & (roots.imag < top))
                expected = int(np.sum(np.where(roots[inside].imag > 0, 2, 1)))
                assert _winding_number(ctx, (lo, hi, -top, top)) == expected
                checked += 1


def test_fold_point_count_excludes_origin_root():
    params = vup_rich(50, 1.0)
    lo, hi = 0.2, 1.0
    assert fold_discriminant(params, lo) * fold_discriminant(params, hi) < 0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if fold_discriminant(params, lo) * fold_discriminant(params, mid) <= 0:
            hi = mid
        else:
            lo = mid
    xi_fold = 0.5 * (lo + hi)
    state = state_at(params, xi_fold)
    at_fold = params.with_gamma(state.gamma)
    assert abs(state.M) < 1e-9
    ctx = make_context(at_fold, state)
    assert abs(char_eval(ctx, 0.0)) < 1e-9
    count = unstable_count(ctx)
    report = find_roots(ctx, box=(-0.5, ctx.gamma + abs(ctx.A) + abs(ctx.Q) + 1.0,
                                  40.0 * math.pi / ctx.tau))
    eps = 1e-6 * (1.0 + ctx.gamma + abs(ctx.A) + abs(ctx.Q))
    strictly_right = [z for z in report.roots if z.real > eps]
    assert count == sum(2 if z.imag > 0 else 1 for z in strictly_right)


def test_stable_when_log_slope_below_one_constant_v():
    # constant delay, |xi g'/g| < 1 everywhere: no fold, no Hopf window
    rng = rng_for("spectrum-mild-slope")
    for _ in range(50):
        direction = "down" if rng.uniform() < 0.5 else "up"
        g = random_nl(rng, direction, p_lo=1.0, p_hi=2.0)
        root_ratio = math.sqrt(min(g.lo, g.hi) / max(g.lo, g.hi))
        assert g.exponent * (1.0 - root_ratio) / (1.0 + root_ratio) < 1.0
        params = ModelParams(
            beta=float(rng.uniform(0.5, 5.0)), mu=float(rng.uniform(0.02, 1.0)),
            gamma=float(rng.uniform(0.1, 3.0)), a=float(rng.uniform(0.3, 3.0)),
            g=g, v=random_nl(rng, "const"))
        states = find_steady_states(params)
        assert len(states) == 1
        assert unstable_count(make_context(params, states[0])) == 0


def test_stable_when_decay_exceeds_dilution_constant_g():
    # v decreasing and gamma > mu: no fold (M < -1) and the Hopf phase
    # condition has no solution
    rng = rng_for("spectrum-gconst-stable")
    for _ in range(50):
        mu = float(rng.uniform(0.05, 1.0))
        params = ModelParams(
            beta=float(rng.uniform(0.5, 5.0)), mu=mu,
            gamma=mu * float(rng.uniform(1.01, 8.0)),
            a=float(rng.uniform(0.3, 3.0)),
            g=random_nl(rng, "const"), v=random_nl(rng, "down"))
        states = find_steady_states(params)
        assert len(states) == 1
        assert unstable_count(make_context(params, states[0])) == 0


def test_contour_through_root_raises():
    params = ModelParams(beta=2.0, mu=0.3, gamma=1.0, a=1.5,
                         g=const_nl(1.0, 1.0), v=const_nl(2.0, 1.0))
    (ctx,) = _contexts(params)
    with pytest.raises(ContourError):
        _winding_number(ctx, (-1.0, 1.0, -1.0, 1.0))


def test_winding_sharp_near_edge():
    params = ModelParams(beta=2.0, mu=0.3, gamma=1.0, a=1.5,
                         g=const_nl(1.0, 1.0), v=const_nl(2.0, 1.0))
    (ctx,) = _contexts(params)
    assert _winding_number(ctx, (-1.0 - 1e-6, 1.0, -1.0, 1.0)) == 1
    assert _winding_number(ctx, (-1.0 + 1e-6, 1.0, -1.0, 1.0)) == 0


def test_real_root_scan_finds_fold_zero():
    params = vup_rich(50, 1.0)
    states = find_steady_states(params)
    assert len(states) == 3
    middle = states[1]
    ctx = make_context(params, middle)
    assert middle.M > 0.0
    roots = real_roots_right_of(ctx, ctx.gamma + abs(ctx.A) + abs(ctx.Q) + 1.0,
                                re_lo=1e-9)
    assert roots, "saddle branch should have a positive real root"
    assert all(abs(char_eval(ctx, complex(r))) < 1e-9 for r in roots)


def test_report_shape_and_json():
    (ctx,) = _contexts(bubble_gdown(50, 1.0))
    report = find_roots(ctx, box=(-2.0, 3.0, 25.0))
    assert all(z.imag >= 0.0 for z in report.roots)
    assert list(report.roots) == sorted(report.roots, key=lambda z: (z.real, z.imag))
    assert all(r < 1e-8 for r in report.residuals)
    payload = report.to_json_dict()
    assert payload["box"] == {"re": [-2.0, 3.0], "im": [0.0, 25.0]}
    assert payload["unstable_count"] == report.unstable_count
    assert len(payload["roots"]) == len(report.roots)
    for entry, z in zip(payload["roots"], report.roots):
        assert entry[0] == z.real and entry[1] == z.imag
