import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import erf

from wavecrest.birth import Nicholson, landmarks
from wavecrest.criteria import (
    SPEED_CLASSES,
    D_func,
    optimal_sstar,
    plateau_bound,
    reduce_advection,
    speed_classification,
    speed_from_eps,
    wavefront_certificate,
    xi,
)
from wavecrest.kernels import Dirac, Gaussian, Uniform
from wavecrest.problem import ProblemSpec
from wavecrest.spectral import speeds
from wavecrest.waveform import analyze_wave

LN9 = math.log(9.0)


def xi_naive(eps, u):
    """Printed form, with the roots from the textbook quadratic formula."""
    d = math.sqrt(1 + 4 * eps)
    lam, mu = (1 - d) / (2 * eps), (1 + d) / (2 * eps)
    return (mu - lam) / (mu * math.exp(-lam * u) - lam * math.exp(-mu * u))


def test_xi_at_zero_is_one():
    for eps in (0.01, 1.0, 30.0):
        assert xi(eps, 0.0) == pytest.approx(1.0, abs=1e-15)


def test_xi_unit_values():
    v = xi(1.0, 1.0)
    assert v == pytest.approx(xi_naive(1.0, 1.0), rel=1e-14)
    assert v == pytest.approx(0.7157, abs=1e-4)
    assert math.exp(-1) <= v < 1


def test_xi_far_decay():
    assert 0 < xi(1.0, 1e3) < 1e-10
    assert xi(1.0, math.inf) == 0.0


def test_xi_negative_argument_rejected():
    with pytest.raises(ValueError):
        xi(1.0, -0.1)


@pytest.mark.parametrize("eps", [0.05, 0.2, 1.0, 5.0])
def test_xi_bounds_and_monotone(eps):
    u = np.linspace(1e-3, 20, 2000)
    v = np.array([xi(eps, x) for x in u])
    assert np.all(v < 1)
    assert np.all(v >= np.exp(-u) * (1 - 1e-12))
    assert np.all(np.diff(v) < 0)


def test_D_at_zero():
    spec = ProblemSpec(Gaussian(0.2), Nicholson(9.0), 1.0, eps=0.3725)
    assert D_func(spec, 0.0) == 0.0


def test_D_dirac_equals_xi_beyond_delay():
    spec = ProblemSpec(Dirac(), Nicholson(9.0), 1.0, eps=0.5)
    for s in (-1.5, -3.0, -10.0):
        assert D_func(spec, s) == xi(0.5, -s)


def test_D_gaussian_composition():
    eps, h, s = 0.3725, 1.0, -2.0
    spec = ProblemSpec(Gaussian(0.2), Nicholson(9.0), h, eps=eps)
    r = math.sqrt(eps)
    # N(0, 2 alpha) mass on [-h/r, -(s+h)/r]
    sd = math.sqrt(0.4)
    mass = 0.5 * (erf(-(s + h) / r / (sd * math.sqrt(2))) - erf(-h / r / (sd * math.sqrt(2))))
    assert D_func(spec, s) == pytest.approx(min(mass, xi_naive(eps, 2.0)), rel=1e-12)


def test_D_rejects_positive_s():
    spec = ProblemSpec(Dirac(), Nicholson(9.0), 1.0, eps=0.5)
    with pytest.raises(ValueError):
        D_func(spec, 0.5)


def test_optimal_sstar_dirac_jump():
    h = 1.0
    spec = ProblemSpec(Dirac(), Nicholson(9.0), h, eps=0.5)
    s, d = optimal_sstar(spec)
    assert s == pytest.approx(-h, abs=1e-12)
    assert d == pytest.approx(xi(0.5, h), rel=1e-12)


def test_optimal_sstar_gaussian_crossing():
    spec = ProblemSpec(Gaussian(0.2), Nicholson(9.0), 1.0, eps=0.3725)
    s, d = optimal_sstar(spec)
    r = math.sqrt(spec.eps)
    mass = spec.kernel.partial_mass(-1.0 / r, -(s + 1.0) / r)
    assert abs(mass - xi(spec.eps, -s)) < 1e-10
    assert d == pytest.approx(min(mass, xi(spec.eps, -s)))


def test_optimal_sstar_without_mass():
    # no kernel mass on the side the integral reaches when h = 0
    spec = ProblemSpec(Dirac(-1.0), Nicholson(2.0), 0.0, eps=0.5)
    assert optimal_sstar(spec) == (-math.inf, 0.0)


@pytest.mark.parametrize(
    "kernel, h, eps",
    [(Gaussian(0.2), 1.0, 0.3725), (Gaussian(1.0, -0.5), 2.0, 1.3), (Uniform(1.0), 0.5, 0.2)],
)
def test_optimal_sstar_maximises_D(kernel, h, eps):
    spec = ProblemSpec(kernel, Nicholson(9.0), h, eps=eps)
    _, best = optimal_sstar(spec)
    for s in -np.geomspace(1e-4, 1e3, 400):
        d = D_func(spec, s)
        assert 0.0 <= d <= 1.0
        assert d <= best + 1e-10


def test_blowflies_certificate(blowflies, blowflies_speeds):
    spec = blowflies.with_eps(blowflies_speeds.eps0)
    cert = wavefront_certificate(spec, blowflies_speeds)
    assert cert.wavefront_certified and cert.semi_wavefront_exists
    d = cert.details
    assert d["mainex2"]["inputs"]["value"] == pytest.approx((1 - math.exp(-1)) * (1 - LN9), abs=1e-6)
    assert d["mainex2"]["inputs"]["value"] == pytest.approx(-0.7567, abs=1e-4)
    assert d["schwarzian_negative"]["holds"] and d["second_iterate"]["holds"]
    assert d["Dc"]["holds"]
    assert cert.oscillatory_predicted


def test_monotone_certificate():
    spec = ProblemSpec(Dirac(), Nicholson(2.0), 1.0)
    rep = speeds(1.0, Dirac(), spec.g)
    cert = wavefront_certificate(spec.with_speed(1.05 * rep.c_star), rep)
    assert cert.wavefront_certified
    assert cert.details["Dc"]["holds"]
    assert not cert.oscillatory_predicted


def test_long_delay_not_certified():
    spec = ProblemSpec(Gaussian(0.2), Nicholson(9.0), 10.0, eps=8.65)
    cert = wavefront_certificate(spec)
    assert not cert.wavefront_certified
    assert not cert.details["Dc"]["holds"]
    assert not cert.details["interval_map"]["holds"]
    assert cert.details["Dc"]["inputs"]["value"] < -1


def test_classification_below_threshold(blowflies):
    spec = reduce_advection(5.0, 0.0, 1.0, 3.0, blowflies.g)
    cls = speed_classification(spec)
    assert cls["no_semi_wavefront"] and not cls["semi_wavefront_exists"]
    assert cls["speed_class"] != "admissible"
    assert cls["persistent"]  # c_sharp = 0 for a symmetric kernel


def test_classification_at_threshold_exists(blowflies, blowflies_speeds):
    spec = blowflies.with_speed(blowflies_speeds.c_tilde_star)
    assert speed_classification(spec, blowflies_speeds)["semi_wavefront_exists"]


def test_classification_monotone_in_c():
    spec = ProblemSpec(Dirac(-5.0), Nicholson(2.0), 0.0)
    rep = speeds(0.0, spec.kernel, spec.g)
    assert 0 < rep.c_sharp < rep.c_star
    order = [
        SPEED_CLASSES.index(speed_classification(spec.with_speed(c), rep)["speed_class"])
        for c in np.linspace(0.05, 2 * rep.c_star, 200)
    ]
    assert order == sorted(order)
    assert set(order) == {0, 1, 3}


@settings(max_examples=15, deadline=None)
@given(st.floats(0.5, 3.0), st.floats(2.0, 15.0))
def test_certified_implies_semi_wavefront(c_factor, p):
    spec = ProblemSpec(Gaussian(0.2), Nicholson(p), 1.0)
    rep = speeds(1.0, spec.kernel, spec.g)
    cert = wavefront_certificate(spec.with_speed(c_factor * rep.c_star), rep)
    assert not cert.wavefront_certified or cert.semi_wavefront_exists


def test_certified_converged_profile_settles_at_kappa(oscillating_solve):
    spec, res, lm = oscillating_solve
    assert wavefront_certificate(spec).wavefront_certified and res.converged
    wave = analyze_wave(res.profile, lm, spec.g)
    assert abs(wave.liminf_estimate - lm.kappa) <= 0.05 * lm.kappa
    assert abs(wave.limsup_estimate - lm.kappa) <= 0.05 * lm.kappa


def test_reduce_advection_threshold(blowflies_speeds):
    spec = reduce_advection(5.0, 0.0, 1.0, 3.6637, Nicholson(9.0))
    assert spec.eps == 5.0 / 3.6637**2
    assert spec.eps == pytest.approx(blowflies_speeds.eps0, abs=1e-4)
    assert spec.kernel == Gaussian(0.2)


def test_reduce_advection_identity_scaling_and_roundtrip():
    for c in (0.5, 2.0, 7.0):
        assert reduce_advection(1.0, 0.0, 1.0, c, Nicholson(9.0)).eps == pytest.approx(1 / c**2, rel=1e-15)
    spec = reduce_advection(3.0, 1.5, 1.0, 4.2, Nicholson(9.0))
    assert speed_from_eps(3.0, 1.5, spec.eps) == pytest.approx(4.2, abs=1e-12)
    with pytest.raises(ValueError):
        reduce_advection(3.0, 1.5, 1.0, 1.0, Nicholson(9.0))


def test_plateau_bound_dirac_is_delay():
    spec = ProblemSpec(Dirac(), Nicholson(9.0), 1.3, eps=0.5)
    assert plateau_bound(spec, 4.0) == pytest.approx(1.3, abs=1e-9)


def test_plateau_bound_gaussian_target():
    g = Nicholson(9.0)
    lm = landmarks(g)
    target = (lm.zeta2 - lm.kappa) / (lm.zeta2 - g(4.0))
    assert g(4.0) == pytest.approx(36 * math.exp(-4))
    assert target == pytest.approx(0.4201, abs=1e-4)
    spec = ProblemSpec(Gaussian(0.2), g, 1.0, eps=0.3725)
    q = plateau_bound(spec, 4.0)
    r = math.sqrt(spec.eps)
    sd = math.sqrt(0.4) * math.sqrt(2)
    mass = 0.5 * (erf((q - 1) / r / sd) - erf(-(q + 1) / r / sd))
    assert mass == pytest.approx(target, abs=1e-9)


def test_plateau_bound_guards():
    spec = ProblemSpec(Gaussian(0.2), Nicholson(9.0), 1.0, eps=0.3725)
    low = ProblemSpec(Gaussian(0.2), Nicholson(2.0), 1.0, eps=0.3725)
    assert Nicholson(2.0)(0.9) > math.log(2.0)
    assert plateau_bound(low, 0.9) == math.inf
    with pytest.raises(ValueError):
        plateau_bound(spec, 2.0)
