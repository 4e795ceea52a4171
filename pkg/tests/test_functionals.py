import math

import numpy as np
import pytest

import oracles
from conftest import interior_points
from muentropy import functionals as fn
from muentropy.convexfn import PiecewiseAffineConvex, constant, linear_from_vector, mixture, normalize
from muentropy.estimates import random_pa
from muentropy.polytope import box

ETA = linear_from_vector([1.0, 1.0])


def test_temperature_conversion():
    assert fn.temperature(0.0) == 0.0 and math.copysign(1, fn.temperature(0.0)) == 1
    assert fn.temperature(-2 * math.pi) == pytest.approx(1.0)
    assert fn.lam_from_temperature(1.0) == pytest.approx(-2 * math.pi)
    for T in (0.0, 0.3, 7.0):
        assert fn.temperature(fn.lam_from_temperature(T)) == pytest.approx(T)


def test_reference_values_at_eta(bl):
    assert fn.internal_energy(bl, normalize(bl, ETA)) == pytest.approx(oracles.U_ETA, rel=1e-12)
    assert fn.sigma(bl, ETA) == pytest.approx(oracles.SIGMA_ETA, rel=1e-12)
    assert fn.na_mu(bl, ETA) == pytest.approx(oracles.NA_MU_ETA, rel=1e-12)
    assert fn.donaldson_futaki(bl, ETA) == pytest.approx(oracles.DF_ETA, rel=1e-10)


def test_reference_values_at_zero(bl):
    zero = constant(0.0, 2)
    assert fn.sigma(bl, zero) == pytest.approx(oracles.SIGMA_ZERO, rel=1e-13)
    assert fn.entropy(bl, normalize(bl, zero)) == pytest.approx(0.0, abs=1e-13)
    assert fn.log_exp_minus_n(bl) == pytest.approx(-2 + math.log(4))


@pytest.mark.parametrize("x", [-1.7, -0.4, 0.3, 1.1])
def test_diagonal_sigma_and_na_mu(bl, x):
    q = linear_from_vector([x, x])
    assert fn.na_mu(bl, q) == pytest.approx(float(oracles.bl_na_mu(x)), rel=1e-11)
    assert fn.sigma(bl, q) == pytest.approx(float(oracles.bl_sigma(x)), rel=1e-11)


def test_segment_entropy():
    seg = box([0], [1])
    u = normalize(seg, linear_from_vector([1.0]))
    assert fn.entropy(seg, u) == pytest.approx(oracles.segment01_entropy(), rel=1e-12)


def test_identities(bl, rng):
    for _ in range(5):
        q = random_pa(bl, rng)
        r = fn.report(bl, q, T=0.7)
        assert r.sigma == pytest.approx(-r.S - fn.log_exp_minus_n(bl), rel=1e-12, abs=1e-12)
        assert r.F == pytest.approx(r.U - r.T * r.S, rel=1e-12)
        lam = fn.lam_from_temperature(0.7)
        assert r.na_mu == pytest.approx(-2 * math.pi * r.U, rel=1e-12)
        assert r.na_mu_lambda == pytest.approx(r.na_mu + lam * r.sigma, rel=1e-12)
        assert r.na_mu_lambda == pytest.approx(-2 * math.pi * (r.F - 0.7 * fn.log_exp_minus_n(bl)),
                                               rel=1e-12)


def test_gauge_invariance(bl, rng):
    q = random_pa(bl, rng)
    a, b = fn.report(bl, q, T=1.3), fn.report(bl, q.shift(4.25), T=1.3)
    for k in ("S", "U", "F", "sigma", "na_mu"):
        assert getattr(a, k) == pytest.approx(getattr(b, k), abs=1e-12)


def test_state_report_mixture_affine_in_U(bl, rng):
    u0 = normalize(bl, random_pa(bl, rng))
    u1 = normalize(bl, random_pa(bl, rng))
    U0, U1 = fn.internal_energy(bl, u0), fn.internal_energy(bl, u1)
    for t in (0.2, 0.5, 0.9):
        assert fn.internal_energy(bl, mixture(u0, u1, t)) == pytest.approx((1 - t) * U0 + t * U1,
                                                                           rel=1e-10)
        # entropy is concave along mixtures
        S0, S1 = fn.entropy(bl, u0), fn.entropy(bl, u1)
        assert fn.entropy(bl, mixture(u0, u1, t)) >= (1 - t) * S0 + t * S1 - 1e-10


def test_futaki_basic(bl, sq):
    assert fn.donaldson_futaki(sq, linear_from_vector([1.0, 0.0])) == pytest.approx(0.0, abs=1e-13)
    for lam in (0.0, -2.0):
        assert fn.futaki(bl, lam, [0.3, -0.1], constant(2.0, 2)) == pytest.approx(0.0, abs=1e-12)
    # linearity in q over convex combinations
    p = PiecewiseAffineConvex([[1, 0], [0, 1]], [0, 0])
    a = fn.futaki(bl, -1.0, [0.2, 0.2], p)
    b = fn.futaki(bl, -1.0, [0.2, 0.2], ETA)
    assert fn.futaki(bl, -1.0, [0.2, 0.2], p + 2 * ETA) == pytest.approx(a + 2 * b, rel=1e-12)


def test_futaki_matches_finite_difference(bl, rng):
    for _ in range(4):
        xi = rng.normal(0, 0.5, 2)
        q = random_pa(bl, rng)
        assert fn.fut_exp_identity_check(bl, xi, q) <= 1e-5 * max(1.0, abs(fn.futaki(bl, 0.0, xi, q)))


def test_report_parameters(bl):
    with pytest.raises(ValueError):
        fn.report(bl, ETA, T=1.0, lam=-1.0)
    r = fn.report(bl, ETA, lam=-2 * math.pi)
    assert r.T == pytest.approx(1.0)
    assert list(r.to_dict()) == list(fn.REPORT_COLUMNS)
    assert len(r.row()) == len(fn.REPORT_COLUMNS)


def test_smoothed_state_close_to_pa(bl, rng):
    from muentropy.convexfn import SmoothedConvex
    q = random_pa(bl, rng)
    u_pa = normalize(bl, q)
    u_sm = normalize(bl, SmoothedConvex(q, 1e4))
    assert fn.internal_energy(bl, u_sm) == pytest.approx(fn.internal_energy(bl, u_pa), rel=1e-3)
    X = interior_points(bl, rng, 10)
    assert np.all(np.isfinite(u_sm(X)))
