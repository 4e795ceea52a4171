import math

import numpy as np
import pytest

from conftest import interior_points
from muentropy import estimates as est
from muentropy.convexfn import PiecewiseAffineConvex, constant, linear_from_vector
from muentropy.exceptions import BoundaryPoint
from muentropy.polytope import box


def test_critical_exponent():
    assert est.critical_exponent(1) == math.inf
    assert est.critical_exponent(2) == 2.0
    assert est.critical_exponent(3) == 1.5


def test_pa_integrals(usq, bl):
    x = linear_from_vector([1.0, 0.0])
    assert est.pa_integral(usq, x) == pytest.approx(0.5)
    assert est.pa_integral(usq, x, power=2) == pytest.approx(1 / 3)
    assert est.pa_integral(usq, x, boundary=True) == pytest.approx(2.0)
    assert est.pa_integral(bl, constant(1.0, 2), boundary=True) == pytest.approx(bl.boundary_measure)
    assert est.lp_norm(usq, x, math.inf) == pytest.approx(1.0)


def test_pa_minimum(bl):
    q = PiecewiseAffineConvex([[1, 0], [0, 1]], [0, 0])
    assert est.pa_minimum(bl, q) == pytest.approx(-0.5)


def test_delta_P_values(sq, bl):
    assert est.delta_P(sq, [0, 0]) == pytest.approx(sq.volume / 2, rel=1e-12)
    assert est.delta_P(box([0], [1]), [0.25]) == pytest.approx(0.25)
    assert est.delta_P(bl, bl.polytope.centroid) == pytest.approx(1.5, rel=1e-2)
    with pytest.raises(BoundaryPoint):
        est.delta_P(sq, [1.0, 0.0])


def test_delta_P_bounded_by_half_volume(bl, rng):
    for x in interior_points(bl, rng, 20, margin=0.05):
        d = est.delta_P(bl, x)
        assert 0 < d <= bl.volume / 2 + 1e-12


def test_halfplane_areas_match_clipped_polygon(bl, rng):
    from muentropy.polytope import HalfSpace, from_halfspaces
    x = interior_points(bl, rng, 1, margin=0.1)[0]
    dirs = est._sphere_directions(2, 12)
    fast = est._halfplane_areas(est._ccw(bl.polytope.vertices), x, dirs)
    slow = [from_halfspaces(list(bl.polytope.halfspaces) + [HalfSpace(d, -d @ x)]).volume
            for d in dirs]
    assert fast == pytest.approx(slow, rel=1e-10)


def test_mean_value_inequality(bl, rng):
    for k in range(20):
        u = est.random_pa(bl, rng)
        x = interior_points(bl, rng, 1, margin=0.02)[0]
        lhs, rhs = est.mean_value_check(bl, u, x)
        assert lhs <= rhs * (1 + 1e-9)


def test_random_pa_nonnegative(bl, rng):
    for _ in range(10):
        u = est.random_pa(bl, rng)
        assert est.pa_minimum(bl, u) >= -1e-12


def test_poincare_probe(bl, seg):
    pr = est.poincare_probe(bl, trials=40, seed=3)
    assert pr.samples == 40 and np.all(np.isfinite(pr.ratios))
    assert pr.sup_ratio == pytest.approx(pr.ratios.max())
    assert est.poincare_ratio(bl, pr.witness, 2.0) == pytest.approx(pr.sup_ratio)
    # deterministic in the seed
    assert est.poincare_probe(bl, trials=40, seed=3).sup_ratio == pr.sup_ratio
    p1 = est.poincare_probe(seg, trials=20)
    assert np.isfinite(p1.sup_ratio)
    with pytest.raises(ValueError):
        est.poincare_probe(bl, exponent=3.0)


def test_rellich_probe_grows_toward_vertices(bl):
    v = np.array([2.0, -1.0])
    c = bl.polytope.centroid
    xs = [c + t * (v - c) for t in (0.0, 0.5, 0.9, 0.99)]
    m = est.rellich_majorant_probe(bl, xs, fn_samples=20)
    assert np.all(np.diff(m) > 0)
    assert m[0] >= 1.0 / bl.boundary_measure


def test_entropy_bound(bl):
    res = est.entropy_bound_check(bl, C_hat=0.35, trials=30)
    assert res.violations == res.binding
    assert len(res.margins) == 30


def test_l1_net_subsequence(usq):
    funcs = [constant(c, 2) for c in (0.0, 0.01, 0.5, 0.51, 0.52)]
    seq, D = est.l1_net_subsequence(usq, funcs, radii=[0.1, 0.015])
    assert D[0, 2] == pytest.approx(0.5)
    assert seq[0] == 2


def test_parallel_map_order(monkeypatch):
    monkeypatch.setenv("MUENTROPY_THREADS", "3")
    assert est.n_threads() == 3
    assert est.parallel_map(lambda k: k * k, range(10)) == [k * k for k in range(10)]
