import math

import numpy as np
import pytest

from conftest import interior_points, vertex_id
from muentropy.convexfn import (
    AffineFn, CellwiseAffine, PiecewiseAffineConvex, SmoothedConvex, constant, linear_from_vector,
    mixture, normalize, tight_envelope, truncation_plane, vertex_truncate,
)
from muentropy.exceptions import SlopeCondition
from muentropy.polytope import box
from muentropy.quadrature import CellDecomposition

E = math.e


def test_affine_and_pa_evaluation():
    ell = AffineFn([1.0, -2.0], 0.5)
    assert ell(np.array([[1.0, 1.0]]))[0] == pytest.approx(-0.5)
    q = PiecewiseAffineConvex.from_pieces([ell, AffineFn([0, 0], 0)])
    assert q(np.array([[1.0, 1.0], [1.0, -1.0]])) == pytest.approx([0.0, 3.5])
    with pytest.raises(ValueError):
        AffineFn([np.nan, 0.0])
    with pytest.raises(ValueError):
        PiecewiseAffineConvex(np.zeros((0, 2)), [])


def test_json_round_trip():
    q = PiecewiseAffineConvex([[1, 2], [3, -4]], [0.5, -1])
    d = q.to_dict()
    assert set(d) == {"pieces"} and d["pieces"][1] == {"gradient": [3.0, -4.0], "constant": -1.0}
    q2 = PiecewiseAffineConvex.from_dict(d)
    assert np.array_equal(q2.gradients, q.gradients) and np.array_equal(q2.constants, q.constants)


def test_linear_from_vector(bl, usq):
    assert linear_from_vector([0, 0])(np.array([[3.0, 4.0]]))[0] == 0.0
    eta = linear_from_vector([1, 1])
    assert eta(bl.polytope.vertices) == pytest.approx([1, -1, 1, -1][:0] or
                                                      bl.polytope.vertices.sum(axis=1))
    x = linear_from_vector([1, 0])
    assert x(np.array([[0.3, 0.9]]))[0] == pytest.approx(0.3)


def test_smoothed_bounds(rng):
    base = PiecewiseAffineConvex(rng.normal(size=(5, 2)), rng.normal(size=5))
    X = rng.uniform(-1, 1, size=(200, 2))
    for beta in (1.0, 10.0, 100.0):
        s = SmoothedConvex(base, beta)(X)
        assert np.all(s >= base(X) - 1e-12)
        assert np.all(s <= base(X) + math.log(5) / beta + 1e-12)
    with pytest.raises(ValueError):
        SmoothedConvex(base, 0.0)


def test_cellwise_affine_combination(bl):
    q = PiecewiseAffineConvex([[1, 0], [0, 1]], [0, 0])
    p = linear_from_vector([1, 1])
    c = p - 0.5 * q
    X = np.array([[0.2, -0.4], [1.0, 0.5]])
    assert c(X) == pytest.approx(p(X) - 0.5 * q(X))
    with pytest.raises(ValueError):
        c.to_pa()
    s = (p + 2 * q).to_pa()
    assert s(X) == pytest.approx(p(X) + 2 * q(X))


def test_normalize_examples(bl):
    for q in (constant(0.0, 2), constant(3.7, 2)):
        u = normalize(bl, q)
        assert u(interior_points(bl, np.random.default_rng(0), 5)) == pytest.approx(np.ones(5))
    seg = box([0], [1])
    u = normalize(seg, linear_from_vector([1.0]))
    x = np.linspace(0, 1, 7)[:, None]
    assert u(x) == pytest.approx(np.exp(x[:, 0]) / (E - 1), rel=1e-13)


def test_normalization_mass(bl, rng):
    for _ in range(5):
        q = PiecewiseAffineConvex(rng.normal(0, 2, (4, 2)), rng.normal(size=4))
        u = normalize(bl, q)
        mass = CellDecomposition(bl, [q]).integrate(u, order=12)
        assert mass == pytest.approx(bl.volume, rel=1e-8)


def test_mixture_examples():
    seg = box([0], [1])
    u0 = normalize(seg, constant(0.0, 1))
    u1 = normalize(seg, linear_from_vector([1.0]))
    assert mixture(u0, u1, 0.0) is u0 and mixture(u0, u1, 1.0) is u1
    m = mixture(u0, u1, 0.5)
    x = np.linspace(0, 1, 5)[:, None]
    assert m(x) == pytest.approx((1 + np.exp(x[:, 0]) / (E - 1)) / 2, rel=1e-13)
    assert m.integrate(lambda p, v: v) == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(ValueError):
        mixture(u0, u1, 1.5)


def test_tight_envelope_affine_and_1d(bl):
    ell = PiecewiseAffineConvex([[0.5, -1.0]], [0.25])
    env = tight_envelope(bl, ell)
    X = interior_points(bl, np.random.default_rng(1), 50)
    assert env(X) == pytest.approx(ell(X), abs=1e-9)
    # on a segment the envelope of boundary values is the chord
    seg = box([0], [1])
    env = tight_envelope(seg, PiecewiseAffineConvex([[0.0], [2.0]], [0.0, -1.0]))
    x = np.linspace(0, 1, 11)[:, None]
    assert env(x) == pytest.approx(x[:, 0], abs=1e-12)


def test_tight_envelope_dominates_and_matches_on_boundary(bl, rng):
    q = PiecewiseAffineConvex(rng.normal(0, 2, (4, 2)), rng.normal(size=4))
    env = tight_envelope(bl, q)
    X = interior_points(bl, rng, 200)
    assert np.all(env(X) >= q(X) - 1e-9)
    from muentropy.convexfn import boundary_samples
    B = boundary_samples(bl, q)
    assert env(B) == pytest.approx(q(B), abs=1e-9)


def test_tight_envelope_rejects_non_pa(bl):
    with pytest.raises(TypeError):
        tight_envelope(bl, lambda x: x[:, 0] ** 2)


def _peak(bl):
    # 0 away from the vertex (0,-1), rising steeply to 10 there
    return PiecewiseAffineConvex([[0, 0], [-10, -20]], [0, -10])


def test_vertex_truncate_worked_example(bl):
    q = _peak(bl)
    v = vertex_id(bl, [0, -1])
    ell, p0, p1 = truncation_plane(bl, q, v, 5.0)
    assert {tuple(np.round(p0, 12) + 0.0), tuple(np.round(p1, 12) + 0.0)} == {(1.0, -1.0), (-1.0, 0.0)}
    assert ell.gradient == pytest.approx((-5.0, -10.0)) and ell.constant == pytest.approx(-5.0)
    r = vertex_truncate(bl, q, v, 5.0)
    assert r(np.array([[0.0, -1.0]]))[0] == pytest.approx(5.0)
    X = interior_points(bl, np.random.default_rng(2), 2000)
    assert np.all(r(X) <= q(X) + 1e-12)
    # equals max(0, s / 2) with s the steep piece
    assert r(X) == pytest.approx(np.maximum(0.0, q(X) / 2), abs=1e-12)
    # outside the triangle (v, p0, p1) nothing changes
    tri = np.array([[0.0, -1.0], p0, p1])
    outside = ~_in_triangle(X, tri)
    assert r(X[outside]) == pytest.approx(q(X[outside]), abs=1e-12)


def _in_triangle(X, tri):
    a, b, c = tri
    M = np.column_stack([b - a, c - a])
    lam = np.linalg.solve(M, (X - a).T).T
    return (lam[:, 0] >= -1e-12) & (lam[:, 1] >= -1e-12) & (lam.sum(axis=1) <= 1 + 1e-12)


def test_vertex_truncate_trivial_and_errors(bl):
    q = _peak(bl)
    v = vertex_id(bl, [0, -1])
    assert vertex_truncate(bl, q, v, 10.0) is q
    with pytest.raises(SlopeCondition):
        vertex_truncate(bl, linear_from_vector([1, 1]), vertex_id(bl, [2, -1]), -5.0)
    with pytest.raises(ValueError):
        vertex_truncate(box([0], [1]), linear_from_vector([1.0]), 0, -1.0)


def test_negative_scale_rejected():
    with pytest.raises(ValueError):
        linear_from_vector([1.0]).scale(-1.0)
    assert isinstance(-linear_from_vector([1.0]), CellwiseAffine)
