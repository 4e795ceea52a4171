"""Empirical probes of mean-value, Poincare and Rellich type estimates for convex functions."""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .convexfn import PiecewiseAffineConvex, State, constant
from .exceptions import BoundaryPoint
from .polytope import HalfSpace, ToricSystem, from_halfspaces
from .quadrature import CellDecomposition

BOUNDARY_TOL = 1e-9


def n_threads():
    try:
        return max(1, int(os.environ.get("MUENTROPY_THREADS", "1")))
    except ValueError:
        return 1


def parallel_map(fn, items):
    """Ordered map, threaded when MUENTROPY_THREADS > 1."""
    k = n_threads()
    if k == 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=k) as ex:
        return list(ex.map(fn, items))


# -- random convex functions -----------------------------------------------


def pa_minimum(S: ToricSystem, q: PiecewiseAffineConvex) -> float:
    """``min_P q`` by linear programming."""
    n = S.dim
    A, b = S.polytope.A, S.polytope.b
    # min t  s.t.  g_i . x + c_i <= t,  A x + b >= 0
    A_ub = np.vstack([np.column_stack([q.gradients, -np.ones(q.n_pieces)]),
                      np.column_stack([-A, np.zeros(len(A))])])
    b_ub = np.concatenate([-q.constants, b])
    res = linprog(np.r_[np.zeros(n), 1.0], A_ub=A_ub, b_ub=b_ub,
                  bounds=[(None, None)] * (n + 1), method="highs")
    return float(res.fun)


def random_pa(S: ToricSystem, rng, max_pieces=8, scale=3.0) -> PiecewiseAffineConvex:
    """Random nonnegative PA convex function with minimum 0 on P."""
    m = int(rng.integers(1, max_pieces + 1))
    g = rng.normal(0.0, scale, size=(m, S.dim))
    c = rng.normal(0.0, scale, size=m)
    q = PiecewiseAffineConvex(g, c)
    return q.shift(-pa_minimum(S, q))


def _streams(seed, count):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]


# -- integrals of PA functions ---------------------------------------------


def pa_integral(S: ToricSystem, u, boundary=False, power=1.0, order=None):
    """``int u^power`` over P or its boundary for PA ``u >= 0``."""
    cd = CellDecomposition(S, [u])
    if order is None:
        order = int(math.ceil(power)) + 1 if float(power).is_integer() else 12
    if S.dim == 1 and boundary:
        pts = cd.bdry_simplices[:, 0, :]
        return float(cd.bdry_weights @ np.maximum(u(pts), 0.0) ** power)
    return cd.integrate(lambda x: np.maximum(u(x), 0.0) ** power, order, boundary)


def lp_norm(S: ToricSystem, u, exponent):
    if np.isinf(exponent):
        return float(np.max(u(S.polytope.vertices)))
    return pa_integral(S, u, power=exponent) ** (1.0 / exponent)


def critical_exponent(n):
    return math.inf if n == 1 else n / (n - 1)


# -- delta_P and the mean-value bound --------------------------------------


def _ccw(vertices):
    c = vertices.mean(axis=0)
    ang = np.arctan2(vertices[:, 1] - c[1], vertices[:, 0] - c[0])
    return vertices[np.argsort(ang)]


def _halfplane_areas(poly, x, dirs):
    """Area of ``poly ∩ {d . (y - x) >= 0}`` for every row ``d`` of ``dirs``.

    Fans ``poly`` from the interior point ``x``; each fan triangle has its apex
    on the cutting line, so its clipped part is the triangle over the kept
    subsegment of the opposite edge.
    """
    s = (poly - x) @ dirs.T  # (V, D)
    area = np.zeros(len(dirs))
    nv = len(poly)
    for i in range(nv):
        j = (i + 1) % nv
        a, b = poly[i] - x, poly[j] - x
        sa, sb = s[i], s[j]
        denom = np.where(sa != sb, sa - sb, 1.0)
        t = np.clip(sa / denom, 0.0, 1.0)
        c = a[None, :] + t[:, None] * (b - a)[None, :]
        p = np.where((sa >= 0)[:, None], a[None, :], c)
        r = np.where((sb >= 0)[:, None], b[None, :], c)
        tri = 0.5 * np.abs(p[:, 0] * r[:, 1] - p[:, 1] * r[:, 0])
        area += np.where((sa >= 0) | (sb >= 0), tri, 0.0)
    return area


def _sphere_directions(n, count):
    if n == 1:
        return np.array([[1.0], [-1.0]])
    if n == 2:
        th = 2 * np.pi * np.arange(count) / count
        return np.column_stack([np.cos(th), np.sin(th)])
    rng = np.random.default_rng(12345)
    d = rng.normal(size=(count, n))
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def delta_P(S: ToricSystem, x, directions: int = 720) -> float:
    """``min`` over a direction grid of ``mu(P ∩ {d . (y - x) >= 0})``."""
    x = np.asarray(x, dtype=float).ravel()
    P = S.polytope
    if np.min(P.facet_distance(x)) <= BOUNDARY_TOL:
        raise BoundaryPoint(f"{x.tolist()} is not an interior point")
    dirs = _sphere_directions(S.dim, directions)
    if S.dim == 1:
        lo, hi = P.vertices.min(), P.vertices.max()
        vols = np.array([hi - x[0], x[0] - lo])
    elif S.dim == 2:
        vols = _halfplane_areas(_ccw(P.vertices), x, dirs)
    else:
        vols = np.array([from_halfspaces(list(P.halfspaces) + [HalfSpace(d, -d @ x)],
                                         check_bounded=False).volume for d in dirs])
    return float(S.interior_density * vols.min())


def mean_value_check(S: ToricSystem, u, x, directions: int = 720):
    """``(u(x), int u d mu / delta_P(x))``; the first never exceeds the second."""
    x = np.asarray(x, dtype=float).ravel()
    lhs = float(u(x[None, :])[0])
    mass = pa_integral(S, u)
    if mass <= 0.0:
        return lhs, 0.0
    return lhs, mass / delta_P(S, x, directions)


# -- Poincare and Rellich probes -------------------------------------------


@dataclass
class EstimateProbe:
    samples: int
    sup_ratio: float
    witness: PiecewiseAffineConvex
    ratios: np.ndarray = field(repr=False)

    def to_dict(self):
        return {"samples": self.samples, "sup_ratio": self.sup_ratio,
                "witness": self.witness.to_dict()}


def poincare_ratio(S: ToricSystem, u, exponent) -> float:
    """``||u||_{L^exponent(mu)} / int_bdry u d sigma``."""
    return lp_norm(S, u, exponent) / pa_integral(S, u, boundary=True)


def poincare_probe(S: ToricSystem, exponent=None, trials: int = 200, seed=0) -> EstimateProbe:
    """Sup of the Poincare ratio over ``trials`` random nonnegative PA functions."""
    if exponent is None:
        exponent = critical_exponent(S.dim)
    if not 1.0 <= exponent <= critical_exponent(S.dim):
        raise ValueError(f"exponent must lie in [1, {critical_exponent(S.dim)}]")
    rngs = _streams(seed, trials)

    def one(rng):
        u = random_pa(S, rng)
        return u, poincare_ratio(S, u, exponent)

    out = parallel_map(one, rngs)
    ratios = np.array([r for _, r in out])
    k = int(np.argmax(ratios))
    return EstimateProbe(trials, float(ratios[k]), out[k][0], ratios)


def _vertex_hinges(S: ToricSystem, scales=(1.0, 4.0, 16.0)):
    """``max(0, 1 - s * sum of facet distances at v)``: bumps concentrated at each vertex."""
    P = S.polytope
    A, b = np.asarray(P.A, float), np.asarray(P.b, float)
    out = []
    for v in P.vertices:
        tight = np.abs(A @ v + b) <= 1e-9
        g, c = A[tight].sum(axis=0), b[tight].sum()
        for s in scales:
            out.append(PiecewiseAffineConvex([-s * g, np.zeros_like(g)], [1.0 - s * c, 0.0]))
    return out


def rellich_majorant_probe(S: ToricSystem, x_samples, fn_samples: int = 200, seed=0):
    """Sampled majorant ``max_u u(x) / int_bdry u d sigma`` (``u = 1`` always included)."""
    x = np.atleast_2d(np.asarray(x_samples, dtype=float))
    best = np.full(len(x), 1.0 / S.boundary_measure)
    cands = _vertex_hinges(S) + [random_pa(S, rng) for rng in _streams(seed, fn_samples)]
    for u in cands:
        b = pa_integral(S, u, boundary=True)
        if b > 0:
            best = np.maximum(best, u(x) / b)
    return best


@dataclass
class EntropyBoundResult:
    samples: int
    C_hat: float
    violations: int
    binding: int  # violations explained by a sample ratio above C_hat
    margins: np.ndarray = field(repr=False)


def entropy_bound_check(S: ToricSystem, C_hat: float, trials: int = 200, seed=1):
    """Check ``int u log u <= n log(C_hat int_bdry u)`` for ``int u d mu = 1``."""
    p = critical_exponent(S.dim)
    margins, violations, binding = [], 0, 0
    for rng in _streams(seed, trials):
        u = random_pa(S, rng)
        mass = pa_integral(S, u)
        u = u.scale(1.0 / mass)
        cd = CellDecomposition(S, [u])

        def ulogu(x):
            v = np.maximum(u(x), 0.0)
            return np.where(v > 0, v * np.log(np.where(v > 0, v, 1.0)), 0.0)

        lhs = cd.integrate(ulogu, 14)
        bdry = pa_integral(S, u, boundary=True)
        rhs = S.dim * math.log(C_hat * bdry)
        margins.append(rhs - lhs)
        if lhs > rhs + 1e-10:
            violations += 1
            if poincare_ratio(S, u, p) > C_hat:
                binding += 1
    return EntropyBoundResult(trials, C_hat, violations, binding, np.array(margins))


def _kinks(f):
    return f.kink_functions() if isinstance(f, State) else [f]


def l1_distance(S: ToricSystem, u, v, order=10) -> float:
    """``int |u - v| d mu`` for PA functions or states, on their common cells."""
    cd = CellDecomposition(S, _kinks(u) + _kinks(v) or [constant(0.0, S.dim)])
    return cd.integrate(lambda x: np.abs(u(x) - v(x)), order)


def l1_net_subsequence(S: ToricSystem, funcs, radii):
    """Greedy nested L1-net extraction.

    At each radius the current index set is covered by balls around greedily
    chosen centres and the most populated ball is kept.  Returns the chosen
    subsequence (one index per radius) and the pairwise distance matrix.
    """
    m = len(funcs)
    D = np.zeros((m, m))
    for i in range(m):
        for j in range(i + 1, m):
            D[i, j] = D[j, i] = l1_distance(S, funcs[i], funcs[j])
    current = list(range(m))
    seq = []
    for r in radii:
        remaining = list(current)
        best = []
        while remaining:
            c = remaining[0]
            ball = [k for k in remaining if D[c, k] <= r]
            if len(ball) > len(best):
                best = ball
            remaining = [k for k in remaining if D[c, k] > r]
        seq.append(best[0])
        current = best[1:] if len(best) > 1 else best
    return seq, D
