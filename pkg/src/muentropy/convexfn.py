"""Convex functions on polytopes and the log-convex states they induce."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.optimize import linprog
from scipy.special import logsumexp

from .exceptions import SlopeCondition
from .polytope import ToricSystem
from .quadrature import CellDecomposition, refined_nodes, simplex_exp_integrals


@dataclass(frozen=True)
class AffineFn:
    gradient: tuple
    constant: float = 0.0

    def __post_init__(self):
        g = tuple(float(v) for v in np.ravel(self.gradient))
        if not np.all(np.isfinite(g)) or not np.isfinite(self.constant):
            raise ValueError("affine function entries must be finite")
        object.__setattr__(self, "gradient", g)
        object.__setattr__(self, "constant", float(self.constant))

    def __call__(self, x):
        return np.asarray(x, dtype=float) @ np.asarray(self.gradient) + self.constant


class PiecewiseAffineConvex:
    """``q(x) = max_i (gradients[i] . x + constants[i])``."""

    def __init__(self, gradients, constants):
        g = np.atleast_2d(np.asarray(gradients, dtype=float))
        c = np.atleast_1d(np.asarray(constants, dtype=float))
        if g.shape[0] != c.shape[0] or g.shape[0] == 0:
            raise ValueError("need matching, nonempty gradients and constants")
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(c))):
            raise ValueError("pieces must be finite")
        g.setflags(write=False)
        c.setflags(write=False)
        self.gradients = g
        self.constants = c

    @classmethod
    def from_pieces(cls, pieces):
        pieces = list(pieces)
        return cls([p.gradient for p in pieces], [p.constant for p in pieces])

    @property
    def pieces(self):
        return [AffineFn(g, c) for g, c in zip(self.gradients, self.constants)]

    @property
    def dim(self):
        return self.gradients.shape[1]

    @property
    def n_pieces(self):
        return len(self.constants)

    @property
    def terms(self):
        return ((1.0, self),)

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.max(x @ self.gradients.T + self.constants, axis=1)

    def __repr__(self):
        return f"PiecewiseAffineConvex(n_pieces={self.n_pieces}, dim={self.dim})"

    def shift(self, c):
        return PiecewiseAffineConvex(self.gradients, self.constants + c)

    def scale(self, t):
        if t < 0:
            raise ValueError("negative multiples are not convex; use CellwiseAffine")
        return PiecewiseAffineConvex(self.gradients * t, self.constants * t)

    def __add__(self, other):
        return CellwiseAffine(self.terms) + other

    __radd__ = __add__

    def __mul__(self, t):
        return CellwiseAffine(((float(t), self),))

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-1.0) * other

    def is_affine(self, tol=1e-12):
        g, c = self.gradients, self.constants
        return bool(np.all(np.abs(g - g[0]) <= tol) and np.all(np.abs(c - c[0]) <= tol))

    def to_dict(self):
        return {"pieces": [{"gradient": g.tolist(), "constant": float(c)}
                           for g, c in zip(self.gradients, self.constants)]}

    @classmethod
    def from_dict(cls, d):
        return cls([p["gradient"] for p in d["pieces"]], [p["constant"] for p in d["pieces"]])


class CellwiseAffine:
    """A finite linear combination of PA convex functions.

    Affine on every cell of the common refinement of its terms, so it can be
    integrated exactly, though it need not be convex.
    """

    def __init__(self, terms):
        self.terms = tuple((float(c), q) for c, q in terms)

    def __call__(self, x):
        return sum(c * q(x) for c, q in self.terms)

    def __add__(self, other):
        if isinstance(other, (int, float)):
            return CellwiseAffine(self.terms + ((float(other), constant(0.0, self.dim)),))
        return CellwiseAffine(self.terms + tuple(other.terms))

    __radd__ = __add__

    def __mul__(self, t):
        return CellwiseAffine(tuple((t * c, q) for c, q in self.terms))

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-1.0) * other

    @property
    def dim(self):
        return self.terms[0][1].dim

    def to_pa(self):
        """Expand into a single max-of-affines; all coefficients must be >= 0."""
        if any(c < 0 for c, _ in self.terms):
            raise ValueError("negative coefficients do not give a convex function")
        g = np.zeros((1, self.dim))
        k = np.zeros(1)
        for c, q in self.terms:
            g = (g[:, None, :] + c * q.gradients[None, :, :]).reshape(-1, self.dim)
            k = (k[:, None] + c * q.constants[None, :]).ravel()
        return PiecewiseAffineConvex(g, k)


def linear_from_vector(xi) -> PiecewiseAffineConvex:
    """The linear function ``x -> xi . x``."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    return PiecewiseAffineConvex(xi[None, :], [0.0])


def constant(c, dim) -> PiecewiseAffineConvex:
    return PiecewiseAffineConvex(np.zeros((1, dim)), [float(c)])


class SmoothedConvex:
    """Log-sum-exp smoothing ``(1/beta) log sum_i exp(beta l_i(x))`` of a PA function.

    Lies between ``base`` and ``base + log(m) / beta``.
    """

    def __init__(self, base: PiecewiseAffineConvex, beta: float):
        if not beta > 0:
            raise ValueError("beta must be positive")
        self.base = base
        self.beta = float(beta)

    @property
    def dim(self):
        return self.base.dim

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        L = x @ self.base.gradients.T + self.base.constants
        return logsumexp(self.beta * L, axis=1) / self.beta


# -- states ---------------------------------------------------------------


def _terms_of(q):
    if isinstance(q, (PiecewiseAffineConvex, CellwiseAffine)):
        return q.terms
    raise TypeError(f"expected a piecewise affine function, got {type(q).__name__}")


class CellMoments:
    """Exact exponential moments of a cellwise affine exponent on a system."""

    def __init__(self, S: ToricSystem, q, extra=()):
        terms = _terms_of(q)
        funcs = [t[1] for t in terms] + list(extra)
        self.system = S
        self.cd = CellDecomposition(S, funcs)
        self.n_terms = len(terms)
        coefs = [t[0] for t in terms]
        self.z_vol = sum(c * self.cd.vertex_values(i) for i, c in enumerate(coefs))
        self.z_bdry = sum(c * self.cd.vertex_values(i, True) for i, c in enumerate(coefs))
        zs = [self.z_vol.max() if self.z_vol.size else 0.0]
        self.shift = float(max(zs))

    def weight(self, f, boundary=False):
        """Vertex values of an extra function (index into ``extra``) or a term combination."""
        if isinstance(f, int):
            return self.cd.vertex_values(self.n_terms + f, boundary)
        return f

    def integral(self, g=None, h=None, boundary=False):
        """``int g h exp(q - shift)`` with ``g, h`` given as vertex-value arrays."""
        z = (self.z_bdry if boundary else self.z_vol) - self.shift
        meas = self.cd.bdry_weights if boundary else self.cd.vol_weights
        if z.size == 0:
            return 0.0
        if self.system.dim == 1 and boundary:
            vals = np.exp(z[:, 0])
            for w in (g, h):
                if w is not None:
                    vals = vals * w[:, 0]
            return float(meas @ vals)
        return float(np.sum(simplex_exp_integrals(z, meas, g, h)))

    @cached_property
    def log_mass(self):
        """``log int_P exp(q) d mu``."""
        return float(np.log(self.integral()) + self.shift)


class State:
    """A normalized density ``u`` on a system with ``int u d mu = int d mu``."""

    system: ToricSystem

    def log_density(self, x):
        raise NotImplementedError

    def density(self, x):
        return np.exp(self.log_density(x))

    __call__ = density

    def kink_functions(self):
        """PA functions whose cells make ``log u`` smooth."""
        return []

    def integrate(self, fn, boundary=False, order=10):
        """Gauss-rule integral of ``fn(x, u(x))`` over P or its boundary."""
        cd = CellDecomposition(self.system, self.kink_functions()) if self.kink_functions() \
            else CellDecomposition(self.system, [constant(0.0, self.system.dim)])
        if self.system.dim == 1 and boundary:
            pts = cd.bdry_simplices[:, 0, :]
            return float(cd.bdry_weights @ fn(pts, self.density(pts)))
        pts, wts, _ = cd.nodes(order, boundary)
        return float(wts @ fn(pts, self.density(pts)))


class ExpState(State):
    """``u = exp(q - z)`` with ``z = log(int e^q d mu / int d mu)``."""

    def __init__(self, system, q, log_normalizer):
        self.system = system
        self.q = q
        self.log_normalizer = float(log_normalizer)

    def log_density(self, x):
        return self.q(x) - self.log_normalizer

    def kink_functions(self):
        if isinstance(self.q, SmoothedConvex):
            return []
        return [t[1] for t in _terms_of(self.q)]

    def __repr__(self):
        return f"ExpState(q={self.q!r}, log_normalizer={self.log_normalizer:.6g})"


class MixtureState(State):
    """Pointwise convex combination of states on one system."""

    def __init__(self, states, weights):
        self.states = tuple(states)
        self.weights = np.asarray(weights, dtype=float)
        self.system = self.states[0].system

    def log_density(self, x):
        logs = np.stack([s.log_density(x) for s in self.states], axis=0)
        w = self.weights
        keep = w > 0
        return logsumexp(logs[keep], axis=0, b=w[keep][:, None])

    def kink_functions(self):
        out = []
        for s in self.states:
            out += s.kink_functions()
        return out


def _smooth_log_mass(S, q):
    pts, wts, _, _ = refined_nodes(S)
    vals = q(pts)
    m = vals.max()
    return float(np.log(wts @ np.exp(vals - m)) + m)


def normalize(S: ToricSystem, q) -> ExpState:
    """The state ``u(q) = (int d mu / int e^q d mu) e^q``."""
    if isinstance(q, SmoothedConvex):
        log_mass = _smooth_log_mass(S, q)
    else:
        log_mass = CellMoments(S, q).log_mass
    return ExpState(S, q, log_mass - np.log(S.volume))


def mixture(u0: State, u1: State, t: float) -> State:
    """``(1 - t) u0 + t u1``."""
    if u0.system is not u1.system:
        raise ValueError("states live on different systems")
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    if t == 0.0:
        return u0
    if t == 1.0:
        return u1
    return MixtureState((u0, u1), (1.0 - t, t))


# -- envelopes and truncation ----------------------------------------------


def boundary_samples(S: ToricSystem, q=None, order=4):
    """Points on the boundary: cell vertices of ``q`` along facets plus Gauss points."""
    funcs = [q] if q is not None else [constant(0.0, S.dim)]
    cd = CellDecomposition(S, funcs)
    pts = [cd.bdry_simplices.reshape(-1, S.dim)]
    if S.dim > 1:
        pts.append(cd.nodes(order, boundary=True)[0])
    pts = np.vstack(pts)
    return np.unique(np.round(pts, 12), axis=0)


def _prune(S: ToricSystem, q: PiecewiseAffineConvex, tol=1e-10):
    """Drop pieces that are nowhere strictly maximal on P (one LP per piece)."""
    from .quadrature import dedupe_pieces

    keep = dedupe_pieces(q.gradients, q.constants)
    g, c = q.gradients, q.constants
    A, b = S.polytope.A, S.polytope.b
    n = S.dim
    i = 0
    while i < len(keep) and len(keep) > 1:
        k = keep[i]
        others = [j for j in keep if j != k]
        # max t  s.t.  l_k(x) - l_j(x) >= t,  x in P
        A_ub = np.vstack([np.column_stack([g[others] - g[k], np.ones(len(others))]),
                          np.column_stack([-A, np.zeros(len(A))])])
        b_ub = np.concatenate([c[k] - c[others], b])
        res = linprog(np.r_[np.zeros(n), -1.0], A_ub=A_ub, b_ub=b_ub,
                      bounds=[(None, None)] * n + [(None, 1.0)], method="highs")
        if res.status == 0 and -res.fun <= tol * max(1.0, np.abs(c).max()):
            keep.pop(i)
        else:
            i += 1
    return PiecewiseAffineConvex(g[keep], c[keep])


def tight_envelope(S: ToricSystem, q: PiecewiseAffineConvex, grid: int = 21) -> PiecewiseAffineConvex:
    """Largest convex function lying below ``q`` on the boundary, approximately.

    For each gradient in a regular grid (plus the pieces' own gradients) the
    largest constant keeping the affine function below ``q`` at boundary
    samples is taken; the result is the maximum over candidates.  It is
    ``>= q`` on P and equals ``q`` at the boundary samples.
    """
    if not isinstance(q, PiecewiseAffineConvex):
        raise TypeError("tight_envelope accepts piecewise affine convex input only")
    bpts = boundary_samples(S, q)
    qb = q(bpts)
    radius = max(1.0, float(np.abs(q.gradients).max()))
    axis = np.linspace(-radius, radius, grid)
    cand = np.array(list(itertools.product(axis, repeat=S.dim)))
    cand = np.vstack([cand, q.gradients])
    consts = np.min(qb[None, :] - cand @ bpts.T, axis=1)
    env = PiecewiseAffineConvex(cand, consts)
    return _prune(S, env)


def _edge_tangent(q, v, w, h):
    """Slope/touch point of the lowest line from (v, h) supporting q along segment v -> w."""
    d = w - v
    a = q.gradients @ d
    b = q.gradients @ v + q.constants
    cands = [1.0]
    for i in range(len(a)):
        for j in range(i + 1, len(a)):
            if abs(a[i] - a[j]) > 1e-14:
                s = (b[j] - b[i]) / (a[i] - a[j])
                if 1e-12 < s < 1.0:
                    cands.append(float(s))
    cands = np.array(sorted(cands))
    g = q(v[None, :] + cands[:, None] * d[None, :])
    ratios = (g - h) / cands
    k = int(np.argmin(ratios))
    return cands[k], v + cands[k] * d


def truncation_plane(S: ToricSystem, q: PiecewiseAffineConvex, vid: int, h: float):
    """The affine ``l_h`` with ``l_h(v) = h`` touching ``q`` on both edges at vertex ``vid``.

    Returns ``(l_h, p0, p1)``.
    """
    if S.dim != 2:
        raise ValueError("vertex truncation is implemented for dim 2 only")
    P = S.polytope
    v = P.vertices[vid]
    nbrs = P.edges_at(vid)
    if len(nbrs) != 2:
        raise ValueError(f"vertex {vid} does not have exactly two edges")
    _, p0 = _edge_tangent(q, v, P.vertices[nbrs[0]], h)
    _, p1 = _edge_tangent(q, v, P.vertices[nbrs[1]], h)
    M = np.array([[*v, 1.0], [*p0, 1.0], [*p1, 1.0]])
    rhs = np.array([h, q(p0)[0], q(p1)[0]])
    sol = np.linalg.solve(M, rhs)
    return AffineFn(sol[:2], sol[2]), p0, p1


def vertex_truncate(S: ToricSystem, q: PiecewiseAffineConvex, vid: int, h: float,
                    tol: float = 1e-9) -> PiecewiseAffineConvex:
    """``sup {l affine : l <= q on P, l(v) <= h}`` for a vertex ``v`` of a polygon.

    Raises SlopeCondition when the plane through ``(v, h)`` touching ``q``
    along both edges at ``v`` is not a minorant of ``q``.
    """
    if S.dim != 2:
        raise ValueError("vertex truncation is implemented for dim 2 only")
    v = S.polytope.vertices[vid]
    if h >= q(v)[0] - tol:
        return q
    ell, _, _ = truncation_plane(S, q, vid, h)
    cd = CellDecomposition(S, [q])
    pts = np.unique(np.round(np.vstack([cd.vol_simplices.reshape(-1, 2),
                                        S.polytope.vertices]), 12), axis=0)
    if np.any(ell(pts) > q(pts) + tol * max(1.0, abs(h))):
        raise SlopeCondition(f"no supporting plane through vertex {vid} at height {h}")
    # vertices of {(a, c): a.p + c <= q(p) for all p, a.v + c <= h}
    rows = np.vstack([np.column_stack([pts, np.ones(len(pts))]), [[*v, 1.0]]])
    rhs = np.concatenate([q(pts), [h]])
    found = [np.array([*ell.gradient, ell.constant])]
    for tri in itertools.combinations(range(len(rows)), 3):
        M = rows[list(tri)]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        sol = np.linalg.solve(M, rhs[list(tri)])
        if np.all(rows @ sol <= rhs + 1e-9 * max(1.0, np.abs(rhs).max())):
            found.append(sol)
    found = np.array(found)
    return _prune(S, PiecewiseAffineConvex(found[:, :2], found[:, 2]))
