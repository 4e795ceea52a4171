"""Integration over polytopes and their boundaries.

Two routes are provided.  The numeric route uses conical-product Gauss
rules on simplices with adaptive longest-edge bisection.  The exact route
handles integrands ``g * h * exp(l)`` with ``l, g, h`` affine on each cell
of a piecewise affine decomposition, through the identity

    int_simplex f^{(k)}(l(x)) dx = k! vol(simplex) f[l(v_0), ..., l(v_k)]

for divided differences of ``f = exp``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import expm
from scipy.special import roots_jacobi

from .exceptions import EmptyOrUnbounded, NonFinite
from .polytope import (
    ABS_TOL, HalfSpace, Polytope, ToricSystem, facet_triangulation,
    from_halfspaces, simplex_volume, triangulate,
)

CLUSTER_TOL = 1e-6
TAYLOR_TERMS = 6
TINY = 1e-300


@dataclass(frozen=True)
class QuadratureConfig:
    order: int = 8
    max_subdiv: int = 12
    rel_tol: float = 1e-10
    mode: str = "numeric"

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("order must be >= 1")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.mode not in ("numeric", "exact"):
            raise ValueError(f"mode must be 'numeric' or 'exact', got {self.mode!r}")


# -- Gauss rules -----------------------------------------------------------


@lru_cache(maxsize=None)
def simplex_rule(k: int, order: int):
    """Conical-product Gauss rule on the reference k-simplex.

    Returns ``(bary, weights)`` with ``bary`` of shape (q, k+1) barycentric
    coordinates and ``weights`` summing to one.  Exact for polynomials of
    degree ``2*order - 1``.
    """
    if k == 0:
        return np.ones((1, 1)), np.ones(1)
    grids, wgrids = [], []
    for i in range(1, k + 1):
        t, w = roots_jacobi(order, k - i, 0.0)
        grids.append((1.0 + t) / 2.0)
        wgrids.append(w)
    mesh = np.meshgrid(*grids, indexing="ij")
    wmesh = np.meshgrid(*wgrids, indexing="ij")
    u = np.stack([m.ravel() for m in mesh], axis=1)
    w = np.prod(np.stack([m.ravel() for m in wmesh], axis=1), axis=1)
    x = np.empty_like(u)
    rest = np.ones(len(u))
    for i in range(k):
        x[:, i] = rest * u[:, i]
        rest = rest * (1.0 - u[:, i])
    bary = np.column_stack([1.0 - x.sum(axis=1), x])
    bary.flags.writeable = False
    w = w / w.sum()
    w.flags.writeable = False
    return bary, w


def simplex_measures(simplices):
    """k-dimensional measure of each simplex in a (m, k+1, n) stack."""
    simplices = np.asarray(simplices, dtype=float)
    k = simplices.shape[1] - 1
    if k == 0:
        return np.ones(len(simplices))
    edges = simplices[:, 1:] - simplices[:, :1]
    gram = np.einsum("mij,mkj->mik", edges, edges)
    return np.sqrt(np.clip(np.linalg.det(gram), 0.0, None)) / math.factorial(k)


def gauss_nodes(simplices, order):
    """Quadrature nodes and weights (including simplex measure) for a stack of simplices."""
    simplices = np.asarray(simplices, dtype=float)
    k = simplices.shape[1] - 1
    bary, w = simplex_rule(k, order)
    pts = np.einsum("qj,mjn->mqn", bary, simplices)
    wts = simplex_measures(simplices)[:, None] * w[None, :]
    return pts.reshape(-1, simplices.shape[2]), wts.ravel()


# -- divided differences of exp ----------------------------------------------


def _complete_homogeneous(w, terms):
    """h_0..h_{terms-1} of the variables in the last axis of ``w``."""
    shape = w.shape[:-1]
    h = np.zeros(shape + (terms,))
    h[..., 0] = 1.0
    for j in range(w.shape[-1]):
        z = w[..., j]
        for t in range(1, terms):
            h[..., t] = h[..., t] + z * h[..., t - 1]
    return h


def exp_divided_difference(z):
    """Divided difference ``exp[z_0, ..., z_k]`` along the last axis.

    Repeated and clustered nodes are allowed.  Clusters narrower than
    ``CLUSTER_TOL`` use a Taylor expansion about the mean node; all other
    inputs use the exponential of the bidiagonal (Opitz) matrix.
    """
    z = np.asarray(z, dtype=float)
    k = z.shape[-1] - 1
    if k == 0:
        return np.exp(z[..., 0])
    c = z.mean(axis=-1)
    w = z - c[..., None]
    spread = np.ptp(z, axis=-1)
    out = np.empty(z.shape[:-1])
    tight = spread <= CLUSTER_TOL
    if np.any(tight):
        h = _complete_homogeneous(w[tight], TAYLOR_TERMS)
        fact = np.array([1.0 / math.factorial(k + t) for t in range(TAYLOR_TERMS)])
        out[tight] = np.exp(c[tight]) * (h @ fact)
    loose = ~tight
    if np.any(loose):
        wl = w[loose]
        J = np.zeros(wl.shape[:-1] + (k + 1, k + 1))
        idx = np.arange(k + 1)
        J[..., idx, idx] = wl
        J[..., idx[:-1], idx[1:]] = 1.0
        out[loose] = np.exp(c[loose]) * expm(J)[..., 0, -1]
    return out


def exact_exp_affine_simplex(simplex, gradient, constant=0.0):
    """Exact ``int_simplex exp(gradient . x + constant) dx`` for a k-simplex in R^n."""
    simplex = np.asarray(simplex, dtype=float)
    z = simplex @ np.asarray(gradient, dtype=float) + constant
    k = simplex.shape[0] - 1
    return float(math.factorial(k) * simplex_volume(simplex) * exp_divided_difference(z))


def simplex_exp_integrals(z, measures, g=None, h=None):
    """Per-simplex ``int g h exp(l)`` from vertex values.

    Parameters
    ----------
    z : array (m, k+1)
        Vertex values of the affine exponent ``l``.
    measures : array (m,)
        Simplex measures (densities may be folded in).
    g, h : array (m, k+1), optional
        Vertex values of affine weights.
    """
    z = np.asarray(z, dtype=float)
    m, kp1 = z.shape
    scale = math.factorial(kp1 - 1) * np.asarray(measures, dtype=float)
    if g is None and h is None:
        return scale * exp_divided_difference(z)
    if h is None or g is None:
        g = g if g is not None else h
        nodes = np.concatenate([np.repeat(z[:, None, :], kp1, axis=1), z[:, :, None]], axis=2)
        dd = exp_divided_difference(nodes)
        return scale * np.einsum("mj,mj->m", g, dd)
    base = np.broadcast_to(z[:, None, None, :], (m, kp1, kp1, kp1))
    extra_j = np.broadcast_to(z[:, :, None, None], (m, kp1, kp1, 1))
    extra_l = np.broadcast_to(z[:, None, :, None], (m, kp1, kp1, 1))
    dd = exp_divided_difference(np.concatenate([base, extra_j, extra_l], axis=3))
    dd = dd * (1.0 + np.eye(kp1))[None]
    return scale * np.einsum("mj,ml,mjl->m", g, h, dd)


# -- adaptive numeric integration ------------------------------------------


def _bisect(simplex):
    k = simplex.shape[0] - 1
    best, pair = -1.0, (0, 1)
    for i in range(k + 1):
        for j in range(i + 1, k + 1):
            d = float(np.sum((simplex[i] - simplex[j]) ** 2))
            if d > best:
                best, pair = d, (i, j)
    i, j = pair
    mid = 0.5 * (simplex[i] + simplex[j])
    a, b = simplex.copy(), simplex.copy()
    a[j] = mid
    b[i] = mid
    return a, b


def _rule_value(f, simplex, order):
    pts, wts = gauss_nodes(simplex[None], order)
    vals = np.asarray(f(pts), dtype=float)
    return float(wts @ vals), bool(np.all(np.isfinite(vals)))


def adaptive_simplices(f, simplices, cfg: QuadratureConfig, weights=None):
    """Adaptively integrate ``f`` over a list of simplices.

    Each simplex is accepted when the rule of order ``cfg.order`` and an
    embedded rule of higher order agree; otherwise it is bisected.
    Comparing a parent against its two children is not used because
    longest-edge bisection can keep the integrand's full range in both
    children, making their errors match the parent's.

    Returns ``(value, error_estimate)``.  ``weights`` multiplies each initial
    simplex's contribution (used for measure densities).
    """
    simplices = [np.asarray(s, dtype=float) for s in simplices]
    weights = np.ones(len(simplices)) if weights is None else np.asarray(weights, dtype=float)
    hi_order = cfg.order + max(2, cfg.order // 2)

    def pair(s):
        lo, ok_lo = _rule_value(f, s, cfg.order)
        hi, ok_hi = _rule_value(f, s, hi_order)
        return lo, hi, ok_lo and ok_hi

    first = [pair(s) for s in simplices]
    rough = sum(w * hi for w, (_, hi, ok) in zip(weights, first) if ok)
    meas = np.array([simplex_volume(s) for s in simplices])
    total_meas = float(np.sum(meas * weights)) or 1.0
    scale = max(abs(rough), 1e-300)
    total, err = 0.0, 0.0
    for s, w, est in zip(simplices, weights, first):
        stack = [(s, est, 0)]
        while stack:
            simplex, (lo, hi, ok), depth = stack.pop()
            local_tol = cfg.rel_tol * scale * w * simplex_volume(simplex) / total_meas
            if ok and abs(hi - lo) * w <= max(local_tol, 1e-300):
                total += w * hi
                err += w * abs(hi - lo)
                continue
            if depth + 1 >= cfg.max_subdiv:
                if not ok:
                    raise NonFinite("integrand is not finite at quadrature nodes")
                total += w * hi
                err += w * abs(hi - lo)
                continue
            for child in _bisect(simplex):
                stack.append((child, pair(child), depth + 1))
    return total, err


class ExpOf:
    """Integrand ``exp(q(x)) * prod(w(x) for w in weights)``.

    ``q`` and each weight are piecewise affine objects exposing
    ``gradients`` (K, n) and ``constants`` (K,), evaluated as a maximum of
    their pieces.  At most two weights are supported by the exact route.
    """

    def __init__(self, q, *weights):
        self.q = q
        self.weights = weights

    def __call__(self, x):
        out = np.exp(_pa_eval(self.q, x))
        for w in self.weights:
            out = out * _pa_eval(w, x)
        return out


def _pa_eval(f, x):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return np.max(x @ np.asarray(f.gradients).T + np.asarray(f.constants), axis=1)


def integrate_volume(S: ToricSystem, f, cfg: QuadratureConfig = QuadratureConfig(),
                     full_output=False, kinks=()):
    """``int_P f d mu``.

    ``f`` maps an (N, n) array to N values and should be smooth on the
    interior of ``P``.  Gauss nodes never touch simplex edges, so a kink
    lying close to an edge can go undetected by the error estimate; pass
    the piecewise affine functions responsible for kinks as ``kinks`` and
    integration runs cell by cell instead.

    With ``cfg.mode == "exact"`` ``f`` must be an :class:`ExpOf` and the
    result is computed cell by cell with the divided-difference kernel.
    """
    if cfg.mode == "exact":
        if not isinstance(f, ExpOf):
            raise TypeError("exact mode needs an ExpOf integrand")
        val = CellDecomposition(S, [f.q, *f.weights]).exp_integral(0, tuple(range(1, len(f.weights) + 1)))
        return (val, 0.0) if full_output else val
    if kinks:
        simplices = CellDecomposition(S, kinks).vol_simplices
    else:
        simplices = triangulate(S.polytope)
    val, err = adaptive_simplices(f, simplices, cfg)
    val, err = val * S.interior_density, err * S.interior_density
    return (val, err) if full_output else val


def integrate_boundary(S: ToricSystem, f, cfg: QuadratureConfig = QuadratureConfig(),
                       full_output=False, kinks=()):
    """``int_{boundary P} f d sigma`` facet by facet; see :func:`integrate_volume`."""
    if cfg.mode == "exact":
        if not isinstance(f, ExpOf):
            raise TypeError("exact mode needs an ExpOf integrand")
        val = CellDecomposition(S, [f.q, *f.weights]).exp_integral(
            0, tuple(range(1, len(f.weights) + 1)), boundary=True)
        return (val, 0.0) if full_output else val
    P = S.polytope
    if P.dim == 1:
        pts = P.vertices[[fv[0] for fv in P.facets]]
        vals = np.asarray(f(pts), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise NonFinite("integrand is not finite at a boundary point")
        val = float(np.dot(S.facet_densities, vals))
        return (val, 0.0) if full_output else val
    simplices, weights = [], []
    if kinks:
        cd = CellDecomposition(S, kinks)
        for s, f_id in zip(cd.bdry_simplices, cd.bdry_facet):
            simplices.append(s)
            weights.append(S.facet_densities[f_id])
    else:
        for i, d in enumerate(S.facet_densities):
            if d == 0:
                continue
            for s in facet_triangulation(P, i):
                simplices.append(s)
                weights.append(d)
    val, err = adaptive_simplices(f, simplices, cfg, weights)
    return (val, err) if full_output else val


# -- cell decomposition for piecewise affine integrands --------------------


def dedupe_pieces(gradients, constants, tol=1e-12):
    """Drop pieces that repeat an earlier piece; returns the kept indices."""
    keep = []
    for i in range(len(constants)):
        if not any(np.max(np.abs(gradients[i] - gradients[j])) <= tol
                   and abs(constants[i] - constants[j]) <= tol for j in keep):
            keep.append(i)
    return keep


class CellDecomposition:
    """Partition of ``P`` into cells on which each given PA function is affine.

    Attributes
    ----------
    vol_simplices : (m, n+1, n) array
    vol_weights : (m,) array of simplex volumes times interior density
    vol_active : (m, F) int array, active piece of each function per simplex
    bdry_simplices : (mb, n, n) array
    bdry_weights : (mb,) array of facet measures times facet density
    bdry_active : (mb, F) int array
    bdry_facet : (mb,) int array of facet index in ``S.polytope``
    """

    def __init__(self, S: ToricSystem, functions, tol=ABS_TOL):
        self.system = S
        self.functions = [(np.atleast_2d(np.asarray(f.gradients, dtype=float)),
                           np.atleast_1d(np.asarray(f.constants, dtype=float)))
                          for f in functions]
        P = S.polytope
        n = P.dim
        base = list(P.halfspaces)
        cells = [((), list(base))]
        for grads, consts in self.functions:
            keep = dedupe_pieces(grads, consts)
            refined = []
            for active, hs in cells:
                for i in keep:
                    extra, feasible = [], True
                    for j in keep:
                        if j == i:
                            continue
                        a = grads[i] - grads[j]
                        c = consts[i] - consts[j]
                        if np.max(np.abs(a)) <= 1e-14:
                            if c < -1e-14:
                                feasible = False
                                break
                            continue
                        extra.append(HalfSpace(a, c))
                    if feasible:
                        refined.append((active + (i,), hs + extra))
            cells = refined
        self.cells = []
        vs, vw, va = [], [], []
        bs, bw, ba, bf = [], [], [], []
        nP = len(base)
        for active, hs in cells:
            try:
                C = _clip(hs, tol)
            except EmptyOrUnbounded:
                continue
            if C.volume <= 1e-14 * max(P.volume, 1.0):
                continue
            self.cells.append((active, C))
            for s in triangulate(C):
                vs.append(s)
                vw.append(S.interior_density * simplex_volume(s))
                va.append(active)
            for j, src in enumerate(C.source_index):
                if src >= nP:
                    continue
                dens = S.facet_densities[src]
                if dens == 0:
                    continue
                for s in facet_triangulation(C, j):
                    bs.append(s)
                    bw.append(dens * (1.0 if n == 1 else simplex_volume(s)))
                    ba.append(active)
                    bf.append(src)
        F = len(self.functions)
        self.vol_simplices = np.array(vs).reshape(-1, n + 1, n)
        self.vol_weights = np.array(vw)
        self.vol_active = np.array(va, dtype=int).reshape(-1, F)
        self.bdry_simplices = np.array(bs).reshape(-1, n, n)
        self.bdry_weights = np.array(bw)
        self.bdry_active = np.array(ba, dtype=int).reshape(-1, F)
        self.bdry_facet = np.array(bf, dtype=int)

    def vertex_values(self, fi, boundary=False):
        """Values of function ``fi``'s active piece at each simplex vertex."""
        grads, consts = self.functions[fi]
        simp = self.bdry_simplices if boundary else self.vol_simplices
        act = (self.bdry_active if boundary else self.vol_active)[:, fi]
        return np.einsum("mvn,mn->mv", simp, grads[act]) + consts[act][:, None]

    def exp_integral(self, exponent, weights=(), boundary=False, shift=0.0):
        """Exact ``int exp(f_exponent - shift) * prod(f_w)`` over P (or its boundary)."""
        if len(weights) > 2:
            raise ValueError("at most two affine weights are supported")
        z = self.vertex_values(exponent, boundary) - shift
        ws = [self.vertex_values(w, boundary) for w in weights]
        meas = self.bdry_weights if boundary else self.vol_weights
        if len(z) == 0:
            return 0.0
        if self.system.dim == 1 and boundary:
            vals = np.exp(z[:, 0])
            for w in ws:
                vals = vals * w[:, 0]
            return float(meas @ vals)
        g = ws[0] if ws else None
        h = ws[1] if len(ws) > 1 else None
        return float(np.sum(simplex_exp_integrals(z, meas, g, h)))

    def nodes(self, order, boundary=False):
        """Gauss nodes, weights and per-node active pieces."""
        simp = self.bdry_simplices if boundary else self.vol_simplices
        meas = self.bdry_weights if boundary else self.vol_weights
        act = self.bdry_active if boundary else self.vol_active
        if len(simp) == 0:
            n = self.system.dim
            return np.empty((0, n)), np.empty(0), np.empty((0, act.shape[1]), dtype=int)
        k = simp.shape[1] - 1
        bary, w = simplex_rule(k, order)
        pts = np.einsum("qj,mjn->mqn", bary, simp).reshape(-1, simp.shape[2])
        wts = (meas[:, None] * w[None, :]).ravel()
        acts = np.repeat(act, len(w), axis=0)
        return pts, wts, acts

    def integrate(self, fn, order=10, boundary=False):
        """Gauss-rule ``int fn`` for integrands smooth on every cell."""
        pts, wts, _ = self.nodes(order, boundary)
        if len(pts) == 0:
            return 0.0
        vals = np.asarray(fn(pts), dtype=float)
        return float(wts @ vals)


def _clip(halfspaces, tol):
    return from_halfspaces(halfspaces, tol=tol, check_bounded=False)


def refine(simplices, levels):
    """Split every simplex ``levels`` times by longest-edge bisection."""
    out = [np.asarray(s, dtype=float) for s in simplices]
    for _ in range(levels):
        nxt = []
        for s in out:
            nxt.extend(_bisect(s))
        out = nxt
    return np.array(out)


def refined_nodes(S: ToricSystem, levels=4, order=8):
    """Fixed Gauss nodes on a refined triangulation of P and of its facets.

    Returns ``(pts, wts, bpts, bwts)`` with densities folded into the weights.
    """
    P = S.polytope
    pts, wts = gauss_nodes(refine(triangulate(P), levels), order)
    wts = wts * S.interior_density
    bp, bw = [], []
    for i in range(P.n_facets):
        dens = S.facet_densities[i]
        if dens == 0:
            continue
        for simp in facet_triangulation(P, i):
            if S.dim == 1:
                bp.append(simp.reshape(1, 1))
                bw.append(np.array([dens]))
                continue
            p, w = gauss_nodes(refine(simp[None], levels), order)
            bp.append(p)
            bw.append(w * dens)
    return pts, wts, np.vstack(bp), np.concatenate(bw)

