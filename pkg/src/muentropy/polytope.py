"""Polytopes with flat interior and boundary measures.

A system is a compact convex polytope ``P = {x : a_i . x + c_i >= 0}``
together with a constant density against Lebesgue measure on ``P`` and a
constant density on each facet against Euclidean surface measure.  The
lattice constructor picks the densities that make every facet carry its
lattice measure.
"""
from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, reduce
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from .exceptions import Degenerate, EmptyOrUnbounded, IrrationalNormal

ABS_TOL = 1e-9
MAX_DENOMINATOR = 10**4


@dataclass(frozen=True)
class HalfSpace:
    """The set ``normal . x + offset >= 0``."""

    normal: tuple
    offset: float

    def __post_init__(self):
        normal = tuple(float(v) for v in np.ravel(self.normal))
        if not normal or not np.all(np.isfinite(normal)) or not np.any(normal):
            raise ValueError(f"halfspace normal must be finite and nonzero, got {self.normal}")
        object.__setattr__(self, "normal", normal)
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def dim(self):
        return len(self.normal)

    def __call__(self, x):
        return np.asarray(x, dtype=float) @ np.asarray(self.normal) + self.offset


def _affine_rank(points, tol=ABS_TOL):
    points = np.asarray(points, dtype=float)
    if len(points) <= 1:
        return 0
    diffs = points[1:] - points[0]
    scale = max(1.0, float(np.abs(diffs).max()))
    return int(np.linalg.matrix_rank(diffs, tol=tol * scale * 10))


def _frozen(arr):
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Polytope:
    """A full-dimensional compact polytope in both H- and V-representation.

    Attributes
    ----------
    halfspaces : tuple of HalfSpace
        Irredundant inequalities, one per facet, in input order.
    vertices : ndarray of shape (n_vertices, dim)
    facets : tuple of tuple of int
        ``facets[i]`` lists the vertex ids lying on ``halfspaces[i]``.
    source_index : tuple of int
        Position of each kept halfspace in the list originally passed to
        :func:`from_halfspaces`.
    """

    dim: int
    halfspaces: tuple
    vertices: np.ndarray
    facets: tuple
    source_index: tuple = field(default=())

    @property
    def n_facets(self):
        return len(self.halfspaces)

    @cached_property
    def A(self):
        return _frozen([h.normal for h in self.halfspaces])

    @cached_property
    def b(self):
        return _frozen([h.offset for h in self.halfspaces])

    def contains(self, x, tol=ABS_TOL):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        norms = np.linalg.norm(self.A, axis=1)
        return np.all((x @ self.A.T + self.b) / norms >= -tol, axis=1)

    def facet_distance(self, x):
        """Euclidean distance from each point to each facet hyperplane (signed, >= 0 inside)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        norms = np.linalg.norm(self.A, axis=1)
        return (x @ self.A.T + self.b) / norms

    @cached_property
    def centroid(self):
        """Centroid of the vertex set (an interior point, not the barycenter)."""
        return _frozen(self.vertices.mean(axis=0))

    @cached_property
    def volume(self):
        return float(sum(simplex_volume(s) for s in triangulate(self)))

    def facet_area(self, i):
        """Euclidean (dim-1)-measure of facet ``i``."""
        if self.dim == 1:
            return 1.0
        return float(sum(simplex_volume(s) for s in facet_triangulation(self, i)))

    def vertex_facets(self, vid):
        return tuple(i for i, fv in enumerate(self.facets) if vid in fv)

    def edges_at(self, vid):
        """Neighbouring vertex ids joined to ``vid`` by an edge."""
        out = []
        for w in range(len(self.vertices)):
            common = [set(fv) for fv in self.facets if vid in fv and w in fv]
            # v, w span an edge iff the smallest face containing both is {v, w}
            if w != vid and common and set.intersection(*common) == {vid, w}:
                out.append(w)
        return tuple(out)

    def affine_image(self, matrix, shift):
        """Image under ``x -> matrix @ x + shift`` for invertible ``matrix``."""
        matrix = np.asarray(matrix, dtype=float)
        shift = np.asarray(shift, dtype=float)
        inv = np.linalg.inv(matrix)
        hs = []
        for h in self.halfspaces:
            a = np.asarray(h.normal) @ inv
            hs.append(HalfSpace(a, h.offset - a @ shift))
        return from_halfspaces(hs)


def simplex_volume(simplex):
    """Volume of a k-simplex given as (k+1, n) vertex coordinates, k <= n."""
    simplex = np.asarray(simplex, dtype=float)
    k = simplex.shape[0] - 1
    if k == 0:
        return 1.0
    edges = simplex[1:] - simplex[0]
    gram = edges @ edges.T
    return math.sqrt(max(np.linalg.det(gram), 0.0)) / math.factorial(k)


def _enumerate_vertices(A, b, tol):
    m, n = A.shape
    combos = np.array(list(itertools.combinations(range(m), n)), dtype=int)
    if combos.size == 0:
        return np.empty((0, n))
    mats = A[combos]
    rhs = -b[combos]
    dets = np.linalg.det(mats)
    ok = np.abs(dets) > 1e-12
    if not np.any(ok):
        return np.empty((0, n))
    pts = np.linalg.solve(mats[ok], rhs[ok][..., None])[..., 0]
    feasible = np.all(pts @ A.T + b >= -tol, axis=1)
    pts = pts[feasible]
    verts = []
    for p in pts:
        if not any(np.max(np.abs(p - q)) <= 10 * tol for q in verts):
            verts.append(p)
    return np.array(verts).reshape(-1, n)


def _is_bounded(A):
    n = A.shape[1]
    for i in range(n):
        for sign in (1.0, -1.0):
            c = np.zeros(n)
            c[i] = -sign
            res = linprog(c, A_ub=-A, b_ub=np.zeros(len(A)), bounds=[(-1, 1)] * n, method="highs")
            if res.status == 0 and -res.fun > 1e-9:
                return False
    return True


def from_halfspaces(halfspaces: Sequence[HalfSpace], tol: float = ABS_TOL,
                    check_bounded: bool = True) -> Polytope:
    """Build a polytope from halfspaces by brute-force vertex enumeration.

    Redundant halfspaces are dropped.

    Raises
    ------
    EmptyOrUnbounded
        If the intersection is empty or unbounded.
    Degenerate
        If the intersection is nonempty but has empty interior.
    """
    halfspaces = [h if isinstance(h, HalfSpace) else HalfSpace(*h) for h in halfspaces]
    if not halfspaces:
        raise EmptyOrUnbounded("no halfspaces given")
    n = halfspaces[0].dim
    if any(h.dim != n for h in halfspaces):
        raise ValueError("halfspaces of mixed dimension")
    A = np.array([h.normal for h in halfspaces])
    b = np.array([h.offset for h in halfspaces])
    norms = np.linalg.norm(A, axis=1)
    An, bn = A / norms[:, None], b / norms

    if check_bounded and not _is_bounded(An):
        raise EmptyOrUnbounded("halfspaces do not bound a compact set")
    verts = _enumerate_vertices(An, bn, tol)
    if len(verts) == 0:
        raise EmptyOrUnbounded("intersection is empty")
    if _affine_rank(verts, tol) < n:
        raise Degenerate(f"intersection has affine dimension {_affine_rank(verts, tol)} < {n}")

    kept, facets, seen = [], [], set()
    slack = verts @ An.T + bn
    for i in range(len(halfspaces)):
        on = tuple(int(v) for v in np.flatnonzero(np.abs(slack[:, i]) <= 10 * tol))
        if not on or frozenset(on) in seen:
            continue
        if _affine_rank(verts[list(on)], tol) != n - 1:
            continue
        seen.add(frozenset(on))
        kept.append(i)
        facets.append(on)
    return Polytope(
        dim=n,
        halfspaces=tuple(halfspaces[i] for i in kept),
        vertices=_frozen(verts),
        facets=tuple(facets),
        source_index=tuple(kept),
    )


def is_simple(P: Polytope) -> bool:
    return all(len(P.vertex_facets(v)) == P.dim for v in range(len(P.vertices)))


# -- triangulation ---------------------------------------------------------


def _subfaces(P, face, d):
    out, seen = [], set()
    for fv in P.facets:
        sub = frozenset(face) & frozenset(fv)
        if len(sub) < d or sub in seen or sub == frozenset(face):
            continue
        if _affine_rank(P.vertices[sorted(sub)]) == d - 1:
            seen.add(sub)
            out.append(tuple(sorted(sub)))
    return out


def _triangulate_face(P, face, d, method):
    pts = P.vertices
    if len(face) == d + 1:
        return [pts[list(face)]]
    if d == 1:
        # collinear extra points cannot occur for a vertex set; keep the extremes
        seg = pts[list(face)]
        direction = seg[-1] - seg[0]
        t = seg @ direction
        return [seg[[int(np.argmin(t)), int(np.argmax(t))]]]
    if method == "centroid":
        apex = pts[list(face)].mean(axis=0)
        subs = _subfaces(P, face, d)
    else:
        apex_id = min(face)
        apex = pts[apex_id]
        subs = [s for s in _subfaces(P, face, d) if apex_id not in s]
    simplices = []
    for sub in subs:
        for s in _triangulate_face(P, sub, d - 1, method):
            simplices.append(np.vstack([apex, s]))
    return simplices


def triangulate(P: Polytope, method: str = "pull") -> np.ndarray:
    """Triangulate ``P`` into nondegenerate simplices.

    ``method="pull"`` cones recursively from the lowest-index vertex of each
    face; ``method="centroid"`` cones from each face's vertex centroid.
    Returns an array of shape (n_simplices, dim + 1, dim).
    """
    if method not in ("pull", "centroid"):
        raise ValueError(f"unknown triangulation method {method!r}")
    face = tuple(range(len(P.vertices)))
    if P.dim == 1:
        v = P.vertices[:, 0]
        return np.array([[[v.min()], [v.max()]]])
    return np.array(_triangulate_face(P, face, P.dim, method))


def facet_triangulation(P: Polytope, i: int, method: str = "pull") -> np.ndarray:
    """Triangulate facet ``i`` into (dim-1)-simplices, shape (k, dim, dim)."""
    face = P.facets[i]
    if P.dim == 1:
        return np.array([P.vertices[list(face)]])
    return np.array(_triangulate_face(P, face, P.dim - 1, method))


# -- systems ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ToricSystem:
    """A polytope with flat interior measure and flat per-facet boundary measure.

    ``facet_densities[i]`` multiplies Euclidean surface measure on facet
    ``i`` (facets indexed as in ``polytope.halfspaces``).
    """

    polytope: Polytope
    interior_density: float = 1.0
    facet_densities: tuple = ()

    def __post_init__(self):
        dens = tuple(float(d) for d in self.facet_densities)
        if len(dens) != self.polytope.n_facets:
            raise ValueError(
                f"expected {self.polytope.n_facets} facet densities, got {len(dens)}"
            )
        if not self.interior_density > 0:
            raise ValueError("interior_density must be positive")
        if any(d < 0 for d in dens) or not any(d > 0 for d in dens):
            raise ValueError("facet densities must be >= 0 and not all zero")
        object.__setattr__(self, "facet_densities", dens)
        object.__setattr__(self, "interior_density", float(self.interior_density))

    @property
    def dim(self):
        return self.polytope.dim

    @cached_property
    def volume(self):
        return self.interior_density * self.polytope.volume

    @cached_property
    def facet_measures(self):
        P = self.polytope
        return tuple(d * P.facet_area(i) for i, d in enumerate(self.facet_densities))

    @cached_property
    def boundary_measure(self):
        return float(sum(self.facet_measures))

    def to_dict(self):
        return system_to_dict(self)


def primitive_normal(normal, max_denominator=MAX_DENOMINATOR, tol=1e-9):
    """Primitive integer vector parallel to ``normal``.

    Raises IrrationalNormal when no integer vector with bounded denominators
    reproduces the direction within ``tol``.
    """
    normal = np.asarray(normal, dtype=float)
    scaled = normal / np.abs(normal).max()
    fracs = [Fraction(v).limit_denominator(max_denominator) for v in scaled]
    lcm = reduce(lambda a, c: a * c // math.gcd(a, c), (f.denominator for f in fracs), 1)
    ints = [int(f * lcm) for f in fracs]
    g = reduce(math.gcd, (abs(i) for i in ints))
    ints = np.array([i // g for i in ints])
    unit = normal / np.linalg.norm(normal)
    if np.max(np.abs(ints / np.linalg.norm(ints) - unit)) > tol:
        raise IrrationalNormal(f"normal {normal.tolist()} is not rational within tolerance")
    return ints


def lattice_system(P: Polytope) -> ToricSystem:
    """Attach the measures induced by the integer lattice to ``P``."""
    dens = []
    for h in P.halfspaces:
        a = primitive_normal(h.normal)
        dens.append(1.0 if P.dim == 1 else 1.0 / float(np.linalg.norm(a)))
    return ToricSystem(P, 1.0, tuple(dens))


def total_measures(S: ToricSystem):
    """Return ``(mu(P), sigma(boundary P))``."""
    return S.volume, S.boundary_measure


def product(S1: ToricSystem, S2: ToricSystem) -> ToricSystem:
    """Composite system on ``P1 x P2``.

    Interior measure is the product; boundary measure is
    ``sigma1 x mu2`` on ``facet x P2`` plus ``mu1 x sigma2`` on ``P1 x facet``.
    """
    n1, n2 = S1.dim, S2.dim
    hs, dens = [], []
    for h, d in zip(S1.polytope.halfspaces, S1.facet_densities):
        hs.append(HalfSpace(tuple(h.normal) + (0.0,) * n2, h.offset))
        dens.append(d * S2.interior_density)
    for h, d in zip(S2.polytope.halfspaces, S2.facet_densities):
        hs.append(HalfSpace((0.0,) * n1 + tuple(h.normal), h.offset))
        dens.append(d * S1.interior_density)
    P = from_halfspaces(hs)
    return ToricSystem(P, S1.interior_density * S2.interior_density,
                       tuple(dens[i] for i in P.source_index))


# -- standard systems ------------------------------------------------------


def blowup_cp2() -> ToricSystem:
    """Anticanonical polytope of the one-point blow-up of CP^2."""
    return lattice_system(from_halfspaces([
        HalfSpace((0, 1), 1), HalfSpace((-1, -1), 1),
        HalfSpace((1, 0), 1), HalfSpace((1, 1), 1),
    ]))


def box(lower, upper) -> ToricSystem:
    lower, upper = np.atleast_1d(lower), np.atleast_1d(upper)
    n = len(lower)
    hs = []
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        hs += [HalfSpace(e, -lower[i]), HalfSpace(-e, upper[i])]
    return lattice_system(from_halfspaces(hs))


def unit_square() -> ToricSystem:
    return box([0, 0], [1, 1])


def square() -> ToricSystem:
    """The centred square [-1, 1]^2 (CP^1 x CP^1)."""
    return box([-1, -1], [1, 1])


def segment(lo=-1.0, hi=1.0) -> ToricSystem:
    return box([lo], [hi])


# -- JSON ------------------------------------------------------------------


def system_from_dict(data: dict) -> ToricSystem:
    """Parse the system-file schema.

    ``{"dim": n, "halfspaces": [{"normal": [...], "offset": c}],
    "measure": "lattice" | {"facet_densities": [...], "interior_density": d}}``

    Facet densities are listed per input halfspace; entries for redundant
    halfspaces are ignored.
    """
    dim = int(data["dim"])
    hs = [HalfSpace(h["normal"], h["offset"]) for h in data["halfspaces"]]
    if any(h.dim != dim for h in hs):
        raise ValueError("halfspace normal length does not match dim")
    P = from_halfspaces(hs)
    measure = data.get("measure", "lattice")
    if measure == "lattice":
        return lattice_system(P)
    if not isinstance(measure, dict):
        raise ValueError(f"unrecognized measure {measure!r}")
    dens = list(measure["facet_densities"])
    if len(dens) != len(hs):
        raise ValueError("facet_densities must have one entry per halfspace")
    return ToricSystem(P, measure.get("interior_density", 1.0),
                       tuple(dens[i] for i in P.source_index))


def system_to_dict(S: ToricSystem) -> dict:
    return {
        "dim": S.dim,
        "halfspaces": [{"normal": list(h.normal), "offset": h.offset}
                       for h in S.polytope.halfspaces],
        "measure": {"facet_densities": list(S.facet_densities),
                    "interior_density": S.interior_density},
    }


def load_system(path) -> ToricSystem:
    with open(path) as fh:
        return system_from_dict(json.load(fh))


def system_hash(S: ToricSystem) -> str:
    blob = json.dumps(system_to_dict(S), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()
