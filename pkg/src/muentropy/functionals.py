"""Entropy, internal and free mu-energy, sigma, the NA mu-entropy and Futaki invariants.

Temperature and the parameter ``lambda`` are related by ``T = -lambda / (2 pi)``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .convexfn import (
    CellMoments, CellwiseAffine, ExpState, MixtureState, PiecewiseAffineConvex,
    SmoothedConvex, State, linear_from_vector, normalize,
)
from .polytope import ToricSystem
from .quadrature import CellDecomposition, refined_nodes

TWO_PI = 2.0 * math.pi
REPORT_COLUMNS = ("T", "lambda", "S", "U", "F", "na_mu", "sigma", "na_mu_lambda")


def temperature(lam):
    return -lam / TWO_PI + 0.0  # no signed zeros


def lam_from_temperature(T):
    return -TWO_PI * T + 0.0


def log_exp_minus_n(S: ToricSystem):
    """``log int_P e^{-n} d mu``."""
    return -S.dim + math.log(S.volume)


def _is_cellwise(q):
    return isinstance(q, (PiecewiseAffineConvex, CellwiseAffine))


def _exp_moments(S, q):
    """``(Z, B, Q, shift)`` for ``p = q - shift``: ``int e^p``, ``int_bdry e^p``, ``int p e^p``.

    Working with ``p`` keeps the functionals free of cancellation against
    large constants in ``q``.
    """
    cm = CellMoments(S, q)
    Z = cm.integral()
    B = cm.integral(boundary=True)
    Q = cm.integral(g=cm.z_vol - cm.shift)
    return Z, B, Q, cm.shift


def _state_moments(S, u: State):
    """``(int u log u d mu, int_bdry u d sigma)`` for any state."""
    if isinstance(u, ExpState) and _is_cellwise(u.q):
        Z, B, Q, _ = _exp_moments(S, u.q)
        # u = V0 e^p / int e^p, so int u log u = V0 (<p> - log(int e^p / V0))
        V0 = S.volume
        return V0 * (Q / Z - (math.log(Z) - math.log(V0))), V0 * B / Z
    if isinstance(u, MixtureState):
        bdry = sum(w * _state_moments(S, s)[1] for w, s in zip(u.weights, u.states))
        ulogu = u.integrate(lambda x, v: v * np.log(v), order=12)
        return ulogu, bdry
    # smooth states
    pts, wts, bp, bw = refined_nodes(S)
    lu = u.log_density(pts)
    return float(wts @ (np.exp(lu) * lu)), float(bw @ u.density(bp))


def entropy(S: ToricSystem, u: State) -> float:
    """``-(1/int d mu) int u log u d mu``, always ``<= 0``."""
    return -_state_moments(S, u)[0] / S.volume


def internal_energy(S: ToricSystem, u: State) -> float:
    """``(1/int d mu) int_bdry u d sigma``."""
    return _state_moments(S, u)[1] / S.volume


def free_energy(S: ToricSystem, T: float, u: State) -> float:
    """``U - T S``."""
    ulogu, bdry = _state_moments(S, u)
    U = bdry / S.volume
    if T == 0:
        return U
    Sv = -ulogu / S.volume
    if Sv == -math.inf:
        return math.inf
    return U - T * Sv


def sigma(S: ToricSystem, q) -> float:
    """``int (n + q) e^q / int e^q - log int e^q``."""
    Z, _, Q, _ = _exp_moments(S, q)
    return S.dim + Q / Z - math.log(Z)


def na_mu(S: ToricSystem, q) -> float:
    """``-2 pi int_bdry e^q d sigma / int_P e^q d mu``."""
    Z, B, _, _ = _exp_moments(S, q)
    return -TWO_PI * B / Z


def na_mu_lambda(S: ToricSystem, lam: float, q) -> float:
    Z, B, Q, _ = _exp_moments(S, q)
    sig = S.dim + Q / Z - math.log(Z)
    return -TWO_PI * B / Z + lam * sig


def _as_terms(q):
    if _is_cellwise(q):
        return q.terms
    raise TypeError(f"expected a piecewise affine function, got {type(q).__name__}")


def futaki(S: ToricSystem, lam: float, xi, q) -> float:
    """The ``mu^lambda_xi``-Futaki invariant of ``q``.

    ``(2 pi int_bdry q e^xi - lam int q xi e^xi) / int e^xi - sbar int q e^xi / int e^xi``
    with ``sbar = (2 pi int_bdry e^xi - lam int xi e^xi) / int e^xi``.  Linear in ``q``
    and blind to constants.
    """
    terms = _as_terms(q)
    lin = linear_from_vector(np.broadcast_to(np.asarray(xi, dtype=float), (S.dim,)))
    cm = CellMoments(S, lin, extra=[t[1] for t in terms])
    qv = sum(c * cm.weight(i) for i, (c, _) in enumerate(terms))
    qb = sum(c * cm.weight(i, boundary=True) for i, (c, _) in enumerate(terms))
    Z = cm.integral()
    xv = cm.z_vol
    s_bar = (TWO_PI * cm.integral(boundary=True) - lam * cm.integral(g=xv)) / Z
    num = TWO_PI * cm.integral(g=qb, boundary=True) - lam * cm.integral(g=qv, h=xv)
    return num / Z - s_bar * cm.integral(g=qv) / Z


def donaldson_futaki(S: ToricSystem, q) -> float:
    """``(2 pi / V) (int_bdry q d sigma - (|bdry| / V) int_P q d mu)``."""
    return futaki(S, 0.0, np.zeros(S.dim), q)


def fut_exp_identity_check(S: ToricSystem, xi, q, order: int = 14) -> float:
    """Residual of the identity expressing ``Fut_xi(e^{q - xi})`` through ``na_mu``.

    The left side integrates ``e^{q - xi}`` by Gauss rules on the cells of ``q``;
    the right side uses the exact exponential moments.
    """
    xi = np.broadcast_to(np.asarray(xi, dtype=float), (S.dim,))
    lin = linear_from_vector(xi)
    cd = CellDecomposition(S, [q, lin])

    def f(x):
        return np.exp(q(x) - x @ xi)

    def weighted(x):
        return f(x) * np.exp(x @ xi)

    Zxi = cd.integrate(lambda x: np.exp(x @ xi), order)
    if S.dim == 1:
        bpts = cd.bdry_simplices[:, 0, :]
        Bxi = float(cd.bdry_weights @ np.exp(bpts @ xi))
        Bf = float(cd.bdry_weights @ weighted(bpts))
    else:
        Bxi = cd.integrate(lambda x: np.exp(x @ xi), order, boundary=True)
        Bf = cd.integrate(weighted, order, boundary=True)
    s_bar = TWO_PI * Bxi / Zxi
    lhs = TWO_PI * Bf / Zxi - s_bar * cd.integrate(weighted, order) / Zxi
    Zq, _, _, shift = _exp_moments(S, q)
    log_zq = math.log(Zq) + shift
    rhs = math.exp(log_zq - math.log(Zxi)) * (na_mu(S, lin) - na_mu(S, q))
    return abs(lhs - rhs)


@dataclass(frozen=True)
class FunctionalReport:
    T: float
    lam: float
    S: float
    U: float
    F: float
    na_mu: float
    sigma: float
    na_mu_lambda: float

    def row(self):
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return [d[c] for c in REPORT_COLUMNS]

    def to_dict(self):
        return dict(zip(REPORT_COLUMNS, self.row()))


def report(S: ToricSystem, q, T: float | None = None, lam: float | None = None) -> FunctionalReport:
    """All functionals of ``u(q)`` at one temperature (give ``T`` or ``lam``)."""
    if (T is None) == (lam is None):
        raise ValueError("give exactly one of T and lam")
    if T is None:
        T = temperature(lam)
    else:
        lam = lam_from_temperature(T)
    if _is_cellwise(q):
        Z, B, Q, _ = _exp_moments(S, q)
        U = B / Z
        ent = -(Q / Z) + math.log(Z) - math.log(S.volume)
        sig = S.dim + Q / Z - math.log(Z)
    else:
        u = normalize(S, q)
        ulogu, bdry = _state_moments(S, u)
        U = bdry / S.volume
        ent = -ulogu / S.volume
        sig = -ent - log_exp_minus_n(S)
    F = U - T * ent
    mu = -TWO_PI * U
    return FunctionalReport(T=T, lam=lam, S=ent, U=U, F=F, na_mu=mu, sigma=sig,
                            na_mu_lambda=mu + lam * sig)


def state_report(S: ToricSystem, u: State, T: float) -> FunctionalReport:
    """Report for an arbitrary state; sigma uses its entropy identity."""
    ulogu, bdry = _state_moments(S, u)
    U = bdry / S.volume
    ent = -ulogu / S.volume
    lam = lam_from_temperature(T)
    sig = -ent - log_exp_minus_n(S)
    mu = -TWO_PI * U
    return FunctionalReport(T=T, lam=lam, S=ent, U=U, F=U - T * ent, na_mu=mu, sigma=sig,
                            na_mu_lambda=mu + lam * sig)
