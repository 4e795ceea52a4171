"""Closed forms for the one-point blow-up of CP^2 along the diagonal vector eta = (1, 1)."""
from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache

import numpy as np

from . import functionals as fn
from .convexfn import linear_from_vector
from .polytope import ToricSystem, blowup_cp2
from .quadrature import CellDecomposition, simplex_exp_integrals

SERIES_RADIUS = 1e-3
SERIES_TERMS = 12
ETA = (1.0, 1.0)
X_LAMBDA_TABLE = (0.0, -0.25, -0.5, -1.0)  # values of lambda / 2 pi


@lru_cache(maxsize=None)
def _series(poly_minus, poly_plus, power):
    """Taylor coefficients of ``(p(x) e^{-x} + r(x) e^{x}) / x^power``.

    ``poly_minus`` and ``poly_plus`` list integer polynomial coefficients from
    degree 0 upward.  The numerator must vanish to order ``power``.
    """
    top = SERIES_TERMS + power + len(poly_minus) + len(poly_plus)
    num = [Fraction(0)] * top
    for poly, sign in ((poly_minus, -1), (poly_plus, 1)):
        for d, a in enumerate(poly):
            for k in range(top - d):
                num[d + k] += Fraction(a) * Fraction(sign**k, math.factorial(k))
    if any(num[:power]):
        raise ValueError("numerator does not vanish to the stated order")
    return tuple(float(c) for c in num[power:power + SERIES_TERMS])


def _closed(x, poly_minus, poly_plus, power):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = np.abs(x) <= SERIES_RADIUS
    coef = _series(poly_minus, poly_plus, power)
    xs = x[small]
    out[small] = sum(c * xs**k for k, c in enumerate(coef))
    xb = x[~small]
    pm = np.polyval(poly_minus[::-1], xb)
    pp = np.polyval(poly_plus[::-1], xb)
    out[~small] = (pm * np.exp(-xb) + pp * np.exp(xb)) / xb**power
    return out


def volume_integral(x):
    """``int_P e^{x <eta>} d mu = ((1 - x) e^{-x} + (3x - 1) e^x) / x^2``."""
    return _closed(x, (1, -1), (-1, 3), 2)


def boundary_integral(x):
    """``int_{dP} e^{x <eta>} d sigma = -((2 - x) e^{-x} - (3x + 2) e^x) / x``."""
    return _closed(x, (-2, 1), (2, 3), 1)


def weighted_integral(x):
    """``int_P x <eta> e^{x <eta>} d mu = ((x^2 - 2) e^{-x} + (3x^2 - 4x + 2) e^x) / x^2``."""
    return _closed(x, (-2, 0, 1), (2, -4, 3), 2)


def na_mu_closed(x):
    return -2 * math.pi * boundary_integral(x) / volume_integral(x)


def sigma_closed(x):
    V = volume_integral(x)
    return 2.0 + weighted_integral(x) / V - np.log(V)


class DiagonalMoments:
    """Exact-kernel moments of ``e^{x <eta>}`` on a system, reusing one triangulation."""

    def __init__(self, S: ToricSystem | None = None, eta=ETA):
        self.S = S or blowup_cp2()
        q = linear_from_vector(eta)
        cd = CellDecomposition(self.S, [q])
        self.cd = cd
        self.ev = cd.vertex_values(0)
        self.eb = cd.vertex_values(0, boundary=True)

    def __call__(self, x):
        """``(volume, boundary, weighted)`` integrals at ``x``."""
        cd = self.cd
        zv, zb = x * self.ev, x * self.eb
        vol = float(np.sum(simplex_exp_integrals(zv, cd.vol_weights)))
        bdry = float(np.sum(simplex_exp_integrals(zb, cd.bdry_weights)))
        w = float(np.sum(simplex_exp_integrals(zv, cd.vol_weights, g=zv)))
        return vol, bdry, w


def lambda_of_x(x, S: ToricSystem | None = None, eta=ETA):
    """The ``lambda`` making ``x eta`` critical, from ``Fut^lambda_{x eta}(<eta>) = 0``.

    Fut is affine in lambda, so two evaluations determine the root.
    """
    S = S or blowup_cp2()
    q = linear_from_vector(eta)
    xi = x * np.asarray(eta, dtype=float)
    f0 = fn.futaki(S, 0.0, xi, q)
    f1 = fn.futaki(S, 1.0, xi, q)
    slope = f1 - f0
    return math.inf if slope == 0 else -f0 / slope


def x_lambda(lam, S: ToricSystem | None = None):
    """Diagonal coordinate of the optimal vector at ``lam``."""
    from .optimizer import optimize_vector

    S = S or blowup_cp2()
    xi, _ = optimize_vector(S, lam)
    return float(xi[0])


def curve_table(xs=None):
    """Rows comparing exact quadrature against the closed forms."""
    if xs is None:
        xs = np.round(np.linspace(-3.0, 3.0, 601), 12)
    dm = DiagonalMoments()
    cv, cb, cw = volume_integral(xs), boundary_integral(xs), weighted_integral(xs)
    rows = []
    for x, v_c, b_c, w_c in zip(xs, cv, cb, cw):
        v, b, w = dm(x)
        mu_q, mu_c = -2 * math.pi * b / v, -2 * math.pi * b_c / v_c
        s_q, s_c = 2 + w / v - math.log(v), 2 + w_c / v_c - math.log(v_c)
        pairs = ((v, v_c), (b, b_c), (w, w_c), (mu_q, mu_c), (s_q, s_c))
        err = max(relative_error(a, c) for a, c in pairs)
        rows.append([x, v, v_c, b, b_c, w, w_c, mu_q, mu_c, s_q, s_c, err])
    return rows


CURVE_COLUMNS = ("x", "volume_quad", "volume_closed", "boundary_quad", "boundary_closed",
                 "weighted_quad", "weighted_closed", "na_mu_quad", "na_mu_closed",
                 "sigma_quad", "sigma_closed", "max_rel_err")


def relative_error(a, b):
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0 else abs(a - b) / scale
