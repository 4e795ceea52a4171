"""Canonical families, equilibria, composite systems and heat-bath limits."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import functionals as fn
from .convexfn import State, constant, normalize
from .exceptions import NegativeHeatCapacity, OutOfRange
from .optimizer import OptResult, SolverConfig, canonical_distribution
from .polytope import ToricSystem, product

T_MAX = 1e6


class CanonicalCurve:
    """Memoized ``T -> u_T^can`` with warm starts from the nearest solved temperature."""

    def __init__(self, S: ToricSystem, cfg: SolverConfig = SolverConfig()):
        self.S = S
        self.cfg = cfg
        self._cache: dict[float, OptResult] = {}

    def __call__(self, T: float) -> OptResult:
        T = float(T)
        if T not in self._cache:
            warm = None
            if self._cache:
                near = min(self._cache, key=lambda t: abs(t - T))
                warm = self._cache[near].q_star
            self._cache[T] = canonical_distribution(self.S, T, self.cfg, warm=warm)
        return self._cache[T]

    def U(self, T):
        return self(T).report.U

    def entropy(self, T):
        return self(T).report.S

    def F(self, T):
        return self(T).report.F

    @property
    def U_trivial(self):
        return self.S.boundary_measure / self.S.volume


@dataclass
class CanonicalFamily:
    T_grid: np.ndarray
    results: list = field(repr=False)
    U: np.ndarray = None
    S: np.ndarray = None
    F: np.ndarray = None
    checks: dict = None

    def rows(self):
        return [[t, u, s, f] for t, u, s, f in zip(self.T_grid, self.U, self.S, self.F)]


def family_checks(T, U, S, F, slack):
    """Monotonicity of U and S, concavity and monotonicity of F."""
    T = np.asarray(T, dtype=float)
    second = []
    for i in range(1, len(T) - 1):
        w = (T[i + 1] - T[i]) / (T[i + 1] - T[i - 1])
        second.append((w * F[i - 1] + (1 - w) * F[i + 1]) - F[i])
    second = np.array(second)
    return {
        "U_nondecreasing": bool(np.all(np.diff(U) >= -slack)),
        "S_nondecreasing": bool(np.all(np.diff(S) >= -slack)),
        "F_concave": bool(np.all(second <= slack)) if len(second) else True,
        "F_nondecreasing": bool(np.all(np.diff(F) >= -slack)),
        "max_second_difference": float(second.max()) if len(second) else 0.0,
    }


def canonical_family(S: ToricSystem, T_grid, cfg: SolverConfig = SolverConfig(),
                     curve: CanonicalCurve | None = None) -> CanonicalFamily:
    """Warm-started sweep of canonical distributions over an increasing grid."""
    T = np.asarray(T_grid, dtype=float)
    if np.any(T < 0) or np.any(np.diff(T) <= 0):
        raise ValueError("T_grid must be nonnegative and increasing")
    curve = curve or CanonicalCurve(S, cfg)
    results = [curve(t) for t in T]
    U = np.array([r.report.U for r in results])
    Sv = np.array([r.report.S for r in results])
    F = np.array([r.report.F for r in results])
    checks = family_checks(T, U, Sv, F, 2 * cfg.f_tol)
    checks["F_gap_to_trivial_at_max_T"] = float(curve.U_trivial - F[-1])
    checks["TS_at_max_T"] = float(T[-1] * Sv[-1])
    return CanonicalFamily(T, results, U, Sv, F, checks)


# -- equilibria --------------------------------------------------------------


@dataclass
class EquilibriumResult:
    U_target: float
    T_interval: tuple
    u_eq: State
    U_achieved: float

    @property
    def T(self):
        lo, hi = self.T_interval
        return hi if lo == hi else math.sqrt(max(lo, 1e-300) * hi) if lo > 0 else lo


def equilibrium_of_energy(S: ToricSystem, U_target: float, cfg: SolverConfig = SolverConfig(),
                          tol: float = 1e-6, curve: CanonicalCurve | None = None) -> EquilibriumResult:
    """Temperature bracket and state of the equilibrium with internal energy ``U_target``."""
    curve = curve or CanonicalCurve(S, cfg)
    U_top = curve.U_trivial
    U_min = curve.U(0.0)
    trivial = normalize(S, constant(0.0, S.dim))
    if U_target > U_top + tol or U_target < U_min - tol:
        raise OutOfRange(f"U={U_target} outside [{U_min}, {U_top}]")
    if U_top - U_min <= tol:
        # semistable: the trivial state is canonical at every temperature
        return EquilibriumResult(U_target, (0.0, T_MAX), trivial, U_top)
    if U_target >= U_top - tol:
        return EquilibriumResult(U_target, (T_MAX, T_MAX), trivial, U_top)
    if U_target <= U_min + tol:
        r = curve(0.0)
        return EquilibriumResult(U_target, (0.0, 0.0), r.u_star, r.report.U)
    lo, hi = 0.0, 1.0
    while curve.U(hi) < U_target:
        lo, hi = hi, hi * 4.0
        if hi > T_MAX:
            return EquilibriumResult(U_target, (lo, T_MAX), trivial, U_top)
    if lo == 0.0:
        lo = hi
        while curve.U(lo) > U_target and lo > 1e-8:
            hi, lo = lo, lo / 4.0
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        Um = curve.U(mid)
        if abs(Um - U_target) <= tol or hi / lo - 1.0 < 1e-12:
            r = curve(mid)
            return EquilibriumResult(U_target, (mid, mid), r.u_star, Um)
        if Um < U_target:
            lo = mid
        else:
            hi = mid
    r = curve(hi)
    return EquilibriumResult(U_target, (lo, hi), r.u_star, r.report.U)


@dataclass
class IsothermalVerdict:
    isothermal: bool
    interval1: tuple
    interval2: tuple
    product_residual: float | None = None


def _overlap(a, b, tol):
    return max(a[0], b[0]) <= min(a[1], b[1]) + tol * max(1.0, abs(a[1]), abs(b[1]))


def isothermal_check(S1, U1, S2, U2, cfg: SolverConfig = SolverConfig(), tol=1e-3,
                     verify_product=False) -> IsothermalVerdict:
    """Whether two systems at given internal energies share an equilibrium temperature."""
    e1 = equilibrium_of_energy(S1, U1, cfg)
    e2 = equilibrium_of_energy(S2, U2, cfg)
    iso = _overlap(e1.T_interval, e2.T_interval, tol)
    resid = None
    if iso and verify_product:
        T = max(e1.T_interval[0], e2.T_interval[0])
        if T < T_MAX:
            resid = product_canonical_check(S1, S2, T, cfg)["F_residual"]
    return IsothermalVerdict(iso, e1.T_interval, e2.T_interval, resid)


# -- composite systems ---------------------------------------------------------


def product_state_l1(S1, u1, S2, u2, S12, u12, levels=2, order=6):
    """``(1/vol) int |u12(x, y) - u1(x) u2(y)|`` on Gauss nodes of the product."""
    from .quadrature import refined_nodes

    pts, wts, _, _ = refined_nodes(S12, levels, order)
    n1 = S1.dim
    diff = np.abs(u12(pts) - u1(pts[:, :n1]) * u2(pts[:, n1:]))
    return float(wts @ diff) / S12.volume


def product_canonical_check(S1: ToricSystem, S2: ToricSystem, T: float,
                            cfg: SolverConfig = SolverConfig()) -> dict:
    """Residuals of F-additivity and of the product form of the composite canonical state."""
    r1 = canonical_distribution(S1, T, cfg)
    r2 = canonical_distribution(S2, T, cfg)
    S12 = product(S1, S2)
    r12 = canonical_distribution(S12, T, cfg)
    return {
        "F1": r1.report.F, "F2": r2.report.F, "F12": r12.report.F,
        "F_residual": abs(r12.report.F - r1.report.F - r2.report.F),
        "L1_residual": product_state_l1(S1, r1.u_star, S2, r2.u_star, S12, r12.u_star),
    }


def composite_temperature(c1: CanonicalCurve, c2: CanonicalCurve, U_total: float):
    """Equilibrium temperature of the composite at total energy ``U_total`` (via additivity)."""
    def g(T):
        return c1.U(T) + c2.U(T) - U_total

    lo, hi = 1e-8, 1.0
    if g(0.0) >= 0:
        return 0.0
    while g(hi) < 0:
        lo, hi = hi, hi * 4
        if hi > T_MAX:
            return T_MAX
    return brentq(g, lo, hi, xtol=1e-10, rtol=1e-10)


def medium_temperature_check(S1, U1, S2, U2, cfg: SolverConfig = SolverConfig()):
    """``(T1, T12, T2)`` with the composite temperature in the middle for non-isothermal pairs."""
    c1, c2 = CanonicalCurve(S1, cfg), CanonicalCurve(S2, cfg)
    T1 = equilibrium_of_energy(S1, U1, cfg, curve=c1).T
    T2 = equilibrium_of_energy(S2, U2, cfg, curve=c2).T
    T12 = composite_temperature(c1, c2, U1 + U2)
    lo, hi = min(T1, T2), max(T1, T2)
    return {"T1": T1, "T12": T12, "T2": T2, "between": bool(lo < T12 < hi)}


def superadditivity_check(S1, U1, S2, U2, cfg: SolverConfig = SolverConfig()):
    """``S^eq_12(U1 + U2) - S^eq_1(U1) - S^eq_2(U2)`` (nonnegative up to solver slack)."""
    c1, c2 = CanonicalCurve(S1, cfg), CanonicalCurve(S2, cfg)
    s1 = fn.entropy(S1, equilibrium_of_energy(S1, U1, cfg, curve=c1).u_eq)
    s2 = fn.entropy(S2, equilibrium_of_energy(S2, U2, cfg, curve=c2).u_eq)
    T12 = composite_temperature(c1, c2, U1 + U2)
    s12 = c1.entropy(T12) + c2.entropy(T12)
    return s12 - s1 - s2


# -- heat bath -------------------------------------------------------------------


@dataclass
class HeatBathResult:
    N: np.ndarray
    T_N: np.ndarray
    dS_N: np.ndarray
    limit: float
    T_R: float

    def rows(self):
        return [[int(n), t, d] for n, t, d in zip(self.N, self.T_N, self.dS_N)]


def heat_capacity(S: ToricSystem, T: float, dT: float, cfg: SolverConfig = SolverConfig(),
                  curve: CanonicalCurve | None = None) -> float:
    """``T dS_can/dT`` by central differences."""
    if T <= 0 or dT <= 0 or dT >= T:
        raise ValueError("need 0 < dT < T")
    curve = curve or CanonicalCurve(S, cfg)
    return T * (curve.entropy(T + dT) - curve.entropy(T - dT)) / (2 * dT)


def heat_bath_experiment(S: ToricSystem, S_R: ToricSystem, U: float, T_R: float, N_list,
                         u_probe: State, cfg: SolverConfig = SolverConfig(),
                         curve: CanonicalCurve | None = None,
                         curve_R: CanonicalCurve | None = None) -> HeatBathResult:
    """Equilibrium temperature and entropy gain of ``S`` coupled to ``N`` reservoir copies.

    Solves ``U_S(T_N) + N U_R(T_N) = U + N U_R(T_R)`` with per-factor canonical
    curves, then tabulates ``dS_N = S_S(T_N) + N S_R(T_N) - S(u_probe) - N S_R(T_R)``.
    """
    if T_R <= 0:
        raise ValueError("reservoir temperature must be positive")
    curve = curve or CanonicalCurve(S, cfg)
    curve_R = curve_R or (curve if S_R is S else CanonicalCurve(S_R, cfg))
    dT = 0.05 * T_R
    slope = (curve_R.U(T_R + dT) - curve_R.U(T_R - dT)) / (2 * dT)
    if slope <= 10 * cfg.f_tol / dT:
        raise NegativeHeatCapacity(f"reservoir dU/dT = {slope:.3e} at T_R={T_R}")
    U_R = curve_R.U(T_R)
    S_R0 = curve_R.entropy(T_R)
    S_probe = fn.entropy(S, u_probe)
    F_inf = curve.F(T_R)
    F_probe = fn.free_energy(S, T_R, u_probe)
    limit = -(F_inf - F_probe) / T_R
    Ts, dSs = [], []
    for N in N_list:
        def g(T):
            return curve.U(T) + N * curve_R.U(T) - U - N * U_R

        g0 = g(T_R)
        if abs(g0) <= cfg.f_tol:
            T_N = T_R
        else:
            # g is increasing; bracket on the side indicated by g(T_R)
            step = 0.5 * T_R
            a = T_R
            while True:
                b = a - step if g0 > 0 else a + step
                b = max(b, 1e-9)
                if np.sign(g(b)) != np.sign(g0) or b <= 1e-9:
                    break
                a, step = b, step * 2
            T_N = brentq(g, min(a, b), max(a, b), xtol=1e-12, rtol=1e-12)
        Ts.append(T_N)
        dSs.append(curve.entropy(T_N) + N * curve_R.entropy(T_N) - S_probe - N * S_R0)
    return HeatBathResult(np.asarray(N_list), np.array(Ts), np.array(dSs), float(limit), T_R)
