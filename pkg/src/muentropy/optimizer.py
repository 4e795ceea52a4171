"""Minimization of the free mu-energy over PA states, and the linear-vector solver."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp, softmax

from . import functionals as fn
from .convexfn import (
    ExpState, PiecewiseAffineConvex, constant, linear_from_vector, normalize,
)
from .estimates import parallel_map, random_pa
from .exceptions import NoConvergence
from .polytope import ToricSystem
from .quadrature import refined_nodes


@dataclass(frozen=True)
class SolverConfig:
    """Settings for the PA free-energy solver.

    Parameters
    ----------
    pieces : int
        Largest number of affine pieces K.
    piece_schedule : tuple of int
        K values visited in order (capped at ``pieces``).
    sharpness_schedule : tuple of float
        Increasing log-sum-exp sharpness values per K stage.
    starts : int
        Number of independent starts; start 0 begins at the trivial state.
    """

    pieces: int = 10
    piece_schedule: tuple = (1, 3, 6, 10)
    sharpness_schedule: tuple = (4.0, 16.0, 64.0, 256.0)
    starts: int = 4
    step_tol: float = 1e-10
    grad_tol: float = 1e-9
    f_tol: float = 1e-6
    max_iters: int = 500
    seed: int = 0
    levels: int = 4
    order: int = 8
    penalty_schedule: tuple = (1e-2, 1e-3, 1e-4)

    def __post_init__(self):
        if self.pieces < 1:
            raise ValueError("pieces must be >= 1")
        s = self.sharpness_schedule
        if any(b <= a for a, b in zip(s, s[1:])) or min(s) <= 0:
            raise ValueError("sharpness schedule must be positive and increasing")
        for name in ("step_tol", "grad_tol", "f_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.starts < 1:
            raise ValueError("starts must be >= 1")

    @property
    def ks(self):
        ks = sorted({min(k, self.pieces) for k in self.piece_schedule} | {1})
        return tuple(ks)


@dataclass
class OptResult:
    q_star: PiecewiseAffineConvex
    u_star: ExpState
    report: fn.FunctionalReport
    converged: bool
    starts_agreement: float
    history: list = field(default_factory=list, repr=False)
    start_results: list = field(default_factory=list, repr=False)

    def to_dict(self):
        return {
            "q_star": self.q_star.to_dict(),
            "report": self.report.to_dict(),
            "converged": self.converged,
            "starts_agreement": self.starts_agreement,
            "history": self.history,
        }


# -- surrogate objective -----------------------------------------------------


class Surrogate:
    """``F(T, u(q_beta))`` on fixed Gauss nodes, with its exact gradient.

    ``q_beta`` is the log-sum-exp smoothing of ``max_k (A_k . x + b_k)``; the
    parameter vector is ``[A.ravel(), b]``.
    """

    def __init__(self, S: ToricSystem, T: float, K: int, beta: float, nodes=None,
                 levels=4, order=8):
        self.S, self.T, self.K, self.beta = S, float(T), K, float(beta)
        self.n = S.dim
        if nodes is None:
            nodes = refined_nodes(S, levels, order)
        self.pts, self.wts, self.bpts, self.bwts = nodes
        self.log_v0 = math.log(S.volume)

    def unpack(self, theta):
        A = theta[: self.K * self.n].reshape(self.K, self.n)
        return A, theta[self.K * self.n:]

    def pack(self, A, b):
        return np.concatenate([np.asarray(A, float).ravel(), np.asarray(b, float)])

    def _q(self, A, b, x):
        L = x @ A.T + b
        if self.K == 1:
            return L[:, 0], np.ones_like(L)
        return logsumexp(self.beta * L, axis=1) / self.beta, softmax(self.beta * L, axis=1)

    def parts(self, theta):
        """Return ``(U, S)`` of the smoothed state."""
        A, b = self.unpack(theta)
        qv, _ = self._q(A, b, self.pts)
        qb, _ = self._q(A, b, self.bpts)
        m = max(qv.max(), qb.max())
        ev = self.wts * np.exp(qv - m)
        Z = ev.sum()
        U = (self.bwts @ np.exp(qb - m)) / Z
        # mean of q - m, so large constants do not cancel
        ent = -(ev @ (qv - m)) / Z + math.log(Z) - self.log_v0
        return U, ent

    def value(self, theta):
        U, ent = self.parts(theta)
        return U - self.T * ent

    def value_and_grad(self, theta):
        A, b = self.unpack(theta)
        qv, Wv = self._q(A, b, self.pts)
        qb, Wb = self._q(A, b, self.bpts)
        m = max(qv.max(), qb.max())
        ev = self.wts * np.exp(qv - m)
        Z = ev.sum()
        pv = ev / Z
        pb = self.bwts * np.exp(qb - m) / Z
        U = pb.sum()
        mean_p = pv @ (qv - m)
        ent = -mean_p + math.log(Z) - self.log_v0
        F = U - self.T * ent
        # dF/dq at volume and boundary nodes
        cv = -U * pv + self.T * pv * (qv - m - mean_p)
        cb = pb
        gv = Wv * cv[:, None]
        gb = Wb * cb[:, None]
        gA = gv.T @ self.pts + gb.T @ self.bpts
        gb_ = gv.sum(axis=0) + gb.sum(axis=0)
        return F, self.pack(gA, gb_)


def recentre(q: PiecewiseAffineConvex) -> PiecewiseAffineConvex:
    """Gauge fix: shift constants so the largest one is 0."""
    return q.shift(-float(np.max(q.constants)))


def exact_free_energy(S, T, q):
    return fn.report(S, q, T=T).F


def _lbfgs(obj, theta0, cfg: SolverConfig, scale):
    res = minimize(lambda t: tuple(v / scale for v in obj.value_and_grad(t)), theta0,
                   jac=True, method="L-BFGS-B",
                   options={"maxiter": cfg.max_iters, "gtol": cfg.grad_tol,
                            "ftol": cfg.step_tol})
    return res.x, bool(res.success) or res.status == 0


def _grow(q: PiecewiseAffineConvex, K: int, rng, nodes):
    """Add pieces up to K, each a perturbed copy just below ``q``."""
    g, c = q.gradients, q.constants
    pts = np.vstack([nodes[0], nodes[2]])
    qv = q(pts)
    new_g, new_c = [g], [c]
    for _ in range(K - len(c)):
        a = g[rng.integers(len(c))] + rng.normal(0.0, 0.5, size=g.shape[1])
        new_g.append(a[None, :])
        new_c.append([float(np.min(qv - pts @ a)) - 0.05])
    return PiecewiseAffineConvex(np.vstack(new_g), np.concatenate(new_c))


def _solve_start(S, T, cfg: SolverConfig, rng, q0, nodes):
    scale = max(1.0, T)
    q = q0
    best_q, best_F = q, exact_free_energy(S, T, q)
    history = [{"K": q.n_pieces, "beta": None, "F": best_F}]
    converged = True
    for K in cfg.ks:
        if K < q.n_pieces:
            continue
        cand = _grow(best_q, K, rng, nodes) if K > best_q.n_pieces else best_q
        betas = (cfg.sharpness_schedule[-1],) if K == 1 else cfg.sharpness_schedule
        theta = None
        for beta in betas:
            obj = Surrogate(S, T, K, beta, nodes)
            if theta is None:
                theta = obj.pack(cand.gradients, cand.constants)
            theta, ok = _lbfgs(obj, theta, cfg, scale)
            converged &= ok
            A, b = obj.unpack(theta)
            b = b - b.max()
            theta = obj.pack(A, b)
        stage_q = recentre(PiecewiseAffineConvex(A, b))
        stage_F = exact_free_energy(S, T, stage_q)
        history.append({"K": K, "beta": betas[-1], "F": stage_F})
        if stage_F < best_F - cfg.f_tol:
            best_q, best_F = stage_q, stage_F
        elif K > 1:
            break
        elif stage_F < best_F:
            best_q, best_F = stage_q, stage_F
    return best_q, best_F, converged, history


def _initial(S, rng, index, warm=None):
    if warm is not None and index == 0:
        return warm
    if index == 0:
        return constant(0.0, S.dim)
    return linear_from_vector(rng.normal(0.0, 0.5, size=S.dim))


def _merge(S, T, outs):
    """Best by F, then by larger entropy."""
    def key(o):
        rep = fn.report(S, o[0], T=T)
        return (round(rep.F / max(1.0, abs(rep.F)), 12), -rep.S)

    return min(outs, key=key)


def minimize_free_energy(S: ToricSystem, T: float, cfg: SolverConfig = SolverConfig(),
                         warm: PiecewiseAffineConvex | None = None) -> OptResult:
    """Minimize ``F(T, u(q))`` over PA convex ``q`` with at most ``cfg.pieces`` pieces."""
    if T < 0:
        raise ValueError("temperature must be nonnegative")
    nodes = refined_nodes(S, cfg.levels, cfg.order)
    rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(cfg.starts)]

    def run(i):
        q0 = _initial(S, rngs[i], i, warm)
        return _solve_start(S, T, cfg, rngs[i], q0, nodes)

    outs = parallel_map(run, range(cfg.starts))
    Fs = np.array([o[1] for o in outs])
    best = _merge(S, T, outs)
    q = best[0]
    agreement = float(Fs.max() - Fs.min())
    return OptResult(q_star=q, u_star=normalize(S, q), report=fn.report(S, q, T=T),
                     converged=all(o[2] for o in outs), starts_agreement=agreement,
                     history=best[3], start_results=[(o[0], o[1]) for o in outs])


def canonical_distribution(S: ToricSystem, T: float, cfg: SolverConfig = SolverConfig(),
                           warm: PiecewiseAffineConvex | None = None) -> OptResult:
    """The minimizer of ``F(T, .)``; at ``T = 0`` the entropy-maximal minimizer of U.

    The zero-temperature selection solves the penalized problems ``F(eps, .)``
    for decreasing ``eps`` and keeps the most entropic solution whose internal
    energy stays within ``f_tol`` of the minimum.
    """
    res = minimize_free_energy(S, T, cfg, warm)
    if T > 0:
        return res
    U_min = res.report.U
    best = res
    q = res.q_star
    for eps in cfg.penalty_schedule:
        r = minimize_free_energy(S, eps, replace(cfg, starts=1), warm=q)
        q = r.q_star
        rep = fn.report(S, q, T=0.0)
        if rep.U <= U_min + cfg.f_tol and rep.S > best.report.S:
            best = OptResult(q_star=q, u_star=normalize(S, q), report=rep,
                             converged=r.converged, starts_agreement=res.starts_agreement,
                             history=res.history + r.history, start_results=res.start_results)
    return best


# -- linear solver -----------------------------------------------------------


def futaki_residual(S: ToricSystem, lam: float, xi) -> np.ndarray:
    """``(Fut^lam_xi(<e_i>))_i``; vanishes exactly at critical vectors."""
    eye = np.eye(S.dim)
    return np.array([fn.futaki(S, lam, xi, linear_from_vector(e)) for e in eye])


def optimize_vector(S: ToricSystem, lam: float, xi0=None, tol: float = 1e-8,
                    max_iters: int = 100, fd_step: float = 1e-6):
    """Critical vector of ``xi -> na_mu_lambda(<xi>)`` by damped Newton.

    Returns ``(xi, value)``.  Raises NoConvergence with the best iterate when
    the residual stays above ``tol``.
    """
    n = S.dim
    xi = np.zeros(n) if xi0 is None else np.asarray(xi0, dtype=float).copy()
    G = futaki_residual(S, lam, xi)
    best = (xi.copy(), float(np.linalg.norm(G)))
    for _ in range(max_iters):
        res = float(np.linalg.norm(G))
        if res <= tol:
            break
        J = np.empty((n, n))
        for j in range(n):
            e = np.zeros(n)
            e[j] = fd_step
            J[:, j] = (futaki_residual(S, lam, xi + e) - futaki_residual(S, lam, xi - e)) / (2 * fd_step)
        try:
            step = -np.linalg.solve(J, G)
        except np.linalg.LinAlgError:
            step = -np.linalg.lstsq(J, G, rcond=None)[0]
        t = 1.0
        while t > 1e-6:
            cand = xi + t * step
            Gc = futaki_residual(S, lam, cand)
            if np.linalg.norm(Gc) < res:
                break
            t *= 0.5
        xi, G = cand, Gc
        if np.linalg.norm(G) < best[1]:
            best = (xi.copy(), float(np.linalg.norm(G)))
    if best[1] > tol:
        raise NoConvergence(f"Futaki residual {best[1]:.3e} above {tol:.1e}", best=best)
    xi = best[0]
    return xi, fn.na_mu_lambda(S, lam, linear_from_vector(xi))


# -- semistability -----------------------------------------------------------


@dataclass
class Verdict:
    destabilized: bool
    witness: PiecewiseAffineConvex | None
    value: float
    evaluated: int

    def __str__(self):
        if self.destabilized:
            return f"destabilized(Fut={self.value:.6g})"
        return "no destabilizer found"


def destabilizer_battery(S: ToricSystem, levels=(0.25, 0.5, 0.75)):
    """Deterministic convex test functions: signed coordinates, coordinate maxima, facet hinges."""
    P = S.polytope
    out = []
    lo, hi = P.vertices.min(axis=0), P.vertices.max(axis=0)
    for i in range(S.dim):
        e = np.eye(S.dim)[i]
        out.append(linear_from_vector(e))
        out.append(linear_from_vector(-e))
        for t in levels:
            cut = lo[i] + t * (hi[i] - lo[i])
            out.append(PiecewiseAffineConvex([np.zeros(S.dim), e], [0.0, -cut]))
            out.append(PiecewiseAffineConvex([np.zeros(S.dim), -e], [0.0, cut]))
    for h in P.halfspaces:
        a = np.asarray(h.normal)
        vals = P.vertices @ a + h.offset
        for t in levels:
            tau = t * vals.max()
            out.append(PiecewiseAffineConvex([np.zeros(S.dim), -a], [0.0, tau - h.offset]))
            out.append(PiecewiseAffineConvex([np.zeros(S.dim), a], [0.0, h.offset - tau]))
    return out


def semistability_check(S: ToricSystem, lam: float, xi, trials: int = 200, seed=0,
                        threshold: float = -1e-8) -> Verdict:
    """Search for ``q`` with ``Fut^lam_xi(q) < threshold``; a miss is not a proof."""
    xi = np.broadcast_to(np.asarray(xi, dtype=float), (S.dim,))
    cands = destabilizer_battery(S)
    rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(trials)]
    cands += [random_pa(S, r) for r in rngs]
    best = (math.inf, None)
    for k, q in enumerate(cands, 1):
        v = fn.futaki(S, lam, xi, q)
        if v < best[0]:
            best = (v, q)
        if v < threshold:
            return Verdict(True, q, v, k)
    return Verdict(False, None, best[0], len(cands))


def directional_derivative(S: ToricSystem, T: float, q, p, h: float = 1e-6) -> float:
    """Forward difference of ``t -> F(T, u(q + t p))`` at 0 (convex ``p`` keeps ``q + t p`` convex)."""
    return (fn.report(S, q + h * p, T=T).F - fn.report(S, q, T=T).F) / h
