"""End-to-end acceptance criteria; each test prints one PASS/FAIL line."""
import math
import time

import numpy as np
import pytest

import oracles
from conftest import interior_points
from muentropy import blowup, estimates
from muentropy import functionals as fn
from muentropy import thermo
from muentropy.convexfn import constant, linear_from_vector, mixture, normalize
from muentropy.estimates import l1_distance, random_pa
from muentropy.optimizer import SolverConfig, Surrogate, canonical_distribution, optimize_vector
from muentropy.polytope import blowup_cp2, segment, square, unit_square
from muentropy.quadrature import refined_nodes

pytestmark = pytest.mark.slow


def _verdict(capsys, number, title, ok, detail):
    with capsys.disabled():
        print(f"\n[criterion {number}] {'PASS' if ok else 'FAIL'} {title}: {detail}")
    assert ok, detail


def test_criterion_1_closed_forms(capsys):
    t0 = time.perf_counter()
    rows = blowup.curve_table()
    elapsed = time.perf_counter() - t0
    err = max(r[-1] for r in rows)
    ok = len(rows) == 601 and err <= 1e-8 and elapsed <= 30
    _verdict(capsys, 1, "closed-form reproduction", ok,
             f"{len(rows)} points, max rel err {err:.2e}, {elapsed:.1f}s")


def test_criterion_2_futaki_identity(capsys):
    rng = np.random.default_rng(2)
    systems = [blowup_cp2(), unit_square()]
    h = 1e-4
    worst = 0.0
    for k in range(50):
        S = systems[k % 2]
        lam = -rng.uniform(0.0, 4 * math.pi)
        xi = rng.normal(0.0, 0.5, S.dim)
        q = random_pa(S, rng)
        base = linear_from_vector(xi)
        fd = (fn.na_mu_lambda(S, lam, base + h * q) - fn.na_mu_lambda(S, lam, base - h * q)) / (2 * h)
        fut = fn.futaki(S, lam, xi, q)
        worst = max(worst, abs(fd + fut) / abs(fut))
    df = fn.donaldson_futaki(systems[0], linear_from_vector([1.0, 1.0]))
    df_err = abs(df - oracles.DF_ETA)
    ok = worst <= 1e-5 and df_err <= 1e-8
    _verdict(capsys, 2, "Futaki derivative identity", ok,
             f"50 samples worst rel err {worst:.2e}; DF(eta)={df:.15f} (err {df_err:.1e})")


def test_criterion_3_optimizer_cross_validation(capsys):
    t0 = time.perf_counter()
    S = blowup_cp2()
    cfg = SolverConfig()
    parts, ok = [], True
    for lam in (0.0, -2 * math.pi):
        xi, _ = optimize_vector(S, lam)
        ref = oracles.bl_x_lambda(lam)
        e = abs(xi[0] - ref)
        ok &= e <= 1e-4 and abs(xi[0] - xi[1]) <= 1e-8
        parts.append(f"x({lam:.3f})={xi[0]:.8f} vs {ref:.8f}")
    for T in (0.0, 1.0):
        xi, _ = optimize_vector(S, fn.lam_from_temperature(T))
        F_lin = fn.report(S, linear_from_vector(xi), T=T).F
        F_pa = canonical_distribution(S, T, cfg).report.F
        rel = abs(F_pa - F_lin) / abs(F_lin)
        ok &= rel <= 1e-3
        parts.append(f"F(T={T:g}) PA {F_pa:.8f} linear {F_lin:.8f} rel {rel:.1e}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed <= 300
    _verdict(capsys, 3, "optimizer cross-validation", ok, "; ".join(parts) + f"; {elapsed:.1f}s")


def test_criterion_4_semistable_baseline(capsys):
    cfg = SolverConfig()
    worst_l1, worst_F = 0.0, 0.0
    for S in (square(), segment()):
        trivial = fn.report(S, constant(0.0, S.dim), T=0.0)
        one = normalize(S, constant(0.0, S.dim))
        for T in (0.0, 1.0, 10.0):
            res = canonical_distribution(S, T, cfg)
            worst_l1 = max(worst_l1, l1_distance(S, res.u_star, one) / S.volume)
            worst_F = max(worst_F, abs(res.report.F - trivial.U))
    ok = worst_l1 <= 1e-2 and worst_F <= 1e-3
    _verdict(capsys, 4, "semistable baseline", ok,
             f"max L1/vol {worst_l1:.1e}, max |F - U(1)| {worst_F:.1e}")


def test_criterion_5_thermodynamics(capsys):
    t0 = time.perf_counter()
    S = blowup_cp2()
    cfg = SolverConfig()
    curve = thermo.CanonicalCurve(S, cfg)
    fam = thermo.canonical_family(S, [0.0, 0.5, 1.0, 2.0, 5.0, 20.0], cfg, curve=curve)
    c = fam.checks
    fam_ok = c["U_nondecreasing"] and c["S_nondecreasing"] and c["F_concave"]
    prod = thermo.product_canonical_check(S, segment(), 1.0, cfg)
    prod_ok = prod["F_residual"] <= 10 * cfg.f_tol
    T_R = 1.0
    u_probe = curve(0.5).u_star
    hb = thermo.heat_bath_experiment(S, S, fn.internal_energy(S, u_probe), T_R,
                                     [1, 2, 4, 8, 16, 32], u_probe, cfg, curve=curve)
    gaps = np.abs(hb.T_N - T_R)
    hb_rel = abs(hb.dS_N[-1] - hb.limit) / abs(hb.limit)
    hb_ok = bool(np.all(np.diff(gaps) < 0)) and hb_rel <= 0.05
    elapsed = time.perf_counter() - t0
    ok = fam_ok and prod_ok and hb_ok and elapsed <= 900
    _verdict(capsys, 5, "thermodynamic structure", ok,
             f"family {fam_ok} (max 2nd diff {c['max_second_difference']:.1e}); "
             f"product F residual {prod['F_residual']:.1e}; heat bath gaps "
             f"{gaps[0]:.3g}->{gaps[-1]:.3g}, dS_32 vs limit rel {hb_rel:.3f}; {elapsed:.0f}s")


def test_criterion_6_estimates(capsys):
    rng = np.random.default_rng(6)
    bl, sq, seg = blowup_cp2(), square(), segment()
    violations = 0
    for k in range(1000):
        S = (bl, sq)[k % 2]
        u = random_pa(S, rng)
        x = interior_points(S, rng, 1, margin=0.01)[0]
        lhs, rhs = estimates.mean_value_check(S, u, x)
        violations += lhs > rhs * (1 + 1e-9)
    finite, bound_ok, notes = True, True, []
    for name, S in (("bl", bl), ("square", sq), ("segment", seg)):
        pr = estimates.poincare_probe(S, trials=200, seed=0)
        finite &= bool(np.all(np.isfinite(pr.ratios)))
        eb = estimates.entropy_bound_check(S, pr.sup_ratio, trials=200, seed=1)
        bound_ok &= eb.violations == eb.binding
        notes.append(f"{name} C={pr.sup_ratio:.4g} viol={eb.violations}")
    ok = violations == 0 and finite and bound_ok
    _verdict(capsys, 6, "estimates suite", ok,
             f"mean-value violations {violations}/1000; Poincare finite {finite}; " + ", ".join(notes))


def test_criterion_7_invariants(capsys):
    rng = np.random.default_rng(7)
    S = blowup_cp2()
    L = fn.log_exp_minus_n(S)
    gauge = logconv = affine = ident = 0.0
    min_margin = math.inf
    for k in range(20):
        q0, q1 = random_pa(S, rng), random_pa(S, rng)
        c = rng.uniform(-20, 20)
        X = interior_points(S, rng, 50)
        gauge = max(gauge, np.max(np.abs(normalize(S, q0.shift(c))(X) - normalize(S, q0)(X))))
        u0, u1 = normalize(S, q0), normalize(S, q1)
        t = rng.uniform(0.1, 0.9)
        ut = mixture(u0, u1, t)
        # sampled midpoint log-convexity, 50 pairs per mixture
        x, y = interior_points(S, rng, 50), interior_points(S, rng, 50)
        ratio = ut((x + y) / 2) ** 2 / (ut(x) * ut(y))
        logconv = max(logconv, float(ratio.max()))
        U0, U1 = fn.internal_energy(S, u0), fn.internal_energy(S, u1)
        affine = max(affine, abs(fn.internal_energy(S, ut) - (1 - t) * U0 - t * U1) / abs(U0))
        half = mixture(u0, u1, 0.5)
        min_margin = min(min_margin, fn.entropy(S, half) - (fn.entropy(S, u0) + fn.entropy(S, u1)) / 2)
        T = rng.uniform(0, 5)
        r = fn.report(S, q0, T=T)
        ident = max(ident,
                    abs(r.sigma + r.S + L),
                    abs(r.na_mu + 2 * math.pi * r.U) / abs(r.na_mu),
                    abs(r.na_mu_lambda - (-2 * math.pi * r.F - r.lam * L)) / abs(r.na_mu_lambda))
    # log-convexity: 1000 pairs in total
    for k in range(19):
        q0, q1 = random_pa(S, rng), random_pa(S, rng)
        ut = mixture(normalize(S, q0), normalize(S, q1), rng.uniform(0.05, 0.95))
        x, y = interior_points(S, rng, 50), interior_points(S, rng, 50)
        logconv = max(logconv, float((ut((x + y) / 2) ** 2 / (ut(x) * ut(y))).max()))
    nodes = refined_nodes(S, 2, 6)
    grad = 0.0
    for k in range(20):
        obj = Surrogate(S, rng.uniform(0, 2), 3, 16.0, nodes)
        theta = rng.normal(0, 0.5, 9)
        _, g = obj.value_and_grad(theta)
        step = 1e-5
        fd = np.array([(obj.value(theta + step * e) - obj.value(theta - step * e)) / (2 * step)
                       for e in np.eye(9)])
        grad = max(grad, np.max(np.abs(g - fd)) / np.max(np.abs(fd)))
    ok = (gauge <= 1e-12 and logconv <= 1 + 1e-9 and min_margin > 0 and affine <= 1e-9
          and ident <= 1e-9 and grad <= 1e-4)
    _verdict(capsys, 7, "invariant suite", ok,
             f"gauge {gauge:.1e}, log-convexity max ratio-1 {logconv - 1:.1e}, "
             f"min concavity margin {min_margin:.2e}, U-affinity {affine:.1e}, "
             f"identities {ident:.1e}, gradient rel err {grad:.1e}")
