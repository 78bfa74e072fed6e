"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line."""

import time

import numpy as np
import pytest

from lagmc import Grid, ScalarField
from lagmc.experiments import config_from_string, run
from lagmc.phase import Constant, SampleRegion, gradient_conditions_check
from lagmc.potentials import Quadratic, Quartic
from lagmc.singular import (LogType, OddPower, TouchSpec, XPower, build, lipschitz_quotient,
                            ode_residual, viscosity_touch_test)
from lagmc.solver import flow_evolve, manufactured_problem, newton_solve
from lagmc.spectral import (conformality_trace_residual, ordered_eigen_properties_batch,
                            sample_supercritical, sigma_all)
from lagmc.transforms import (concavified_hessian_check, concavified_pd_batch, concavify_constant,
                              det_identity_residual, rotate_potential, rotated_hessian,
                              rotation_phase_shift_check, rotation_round_trip, sample_constrained,
                              sigma_floor_batch)


@pytest.fixture
def report(capsys):
    def emit(number, title, ok, elapsed, limit, detail=""):
        within = elapsed < limit
        status = "PASS" if ok and within else "FAIL"
        line = f"[{status}] criterion {number}: {title} ({elapsed:.1f}s, limit {limit:g}s)"
        if detail:
            line += f" | {detail}"
        with capsys.disabled():
            print("\n" + line)
        assert ok, line
        assert within, line
    return emit


def test_conformality_identity(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    worst = {}
    for n in range(1, 7):
        # uniform in angle covers tiny and huge eigenvalues alike
        lam = np.tan(rng.uniform(-np.pi / 2, np.pi / 2, size=(10_000, n)))
        worst[n] = float(conformality_trace_residual(lam, relative=True).max())
    elapsed = time.perf_counter() - t0
    ok = max(worst.values()) <= 1e-10
    report(1, "conformality trace identity, 1e4 tuples per n=1..6", ok, elapsed, 5,
           "max relative residual " + ", ".join(f"n={n}: {v:.1e}" for n, v in worst.items()))


def test_ordered_eigenvalue_properties(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    failures = {}
    for n in (3, 4, 5):
        props = ordered_eigen_properties_batch(sample_supercritical(rng, 100_000, n))
        assert props["applicable"].all()
        failures[n] = int(sum((~props[k]).sum() for k in
                              ("positive_upper", "balance", "sigma_nonnegative", "lambda_max_floor")))
    control = np.array([1.0, -1.0, -1.0])
    control_phase = np.arctan(control).sum()
    control_violates = control_phase < np.pi / 2 and bool((sigma_all(control)[1:3] < 0).any())
    elapsed = time.perf_counter() - t0
    ok = all(v == 0 for v in failures.values()) and control_violates
    report(2, "ordered eigenvalue properties, 1e5 supercritical tuples per n=3,4,5", ok, elapsed, 10,
           f"failures {failures}; subcritical control violates sigma_k >= 0: {control_violates}")


def test_singular_solutions(report):
    t0 = time.perf_counter()
    x = np.geomspace(1e-6, 0.9, 1002)[1:-1]
    families = [OddPower(4, 0), OddPower(4, 1), XPower(5, 0), LogType()]
    parts = []
    ok = True
    for fam in families:
        sol = build(fam)
        res = ode_residual(sol, x)
        quots = [lipschitz_quotient(sol, 10.0 ** -k) for k in range(2, 7)]
        if fam.alpha is not None:
            ratios = [q / 10.0 ** (k * (1 - fam.alpha)) for q, k in zip(quots, range(2, 7))]
            lip = all(0.5 <= r <= 2.0 for r in ratios)
            lip_text = f"lip ratios [{min(ratios):.3f}, {max(ratios):.3f}]"
        else:
            # no power law for the log family; the quotient must still grow without bound
            lip = bool(np.all(np.diff(quots) > 0))
            lip_text = f"lip quotients {quots[0]:.2f} -> {quots[-1]:.2f}"
        touch = viscosity_touch_test(sol, 0.0, TouchSpec())
        ok &= res <= 1e-10 and lip and not touch.any_touching
        parts.append(f"{fam}: res {res:.1e}, {lip_text}, touching {touch.above + touch.below}")
    elapsed = time.perf_counter() - t0
    report(3, "singular families: residual, Lipschitz blow-up, touch scan at 0", ok, elapsed, 30,
           "; ".join(parts))


def test_condition_failure_certificates(report):
    t0 = time.perf_counter()
    odd = gradient_conditions_check(build(OddPower(4, 0)).phase, SampleRegion(1))
    xpow = gradient_conditions_check(build(XPower(5, 0)).phase, SampleRegion(1))
    log_region = SampleRegion(1, 0.4, (-1, 1), 1.5, 2000, 0, x_center=(0.5,), p_center=(2.0,))
    log = gradient_conditions_check(build(LogType()).phase, log_region)
    constants = [(2, 0.0), (2, 1.0), (3, np.pi / 2), (3, 2.5), (4, np.pi + 0.1)]
    const_ok = all(gradient_conditions_check(Constant(c), SampleRegion(n), n=n).all_pass
                   for n, c in constants)
    elapsed = time.perf_counter() - t0
    ok = (not odd.cond_b.passed and odd.cond_b.witness is not None
          and not xpow.cond_a.detail["theta_xx_uniform"]
          and not log.cond_c.passed and log.cond_c.witness is not None and const_ok)
    report(4, "condition-failure certificates", ok, elapsed, 5,
           f"odd power min theta_z {odd.cond_b.detail['min_theta_z']:.3g}; "
           f"x power theta_xx sups {tuple(round(v, 1) for v in xpow.cond_a.detail['theta_xx_sups'])}; "
           f"log type decay ratio {log.cond_c.worst_ratio:.1f}; constants pass: {const_ok}")


def test_concavification(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    params = concavify_constant(3, 1.0)
    lam = sample_constrained(rng, 100_000, 3, 1.0)
    pd_all = bool(concavified_pd_batch(lam, params.A).all())
    sharp = concavified_hessian_check([2.0, 2.0, -0.25], 0.5)
    above = concavified_hessian_check([2.0, 2.0, -0.25], concavify_constant(3, 2.0).A)
    floor_min = float(sigma_floor_batch(lam, 1.0).min())
    det_res = max(float(det_identity_residual(lam, params.A).max()),
                  max(float(det_identity_residual(rng.normal(scale=3, size=(10_000, n)), a).max())
                      for n in range(1, 7) for a in (0.5, 4.4, 141.0)))
    elapsed = time.perf_counter() - t0
    ok = (pd_all and sharp.applicable and not sharp.positive_definite and above.positive_definite
          and floor_min >= -1e-10 and det_res <= 1e-10 and params.A == pytest.approx(4.4))
    report(5, "concavification (n=3, K=1)", ok, elapsed, 10,
           f"A={params.A:.3g} PD on all samples: {pd_all}; det at A=0.5: {sharp.det:.3g}; "
           f"min sigma_2 - floor {floor_min:.3g}; det identity residual {det_res:.1e}")


def test_rotation(report):
    t0 = time.perf_counter()
    gamma = np.pi / 8
    target = np.tan(np.arctan(1.0) + gamma)
    g = Grid.cube(2, 1.0, 65)
    quad = ScalarField(g, Quadratic(1.0).value(g.coords))
    rot = rotate_potential(quad, gamma, 1.0)
    # conjugated Hessian and the slope of the rotated gradient graph, before resampling
    Hbar = rotated_hessian(np.eye(2), gamma)
    mask = np.abs(rot.xbar) > 1e-8
    conj_err = max(float(np.abs(np.linalg.eigvalsh(Hbar) - target).max()),
                   float(np.abs(rot.ybar[mask] / rot.xbar[mask] - target).max()))
    u = ScalarField(g, Quartic(0.05).value(g.coords))
    shift = rotation_phase_shift_check(u, None, gamma)
    rt = rotation_round_trip(u, gamma)
    elapsed = time.perf_counter() - t0
    ok = conj_err <= 1e-8 and shift.residual <= 5 * g.h and rt.error <= 10 * g.h
    report(6, "rotation on a 65^2 grid, gamma = pi/8", ok, elapsed, 60,
           f"conjugation error {conj_err:.1e}; phase shift residual {shift.residual:.4f} "
           f"(bound {5 * g.h:.4f}); round trip {rt.error:.4f} (bound {10 * g.h:.4f})")


def test_solver_convergence(report):
    t0 = time.perf_counter()
    pot = Quartic(0.05)
    parts = []
    ok = True
    for n in (2, 3):
        for wrap in ("pure-x", "z-coupled"):
            errs, iters, resid = [], [], []
            for m in (17, 33):
                grid = Grid.cube(n, 1.0, m)
                u, rep = newton_solve(manufactured_problem(pot, grid, wrap))
                errs.append(float(np.abs(u.values - pot.value(grid.coords)).max()))
                iters.append(rep.iterations)
                resid.append(rep.residual)
            ratio = errs[0] / errs[1]
            ok &= 3.5 <= ratio <= 4.5 and max(resid) <= 1e-8 and max(iters) <= 15
            parts.append(f"n={n} {wrap}: ratio {ratio:.3f}, iterations {iters}, residual {max(resid):.1e}")
    elapsed = time.perf_counter() - t0
    report(7, "manufactured solves, second-order convergence", ok, elapsed, 120, "; ".join(parts))


def test_flow_drift(report):
    t0 = time.perf_counter()
    worst, bounds = {}, {}
    for n in (2, 3):
        g = Grid.cube(n, 1.0, 21 if n == 2 else 11)
        a = 1.0
        pot = Quadratic(a)
        speed = n * np.arctan(a)
        dt = g.h ** 2 / (2 * n)
        steps = 200
        traj = flow_evolve(ScalarField(g, pot.value(g.coords)), dt, steps,
                           lambda grid, t: pot.value(grid.coords) + speed * t)
        err = max(float(np.abs(uk.values - pot.value(g.coords) - speed * k * dt).max())
                  for k, uk in enumerate(traj))
        T = steps * dt
        worst[n] = err / max(T, 1.0)
        bounds[n] = 10 * dt
    elapsed = time.perf_counter() - t0
    ok = all(worst[n] <= bounds[n] for n in worst)
    report(8, "flow drift of quadratic data", ok, elapsed, 10,
           "drift error per unit time " + ", ".join(f"n={n}: {v:.1e}" for n, v in worst.items()))


def test_scaling_experiments(report):
    t0 = time.perf_counter()
    hs = run(config_from_string("[experiment]\nkind = hessian-scaling\n"))
    env = dict(zip(hs.tables["envelope"].columns, hs.tables["envelope"].rows[0]))
    gs = run(config_from_string("[experiment]\nkind = gradient-scaling\n"))
    fit = dict(zip(gs.tables["fit"].columns, gs.tables["fit"].rows[0]))
    elapsed = time.perf_counter() - t0
    ok = (hs.ok and env["consistent"] is True and gs.ok
          and np.isfinite(fit["fitted_C"]) and fit["fitted_C"] > 0)
    report(9, "estimate-shape experiments", ok, elapsed, 600,
           f"envelope log|D2u(0)| <= {env['intercept']:.3f} + {env['slope']:.3g} x, "
           f"consistent {env['consistent']}; fitted C {fit['fitted_C']:.4f}")
