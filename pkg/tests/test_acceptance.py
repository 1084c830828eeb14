"""
Acceptance criteria, one test each, at the stated tolerances.

Each test records a one-line verdict that the conftest hook prints in the
terminal summary (``criterion  N: PASS|FAIL  detail``).  Run on its own with
``pytest tests/test_acceptance.py`` or ``python3 tests/test_acceptance.py``.
"""

import hashlib
import os
import time

import numpy as np
import pytest

from _instances import random_instance
from conftest import ACCEPTANCE
from dsvm import spectral as sp
from dsvm.baseline import solve_centralized
from dsvm.config import ExperimentConfig
from dsvm.dynamics import DynamicsConfig, SystemState, assemble_system_matrix, simulate, step
from dsvm.experiment import build_setup, run_experiment
from dsvm.loss import local_cost, local_gradient, local_hessian

pytestmark = pytest.mark.acceptance


def verdict(k, ok, detail):
    ACCEPTANCE[k] = (bool(ok), detail)
    assert ok, detail


@pytest.fixture(scope="module")
def reference_run(reference_setup):
    s = reference_setup
    t0 = time.perf_counter()
    sol = solve_centralized(s.problem)
    traj = simulate(s.problem, s.schedule, s.dynamics, x_star=sol.x_bar)
    return sol, traj, time.perf_counter() - t0


def test_c01_reference_reproduction(reference_run):
    sol, traj, elapsed = reference_run
    x = traj.x[-1]
    xbar = x.mean(axis=0)
    dis = np.max(np.linalg.norm(x - xbar, axis=1)) / np.linalg.norm(xbar)
    gsum = traj.grad_sum_norm[-1]
    ferr = abs(traj.F[-1] - sol.F_star) / abs(sol.F_star)
    ok = dis <= 1e-3 and gsum <= 1e-2 and ferr <= 0.01 and elapsed <= 60
    verdict(1, ok, f"rel disagreement {dis:.3g} (<=1e-3), |sum grad| {gsum:.3g} (<=1e-2), "
                   f"|F/F*-1| {ferr:.3g} (<=0.01), runtime {elapsed:.1f}s (<=60)")


def test_c02_zero_eigenvalue_structure():
    rng = np.random.default_rng(2002)
    fails, total, worst = 0, 0, ""
    for n in (3, 5):
        for m in (2, 4):
            for _ in range(5):
                W, A, H = random_instance(rng, n, m)
                abar = sp.alpha_bar(sp.gamma(H), sp.lambda_min(W, A), n, m)
                v = sp.verify_zero_structure(assemble_system_matrix(W, A, H, abar / 2).M, m)
                total += 1
                if not v.passed:
                    fails += 1
                    worst = f"e.g. n={n} m={m} alpha={abar / 2:.2e}: {v.zero_count} near-zero, want {m}"
    verdict(2, total >= 20 and fails == 0, f"{fails}/{total} instances fail at alpha_bar/2; {worst}")


def test_c03_matching_distance_bound():
    rng = np.random.default_rng(2003)
    violations, total, tightest = 0, 0, 0.0
    for _ in range(60):
        n = int(rng.choice([3, 4]))
        W, A, _ = random_instance(rng, n, 2)
        H = np.diag(rng.uniform(0.1, 20.0, size=n))  # m = 1 keeps 2nm <= 8
        alpha = float(10 ** rng.uniform(-4, 1.5))
        sm = assemble_system_matrix(W, A, H, alpha)
        d = sp.optimal_matching_distance(sp.eigenvalues(sm.M), sp.eigenvalues(sm.M0))
        b = sp.matching_distance_bound(sm.M0, sm.M, sm.M1, alpha)
        violations += d > b
        tightest = max(tightest, d / b)
        total += 1
    verdict(3, total >= 50 and violations == 0,
            f"{violations}/{total} violations, max distance/bound {tightest:.3f}")


def test_c04_alpha_bar_root():
    rng = np.random.default_rng(2004)
    worst, mono_ok, count = 0.0, True, 0
    for n, m in [(3, 2), (5, 4), (3, 4), (5, 2)]:
        for _ in range(5):
            W, A, H = random_instance(rng, n, m)
            g, lam = sp.gamma(H), sp.lambda_min(W, A)
            ab = sp.alpha_bar(g, lam, n, m)
            worst = max(worst, abs(sp.alpha_bar_objective(ab, g, n, m) - lam) / lam)
            scan = [sp.alpha_bar(g, l, n, m) for l in np.linspace(0.1, 1.0, 10) * lam]
            mono_ok &= all(b > a for a, b in zip(scan, scan[1:]))
            count += 1
    verdict(4, worst <= 1e-8 and mono_ok,
            f"max relative root residual {worst:.2e} over {count} instances; monotone scan {mono_ok}")


def test_c05_zero_cluster_drift():
    rng = np.random.default_rng(2005)
    worst, ratio = 0.0, []
    a = 1e-6
    for k in range(10):
        n, m = [(3, 2), (5, 2), (3, 4), (5, 4)][k % 4]
        W, A, H = random_instance(rng, n, m)
        ev = sp.eigenvalues(assemble_system_matrix(W, A, H, a).M)
        cluster = ev[np.argsort(np.abs(ev))][:2 * m]
        drift = np.sort(cluster.real)[:m] / a
        S = sum(H[i * m:(i + 1) * m, i * m:(i + 1) * m] for i in range(n))
        # the outgoing eigenvalues of the printed 2m x 2m drift matrix
        P = sp.perturbation_derivative_matrix(H, n, m)
        pev = np.sort(np.linalg.eigvals(P).real)[:m]
        np.testing.assert_allclose(pev, np.sort(np.linalg.eigvalsh(-S)), rtol=1e-10)
        worst = max(worst, np.max(np.abs(drift - pev) / np.abs(pev)))
        ratio.append(float(np.median(pev / drift)))
    verdict(5, worst <= 1e-3,
            f"max relative mismatch {worst:.3g}; eig(-sum H)/drift ratio {min(ratio):.3f}..{max(ratio):.3f}")


def test_c06_conservation(reference_setup):
    s = reference_setup
    gd = simulate(s.problem, s.schedule, DynamicsConfig(tracking_mode="gradient_difference"))
    gd_res = float(gd.conservation.max())

    def residual(integrator, h):
        tr = simulate(s.problem, s.schedule,
                      DynamicsConfig(h=h, integrator=integrator, record_every=10 ** 9))
        return float(tr.conservation_drift[-1])

    e_ratio = residual("euler", 1e-3) / residual("euler", 5e-4)
    r_ratio = residual("rk4", 1e-3) / residual("rk4", 5e-4)
    ok = gd_res <= 1e-10 and e_ratio >= 1.9 and r_ratio >= 15
    verdict(6, ok, f"gradient_difference residual {gd_res:.2e} (<=1e-10); halving h: "
                   f"euler x{e_ratio:.2f} (>=1.9), rk4 x{r_ratio:.1f} (>=15)")


def test_c07_equilibrium_invariance(reference_setup):
    s = reference_setup
    xs = solve_centralized(s.problem).x_bar
    worst = 0.0
    for mode in ("hessian_flow", "gradient_difference"):
        cfg = DynamicsConfig(tracking_mode=mode)
        spp = cfg.steps_per_period(s.schedule.period)
        st = SystemState(0.0, np.tile(xs, (s.problem.n, 1)), np.zeros((s.problem.n, s.problem.m)))
        x0 = st.stacked()
        for k in range(1000):
            st = step(st, s.schedule.graphs(k // spp), s.problem, cfg)
            worst = max(worst, float(np.max(np.abs(st.stacked() - x0))))
    verdict(7, worst <= 1e-9, f"max state drift {worst:.2e} over 1000 steps, both tracking modes")


def test_c08_derivatives(reference_setup):
    p = reference_setup.problem
    rng = np.random.default_rng(2008)
    eps = 1e-5
    wg = wh = 0.0
    for _ in range(100):
        i = int(rng.integers(p.n))
        shard = p.shards[i]
        x = rng.normal(scale=1.5, size=p.m)
        g = local_gradient(x, shard, p.cfg)
        H = local_hessian(x, shard, p.cfg)
        E = np.eye(p.m) * eps
        fg = np.array([(local_cost(x + e, shard, p.cfg) - local_cost(x - e, shard, p.cfg)) / (2 * eps)
                       for e in E])
        fH = np.column_stack([(local_gradient(x + e, shard, p.cfg) - local_gradient(x - e, shard, p.cfg))
                              / (2 * eps) for e in E])
        wg = max(wg, np.linalg.norm(g - fg) / np.linalg.norm(g))
        wh = max(wh, np.linalg.norm(H - fH) / np.linalg.norm(H))
    verdict(8, wg <= 1e-6 and wh <= 1e-5,
            f"max relative FD error: gradient {wg:.2e} (<=1e-6), Hessian {wh:.2e} (<=1e-5)")


def test_c09_lyapunov_monotone():
    increases, details = 0, []
    for seed in range(5):
        s = build_setup(ExperimentConfig(seed=seed))
        xs = solve_centralized(s.problem).x_bar
        tr = simulate(s.problem, s.schedule, DynamicsConfig(record_every=1), x_star=xs)
        V = tr.lyapunov
        jumps = np.diff(V) > 1e-9 * V[0]
        increases += int(jumps.sum())
        details.append(int(jumps.sum()))
    verdict(9, increases == 0, f"V increases at {increases} samples across 5 seeds (per seed {details})")


def _digest(path):
    out = {}
    for root, _, files in os.walk(path):
        for f in sorted(files):
            full = os.path.join(root, f)
            with open(full, "rb") as fh:
                out[os.path.relpath(full, path)] = hashlib.sha256(fh.read()).hexdigest()
    return out


def test_c10_determinism(tmp_path):
    cfg = ExperimentConfig(out_dir=str(tmp_path / "run"), dump_graphs=True)
    run_experiment(cfg)
    first = _digest(cfg.out_dir)
    run_experiment(cfg)
    second = _digest(cfg.out_dir)
    differ = sorted(k for k in first if first[k] != second.get(k))
    verdict(10, first == second and len(first) > 0,
            f"{len(first)} files compared, {len(differ)} differ {differ[:3]}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
