"""
End-to-end runs: data, centralized reference, simulation, spectral sampling
and file output.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .baseline import (Dataset, accuracy, generate_ellipse_dataset, shard_dataset,
                       solve_centralized)
from .config import ExperimentConfig
from .dynamics import DynamicsConfig, block_hessian, decay_rate, local_minimizers, simulate
from .errors import InvalidSpectrum, NumericalFailure
from .graph import SwitchingSchedule, build_laplacian, write_adjacency_csv
from .loss import LossConfig, Problem
from . import spectral


@dataclass
class Setup:
    dataset: Dataset
    problem: Problem
    schedule: SwitchingSchedule
    dynamics: DynamicsConfig


def build_setup(cfg: ExperimentConfig) -> Setup:
    data = generate_ellipse_dataset(cfg.N, seed=cfg.seed)
    shards = shard_dataset(data, cfg.n, cfg.fraction, seed=cfg.seed + 1)
    problem = Problem(tuple(shards), LossConfig(C=cfg.C, mu=cfg.mu))
    schedule = SwitchingSchedule(cfg.n, cfg.switch_period, seed=cfg.seed, k=cfg.hop,
                                 weight_range=(cfg.weight_lo, cfg.weight_hi),
                                 shared_weight=cfg.shared_weight,
                                 strict=cfg.strict_invariants)
    dyn = DynamicsConfig(alpha=cfg.alpha, h=cfg.h, t_end=cfg.t_end,
                         integrator=cfg.integrator, tracking_mode=cfg.tracking_mode,
                         record_every=cfg.record_every, strict=cfg.strict_invariants)
    return Setup(data, problem, schedule, dyn)


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def report_at(problem, graphs, x, alpha, t=None) -> spectral.SpectralReport:
    Wbar, Abar = (build_laplacian(g, validate=False) for g in graphs)
    H = block_hessian(problem.hessians(x))
    return spectral.spectral_report(Wbar, Abar, H, alpha, t=t)


def spectral_only(cfg: ExperimentConfig) -> dict:
    """Spectral report at ``t = 0`` (first topology, initial classifiers); no simulation."""
    s = build_setup(cfg)
    x0 = local_minimizers(s.problem)
    rep = report_at(s.problem, s.schedule.graphs(0), x0, cfg.alpha, t=0.0)
    return rep.to_dict()


def baseline_only(cfg: ExperimentConfig) -> dict:
    s = build_setup(cfg)
    sol = solve_centralized(s.problem)
    d = sol.to_dict()
    d["train_accuracy"] = accuracy(sol.x_bar, s.dataset)
    return d


def write_ellipses_csv(traj, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "agent", "w1", "w2", "w3", "nu"])
        for r, t in enumerate(traj.t):
            for i, x in enumerate(traj.x[r]):
                w.writerow([repr(float(t)), i, *(repr(float(v)) for v in x)])


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> dict:
    """Full pipeline; returns the summary that is also written to ``summary.json``."""
    out = out_dir or cfg.out_dir
    os.makedirs(out, exist_ok=True)
    s = build_setup(cfg)
    cfg.save(os.path.join(out, "config.txt"))
    s.dataset.to_csv(os.path.join(out, "dataset.csv"))

    sol = solve_centralized(s.problem)
    base = sol.to_dict()
    base["train_accuracy"] = accuracy(sol.x_bar, s.dataset)
    _write_json(os.path.join(out, "baseline.json"), base)

    traj = simulate(s.problem, s.schedule, s.dynamics, x_star=sol.x_bar)
    traj.to_csv(os.path.join(out, "trajectory.csv"))
    write_ellipses_csv(traj, os.path.join(out, "ellipses.csv"))

    reports = [report_at(s.problem, ev.graphs, ev.state.x, cfg.alpha, t=ev.t) for ev in traj.switches]
    gamma_max = max(r.gamma for r in reports)
    lam_min = min(r.lambda_min for r in reports)
    try:
        abar_cons = spectral.alpha_bar(gamma_max, lam_min, cfg.n, cfg.m)
    except (InvalidSpectrum, NumericalFailure):
        abar_cons = float("nan")
    _write_json(os.path.join(out, "spectral_report.json"), {
        "samples": [r.to_dict() for r in reports],
        "gamma_max": gamma_max,
        "lambda_min_min": lam_min,
        "alpha_bar_conservative": abar_cons,
    })

    if cfg.dump_graphs:
        gdir = os.path.join(out, "graphs")
        os.makedirs(gdir, exist_ok=True)
        for ev in traj.switches:
            write_adjacency_csv(ev.graphs[0], os.path.join(gdir, f"W_{ev.index:04d}.csv"))
            write_adjacency_csv(ev.graphs[1], os.path.join(gdir, f"A_{ev.index:04d}.csv"))

    fin = traj.final
    xbar = fin.x.mean(axis=0)
    half = 0.5 * cfg.t_end
    summary = {
        "t_end": float(fin.t),
        "F": float(traj.F[-1]),
        "F_star": float(sol.F_star),
        "F_rel_error": float((traj.F[-1] - sol.F_star) / abs(sol.F_star)),
        "grad_sum_norm": float(traj.grad_sum_norm[-1]),
        "disagreement": float(traj.disagreement[-1]),
        "disagreement_rel": float(traj.disagreement[-1] / np.linalg.norm(xbar)),
        "conservation": float(traj.conservation[-1]),
        "mean_to_oracle": float(np.linalg.norm(xbar - sol.x_bar)),
        "disagreement_decay_rate": decay_rate(traj.t, traj.disagreement, t_start=half),
        "slowest_eigenvalue_real_t0": reports[0].slowest_rate if reports else float("nan"),
        "switches": len(traj.switches),
        "gamma_max": gamma_max,
        "alpha_bar_conservative": abar_cons,
        "final_accuracy": [accuracy(x, s.dataset) for x in fin.x],
    }
    _write_json(os.path.join(out, "summary.json"), summary)

    if cfg.plots:
        from . import plotting
        plotting.plot_trajectory(traj, sol.F_star, os.path.join(out, "trajectory.png"))
        plotting.plot_ellipses(s.dataset, [sol.x_bar, *fin.x], os.path.join(out, "ellipses.png"),
                               labels=["centralized"] + [f"agent {i}" for i in range(cfg.n)])
        if reports:
            plotting.plot_spectrum(reports[0].eigenvalues, os.path.join(out, "spectrum.png"),
                                   title=f"alpha = {cfg.alpha:g}, t = 0")
    return summary


def _sweep_one(args):
    cfg, out = args
    return run_experiment(cfg, out)


def initial_slope(t, values, window=0.2) -> float:
    return decay_rate(t, values, t_start=0.0, t_stop=window)


def run_sweep(cfg: ExperimentConfig, out_dir=None) -> dict:
    """Run once per step size in ``cfg.sweep_alphas``, each in its own subdirectory.

    Reports the early decay slope of the disagreement for each step size and
    whether larger steps decay faster.  Runs in parallel when ``workers > 1``.
    """
    out = out_dir or cfg.out_dir
    os.makedirs(out, exist_ok=True)
    jobs = [(cfg.replace(alpha=a, plots=False), os.path.join(out, f"alpha_{a:g}"))
            for a in cfg.sweep_alphas]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            summaries = list(pool.map(_sweep_one, jobs))
    else:
        summaries = [_sweep_one(j) for j in jobs]

    rows, curves = [], []
    for (c, path), summ in zip(jobs, summaries):
        t, dis = _read_disagreement(os.path.join(path, "trajectory.csv"))
        slope = initial_slope(t, dis)
        rows.append({"alpha": c.alpha, "initial_slope": slope, "dir": os.path.basename(path),
                     "F_rel_error": summ["F_rel_error"], "disagreement": summ["disagreement"]})
        curves.append({"alpha": c.alpha, "t": t, "disagreement": dis})
    order = sorted(rows, key=lambda r: r["alpha"])
    slopes = [r["initial_slope"] for r in order]
    result = {
        "runs": order,
        "faster_with_larger_alpha": bool(all(b < a for a, b in zip(slopes, slopes[1:]))),
    }
    _write_json(os.path.join(out, "sweep.json"), result)
    if cfg.plots:
        from . import plotting
        plotting.plot_sweep(curves, os.path.join(out, "sweep.png"))
    return result


def _read_disagreement(path):
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        head = next(r)
        it, idis = head.index("t"), head.index("disagreement")
        rows = [(float(row[it]), float(row[idis])) for row in r]
    a = np.array(rows)
    return a[:, 0], a[:, 1]
