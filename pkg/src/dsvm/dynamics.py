"""
Hybrid gradient-tracking flow: continuous-time agent dynamics between
discrete topology switches.

Each agent ``i`` holds a classifier ``x_i`` and a tracker ``y_i``::

    dx_i/dt = -sum_j w_ij (x_i - x_j) - alpha * y_i
    dy_i/dt = -sum_j a_ij (y_i - y_j) + hess f_i(x_i) @ dx_i/dt

Summing over agents on a weight-balanced graph kills the consensus terms,
so ``sum_i y_i - sum_i grad f_i(x_i)`` is conserved along exact solutions.
Starting from ``y(0) = 0`` the conserved value is ``-sum_i grad f_i(x_i(0))``;
the limit point is the network optimum only when that value is zero, which
is why the default initial classifiers are the agents' local minimizers.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import block_diag

from .baseline import gradient_descent, solve_centralized
from .errors import DimensionError, IntegrationDiverged, InvariantViolation
from .graph import Digraph, SwitchingSchedule, build_laplacian
from .loss import Problem

INTEGRATORS = ("euler", "rk4")
TRACKING_MODES = ("hessian_flow", "gradient_difference")


@dataclass(frozen=True)
class DynamicsConfig:
    alpha: float = 10.0
    h: float = 1e-3
    t_end: float = 2.0
    integrator: str = "rk4"
    tracking_mode: str = "hessian_flow"
    record_every: int = 10
    strict: bool = False
    divergence_bound: float = 1e9

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.h > 0:
            raise ValueError("h must be positive")
        if not self.t_end >= 0:
            raise ValueError("t_end must be >= 0")
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"integrator must be one of {INTEGRATORS}")
        if self.tracking_mode not in TRACKING_MODES:
            raise ValueError(f"tracking_mode must be one of {TRACKING_MODES}")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")

    def steps_per_period(self, period) -> int | None:
        """Integrator steps between switches; the period must be a multiple of h."""
        if period is None:
            return None
        ratio = period / self.h
        k = int(round(ratio))
        if k < 1 or abs(ratio - k) > 1e-9 * max(1.0, ratio):
            raise ValueError(f"switch period {period} is not an integer multiple of h={self.h}")
        return k


@dataclass
class SystemState:
    t: float
    x: np.ndarray
    y: np.ndarray

    def copy(self) -> "SystemState":
        return SystemState(self.t, self.x.copy(), self.y.copy())

    def stacked(self) -> np.ndarray:
        """``(x; y)`` as one vector of length ``2nm``."""
        return np.concatenate([self.x.ravel(), self.y.ravel()])


@dataclass
class SystemMatrix:
    M: np.ndarray
    M0: np.ndarray
    M1: np.ndarray
    H: np.ndarray


def block_hessian(hessians) -> np.ndarray:
    return block_diag(*hessians)


def assemble_system_matrix(Wbar, Abar, H, alpha) -> SystemMatrix:
    """Linearized flow matrix and its split ``M = M0 + alpha*M1``.

    ``M0 = [[W(x)I, 0], [H (W(x)I), A(x)I]]`` and ``M1 = [[0, -I], [0, -H]]``
    with ``(x)`` the Kronecker product against ``I_m``.
    """
    Wbar = np.asarray(Wbar, dtype=float)
    Abar = np.asarray(Abar, dtype=float)
    H = np.asarray(H, dtype=float)
    n = Wbar.shape[0]
    if Wbar.shape != (n, n) or Abar.shape != (n, n):
        raise DimensionError("Laplacians must be square and of equal size")
    nm = H.shape[0]
    if H.shape != (nm, nm) or nm % n:
        raise DimensionError(f"H has shape {H.shape}, incompatible with n={n}")
    m = nm // n
    Im = np.eye(m)
    Wk = np.kron(Wbar, Im)
    Ak = np.kron(Abar, Im)
    Z = np.zeros((nm, nm))
    M0 = np.block([[Wk, Z], [H @ Wk, Ak]])
    M1 = np.block([[Z, -np.eye(nm)], [Z, -H]])
    M = np.block([[Wk, -alpha * np.eye(nm)], [H @ Wk, Ak - alpha * H]])
    return SystemMatrix(M=M, M0=M0, M1=M1, H=H)


def _weights(g):
    return g.weights if isinstance(g, Digraph) else np.asarray(g, dtype=float)


def consensus_term(weights, v) -> np.ndarray:
    """``sum_j w_ij (v_j - v_i)`` for every row ``i`` of ``v``.

    Written with pairwise differences so it vanishes exactly at consensus.
    """
    return np.einsum("ij,ijk->ik", weights, v[None, :, :] - v[:, None, :])


def rhs(state: SystemState, graphs, problem: Problem, cfg: DynamicsConfig):
    """Time derivatives ``(dx, dy)`` of the flow, each of shape ``(n, m)``."""
    W, A = (_weights(g) for g in graphs)
    if state.x.shape != (problem.n, problem.m) or state.y.shape != state.x.shape:
        raise DimensionError("state does not match the problem dimensions")
    if W.shape[0] != problem.n:
        raise DimensionError("graph size does not match the number of agents")
    dx = consensus_term(W, state.x) - cfg.alpha * state.y
    dy = consensus_term(A, state.y) + np.einsum("ikl,il->ik", problem.hessians(state.x), dx)
    return dx, dy


def _hessian_flow_step(x, y, W, A, problem, cfg):
    def f(x, y):
        dx = consensus_term(W, x) - cfg.alpha * y
        dy = consensus_term(A, y) + np.einsum("ikl,il->ik", problem.hessians(x), dx)
        return dx, dy

    h = cfg.h
    if cfg.integrator == "euler":
        dx, dy = f(x, y)
        return x + h * dx, y + h * dy
    k1 = f(x, y)
    k2 = f(x + 0.5 * h * k1[0], y + 0.5 * h * k1[1])
    k3 = f(x + 0.5 * h * k2[0], y + 0.5 * h * k2[1])
    k4 = f(x + h * k3[0], y + h * k3[1])
    return (x + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
            y + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]))


def _gradient_difference_step(x, y, W, A, problem, cfg):
    # Integrate (x, z) with z = y - grad f(x); dz/dt = A-consensus of y has
    # zero sum over agents, so y_new = z_new + grad f(x_new) keeps
    # sum(y) - sum(grad f) fixed up to rounding.
    def f(x, z):
        yy = z + problem.gradients(x)
        return consensus_term(W, x) - cfg.alpha * yy, consensus_term(A, yy)

    h = cfg.h
    g_old = problem.gradients(x)
    z = y - g_old
    if cfg.integrator == "euler":
        dx, dz = f(x, z)
        x_new, z_new = x + h * dx, z + h * dz
    else:
        k1 = f(x, z)
        k2 = f(x + 0.5 * h * k1[0], z + 0.5 * h * k1[1])
        k3 = f(x + 0.5 * h * k2[0], z + 0.5 * h * k2[1])
        k4 = f(x + h * k3[0], z + h * k3[1])
        x_new = x + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        z_new = z + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    # y + (z_new - z) + (grad_new - grad_old), grouped so an unchanged
    # state maps to itself bit for bit
    y_new = y + (z_new - z) + (problem.gradients(x_new) - g_old)
    return x_new, y_new


def step(state: SystemState, graphs, problem: Problem, cfg: DynamicsConfig) -> SystemState:
    """Advance one fixed step of size ``cfg.h``."""
    W, A = (_weights(g) for g in graphs)
    if cfg.tracking_mode == "hessian_flow":
        x, y = _hessian_flow_step(state.x, state.y, W, A, problem, cfg)
    else:
        x, y = _gradient_difference_step(state.x, state.y, W, A, problem, cfg)
    t = state.t + cfg.h
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise IntegrationDiverged(
            f"non-finite state at t={t:.6g}; alpha or h is likely too large", t=t)
    size = max(np.max(np.abs(x)), np.max(np.abs(y)))
    if size > cfg.divergence_bound:
        raise IntegrationDiverged(
            f"|state| = {size:.3e} exceeds {cfg.divergence_bound:g} at t={t:.6g}; "
            "alpha or h is likely too large", t=t)
    return SystemState(t, x, y)


def local_minimizers(problem: Problem, tol=1e-12, max_newton=50) -> np.ndarray:
    """Each agent's minimizer of its own ``f_i`` (zero for empty shards).

    Gradient descent gets close, then Newton steps polish the gradient to
    ``tol``; plain descent stalls near ``1e-8`` where cost differences sink
    below rounding.
    """
    out = np.zeros((problem.n, problem.m))
    for i, shard in enumerate(problem.shards):
        if shard.count == 0:
            continue
        sub = Problem((shard,), problem.cfg)
        x = gradient_descent(sub.consensus_cost, sub.consensus_gradient,
                             np.zeros(problem.m), tol=1e-6)[0]
        best, best_norm = x, np.linalg.norm(sub.consensus_gradient(x))
        for _ in range(max_newton):
            if best_norm <= tol:
                break
            x = x - np.linalg.solve(sub.hessians(x[None])[0], sub.consensus_gradient(x))
            gn = np.linalg.norm(sub.consensus_gradient(x))
            if not gn < best_norm:
                break
            best, best_norm = x, gn
        out[i] = best
    return out


def evaluate_monitors(state: SystemState, problem: Problem, x_star=None) -> dict:
    """Objective, gradient-sum norm, disagreement, Lyapunov value and conservation residual.

    ``lyapunov`` is ``0.5*|delta|^2`` with ``delta = (x - 1 (x) x_star; y)``
    and is NaN when no reference is supplied.
    """
    x, y = state.x, state.y
    grads = problem.gradients(x)
    xbar = x.mean(axis=0)
    if x_star is None:
        lyap = float("nan")
    else:
        d = x - np.asarray(x_star, dtype=float)[None, :]
        lyap = 0.5 * (float(np.sum(d * d)) + float(np.sum(y * y)))
    return {
        "F": problem.cost(x),
        "grad_sum_norm": float(np.linalg.norm(grads.sum(axis=0))),
        "disagreement": float(np.max(np.linalg.norm(x - xbar, axis=1))),
        "lyapunov": lyap,
        "conservation": float(np.linalg.norm(y.sum(axis=0) - grads.sum(axis=0))),
    }


@dataclass
class SwitchEvent:
    index: int
    t: float
    graphs: tuple
    state: SystemState


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    F: np.ndarray
    grad_sum_norm: np.ndarray
    disagreement: np.ndarray
    lyapunov: np.ndarray
    conservation: np.ndarray
    conservation_drift: np.ndarray
    x_star: np.ndarray | None = None
    switches: list = field(default_factory=list)

    CSV_MONITORS = ("F", "grad_sum_norm", "disagreement", "lyapunov")

    @property
    def final(self) -> SystemState:
        return SystemState(float(self.t[-1]), self.x[-1].copy(), self.y[-1].copy())

    def header(self) -> list[str]:
        n, m = self.x.shape[1:]
        return (["t"] + [f"x{i}_{k}" for i in range(n) for k in range(m)]
                + list(self.CSV_MONITORS))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.header())
            for r in range(len(self.t)):
                row = [self.t[r], *self.x[r].ravel()] + [getattr(self, c)[r] for c in self.CSV_MONITORS]
                w.writerow([repr(float(v)) for v in row])


def simulate(problem: Problem, schedule: SwitchingSchedule, cfg: DynamicsConfig,
             x0=None, x_star=None, record_every=None) -> Trajectory:
    """Integrate the hybrid flow from ``(x0, 0)`` to ``cfg.t_end``.

    Topology changes happen between steps, at exact multiples of the switch
    period.  ``x0`` defaults to the agents' local minimizers; ``x_star``
    (the Lyapunov reference) defaults to the centralized solution.
    Monitors are sampled every ``record_every`` steps and at the end.
    """
    n, m = problem.n, problem.m
    if schedule.n != n:
        raise DimensionError(f"schedule has {schedule.n} nodes, problem has {n} agents")
    every = cfg.record_every if record_every is None else record_every
    spp = cfg.steps_per_period(schedule.period)
    n_steps = int(round(cfg.t_end / cfg.h))
    if abs(n_steps * cfg.h - cfg.t_end) > 1e-9 * max(1.0, cfg.t_end):
        raise ValueError(f"t_end={cfg.t_end} is not an integer multiple of h={cfg.h}")

    x = local_minimizers(problem) if x0 is None else np.array(x0, dtype=float)
    if x.shape != (n, m):
        raise DimensionError(f"x0 has shape {x.shape}, expected {(n, m)}")
    if n > 1 and np.all(x == x[0]):
        msg = "x(0) is already at consensus; the flow will not move it"
        if cfg.strict:
            raise InvariantViolation(msg)
        warnings.warn(msg, stacklevel=2)
    if x_star is None:
        x_star = solve_centralized(problem).x_bar
    x_star = np.asarray(x_star, dtype=float)

    state = SystemState(0.0, x, np.zeros((n, m)))
    records = {k: [] for k in ("t", "x", "y", "F", "grad_sum_norm", "disagreement",
                               "lyapunov", "conservation", "conservation_drift")}
    switches = []

    # conserved quantity sum(y) - sum(grad f) at t = 0 (y(0) = 0)
    offset = -problem.gradients(x).sum(axis=0)

    def record(s):
        mon = evaluate_monitors(s, problem, x_star)
        sums = s.y.sum(axis=0) - problem.gradients(s.x).sum(axis=0)
        records["conservation_drift"].append(float(np.linalg.norm(sums - offset)))
        records["t"].append(s.t)
        records["x"].append(s.x.copy())
        records["y"].append(s.y.copy())
        for key, val in mon.items():
            records[key].append(val)

    graphs = None
    record(state)
    for k in range(n_steps):
        if graphs is None or (spp is not None and k % spp == 0):
            index = 0 if spp is None else k // spp
            graphs = schedule.graphs(index)
            if cfg.strict:
                for g in graphs:
                    g.validate()
            switches.append(SwitchEvent(index, k * cfg.h, graphs, state.copy()))
        state = step(state, graphs, problem, cfg)
        # time from the step counter so switch instants and samples stay exact
        state.t = (k + 1) * cfg.h
        if (k + 1) % every == 0 or k + 1 == n_steps:
            record(state)
            if cfg.strict and cfg.tracking_mode == "gradient_difference":
                drift = records["conservation_drift"][-1]
                if drift > 1e-8 * max(1.0, float(np.linalg.norm(offset))):
                    raise InvariantViolation(f"conservation drift {drift:.3e} at t={state.t:.6g}")

    traj = Trajectory(
        t=np.array(records["t"]),
        x=np.array(records["x"]),
        y=np.array(records["y"]),
        F=np.array(records["F"]),
        grad_sum_norm=np.array(records["grad_sum_norm"]),
        disagreement=np.array(records["disagreement"]),
        lyapunov=np.array(records["lyapunov"]),
        conservation=np.array(records["conservation"]),
        conservation_drift=np.array(records["conservation_drift"]),
        x_star=x_star,
        switches=switches,
    )
    return traj


def decay_rate(t, values, t_start=None, t_stop=None) -> float:
    """Least-squares slope of ``log(values)`` against ``t`` over a window.

    Negative for decay; a diagnostic for comparing against the slowest
    non-zero eigenvalue of the flow matrix.
    """
    t = np.asarray(t, dtype=float)
    v = np.asarray(values, dtype=float)
    mask = np.ones_like(t, dtype=bool)
    if t_start is not None:
        mask &= t >= t_start
    if t_stop is not None:
        mask &= t <= t_stop
    mask &= v > 0
    if mask.sum() < 2:
        return float("nan")
    return float(np.polyfit(t[mask], np.log(v[mask]), 1)[0])


def laplacians(graphs, validate=False):
    return tuple(build_laplacian(g, validate=validate) for g in graphs)
