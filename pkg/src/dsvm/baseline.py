"""
Centralized reference solver, the ellipse dataset, and classifier evaluation.

The reference solver deliberately uses first-order information only, so it
stays independent of the Hessian code it is used to check.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NonConvergence
from .loss import Problem, Shard, feature_map_quadratic


@dataclass
class CentralSolution:
    x_bar: np.ndarray
    F_star: float
    grad_norm: float
    iterations: int

    @property
    def omega(self) -> np.ndarray:
        return self.x_bar[:-1]

    @property
    def nu(self) -> float:
        return float(self.x_bar[-1])

    def to_dict(self) -> dict:
        return {
            "omega": [float(v) for v in self.omega],
            "nu": self.nu,
            "F_star": float(self.F_star),
            "grad_norm": float(self.grad_norm),
            "iterations": int(self.iterations),
        }


def gradient_descent(fun, grad, x0, tol=1e-8, max_iter=100_000,
                     armijo=1e-4, shrink=0.5):
    """Gradient descent with Armijo backtracking.

    The trial step of each iteration is the Barzilai-Borwein step from the
    previous pair of iterates (1 on the first iteration); backtracking then
    enforces sufficient decrease, so the iteration is monotone.

    Returns ``(x, grad_norm, iterations)``; raises :class:`NonConvergence`
    when ``max_iter`` is reached.
    """
    x = np.array(x0, dtype=float)
    f = fun(x)
    g = grad(x)
    step = 1.0
    for it in range(max_iter + 1):
        gnorm = float(np.linalg.norm(g))
        if gnorm <= tol:
            return x, gnorm, it
        if it == max_iter:
            break
        t = step
        gg = g @ g
        while True:
            x_new = x - t * g
            f_new = fun(x_new)
            if f_new <= f - armijo * t * gg:
                break
            t *= shrink
            if t < 1e-20:
                # no representable decrease left along -g
                raise NonConvergence("line search failed", last=x, iterations=it)
        g_new = grad(x_new)
        s, r = x_new - x, g_new - g
        sr = s @ r
        step = (s @ s) / sr if sr > 0 else 1.0
        x, f, g = x_new, f_new, g_new
    raise NonConvergence(
        f"gradient descent did not reach tol={tol:g} in {max_iter} iterations "
        f"(|grad|={gnorm:.3e})", last=x, iterations=max_iter)


def solve_centralized(problem: Problem, tol=1e-8, max_iter=100_000, x0=None) -> CentralSolution:
    """Minimize ``g(xbar) = sum_i f_i(xbar)`` over a single shared classifier."""
    m = problem.m
    if all(s.count == 0 for s in problem.shards):
        # pure regularizer: omega = 0, nu left free and fixed to 0
        x = np.zeros(m)
        return CentralSolution(x, problem.consensus_cost(x), 0.0, 0)
    start = np.zeros(m) if x0 is None else np.asarray(x0, dtype=float)
    x, gnorm, it = gradient_descent(problem.consensus_cost, problem.consensus_gradient,
                                    start, tol=tol, max_iter=max_iter)
    return CentralSolution(x, problem.consensus_cost(x), gnorm, it)


@dataclass
class Dataset:
    """Raw 2-D points with +-1 labels."""

    points: np.ndarray
    labels: np.ndarray

    @property
    def N(self) -> int:
        return self.points.shape[0]

    def features(self, quadratic=True) -> np.ndarray:
        return feature_map_quadratic(self.points) if quadratic else np.array(self.points)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["chi1", "chi2", "label"])
            for (a, b), lab in zip(self.points, self.labels):
                w.writerow([repr(float(a)), repr(float(b)), int(lab)])

    @classmethod
    def from_csv(cls, path) -> "Dataset":
        pts, labs = [], []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].strip().startswith("#"):
                    continue
                try:
                    a, b, lab = float(row[0]), float(row[1]), float(row[2])
                except ValueError:
                    continue  # header
                pts.append((a, b))
                labs.append(lab)
        return cls(np.array(pts, dtype=float).reshape(-1, 2), np.array(labs))


# reference conic: rotated ellipse (u/a)^2 + (v/b)^2 = 1 centred in [-1, 1]^2
ELLIPSE_AXES = (0.9, 0.7)
ELLIPSE_ANGLE = math.pi / 6
MARGIN = 0.05


def conic_radius(points, axes=ELLIPSE_AXES, angle=ELLIPSE_ANGLE) -> np.ndarray:
    """Normalized radius: < 1 inside the reference ellipse, > 1 outside."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    c, s = math.cos(angle), math.sin(angle)
    u = c * p[:, 0] + s * p[:, 1]
    v = -s * p[:, 0] + c * p[:, 1]
    return np.sqrt((u / axes[0]) ** 2 + (v / axes[1]) ** 2)


def generate_ellipse_dataset(N=60, seed=0, margin=MARGIN) -> Dataset:
    """Uniform points in ``[-1, 1]^2`` labelled +1 inside the reference ellipse.

    Points whose normalized radius falls within ``margin`` of 1 are rejected,
    so the classes are strictly separable after the quadratic map.  Draws
    repeat until both labels occur.
    """
    if N < 4:
        raise ValueError("N must be >= 4")
    rng = np.random.default_rng(seed)
    while True:
        pts = []
        while len(pts) < N:
            batch = rng.uniform(-1.0, 1.0, size=(2 * N, 2))
            keep = np.abs(conic_radius(batch) - 1.0) >= margin
            pts.extend(batch[keep].tolist())
        pts = np.array(pts[:N])
        labels = np.where(conic_radius(pts) < 1.0, 1.0, -1.0)
        if np.any(labels > 0) and np.any(labels < 0):
            return Dataset(pts, labels)


def shard_indices(N, n, fraction, seed) -> list[np.ndarray]:
    if not 0 < fraction <= 1:
        raise ValueError("fraction must lie in (0, 1]")
    size = math.ceil(fraction * N)
    if fraction * N < 1:
        raise ValueError(f"fraction*N = {fraction * N:g} leaves shards empty")
    rng = np.random.default_rng(seed)
    return [np.sort(rng.choice(N, size=size, replace=False)) for _ in range(n)]


def shard_dataset(dataset: Dataset, n, fraction=0.5, seed=0, quadratic=True) -> list[Shard]:
    """Give each of ``n`` agents an independent uniform sample of the data.

    Samples overlap across agents; each holds ``ceil(fraction * N)`` points.
    """
    feats = dataset.features(quadratic)
    return [Shard(feats[idx], dataset.labels[idx])
            for idx in shard_indices(dataset.N, n, fraction, seed)]


def uncovered_count(N, n, fraction, seed) -> int:
    covered = np.zeros(N, dtype=bool)
    for idx in shard_indices(N, n, fraction, seed):
        covered[idx] = True
    return int(np.count_nonzero(~covered))


@dataclass(frozen=True)
class EllipseClassifier:
    """Decision conic ``w1*z1^2 + w2*z2^2 + sqrt(2)*w3*z1*z2 + nu`` in the raw plane."""

    w1: float
    w2: float
    w3: float
    nu: float

    def score(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        z1, z2 = z[..., 0], z[..., 1]
        return self.w1 * z1 ** 2 + self.w2 * z2 ** 2 + math.sqrt(2.0) * self.w3 * z1 * z2 + self.nu

    def predict(self, z) -> np.ndarray:
        return np.where(self.score(z) >= 0, 1, -1)

    def coefficients(self) -> tuple[float, float, float, float]:
        return (self.w1, self.w2, self.w3, self.nu)


def ellipse_from_solution(x_bar) -> EllipseClassifier:
    x = np.asarray(x_bar, dtype=float)
    if x.shape != (4,):
        raise ValueError("ellipse form needs a packed quadratic-kernel classifier of length 4")
    return EllipseClassifier(*map(float, x))


def decision_function(x, chi_raw, quadratic=True) -> np.ndarray:
    """Linear score ``omega @ phi(chi) + nu`` of raw points."""
    x = np.asarray(x, dtype=float)
    chi = np.asarray(chi_raw, dtype=float)
    feats = feature_map_quadratic(chi) if quadratic else chi
    if feats.shape[-1] != x.shape[0] - 1:
        raise DimensionError("classifier and point dimensions disagree")
    return feats @ x[:-1] + x[-1]


def predict(x, chi_raw, quadratic=True) -> np.ndarray:
    return np.where(decision_function(x, chi_raw, quadratic) >= 0, 1, -1)


def accuracy(x, dataset: Dataset, quadratic=True) -> float:
    return float(np.mean(predict(x, dataset.points, quadratic) == dataset.labels))
