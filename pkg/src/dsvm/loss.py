"""
Smooth SVM loss and per-agent cost, gradient and Hessian.

A classifier is packed as ``x = [omega; nu]`` and scores a mapped point as
``omega @ phi + nu``.  The per-point margin violation is
``z = 1 - label * (omega @ phi + nu)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError


def smooth_hinge(z, mu):
    """Softplus approximation ``log(1 + exp(mu*z)) / mu`` of ``max(z, 0)``.

    Returns the value and its first and second derivatives in ``z``.  Uses
    ``log(1 + e^t) = max(t, 0) + log1p(e^-|t|)``, which is the
    ``z + log1p(e^-mu z)/mu`` branch for large positive ``mu*z`` and the
    ``log1p(e^mu z)/mu`` branch for large negative ``mu*z``; nothing overflows.
    """
    if not mu > 0:
        raise ValueError("mu must be positive")
    z = np.asarray(z, dtype=float)
    t = mu * z
    e = np.exp(-np.abs(t))
    value = (np.maximum(t, 0.0) + np.log1p(e)) / mu
    pos = t >= 0
    inv = 1.0 / (1.0 + e)
    # s = sigmoid(t) and 1 - s, each formed without cancellation
    s = np.where(pos, inv, e * inv)
    s_c = np.where(pos, e * inv, inv)
    d2 = mu * s * s_c
    if value.ndim == 0:
        return float(value), float(s), float(d2)
    return value, s, d2


def squared_hinge(z):
    """``max(z, 0)**2`` with its (piecewise) derivatives."""
    z = np.asarray(z, dtype=float)
    zp = np.maximum(z, 0.0)
    value, d1, d2 = zp * zp, 2.0 * zp, np.where(z > 0, 2.0, 0.0)
    if value.ndim == 0:
        return float(value), float(d1), float(d2)
    return value, d1, d2


def feature_map_quadratic(chi):
    """Map ``[a, b]`` to ``[a**2, b**2, sqrt(2)*a*b]``.

    Accepts a single point of shape ``(2,)`` or a batch of shape ``(N, 2)``.
    """
    chi = np.asarray(chi, dtype=float)
    if chi.shape[-1:] != (2,) or chi.ndim > 2:
        raise DimensionError(f"expected points of dimension 2, got shape {chi.shape}")
    a, b = chi[..., 0], chi[..., 1]
    return np.stack([a * a, b * b, np.sqrt(2.0) * a * b], axis=-1)


@dataclass(frozen=True)
class LossConfig:
    C: float = 1.5
    mu: float = 3.0
    kind: str = "smooth"

    def __post_init__(self):
        if not self.C > 0:
            raise ValueError("C must be positive")
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if self.kind not in ("smooth", "squared"):
            raise ValueError(f"unknown loss kind {self.kind!r}")

    def hinge(self, z):
        if self.kind == "smooth":
            return smooth_hinge(z, self.mu)
        return squared_hinge(z)


@dataclass(frozen=True, eq=False)
class Shard:
    """One agent's (already feature-mapped) training points."""

    points: np.ndarray
    labels: np.ndarray
    design: np.ndarray = field(init=False, repr=False)

    def __init__(self, points, labels, dim=None):
        pts = np.array(points, dtype=float)
        if pts.size == 0 and (pts.ndim < 2 or pts.shape[0] == 0):
            if dim is None and pts.ndim < 2:
                raise DimensionError("empty shard needs an explicit feature dimension")
            pts = pts.reshape(0, dim if dim is not None else pts.shape[1])
        if pts.ndim != 2:
            raise DimensionError("points must be a 2-D array")
        if dim is not None and pts.shape[1] != dim:
            raise DimensionError(f"points have dimension {pts.shape[1]}, expected {dim}")
        lab = np.array(labels, dtype=float).reshape(-1)
        if lab.shape[0] != pts.shape[0]:
            raise DimensionError("points and labels differ in length")
        if not np.all(np.isin(lab, (-1.0, 1.0))):
            raise ValueError("labels must be -1 or +1")
        pts.setflags(write=False)
        lab.setflags(write=False)
        design = np.hstack([pts, np.ones((pts.shape[0], 1))])
        design.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "labels", lab)
        object.__setattr__(self, "design", design)

    @property
    def count(self) -> int:
        return self.points.shape[0]

    @property
    def m(self) -> int:
        return self.points.shape[1] + 1


@dataclass(frozen=True)
class Classifier:
    omega: np.ndarray
    nu: float

    def pack(self) -> np.ndarray:
        return np.append(np.asarray(self.omega, dtype=float), float(self.nu))

    @classmethod
    def unpack(cls, x) -> "Classifier":
        x = np.asarray(x, dtype=float)
        return cls(omega=x[:-1].copy(), nu=float(x[-1]))


def _as_packed(x, shard):
    if isinstance(x, Classifier):
        x = x.pack()
    x = np.asarray(x, dtype=float)
    if x.shape != (shard.m,):
        raise DimensionError(f"classifier has shape {x.shape}, shard expects ({shard.m},)")
    return x


def _margins(x, shard):
    return 1.0 - shard.labels * (shard.design @ x)


def local_cost(x, shard: Shard, cfg: LossConfig) -> float:
    """``omega @ omega + C * sum_j L(z_j)``."""
    x = _as_packed(x, shard)
    w = x[:-1]
    value = float(w @ w)
    if shard.count:
        value += cfg.C * float(np.sum(cfg.hinge(_margins(x, shard))[0]))
    return value


def local_gradient(x, shard: Shard, cfg: LossConfig) -> np.ndarray:
    x = _as_packed(x, shard)
    g = 2.0 * x
    g[-1] = 0.0
    if shard.count:
        _, d1, _ = cfg.hinge(_margins(x, shard))
        g -= cfg.C * (shard.design.T @ (d1 * shard.labels))
    return g


def local_hessian(x, shard: Shard, cfg: LossConfig) -> np.ndarray:
    """``2*diag(1, ..., 1, 0) + C * sum_j L''(z_j) a_j a_j^T`` with ``a_j = [phi_j; 1]``.

    Labels are +-1 so the ``label**2`` factor drops out.
    """
    x = _as_packed(x, shard)
    H = np.diag(np.r_[np.full(shard.m - 1, 2.0), 0.0])
    if shard.count:
        _, _, d2 = cfg.hinge(_margins(x, shard))
        A = shard.design
        H += cfg.C * ((A.T * d2) @ A)
        # BLAS may round the two triangles differently
        H = 0.5 * (H + H.T)
    return H


@dataclass(frozen=True, eq=False)
class Problem:
    """The networked objective ``F(x) = sum_i f_i(x_i)``.

    Agent states are handled as ``(n, m)`` arrays, row ``i`` being ``x_i``.
    The batched methods stack every shard into one design matrix; they agree
    with the per-agent ``local_*`` functions to rounding.
    """

    shards: tuple
    cfg: LossConfig = LossConfig()

    def __post_init__(self):
        shards = tuple(self.shards)
        if not shards:
            raise ValueError("need at least one shard")
        if len({s.m for s in shards}) != 1:
            raise DimensionError("shards disagree on the feature dimension")
        object.__setattr__(self, "shards", shards)
        object.__setattr__(self, "_design", np.vstack([s.design for s in shards]))
        object.__setattr__(self, "_labels", np.concatenate([s.labels for s in shards]))
        owner = np.repeat(np.arange(len(shards)), [s.count for s in shards])
        object.__setattr__(self, "_owner", owner)
        # agent-by-point indicator, turns per-point terms into per-agent sums
        ind = np.zeros((len(shards), owner.size))
        ind[owner, np.arange(owner.size)] = 1.0
        object.__setattr__(self, "_indicator", ind)
        mask = np.ones(self.m)
        mask[-1] = 0.0
        object.__setattr__(self, "_reg", mask)

    @property
    def n(self) -> int:
        return len(self.shards)

    @property
    def m(self) -> int:
        return self.shards[0].m

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n, self.m):
            raise DimensionError(f"state has shape {x.shape}, expected {(self.n, self.m)}")
        return x

    def _hinge(self, x):
        scores = np.einsum("pk,pk->p", self._design, x[self._owner])
        return self.cfg.hinge(1.0 - self._labels * scores)

    def costs(self, x) -> np.ndarray:
        x = self._check(x)
        reg = np.sum(x[:, :-1] ** 2, axis=1)
        if not self._owner.size:
            return reg
        return reg + self.cfg.C * (self._indicator @ self._hinge(x)[0])

    def cost(self, x) -> float:
        return float(np.sum(self.costs(x)))

    def gradients(self, x) -> np.ndarray:
        x = self._check(x)
        g = 2.0 * x * self._reg
        if self._owner.size:
            d1 = self._hinge(x)[1]
            g -= self.cfg.C * (self._indicator @ ((d1 * self._labels)[:, None] * self._design))
        return g

    def hessians(self, x) -> np.ndarray:
        x = self._check(x)
        m = self.m
        H = np.broadcast_to(np.diag(2.0 * self._reg), (self.n, m, m)).copy()
        if self._owner.size:
            d2 = self._hinge(x)[2]
            D = self._design
            outer = (d2[:, None] * D)[:, :, None] * D[:, None, :]
            H += self.cfg.C * (self._indicator @ outer.reshape(-1, m * m)).reshape(self.n, m, m)
            H = 0.5 * (H + H.transpose(0, 2, 1))
        return H

    # consensus objective g(xbar) = sum_i f_i(xbar)
    def consensus_cost(self, xbar) -> float:
        return self.cost(np.tile(np.asarray(xbar, dtype=float), (self.n, 1)))

    def consensus_gradient(self, xbar) -> np.ndarray:
        return self.gradients(np.tile(np.asarray(xbar, dtype=float), (self.n, 1))).sum(axis=0)
