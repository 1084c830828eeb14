"""
Weighted digraphs, their Laplacians, and the switching topology schedule.

Weights follow the receiving-node convention: ``weights[i, j]`` is the
weight of the link from node ``j`` into node ``i``.  The Laplacian keeps
these weights off the diagonal and puts the negated row sum on it, so its
spectrum lies in the closed left half-plane.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, GraphInvariantError

BALANCE_TOL = 1e-12


class Digraph:
    """Immutable weighted directed graph.

    Construction only checks the shape; call :meth:`validate` (or
    :func:`build_laplacian`) to enforce the weight-balanced, strongly
    connected invariants.
    """

    __slots__ = ("_weights",)

    def __init__(self, weights):
        w = np.array(weights, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise DimensionError(f"weights must be square, got shape {w.shape}")
        w.setflags(write=False)
        self._weights = w

    @property
    def weights(self) -> np.ndarray:
        return self._weights

    @property
    def n(self) -> int:
        return self._weights.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Digraph):
            return NotImplemented
        return np.array_equal(self._weights, other._weights)

    def __hash__(self):
        return hash(self._weights.tobytes())

    def __repr__(self):
        return f"Digraph(n={self.n}, links={int(np.count_nonzero(self._weights))})"

    def permuted(self, perm) -> "Digraph":
        """Relabel node ``i`` as ``perm[i]``."""
        perm = np.asarray(perm)
        if sorted(perm.tolist()) != list(range(self.n)):
            raise ValueError("perm must be a permutation of range(n)")
        w = np.zeros_like(self._weights)
        w[np.ix_(perm, perm)] = self._weights
        return Digraph(w)

    def validate(self, connectivity: bool = True) -> None:
        """Raise :class:`GraphInvariantError` naming the first failed check."""
        w = self._weights
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise GraphInvariantError("nonnegative", "weights must be finite and >= 0")
        if np.any(np.diag(w) != 0):
            raise GraphInvariantError("diagonal", "self-loops are not allowed")
        rows = w.sum(axis=1)
        if np.any(rows >= 1):
            i = int(np.argmax(rows))
            raise GraphInvariantError(
                "row_sum", f"row {i} sums to {rows[i]:.6g}, must be < 1")
        ok, imbalance = check_weight_balanced(self)
        if not ok:
            raise GraphInvariantError(
                "weight_balanced", f"max |in - out| = {imbalance:.3e}")
        if connectivity and not check_strongly_connected(self):
            raise GraphInvariantError("strongly_connected", "graph is not strongly connected")


def build_laplacian(g: Digraph, validate: bool = True) -> np.ndarray:
    """Laplacian with off-diagonals ``w_ij`` and diagonal ``-sum_j w_ij``.

    With ``validate=False`` any square weight matrix is accepted; tests use
    this to build negative controls from unbalanced graphs.
    """
    if validate:
        g.validate()
    L = np.array(g.weights, dtype=float)
    np.fill_diagonal(L, 0.0)
    L[np.diag_indices_from(L)] = -L.sum(axis=1)
    return L


def check_weight_balanced(g: Digraph) -> tuple[bool, float]:
    """Compare in-weight (column sum) with out-weight (row sum) at every node."""
    w = g.weights
    if w.size == 0:
        return True, 0.0
    imbalance = float(np.max(np.abs(w.sum(axis=0) - w.sum(axis=1))))
    return imbalance <= BALANCE_TOL, imbalance


def _reaches_all(adj: np.ndarray) -> bool:
    n = adj.shape[0]
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for v in np.flatnonzero(adj[u]):
            if not seen[v]:
                seen[v] = True
                queue.append(v)
    return bool(seen.all())


def check_strongly_connected(g: Digraph) -> bool:
    """Forward and backward search from node 0 must both reach every node."""
    if g.n <= 1:
        return True
    # adj[u, v]: edge u -> v, i.e. weights[v, u] > 0
    adj = g.weights.T > 0
    return _reaches_all(adj) and _reaches_all(adj.T)


def _ring_weights(n, k, w_cycle, w_hop):
    w = np.zeros((n, n))
    idx = np.arange(n)
    w[idx, (idx - 1) % n] += w_cycle
    w[idx, (idx - k) % n] += w_hop
    return w


def _sample_weight(rng, lo, hi):
    while True:
        v = rng.uniform(lo, hi)
        if v > 0:
            return v


def make_cycle_plus_khop(n, k=2, weight_range=(0.0, 0.5), seed=None,
                         shared_weight=False) -> Digraph:
    """Union of the directed cycle ``i <- i-1`` and the k-hop ring ``i <- i-k``.

    Each ring carries one uniform weight, which keeps every node balanced.

    Parameters
    ----------
    n : int
        Number of nodes, at least 3.
    k : int
        Hop length, ``1 < k < n``.
    weight_range : tuple of float
        Half-open sampling interval ``[lo, hi)``; zero draws are rejected.
    seed : int, Generator or None
        Source of randomness.
    shared_weight : bool
        Use a single sampled weight for both rings.
    """
    if n < 3:
        raise ValueError("n must be >= 3")
    if not 1 < k < n:
        raise ValueError("hop k must satisfy 1 < k < n")
    lo, hi = weight_range
    if not 0 <= lo < hi:
        raise ValueError("weight_range must satisfy 0 <= lo < hi")
    rng = np.random.default_rng(seed)
    w_cycle = _sample_weight(rng, lo, hi)
    w_hop = w_cycle if shared_weight else _sample_weight(rng, lo, hi)
    g = Digraph(_ring_weights(n, k, w_cycle, w_hop))
    g.validate()
    return g


@dataclass(frozen=True)
class SwitchingSchedule:
    """Deterministic sequence of (W-graph, A-graph) pairs.

    Interval ``idx`` covers ``[idx*period, (idx+1)*period)``.  Its graphs are
    drawn from a generator seeded with ``(seed, idx)``: one node permutation
    shared by both graphs, independent ring weights for each.  A ``period``
    of ``None`` gives a static topology (always interval 0).
    """

    n: int
    period: float | None = 0.05
    seed: int = 0
    k: int = 2
    weight_range: tuple[float, float] = (0.0, 0.5)
    shared_weight: bool = False
    strict: bool = False

    def __post_init__(self):
        if self.period is not None and not self.period > 0:
            raise ValueError("period must be positive or None")
        # catches bad n/k/weight_range once, at construction
        make_cycle_plus_khop(self.n, self.k, self.weight_range, 0, self.shared_weight)

    @property
    def static(self) -> bool:
        return self.period is None

    def index_at(self, t: float) -> int:
        if t < 0:
            raise ValueError("t must be >= 0")
        if self.static:
            return 0
        # guard against t = j*period landing just below the boundary
        return int(math.floor(t / self.period + 1e-9))

    def graphs(self, index: int) -> tuple[Digraph, Digraph]:
        rng = np.random.default_rng([self.seed, index])
        perm = rng.permutation(self.n)
        pair = []
        for _ in range(2):
            w_cycle = _sample_weight(rng, *self.weight_range)
            w_hop = w_cycle if self.shared_weight else _sample_weight(rng, *self.weight_range)
            pair.append(Digraph(_ring_weights(self.n, self.k, w_cycle, w_hop)).permuted(perm))
        if self.strict:
            for g in pair:
                g.validate()
        return pair[0], pair[1]


@dataclass(frozen=True, eq=False)
class FixedTopology:
    """A static, user-supplied (W-graph, A-graph) pair with the schedule interface.

    Unlike :class:`SwitchingSchedule` this accepts any size, including a
    single isolated node.
    """

    W: Digraph
    A: Digraph
    period = None
    static = True

    def __post_init__(self):
        if self.W.n != self.A.n:
            raise DimensionError("W and A graphs differ in size")

    @property
    def n(self) -> int:
        return self.W.n

    def index_at(self, t: float) -> int:
        return 0

    def graphs(self, index: int = 0) -> tuple[Digraph, Digraph]:
        return self.W, self.A


def next_topology(schedule: SwitchingSchedule, t: float) -> tuple[Digraph, Digraph]:
    return schedule.graphs(schedule.index_at(t))


def write_adjacency_csv(g: Digraph, path) -> None:
    """Dense CSV, row ``i`` holding the incoming weights of node ``i``."""
    np.savetxt(path, g.weights, delimiter=",", fmt="%.17g")


def read_adjacency_csv(path) -> Digraph:
    return Digraph(np.loadtxt(path, delimiter=",", ndmin=2))
