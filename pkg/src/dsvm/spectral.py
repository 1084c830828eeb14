"""
Eigenstructure of the flow matrix ``M = M0 + alpha*M1``.

Covers the zero-eigenvalue verdict, first-order drift of the zero cluster
under the ``alpha*M1`` perturbation, the matching-distance bound between
``sigma(M)`` and ``sigma(M0)``, and the step-size bound derived from it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import permutations

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .dynamics import assemble_system_matrix
from .errors import DimensionError, InvalidSpectrum, NumericalFailure

TOL_ZERO_REL = 1e-7
TOL_NEG = 1e-9


def eigenvalues(A) -> np.ndarray:
    """All eigenvalues of a real square matrix, sorted by descending real part.

    Backed by LAPACK's Hessenberg/shifted-QR driver through numpy.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"matrix must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise NumericalFailure("matrix has non-finite entries")
    try:
        ev = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"eigenvalue iteration failed to converge: {exc}") from exc
    ev = ev.astype(complex)
    return ev[np.lexsort((-ev.imag, -ev.real))]


def inf_norm(A) -> float:
    """Maximum absolute row sum."""
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return 0.0
    return float(np.max(np.sum(np.abs(A), axis=1)))


@dataclass
class ZeroStructureVerdict:
    passed: bool
    zero_count: int
    negative_count: int
    expected_zero: int
    size: int
    tol_zero: float
    tol_neg: float

    def __str__(self):
        status = "pass" if self.passed else "FAIL"
        return (f"{status}: {self.zero_count} eigenvalues with |lambda| < {self.tol_zero:.2e} "
                f"(want {self.expected_zero}), {self.negative_count} with Re < -{self.tol_neg:.0e} "
                f"(want {self.size - self.expected_zero})")


def verify_zero_structure(M, m, tol_zero_rel=TOL_ZERO_REL, tol_neg=TOL_NEG,
                          eigs=None) -> ZeroStructureVerdict:
    """Check that ``M`` has exactly ``m`` zero eigenvalues and the rest in the open left half-plane.

    The zero threshold scales with the matrix: ``tol_zero_rel * ||M||_inf``.
    """
    M = np.asarray(M, dtype=float)
    ev = eigenvalues(M) if eigs is None else np.asarray(eigs)
    tol_zero = tol_zero_rel * inf_norm(M)
    zero = int(np.count_nonzero(np.abs(ev) < tol_zero))
    neg = int(np.count_nonzero(ev.real < -tol_neg))
    size = M.shape[0]
    return ZeroStructureVerdict(zero == m and neg == size - m, zero, neg, m, size, tol_zero, tol_neg)


def _hessian_blocks(H, n, m):
    H = np.asarray(H, dtype=float)
    if H.shape != (n * m, n * m):
        raise DimensionError(f"H has shape {H.shape}, expected {(n * m, n * m)}")
    return np.array([H[i * m:(i + 1) * m, i * m:(i + 1) * m] for i in range(n)])


def perturbation_derivative_matrix(H, n, m) -> np.ndarray:
    """``[[0, 0], [-n I, -sum_i H_i]]`` built from the block-diagonal Hessian.

    This is the zero-cluster projection of ``M1`` written with the
    unnormalized stacking vectors.  Its spectrum (``m`` zeros and the
    eigenvalues of ``-sum_i H_i``) gives the sign of the drift; for the
    first-order rates use :func:`zero_cluster_derivative_matrix`.
    """
    S = _hessian_blocks(H, n, m).sum(axis=0)
    Z = np.zeros((m, m))
    return np.block([[Z, Z], [-n * np.eye(m), -S]])


def null_space_basis(n, m, normalized=False):
    """``V1 = (1_n; 0_n) (x) I_m`` and ``V2 = (0_n; 1_n) (x) I_m``.

    With ``normalized=True`` both are scaled by ``1/sqrt(n)`` so that
    ``[V1 V2]^T [V1 V2] = I_2m``.
    """
    one, zero = np.ones((n, 1)), np.zeros((n, 1))
    V1 = np.kron(np.vstack([one, zero]), np.eye(m))
    V2 = np.kron(np.vstack([zero, one]), np.eye(m))
    if normalized:
        V1, V2 = V1 / math.sqrt(n), V2 / math.sqrt(n)
    return V1, V2


def zero_eigenvectors(H, n, m):
    """Biorthonormal right/left bases ``(V, U)`` of the zero eigenvalue of ``M0``.

    ``V = [V1 V2]`` is the stacking basis.  The left vectors pair with it
    so that ``U^T V = I``; the second group must absorb the ``H (W (x) I)``
    block, which is why it is not simply ``V2^T``.
    """
    blocks = _hessian_blocks(H, n, m)
    H = np.asarray(H, dtype=float)
    V1, V2 = null_space_basis(n, m)
    ones_m = np.kron(np.ones((n, 1)), np.eye(m))
    K = blocks.sum(axis=0) / n
    U1 = np.vstack([ones_m, np.zeros((n * m, m))]) / n
    U2 = np.vstack([-H @ ones_m + np.kron(np.ones((n, 1)), K), ones_m]) / n
    return np.hstack([V1, V2]), np.hstack([U1, U2])


def eigenvalue_derivative_matrix(P_prime, U, V) -> np.ndarray:
    """First-order drift matrix ``U^T P' V`` of a semisimple eigenvalue cluster.

    ``V`` holds right eigenvectors and ``U`` left eigenvectors normalized so
    that ``U^T V = I``; the eigenvalues of the result are the derivatives of
    the cluster's eigenvalues along the perturbation ``P'``.
    """
    return np.asarray(U).T @ np.asarray(P_prime) @ np.asarray(V)


def zero_cluster_derivative_matrix(H, n, m) -> np.ndarray:
    """Drift matrix of the ``2m`` zero eigenvalues of ``M0`` along ``M1``.

    Works out to ``[[0, -I], [0, -sum_i H_i / n]]``: ``m`` eigenvalues stay
    at zero and ``m`` leave at rates given by the eigenvalues of the mean
    local Hessian.
    """
    H = np.asarray(H, dtype=float)
    nm = n * m
    M1 = np.block([[np.zeros((nm, nm)), -np.eye(nm)], [np.zeros((nm, nm)), -H]])
    V, U = zero_eigenvectors(H, n, m)
    return eigenvalue_derivative_matrix(M1, U, V)


def null_space_check(M, n, m) -> float:
    """``||M V1||_inf``; zero whenever both Laplacians are weight-balanced."""
    V1, _ = null_space_basis(n, m)
    return inf_norm(np.asarray(M, dtype=float) @ V1)


def matching_distance_bound(M0, M, M1, alpha) -> float:
    """``4 (||M0|| + ||M||)^(1 - 1/nm) ||alpha M1||^(1/nm)`` in the infinity norm."""
    nm = np.asarray(M).shape[0] // 2
    p = 1.0 / nm
    pert = inf_norm(alpha * np.asarray(M1, dtype=float))
    if pert == 0:
        return 0.0
    return 4.0 * (inf_norm(M0) + inf_norm(M)) ** (1 - p) * pert ** p


def optimal_matching_distance(a, b) -> float:
    """``min_pi max_i |a_i - b_pi(i)|`` by exhaustive search (at most 8 values)."""
    a, b = np.asarray(a, dtype=complex), np.asarray(b, dtype=complex)
    k = a.size
    if b.size != k:
        raise DimensionError("spectra differ in size")
    if k > 8:
        raise ValueError("exhaustive matching is limited to 8 values; "
                         "use bottleneck_matching_distance")
    if k == 0:
        return 0.0
    D = np.abs(a[:, None] - b[None, :])
    perms = np.array(list(permutations(range(k))))
    return float(D[np.arange(k), perms].max(axis=1).min())


def bottleneck_matching_distance(a, b) -> float:
    """Same quantity as :func:`optimal_matching_distance` for any size.

    Bisects over the sorted pairwise distances, testing each threshold for a
    perfect bipartite matching.
    """
    a, b = np.asarray(a, dtype=complex), np.asarray(b, dtype=complex)
    k = a.size
    if b.size != k:
        raise DimensionError("spectra differ in size")
    if k == 0:
        return 0.0
    D = np.abs(a[:, None] - b[None, :])
    cand = np.unique(D)

    def perfect(th):
        match = maximum_bipartite_matching(csr_matrix(D <= th), perm_type="column")
        return bool(np.all(match >= 0))

    lo, hi = 0, cand.size - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if perfect(cand[mid]):
            hi = mid
        else:
            lo = mid + 1
    return float(cand[lo])


def gamma(H) -> float:
    """Maximum absolute row sum of the block-diagonal Hessian."""
    return inf_norm(H)


def lambda_min(Wbar, Abar) -> float:
    """``|Re|`` of the third eigenvalue (by descending real part) of each per-dimension spectrum of ``M0``.

    Every dimension sees ``sigma(W) U sigma(A)``; after the two zeros the
    next eigenvalue is the least stable non-zero one of either Laplacian.
    """
    ev = np.concatenate([eigenvalues(Wbar), eigenvalues(Abar)])
    ev = ev[np.argsort(-ev.real, kind="stable")]
    if ev.size < 3:
        raise InvalidSpectrum("need at least two nodes for a non-zero Laplacian eigenvalue")
    return float(abs(ev[2].real))


def lambda_min_from_m0(M0, m) -> float:
    """Same as :func:`lambda_min`, read off the full spectrum of ``M0``."""
    ev = eigenvalues(M0)
    return float(abs(ev[2 * m].real))


def alpha_bar_objective(alpha, gamma, n, m) -> float:
    """Upper bound on the matching distance at step size ``alpha``.

    Uses the worst-case norm estimates ``||M0|| <= 2(1+gamma)``,
    ``||M|| <= max(2 + gamma(2+alpha), 2 + alpha)`` and
    ``||alpha M1|| <= alpha * max(gamma, 1)``.
    """
    p = 1.0 / (n * m)
    if gamma < 1:
        base = max(4 + 4 * gamma + alpha * gamma, 4 + 2 * gamma + alpha)
        pert = alpha
    else:
        base = 4 + 4 * gamma + alpha * gamma
        pert = alpha * gamma
    return 4.0 * base ** (1 - p) * pert ** p


def alpha_bar(gamma, lambda_min, n, m, rtol=1e-13) -> float:
    """Largest ``alpha`` whose matching-distance bound stays below ``lambda_min``.

    The objective increases monotonically from 0, so the root is bracketed
    and bisected in ``log(alpha)``; certified values are often far below 1.
    """
    if not lambda_min > 0:
        raise InvalidSpectrum(f"lambda_min must be positive, got {lambda_min}")
    if not gamma > 0:
        raise InvalidSpectrum(f"gamma must be positive, got {gamma}")

    def f(log_a):
        return alpha_bar_objective(math.exp(log_a), gamma, n, m) - lambda_min

    lo, hi = -1.0, 1.0
    while f(lo) >= 0:
        lo *= 2
        if lo < -700:
            raise NumericalFailure("alpha_bar underflows double precision")
    while f(hi) <= 0:
        hi *= 2
        if hi > 700:
            raise NumericalFailure("alpha_bar overflows double precision")
    while hi - lo > rtol:
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return math.exp(0.5 * (lo + hi))


def slowest_rate(eigs, m) -> float:
    """Largest real part once the ``m`` eigenvalues nearest zero are set aside."""
    ev = np.asarray(eigs)
    rest = ev[np.argsort(np.abs(ev), kind="stable")][m:]
    return float(np.max(rest.real)) if rest.size else float("nan")


@dataclass
class SpectralReport:
    eigenvalues: np.ndarray
    zero_multiplicity: int
    gamma: float
    lambda_min: float
    alpha_bar: float
    matching_distance_bound: float
    alpha: float
    verdict: ZeroStructureVerdict
    null_space_residual: float
    slowest_rate: float
    t: float | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "gamma": self.gamma,
            "lambda_min": self.lambda_min,
            "alpha_bar": self.alpha_bar,
            "zero_multiplicity": self.zero_multiplicity,
            "bound": self.matching_distance_bound,
            "alpha": self.alpha,
            "structure_passed": self.verdict.passed,
            "negative_count": self.verdict.negative_count,
            "null_space_residual": self.null_space_residual,
            "slowest_rate": self.slowest_rate,
        }
        if self.t is not None:
            d["t"] = self.t
        d.update(self.extra)
        return d


def spectral_report(Wbar, Abar, H, alpha, t=None) -> SpectralReport:
    """Full eigenstructure summary of the flow matrix at one state and topology."""
    n = np.asarray(Wbar).shape[0]
    m = np.asarray(H).shape[0] // n
    sm = assemble_system_matrix(Wbar, Abar, H, alpha)
    ev = eigenvalues(sm.M)
    verdict = verify_zero_structure(sm.M, m, eigs=ev)
    g = gamma(sm.H)
    lam = lambda_min(Wbar, Abar)
    try:
        abar = alpha_bar(g, lam, n, m)
    except (InvalidSpectrum, NumericalFailure):
        abar = float("nan")
    return SpectralReport(
        eigenvalues=ev,
        zero_multiplicity=verdict.zero_count,
        gamma=g,
        lambda_min=lam,
        alpha_bar=abar,
        matching_distance_bound=matching_distance_bound(sm.M0, sm.M, sm.M1, alpha),
        alpha=float(alpha),
        verdict=verdict,
        null_space_residual=null_space_check(sm.M, n, m),
        slowest_rate=slowest_rate(ev, m),
        t=t,
    )


def empirical_frontier(Wbar, Abar, H, alphas) -> tuple[float | None, list]:
    """Scan step sizes and report where the zero-eigenvalue verdict holds.

    Returns the largest scanned ``alpha`` that passes, or ``None``, and the
    full ``(alpha, passed)`` scan.  Diagnostic only.
    """
    n = np.asarray(Wbar).shape[0]
    m = np.asarray(H).shape[0] // n
    scan = []
    for a in alphas:
        M = assemble_system_matrix(Wbar, Abar, H, a).M
        scan.append((float(a), verify_zero_structure(M, m).passed))
    passing = [a for a, ok in scan if ok]
    return (max(passing) if passing else None), scan
