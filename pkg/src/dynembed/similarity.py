"""Time-parameterized node similarity, distance, Gramian and autocovariance measures.

The central object is the similarity matrix at time t: the Gram matrix of the
weighted inner products between the zero-state impulse responses of all
inputs. Its dual squared-distance matrix, the integrated (interval) variants,
the finite-time observability Gramian, diffusion autocovariances and the
resistance-distance oracle all live here.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from dynembed.graphs import (
    Graph,
    QuotientGraph,
    check_eep,
    combinatorial_laplacian,
    teleportation_laplacian,
)
from dynembed.linsys import LinearSystem, propagator


class NumericalError(RuntimeError):
    """A numeric guarantee (PSD-ness, finiteness, uniqueness) failed."""


@dataclass(frozen=True)
class TimeSpec:
    """Time annotation of a similarity matrix: a point t or the interval [0, t]."""

    kind: str  # "point" | "interval"
    t: float

    def to_json(self) -> dict:
        return {"kind": self.kind, "t": self.t}


@dataclass(frozen=True)
class Centering:
    """Record of the rank-one projection weighting ``I - alpha nu nu^T``."""

    nu: np.ndarray
    alpha: float

    def to_json(self) -> dict:
        return {"nu": np.asarray(self.nu).tolist(), "alpha": self.alpha}


@dataclass(frozen=True)
class SimilarityMatrix:
    """Symmetric PSD similarity matrix with its time annotation.

    Construction symmetrizes roundoff-level asymmetry away; genuinely
    asymmetric input is rejected.
    """

    values: np.ndarray
    t_spec: TimeSpec | None = None
    centering: Centering | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError(f"similarity matrix must be square, got shape {v.shape}")
        scale = np.abs(v).max() if v.size else 0.0
        asym = np.abs(v - v.T).max() if v.size else 0.0
        if asym > 1e-12 * max(1.0, scale):
            raise ValueError(f"matrix is not symmetric: max asymmetry {asym:.3e}")
        object.__setattr__(self, "values", (v + v.T) / 2.0)

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class DistanceMatrix:
    """Entrywise squared Euclidean distances between response vectors."""

    values: np.ndarray
    z: np.ndarray
    t_spec: TimeSpec | None = None


@dataclass(frozen=True)
class Gramian:
    """Finite-horizon observability Gramian ``int_0^t expm(A's) C'C expm(As) ds``."""

    values: np.ndarray
    horizon: float


@dataclass(frozen=True)
class DiffusionStats:
    """Stationary quantities of a diffusion: pi, Pi = diag(pi), Sigma0, P(t)."""

    pi: np.ndarray
    Pi: np.ndarray
    Sigma0: np.ndarray
    P_t: np.ndarray
    t: float


def _response(sys: LinearSystem, t: float) -> np.ndarray:
    return sys.C_op @ propagator(sys, t) @ sys.B_op


def similarity_at(sys: LinearSystem, t: float) -> SimilarityMatrix:
    """Similarity matrix at time t under the system's own weighting.

    Computes ``Y(t)^T W Y(t)`` with ``Y(t) = C expm(A t) B`` (``A^t`` in
    discrete mode) and symmetrizes the result.
    """
    Y = _response(sys, t)
    psi = Y.T @ sys.W_op @ Y
    return SimilarityMatrix((psi + psi.T) / 2.0, TimeSpec("point", float(t)))


def centered_similarity_at(
    sys: LinearSystem, t: float, nu: np.ndarray, alpha: float = 1.0
) -> SimilarityMatrix:
    """Similarity at time t under the projection weighting ``I - alpha nu nu^T``.

    ``nu`` must be a unit vector; ``alpha = 1`` projects the ``nu`` component
    of every response out entirely (for ``nu = 1/sqrt(n)`` this centers the
    responses), smaller values only damp it. The system's own weighting is
    replaced, not composed.
    """
    nu = np.asarray(nu, dtype=float).ravel()
    if abs(np.linalg.norm(nu) - 1.0) > 1e-12:
        raise ValueError(f"nu must be a unit vector, got norm {np.linalg.norm(nu)!r}")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if nu.shape[0] != sys.output_dim:
        raise ValueError("nu must match the output dimension")
    Y = _response(sys, t)
    proj = nu @ Y
    psi = Y.T @ Y - alpha * np.outer(proj, proj)
    return SimilarityMatrix(
        (psi + psi.T) / 2.0, TimeSpec("point", float(t)), Centering(nu, float(alpha))
    )


def distance_squared(psi: SimilarityMatrix) -> DistanceMatrix:
    """Squared-distance dual ``D2_ij = psi_ii + psi_jj - 2 psi_ij`` of a similarity.

    Roundoff-level negatives are clamped to zero; larger negative entries mean
    the input was not PSD and raise :class:`NumericalError`.
    """
    values = psi.values
    z = np.diag(values).copy()
    dsq = z[:, None] + z[None, :] - 2.0 * values
    tol = 1e-10 * max(1.0, np.abs(z).max() if z.size else 0.0)
    low = dsq.min() if dsq.size else 0.0
    if low < -tol:
        raise NumericalError(
            f"similarity matrix violates positive semidefiniteness: D^2 entry {low:.3e}"
        )
    np.clip(dsq, 0.0, None, out=dsq)
    np.fill_diagonal(dsq, 0.0)
    return DistanceMatrix(dsq, z, psi.t_spec)


def _van_loan_integral(A: np.ndarray, Q: np.ndarray, t: float) -> np.ndarray:
    """``int_0^t expm(A's) Q expm(As) ds`` via a block matrix exponential.

    Exponentiates ``[[-A', Q], [0, A]] tau``; the integral over [0, tau] is
    ``F22' F12`` read from the upper-right and lower-right blocks. The block
    contains ``-A'``, whose exponential grows even for stable ``A``, so long
    horizons are reached by interval doubling with the exact semigroup rule
    ``G(2 tau) = G(tau) + P(tau)' G(tau) P(tau)`` instead of one huge
    exponential that would overflow.
    """
    m = A.shape[0]
    scale = float(np.linalg.norm(A, 1)) * t
    doublings = max(0, int(np.ceil(np.log2(scale / 8.0)))) if scale > 8.0 else 0
    tau = t / 2.0**doublings
    block = np.zeros((2 * m, 2 * m))
    block[:m, :m] = -A.T
    block[:m, m:] = Q
    block[m:, m:] = A
    F = scipy.linalg.expm(block * tau)
    P = F[m:, m:]
    G = P.T @ F[:m, m:]
    for _ in range(doublings):
        G = G + P.T @ G @ P
        G = (G + G.T) / 2.0
        P = P @ P
    return G


def integrated_similarity(sys: LinearSystem, t: float) -> SimilarityMatrix:
    """Similarity integrated over the interval [0, t] (continuous mode only).

    Uses the block-exponential method on ``Q = C^T W C``; discrete systems are
    rejected, see :func:`integrated_similarity_discrete` for the partial-sum
    analogue.
    """
    if sys.mode != "continuous":
        raise ValueError(
            "integrated_similarity requires continuous mode; "
            "use integrated_similarity_discrete for discrete partial sums"
        )
    if t <= 0:
        raise ValueError(f"horizon must be positive, got {t}")
    Q = sys.C_op.T @ sys.W_op @ sys.C_op
    integral = _van_loan_integral(sys.A_op, Q, float(t))
    psi = sys.B_op.T @ integral @ sys.B_op
    return SimilarityMatrix((psi + psi.T) / 2.0, TimeSpec("interval", float(t)))


def integrated_similarity_discrete(sys: LinearSystem, t: int) -> SimilarityMatrix:
    """Partial-sum similarity ``sum_{s=0}^{t} Psi(s)`` for discrete systems."""
    if sys.mode != "discrete":
        raise ValueError("integrated_similarity_discrete requires discrete mode")
    if t != int(t) or t < 0:
        raise ValueError(f"horizon must be a nonnegative integer, got {t}")
    Q = sys.C_op.T @ sys.W_op @ sys.C_op
    P = np.eye(sys.state_dim)
    total = np.zeros((sys.input_dim, sys.input_dim))
    for _ in range(int(t) + 1):
        Y = P @ sys.B_op
        total += Y.T @ Q @ Y
        P = sys.A_op @ P
    return SimilarityMatrix((total + total.T) / 2.0, TimeSpec("interval", float(t)))


def integrated_distance(psi_int: SimilarityMatrix) -> DistanceMatrix:
    """Squared-distance dual of an integrated similarity matrix."""
    return distance_squared(psi_int)


def observability_gramian(sys: LinearSystem, t: float) -> Gramian:
    """Finite-time observability Gramian over [0, t] (continuous mode only)."""
    if sys.mode != "continuous":
        raise ValueError("observability_gramian requires continuous mode")
    if t <= 0:
        raise ValueError(f"horizon must be positive, got {t}")
    G = _van_loan_integral(sys.A_op, sys.C_op.T @ sys.C_op, float(t))
    return Gramian((G + G.T) / 2.0, float(t))


def lyapunov_residual(sys: LinearSystem, t: float, h: float = 1e-4) -> float:
    """Self-check residual of the similarity evolution equation.

    With identity input map the similarity obeys
    ``dPsi/dt = A^T Psi + Psi A``; this returns the max-norm gap between the
    central difference at step h and that right-hand side.
    """
    if sys.mode != "continuous":
        raise ValueError("lyapunov_residual requires continuous mode")
    if sys.B_op.shape[0] != sys.B_op.shape[1] or not np.array_equal(
        sys.B_op, np.eye(sys.B_op.shape[0])
    ):
        raise ValueError("lyapunov_residual requires an identity input map")
    if t - h < 0:
        raise ValueError("need t - h >= 0 for the central difference")
    plus = similarity_at(sys, t + h).values
    minus = similarity_at(sys, t - h).values
    mid = similarity_at(sys, t).values
    lhs = (plus - minus) / (2.0 * h)
    rhs = sys.A_op.T @ mid + mid @ sys.A_op
    return float(np.abs(lhs - rhs).max())


def _components_undirected(mask: np.ndarray) -> int:
    n = mask.shape[0]
    seen = np.zeros(n, dtype=bool)
    count = 0
    for start in range(n):
        if seen[start]:
            continue
        count += 1
        queue = deque([start])
        seen[start] = True
        while queue:
            i = queue.popleft()
            for j in np.flatnonzero(mask[i]):
                if not seen[j]:
                    seen[j] = True
                    queue.append(j)
    return count


def _is_connected(g: Graph) -> bool:
    mask = (g.weights != 0) | (g.weights.T != 0)
    return _components_undirected(mask) == 1


def _stationary_distribution(L: np.ndarray) -> np.ndarray:
    """Unique strictly positive row vector with ``pi L = 0`` and ``pi 1 = 1``."""
    null = scipy.linalg.null_space(L.T, rcond=1e-10)
    if null.shape[1] != 1:
        raise NumericalError(
            "no unique stationary distribution: Laplacian kernel has "
            f"dimension {null.shape[1]}; add teleportation or use the "
            "teleportation-free similarity (similarity_at with a covariance weighting)"
        )
    pi = null[:, 0]
    pi = pi / pi.sum()
    if pi.min() <= 1e-12:
        raise NumericalError(
            "no strictly positive stationary distribution; add teleportation or "
            "use the teleportation-free similarity (similarity_at)"
        )
    return pi


def diffusion_stats(g: Graph, t: float, teleport: float | None = None) -> DiffusionStats:
    """Stationary distribution, covariance seed and propagator of a graph diffusion.

    Without teleportation the generator is the combinatorial Laplacian (the
    stationary distribution is uniform on connected undirected graphs); with a
    teleport rate the adjusted Laplacian of the teleported walk is used.
    """
    if teleport is None:
        L = combinatorial_laplacian(g)
        if not g.directed:
            if not _is_connected(g):
                raise NumericalError("graph is disconnected: stationary distribution not unique")
            pi = np.full(g.n, 1.0 / g.n)
        else:
            pi = _stationary_distribution(L)
    else:
        L = teleportation_laplacian(g, teleport)
        pi = _stationary_distribution(L)
    Pi = np.diag(pi)
    Sigma0 = Pi - np.outer(pi, pi)
    P_t = scipy.linalg.expm(-L * float(t))
    return DiffusionStats(pi=pi, Pi=Pi, Sigma0=Sigma0, P_t=P_t, t=float(t))


def autocovariance(g: Graph, t: float, teleport: float | None = None) -> np.ndarray:
    """Autocovariance ``Sigma(t) = (Pi - pi^T pi) expm(-L t)`` of the stationary diffusion."""
    stats = diffusion_stats(g, t, teleport)
    return stats.Sigma0 @ stats.P_t


def resistance_distance(g: Graph) -> np.ndarray:
    """Effective resistance between all node pairs of a connected undirected graph.

    ``kappa_ij = (e_i - e_j)^T L^+ (e_i - e_j)`` with the Moore-Penrose
    pseudoinverse of the combinatorial Laplacian. Serves as the independent
    oracle for the infinite-horizon integrated distance limit.
    """
    if g.directed:
        raise ValueError("resistance_distance requires an undirected graph")
    if not _is_connected(g):
        raise NumericalError("graph is disconnected: resistance distance is infinite")
    L_pinv = np.linalg.pinv(combinatorial_laplacian(g))
    d = np.diag(L_pinv)
    kappa = d[:, None] + d[None, :] - L_pinv - L_pinv.T
    np.fill_diagonal(kappa, 0.0)
    return kappa


@dataclass(frozen=True)
class EepBlockReport:
    """Within-cell distance residuals of a quotient observation at several times."""

    quotient: QuotientGraph
    times: tuple[float, ...]
    max_within_cell: dict[float, float]

    @property
    def residual(self) -> float:
        return max(self.max_within_cell.values())


def eep_block_check(
    g: Graph, cells: Sequence[Sequence[int]], times: Sequence[float] = (0.1, 1.0, 10.0)
) -> EepBlockReport:
    """Verify the block structure of the similarity under a quotient observation.

    Accepts only external equitable partitions; observes the diffusion through
    the cell-averaging map ``H^+`` and reports the largest within-cell squared
    distance at each requested time (zero up to roundoff for a true EEP).
    """
    quotient = check_eep(g, cells)
    H = quotient.indicator
    H_pinv = H.T / H.sum(axis=0)[:, None]
    n = g.n
    sys = LinearSystem(
        -combinatorial_laplacian(g), np.eye(n), H_pinv, np.eye(H.shape[1]), "continuous"
    )
    report: dict[float, float] = {}
    for t in times:
        dsq = distance_squared(similarity_at(sys, t)).values
        worst = 0.0
        for members in quotient.cells:
            idx = np.asarray(members)
            if idx.size > 1:
                worst = max(worst, float(dsq[np.ix_(idx, idx)].max()))
        report[float(t)] = worst
    return EepBlockReport(quotient, tuple(float(t) for t in times), report)
