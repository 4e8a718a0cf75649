"""Partitioning of similarity matrices: Louvain, spectral, VI and time scans.

The combinatorial optimizer maximizes any quality of the form
``trace H^T (F - alpha a b^T) H`` over hard partitions, using greedy node
moves in seeded random order followed by exact aggregation of (F, a, b) onto
the coarse-grained instance. Scanning the quality over a grid of times and
seeds reveals robust multiscale structure as plateaus in the community count
with low variation of information.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from dynembed.linsys import LinearSystem, propagator
from dynembed.similarity import SimilarityMatrix


@dataclass(frozen=True, eq=False)
class Partition:
    """Hard assignment of nodes to groups, stored as canonical dense labels.

    Labels are renumbered in order of first appearance, so two partitions of
    the same node set are equal iff they induce the same grouping.
    """

    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=int)
        _, canonical = np.unique(labels, return_inverse=True)
        # np.unique sorts by label value; remap to first-appearance order
        order = {}
        remap = np.empty(canonical.max() + 1 if canonical.size else 0, dtype=int)
        for lab in canonical:
            if lab not in order:
                order[lab] = len(order)
        for lab, new in order.items():
            remap[lab] = new
        object.__setattr__(self, "labels", remap[canonical] if canonical.size else canonical)

    @classmethod
    def from_groups(cls, groups: Sequence[Sequence[int]], n: int) -> "Partition":
        labels = np.full(n, -1, dtype=int)
        for g, members in enumerate(groups):
            for i in members:
                if labels[i] != -1:
                    raise ValueError(f"node {i} assigned twice")
                labels[i] = g
        if (labels < 0).any():
            raise ValueError("every node must be assigned to a group")
        return cls(labels)

    @property
    def n(self) -> int:
        return self.labels.shape[0]

    @property
    def k(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0

    def indicator(self) -> np.ndarray:
        H = np.zeros((self.n, self.k))
        H[np.arange(self.n), self.labels] = 1.0
        return H

    def groups(self) -> tuple[tuple[int, ...], ...]:
        return tuple(
            tuple(np.flatnonzero(self.labels == g).tolist()) for g in range(self.k)
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, Partition):
            return NotImplemented
        return self.labels.shape == other.labels.shape and bool(
            np.array_equal(self.labels, other.labels)
        )

    def __hash__(self):
        return hash(self.labels.tobytes())


@dataclass(frozen=True)
class QualityConfig:
    """Instance of the generic quality ``trace H^T (F - alpha a b^T) H``.

    ``gamma`` optionally records the diagonal mode-weight sequence the
    rank-one term was derived from; it does not enter the optimization.
    """

    F: np.ndarray
    a: np.ndarray
    b: np.ndarray
    alpha: float = 1.0
    gamma: np.ndarray | None = None

    def __post_init__(self):
        F = np.asarray(self.F, dtype=float)
        a = np.asarray(self.a, dtype=float).ravel()
        b = np.asarray(self.b, dtype=float).ravel()
        if F.ndim != 2 or F.shape[0] != F.shape[1]:
            raise ValueError("F must be square")
        if a.shape != (F.shape[0],) or b.shape != (F.shape[0],):
            raise ValueError("a and b must be n-vectors")
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def n(self) -> int:
        return self.F.shape[0]


def _group_quadratic(M: np.ndarray, labels: np.ndarray, k: int) -> float:
    """sum over groups g of 1_g^T M 1_g."""
    row_by_group = np.zeros((k, M.shape[1]))
    np.add.at(row_by_group, labels, M)
    return float(row_by_group[labels, np.arange(M.shape[1])].sum())


def quality_value(config: QualityConfig, partition: Partition) -> float:
    """Exact quality of a partition under a :class:`QualityConfig`."""
    labels = partition.labels
    k = partition.k
    A = np.bincount(labels, weights=config.a, minlength=k)
    B = np.bincount(labels, weights=config.b, minlength=k)
    return _group_quadratic(config.F, labels, k) - config.alpha * float(A @ B)


def quality_score(psi_perp: SimilarityMatrix, p: Partition) -> float:
    """Quality ``trace H^T Psi H`` of a partition under a similarity matrix."""
    if psi_perp.n != p.n:
        raise ValueError("partition size does not match similarity matrix")
    return _group_quadratic(psi_perp.values, p.labels, p.k)


def quality_config_from_system(
    sys: LinearSystem, t: float, nu: np.ndarray, alpha: float = 1.0
) -> QualityConfig:
    """Quality instance of the projected similarity at time t.

    Splits ``Y^T (I - alpha nu nu^T) Y`` into its full-rank part ``F = Y^T Y``
    and the exact rank-one null term ``a = b = Y^T nu``, which aggregation
    preserves exactly.
    """
    nu = np.asarray(nu, dtype=float).ravel()
    if abs(np.linalg.norm(nu) - 1.0) > 1e-12:
        raise ValueError("nu must be a unit vector")
    Y = sys.C_op @ propagator(sys, t) @ sys.B_op
    F = Y.T @ Y
    a = Y.T @ nu
    return QualityConfig(F=(F + F.T) / 2.0, a=a, b=a.copy(), alpha=float(alpha))


def quality_config_from_mode_weights(
    sys: LinearSystem, t: float, gamma: np.ndarray
) -> QualityConfig:
    """Quality instance with a per-mode slack weighting of the norm terms.

    The diagonal weights scale each spectral mode's contribution to the two
    norm terms of the squared distance; the induced null term
    ``z~ = diag(Phi^T Gamma Phi)`` stays rank-one (``a = z~``, ``b = 1``).
    """
    from dynembed.embedding import decompose
    from dynembed.similarity import similarity_at

    gamma = np.asarray(gamma, dtype=float).ravel()
    psi = similarity_at(sys, t)
    if gamma.shape != (psi.n,):
        raise ValueError(f"gamma must have length {psi.n}")
    dec = decompose(psi)
    z = (dec.eigenvectors**2 * (gamma * dec.eigenvalues)).sum(axis=1)
    return QualityConfig(
        F=psi.values, a=z, b=np.ones(psi.n), alpha=1.0, gamma=gamma
    )


def _louvain_level(
    F: np.ndarray,
    a: np.ndarray,
    b: np.ndarray,
    alpha: float,
    rng: np.random.Generator,
) -> tuple[np.ndarray, bool]:
    """One level of greedy node moves; returns labels and whether any move happened."""
    n = F.shape[0]
    labels = np.arange(n)
    size = np.ones(n, dtype=int)
    A = a.copy()
    B = b.copy()
    diag = np.diag(F)
    scale = max(1.0, float(np.abs(F).sum()) + alpha * float(np.abs(a).sum() * np.abs(b).sum()))
    gain_tol = 1e-12 * scale
    free: list[int] = []
    moved_any = False
    improved = True
    while improved:
        improved = False
        for i in rng.permutation(n):
            g = labels[i]
            s = F[i, :] + F[:, i]
            w = np.bincount(labels, weights=s, minlength=A.shape[0])
            # quality released by removing i from its group (minus shared terms)
            base = (w[g] - 2.0 * diag[i]) - alpha * (
                a[i] * (B[g] - b[i]) + b[i] * (A[g] - a[i])
            )
            gains = w - alpha * (a[i] * B + b[i] * A)
            gains[g] = base  # staying put must score zero after the shift
            gains -= base
            if size[g] > 1:
                # moving out into a fresh singleton group is also a candidate
                empty_gain = -base
            else:
                empty_gain = 0.0
            h = int(np.argmax(gains))
            best = gains[h]
            if empty_gain > best + gain_tol:
                if free:
                    h = free.pop()
                else:
                    A = np.append(A, 0.0)
                    B = np.append(B, 0.0)
                    size = np.append(size, 0)
                    h = A.shape[0] - 1
                best = empty_gain
            if h == g or best <= gain_tol:
                continue
            labels[i] = h
            A[g] -= a[i]
            B[g] -= b[i]
            A[h] += a[i]
            B[h] += b[i]
            size[g] -= 1
            size[h] += 1
            if size[g] == 0:
                free.append(g)
            improved = True
            moved_any = True
    return labels, moved_any


def _aggregate(
    F: np.ndarray, a: np.ndarray, b: np.ndarray, labels: np.ndarray, k: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    Fk = np.zeros((k, k))
    np.add.at(Fk, (labels[:, None], labels[None, :]), F)
    return Fk, np.bincount(labels, weights=a, minlength=k), np.bincount(
        labels, weights=b, minlength=k
    )


def louvain_optimize(config: QualityConfig, seed=0) -> Partition:
    """Greedy multilevel maximization of ``trace H^T (F - alpha a b^T) H``.

    Sweeps nodes in seeded random order, moving each to the group with the
    largest strictly positive quality gain until no single-node move improves
    the quality, then contracts (F, a, b) onto the groups and repeats on the
    coarse instance. Deterministic for a fixed seed.
    """
    rng = np.random.default_rng(seed)
    F = config.F.copy()
    a = config.a.copy()
    b = config.b.copy()
    alpha = config.alpha
    mapping = np.arange(config.n)
    while True:
        labels, moved = _louvain_level(F, a, b, alpha, rng)
        part = Partition(labels)
        mapping = part.labels[mapping]
        if not moved or part.k == F.shape[0]:
            break
        F, a, b = _aggregate(F, a, b, part.labels, part.k)
    return Partition(mapping)


def _kmeans_once(
    X: np.ndarray, k: int, rng: np.random.Generator, max_iter: int, tol: float
) -> tuple[np.ndarray, float]:
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    closest = ((X - centers[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = closest.sum()
        if total <= 0:
            centers[c] = X[rng.integers(n)]
        else:
            centers[c] = X[rng.choice(n, p=closest / total)]
        closest = np.minimum(closest, ((X - centers[c]) ** 2).sum(axis=1))
    inertia = np.inf
    labels = np.zeros(n, dtype=int)
    for _ in range(max_iter):
        d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        labels = d2.argmin(axis=1)
        new_inertia = float(d2[np.arange(n), labels].sum())
        for c in range(k):
            members = labels == c
            if members.any():
                centers[c] = X[members].mean(axis=0)
            else:  # revive empty cluster at the worst-fitted point
                far = int(d2[np.arange(n), labels].argmax())
                centers[c] = X[far]
                labels[far] = c
        if inertia - new_inertia <= tol * max(new_inertia, 1e-300):
            inertia = new_inertia
            break
        inertia = new_inertia
    return labels, inertia


def _kmeans(
    X: np.ndarray,
    k: int,
    seed,
    restarts: int = 50,
    max_iter: int = 300,
    tol: float = 1e-9,
) -> np.ndarray:
    rng = np.random.default_rng(seed)
    best_labels, best_inertia = None, np.inf
    for _ in range(restarts):
        labels, inertia = _kmeans_once(X, k, rng, max_iter, tol)
        if inertia < best_inertia:
            best_labels, best_inertia = labels, inertia
    return best_labels


def spectral_partition(matrix, c: int, k: int, seed=0) -> Partition:
    """k-means on c spectral coordinates of a similarity matrix or a Laplacian.

    A :class:`SimilarityMatrix` contributes its c dominant eigenvectors, a
    plain array is treated as a Laplacian-like operator and contributes the c
    eigenvectors of smallest eigenvalue. Seeded k-means++ with 50 restarts
    keeps the best-inertia assignment.
    """
    if isinstance(matrix, SimilarityMatrix):
        values = matrix.values
        take_largest = True
    else:
        values = np.asarray(matrix, dtype=float)
        if not np.allclose(values, values.T, atol=1e-10 * max(1.0, np.abs(values).max())):
            raise ValueError("spectral_partition requires a symmetric matrix")
        take_largest = False
    n = values.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"group count k must lie in [1, {n}], got {k}")
    if not 1 <= c <= n:
        raise ValueError(f"eigenvector count c must lie in [1, {n}], got {c}")
    eigvals, eigvecs = np.linalg.eigh((values + values.T) / 2.0)
    V = eigvecs[:, ::-1][:, :c] if take_largest else eigvecs[:, :c]
    return Partition(_kmeans(V, k, seed))


def variation_of_information(p1: Partition, p2: Partition) -> float:
    """Normalized variation of information between two partitions, in [0, 1].

    Conditional entropies in nats, normalized by log n; zero iff the
    partitions are identical, symmetric, and a metric up to the common
    normalization.
    """
    if p1.n != p2.n:
        raise ValueError("partitions must cover the same node set")
    n = p1.n
    if n <= 1:
        return 0.0
    counts = np.zeros((p1.k, p2.k))
    np.add.at(counts, (p1.labels, p2.labels), 1.0)
    p = counts / n
    p1m = p.sum(axis=1)
    p2m = p.sum(axis=0)
    nz = p > 0
    h_joint = -float((p[nz] * np.log(p[nz])).sum())
    h1 = -float((p1m[p1m > 0] * np.log(p1m[p1m > 0])).sum())
    h2 = -float((p2m[p2m > 0] * np.log(p2m[p2m > 0])).sum())
    vi = max(2.0 * h_joint - h1 - h2, 0.0)
    return vi / math.log(n)


@dataclass(frozen=True)
class Plateau:
    """Maximal grid interval with a constant modal community count and low VI."""

    start: int
    stop: int  # inclusive index into the time grid
    t_start: float
    t_stop: float
    n_communities: int
    mean_vi: float


@dataclass(frozen=True)
class ScanResult:
    """Louvain partitions across a time grid with robustness statistics.

    ``partitions[i][s]`` is the partition for time index i and seed s;
    ``best[i]`` the highest-quality one; ``vi_matrix[i, j]`` the mean VI
    between the seed ensembles at times i and j (self-pairs excluded on the
    diagonal); ``n_communities[i]`` the modal group count at time i.
    """

    times: tuple[float, ...]
    partitions: list[list[Partition]]
    best: list[Partition]
    quality: np.ndarray
    n_communities: tuple[int, ...]
    vi_matrix: np.ndarray
    plateaus: tuple[Plateau, ...] = field(default=())


def _mean_vi(parts_a: list[Partition], parts_b: list[Partition], same: bool) -> float:
    if same:
        pairs = [
            (i, j) for i in range(len(parts_a)) for j in range(i + 1, len(parts_a))
        ]
        if not pairs:
            return 0.0
    else:
        pairs = [(i, j) for i in range(len(parts_a)) for j in range(len(parts_b))]
    return float(
        np.mean([variation_of_information(parts_a[i], parts_b[j]) for i, j in pairs])
    )


def _find_plateaus(
    times: Sequence[float],
    modal_k: Sequence[int],
    vi_matrix: np.ndarray,
    vi_threshold: float,
    min_length: int,
) -> tuple[Plateau, ...]:
    m = len(times)
    runs = []
    start = 0
    for i in range(1, m + 1):
        if i == m or modal_k[i] != modal_k[start]:
            runs.append((start, i - 1))
            start = i
    candidates = []
    for lo, hi in runs:
        for i in range(lo, hi + 1):
            for j in range(hi, i - 1, -1):
                if j - i + 1 < min_length:
                    continue
                mean_vi = float(vi_matrix[i : j + 1, i : j + 1].mean())
                if mean_vi < vi_threshold:
                    candidates.append((i, j, mean_vi))
    maximal = [
        (i, j, v)
        for (i, j, v) in candidates
        if not any((p <= i and j <= q and (p, q) != (i, j)) for p, q, _ in candidates)
    ]
    return tuple(
        Plateau(i, j, times[i], times[j], int(modal_k[i]), v)
        for i, j, v in sorted(maximal)
    )


def time_scan(
    sys: LinearSystem,
    times: Sequence[float],
    nu: np.ndarray,
    alpha: float = 1.0,
    seeds: int = 4,
    base_seed: int = 0,
    vi_threshold: float = 0.05,
    min_plateau_length: int = 2,
    max_workers: int | None = None,
) -> ScanResult:
    """Louvain scan of the projected similarity quality over a time grid.

    For every time, ``seeds`` independent Louvain runs optimize the quality of
    the projected similarity; the best-quality partition is retained per time.
    Robust scales appear as plateaus: maximal intervals with a constant modal
    community count whose mean within-interval VI stays below the threshold.
    Fully deterministic for a fixed ``base_seed``; times may be processed in
    parallel threads without affecting results.
    """
    times = [float(t) for t in times]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError("times must be strictly increasing")
    if seeds < 1:
        raise ValueError("need at least one seed")

    def run_cell(ti: int):
        config = quality_config_from_system(sys, times[ti], nu, alpha)
        parts, quals = [], []
        for s in range(seeds):
            p = louvain_optimize(config, seed=(base_seed, ti, s))
            parts.append(p)
            quals.append(quality_value(config, p))
        return parts, quals

    if max_workers is not None and max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            cells = list(pool.map(run_cell, range(len(times))))
    else:
        cells = [run_cell(ti) for ti in range(len(times))]

    partitions = [c[0] for c in cells]
    quality = np.array([c[1] for c in cells])
    best = [partitions[ti][int(np.argmax(quality[ti]))] for ti in range(len(times))]
    modal_k = []
    for parts in partitions:
        ks = np.array([p.k for p in parts])
        modal_k.append(int(np.bincount(ks).argmax()))
    m = len(times)
    vi_matrix = np.zeros((m, m))
    for i in range(m):
        vi_matrix[i, i] = _mean_vi(partitions[i], partitions[i], same=True)
        for j in range(i + 1, m):
            vi_matrix[i, j] = vi_matrix[j, i] = _mean_vi(
                partitions[i], partitions[j], same=False
            )
    plateaus = _find_plateaus(times, modal_k, vi_matrix, vi_threshold, min_plateau_length)
    return ScanResult(
        times=tuple(times),
        partitions=partitions,
        best=best,
        quality=quality,
        n_communities=tuple(modal_k),
        vi_matrix=vi_matrix,
        plateaus=plateaus,
    )
