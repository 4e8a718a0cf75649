"""Spectral embedding of similarity matrices into dynamical coordinates.

The eigendecomposition of a similarity matrix yields per-node coordinate
vectors whose Euclidean distances reproduce the dynamical squared distances
exactly at full rank and optimally (in the Eckart-Young sense) under
truncation. Eigenvector signs are pinned deterministically: the
largest-magnitude entry of each vector is made positive, and along a time
trajectory each vector keeps the orientation most aligned with its
predecessor.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from dynembed.linsys import LinearSystem
from dynembed.similarity import Centering, SimilarityMatrix, TimeSpec, similarity_at

#: relative eigenvalue gap below which a cluster is flagged as degenerate
DEGENERACY_GAP = 1e-10


@dataclass(frozen=True)
class SpectralDecomp:
    """Eigendecomposition of a similarity matrix, eigenvalues descending.

    ``degenerate_groups`` lists index ranges (start, stop) of numerically
    degenerate eigenvalue clusters; individual coordinates inside such a
    cluster are not identifiable, only the spanned subspace is.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    t_spec: TimeSpec | None = None
    centering: Centering | None = None
    degenerate_groups: tuple[tuple[int, int], ...] = field(default=())

    @property
    def n(self) -> int:
        return self.eigenvalues.shape[0]


@dataclass(frozen=True)
class EmbeddingCoords:
    """Per-node dynamical coordinates; row i holds the first c entries of phi_i."""

    coords: np.ndarray
    c: int
    truncation_error: float
    node_ids: tuple[str, ...] | None = None
    t_spec: TimeSpec | None = None
    sign_convention: str = "largest-entry-positive"

    @property
    def n(self) -> int:
        return self.coords.shape[0]


def _fix_signs(V: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry (first on ties) is positive."""
    V = V.copy()
    for k in range(V.shape[1]):
        i = int(np.argmax(np.abs(V[:, k])))
        if V[i, k] < 0:
            V[:, k] = -V[:, k]
    return V


def _degenerate_groups(mu: np.ndarray) -> tuple[tuple[int, int], ...]:
    if mu.size == 0:
        return ()
    gap_tol = DEGENERACY_GAP * max(mu[0], 1e-300)
    groups = []
    start = 0
    for k in range(1, mu.size):
        if mu[k - 1] - mu[k] >= gap_tol:
            if k - start > 1:
                groups.append((start, k))
            start = k
    if mu.size - start > 1:
        groups.append((start, mu.size))
    return tuple(groups)


def decompose(psi: SimilarityMatrix) -> SpectralDecomp:
    """Full symmetric eigendecomposition with descending, nonnegative eigenvalues.

    Negative roundoff eigenvalues are clamped to zero; eigenvalues below
    ``-1e-10 * mu_max`` mean the input was not PSD and are rejected.
    """
    mu, V = np.linalg.eigh(psi.values)
    mu = mu[::-1].copy()
    V = V[:, ::-1]
    mu_max = max(mu[0], 0.0) if mu.size else 0.0
    if mu.size and mu[-1] < -1e-10 * max(mu_max, 1.0):
        raise ValueError(f"matrix is not PSD: min eigenvalue {mu[-1]:.3e}")
    np.clip(mu, 0.0, None, out=mu)
    return SpectralDecomp(
        eigenvalues=mu,
        eigenvectors=_fix_signs(V),
        t_spec=psi.t_spec,
        centering=psi.centering,
        degenerate_groups=_degenerate_groups(mu),
    )


def embed(
    decomp: SpectralDecomp, c: int, node_ids: Sequence[str] | None = None
) -> EmbeddingCoords:
    """Truncate the decomposition to the first c dynamical coordinates.

    ``coords[i, k] = sqrt(mu_k) v_k[i]``; at ``c = n`` the pairwise squared
    coordinate distances reproduce the dynamical squared distances. The
    reported truncation error is the discarded eigenvalue mass fraction.
    """
    n = decomp.n
    if not 1 <= c <= n:
        raise ValueError(f"dimension c must lie in [1, {n}], got {c}")
    coords = decomp.eigenvectors[:, :c] * np.sqrt(decomp.eigenvalues[:c])
    total = float(decomp.eigenvalues.sum())
    err = float(decomp.eigenvalues[c:].sum() / total) if total > 0 else 0.0
    return EmbeddingCoords(
        coords=coords,
        c=c,
        truncation_error=err,
        node_ids=tuple(node_ids) if node_ids is not None else None,
        t_spec=decomp.t_spec,
    )


def rank_by_coordinate(
    emb: EmbeddingCoords, dim: int = 1, node_ids: Sequence[str] | None = None
) -> list[tuple[str, float]]:
    """Rank nodes by descending value of one embedding coordinate (1-based).

    Ties are broken by lexicographic node id so the ranking is deterministic.
    Node ids default to the ones attached to the embedding, else stringified
    indices.
    """
    if not 1 <= dim <= emb.c:
        raise ValueError(f"dim must lie in [1, {emb.c}], got {dim}")
    if node_ids is None:
        node_ids = emb.node_ids or tuple(str(i) for i in range(emb.n))
    if len(node_ids) != emb.n:
        raise ValueError("node_ids length does not match embedding")
    scores = emb.coords[:, dim - 1]
    order = sorted(range(emb.n), key=lambda i: (-scores[i], node_ids[i]))
    return [(node_ids[i], float(scores[i])) for i in order]


def embedding_trajectory(
    sys: LinearSystem,
    times: Sequence[float],
    c: int,
    node_ids: Sequence[str] | None = None,
) -> list[EmbeddingCoords]:
    """Embed the similarity at each time with sign continuity along the grid.

    Each eigenvector's orientation is chosen to maximize its dot product with
    the corresponding vector at the previous time; the first time uses the
    static largest-entry-positive convention.
    """
    times = [float(t) for t in times]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError("times must be strictly increasing")
    out: list[EmbeddingCoords] = []
    prev_V: np.ndarray | None = None
    for t in times:
        decomp = decompose(similarity_at(sys, t))
        V = decomp.eigenvectors.copy()
        if prev_V is not None:
            flips = np.sign(np.einsum("ij,ij->j", prev_V, V))
            flips[flips == 0] = 1.0
            V = V * flips
        prev_V = V
        coords = V[:, :c] * np.sqrt(decomp.eigenvalues[:c])
        total = float(decomp.eigenvalues.sum())
        err = float(decomp.eigenvalues[c:].sum() / total) if total > 0 else 0.0
        out.append(
            EmbeddingCoords(
                coords=coords,
                c=c,
                truncation_error=err,
                node_ids=tuple(node_ids) if node_ids is not None else None,
                t_spec=decomp.t_spec,
                sign_convention="trajectory-continuity",
            )
        )
    return out
