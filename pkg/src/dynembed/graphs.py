"""Graph representation, edge-list ingestion and dynamical operators.

All operators are returned as dense ``(n, n)`` float arrays. The weight matrix
convention is ``A[i, j]`` = weight of the edge ``i -> j``; degree-zero rows of
normalized operators are set to zero rather than patched with artificial
dynamics (teleportation is the explicit opt-in for that).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Sequence

import numpy as np

#: residual tolerance for accepting an external equitable partition
EEP_TOLERANCE = 1e-10


class EdgeListError(ValueError):
    """Malformed edge-list input; carries the offending line number."""

    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


@dataclass(frozen=True)
class Graph:
    """Weighted graph with string node labels.

    Parameters
    ----------
    node_ids : tuple of str
        Unique node labels, in first-appearance order of the source data.
    weights : ndarray, shape (n, n)
        ``weights[i, j]`` is the weight of the edge ``i -> j``; entries may be
        negative (signed graphs).
    directed : bool
        If False the weight matrix must be exactly symmetric.
    """

    node_ids: tuple[str, ...]
    weights: np.ndarray
    directed: bool

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", w)
        n = len(self.node_ids)
        if w.shape != (n, n):
            raise ValueError(f"weights shape {w.shape} does not match {n} node ids")
        if len(set(self.node_ids)) != n:
            raise ValueError("node_ids must be unique")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        if not self.directed and not np.array_equal(w, w.T):
            raise ValueError("undirected graph requires an exactly symmetric weight matrix")

    @property
    def n(self) -> int:
        return len(self.node_ids)

    @property
    def signed(self) -> bool:
        return bool(self.weights.size and self.weights.min() < 0)

    def out_degrees(self) -> np.ndarray:
        return self.weights.sum(axis=1)

    def in_degrees(self) -> np.ndarray:
        return self.weights.sum(axis=0)

    def index_of(self, node_id: str) -> int:
        return self.node_ids.index(node_id)


@dataclass(frozen=True)
class QuotientGraph:
    """Quotient of a graph over an external equitable partition.

    ``indicator`` is the (n, k) 0/1 cell-membership matrix and
    ``quotient_laplacian`` the (k, k) Laplacian acting on cell averages.
    """

    cells: tuple[tuple[int, ...], ...]
    indicator: np.ndarray
    quotient_laplacian: np.ndarray
    residual: float = field(default=0.0)


def load_edge_list(source: Iterable[str], directed: bool = False) -> Graph:
    """Parse a tab-separated edge list into a :class:`Graph`.

    Each non-comment line is ``src<TAB>dst<TAB>weight``. Nodes are numbered in
    first-appearance order, duplicate (src, dst) pairs accumulate their
    weights, and undirected input contributes each line symmetrically.

    Parameters
    ----------
    source : iterable of str
        Lines of the edge list (an open text file works).
    directed : bool
        Interpret each line as a one-way edge.

    Raises
    ------
    EdgeListError
        On malformed lines or non-finite weights, with the line number.
    """
    index: dict[str, int] = {}
    edges: list[tuple[int, int, float]] = []
    for lineno, raw in enumerate(source, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise EdgeListError(
                f"expected 3 tab-separated fields, got {len(parts)}", lineno
            )
        src, dst, weight_text = (p.strip() for p in parts)
        if not src or not dst:
            raise EdgeListError("empty node label", lineno)
        try:
            weight = float(weight_text)
        except ValueError:
            raise EdgeListError(f"cannot parse weight {weight_text!r}", lineno) from None
        if not np.isfinite(weight):
            raise EdgeListError(f"non-finite weight {weight_text!r}", lineno)
        for label in (src, dst):
            if label not in index:
                index[label] = len(index)
        edges.append((index[src], index[dst], weight))

    n = len(index)
    weights = np.zeros((n, n))
    for i, j, w in edges:
        weights[i, j] += w
        if not directed and i != j:
            weights[j, i] += w
    return Graph(tuple(index), weights, directed)


def load_tribes() -> Graph:
    """Load the bundled 16-node signed network of highland tribal alliances."""
    text = resources.files("dynembed.data").joinpath("tribes.tsv").read_text("utf-8")
    return load_edge_list(text.splitlines(), directed=False)


def _require_unsigned(g: Graph, op: str) -> None:
    if g.signed:
        raise ValueError(f"{op} requires nonnegative weights; use signed_laplacian for signed graphs")


def combinatorial_laplacian(g: Graph) -> np.ndarray:
    """Out-degree combinatorial Laplacian ``L = diag(A 1) - A``; rows sum to zero."""
    _require_unsigned(g, "combinatorial_laplacian")
    return np.diag(g.out_degrees()) - g.weights


def discrete_transition_matrix(g: Graph) -> np.ndarray:
    """Row-stochastic transition matrix ``M = K^-1 A``; zero out-degree rows stay zero."""
    _require_unsigned(g, "discrete_transition_matrix")
    deg = g.out_degrees()
    M = np.zeros_like(g.weights)
    live = deg > 0
    M[live] = g.weights[live] / deg[live, None]
    return M


def random_walk_laplacian(g: Graph) -> np.ndarray:
    """Random-walk Laplacian ``I - K^-1 A`` with zero rows for sink nodes."""
    _require_unsigned(g, "random_walk_laplacian")
    deg = g.out_degrees()
    L = np.eye(g.n) - discrete_transition_matrix(g)
    L[deg == 0] = 0.0
    return L


def signed_laplacian(g: Graph) -> np.ndarray:
    """Signed Laplacian ``L_s = D_s - A`` with ``[D_s]_ii = sum_k |A_ik|``.

    Positive semidefinite for any undirected signed graph; reduces to the
    combinatorial Laplacian when all weights are nonnegative.
    """
    if g.directed:
        raise ValueError("signed_laplacian requires an undirected graph")
    return np.diag(np.abs(g.weights).sum(axis=1)) - g.weights


def influence_operator(g: Graph) -> np.ndarray:
    """Generator ``K_in^-1 A^T - I`` of the in-degree-normalized influence dynamics.

    Rows of ``K_in^-1 A^T`` belonging to zero in-degree nodes are set to zero,
    so such nodes simply relax toward zero influence.
    """
    _require_unsigned(g, "influence_operator")
    indeg = g.in_degrees()
    P = np.zeros_like(g.weights)
    live = indeg > 0
    P[live] = g.weights.T[live] / indeg[live, None]
    return P - np.eye(g.n)


def teleportation_laplacian(g: Graph, tau: float) -> np.ndarray:
    """Laplacian of the walk with uniform teleportation at rate ``tau``.

    Sink rows of the transition matrix are replaced by the uniform
    distribution before mixing in the rank-one teleportation term, so the
    bracketed transition matrix is row-stochastic and ``L~ 1 = 0``.
    """
    _require_unsigned(g, "teleportation_laplacian")
    if not 0.0 <= tau < 1.0:
        raise ValueError(f"teleport rate must lie in [0, 1), got {tau}")
    n = g.n
    M = discrete_transition_matrix(g)
    sinks = g.out_degrees() == 0
    M[sinks] = 1.0 / n
    T = (1.0 - tau) * M + tau * np.full((n, n), 1.0 / n)
    return np.eye(n) - T


def indicator_matrix(cells: Sequence[Sequence[int]], n: int) -> np.ndarray:
    """0/1 membership matrix H for a list of node-index cells covering range(n)."""
    H = np.zeros((n, len(cells)))
    seen = np.zeros(n, dtype=bool)
    for c, members in enumerate(cells):
        members = list(members)
        if not members:
            raise ValueError(f"cell {c} is empty")
        for i in members:
            if seen[i]:
                raise ValueError(f"node {i} assigned to more than one cell")
            seen[i] = True
            H[i, c] = 1.0
    if not seen.all():
        missing = np.flatnonzero(~seen)
        raise ValueError(f"nodes {missing.tolist()} not assigned to any cell")
    return H


class EquitablePartitionError(ValueError):
    """Partition is not externally equitable; carries the residual norm."""

    def __init__(self, residual: float):
        super().__init__(
            f"partition is not externally equitable: max |L H - H L_hat| = {residual:.3e} "
            f"exceeds {EEP_TOLERANCE:.0e}"
        )
        self.residual = residual


def check_eep(g: Graph, cells: Sequence[Sequence[int]]) -> QuotientGraph:
    """Verify that ``cells`` is an external equitable partition and build its quotient.

    The quotient Laplacian is ``L_hat = H^+ L H``; the partition is accepted iff
    ``max |L H - H L_hat| <= 1e-10``, in which case the full propagator factors
    exactly through the quotient one.

    Raises
    ------
    EquitablePartitionError
        If the commutation residual exceeds the tolerance.
    """
    _require_unsigned(g, "check_eep")
    if g.directed:
        raise ValueError("check_eep requires an undirected graph")
    L = combinatorial_laplacian(g)
    H = indicator_matrix(cells, g.n)
    sizes = H.sum(axis=0)
    L_hat = (H.T @ L @ H) / sizes[:, None]
    residual = float(np.abs(L @ H - H @ L_hat).max())
    if residual > EEP_TOLERANCE:
        raise EquitablePartitionError(residual)
    return QuotientGraph(
        cells=tuple(tuple(int(i) for i in c) for c in cells),
        indicator=H,
        quotient_laplacian=L_hat,
        residual=residual,
    )
