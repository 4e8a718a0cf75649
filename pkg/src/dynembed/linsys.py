"""Linear dynamics ``x' = A x + B u``, ``y = C x`` and its propagators.

A :class:`LinearSystem` bundles the operator quadruple (state matrix, input
map, output map, inner-product weighting) together with a time mode. In
discrete mode the state matrix is the one-step propagator and times must be
nonnegative integers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
import scipy.linalg

from dynembed.graphs import (
    Graph,
    combinatorial_laplacian,
    discrete_transition_matrix,
    influence_operator,
    random_walk_laplacian,
    signed_laplacian,
    teleportation_laplacian,
)

Mode = Literal["continuous", "discrete"]


@dataclass(frozen=True)
class LinearSystem:
    """Immutable linear system (A_op, B_op, C_op, W_op, mode).

    ``W_op`` is the symmetric positive semidefinite weighting of the output
    inner product; pass ``np.eye(n)`` for the plain Euclidean one.
    """

    A_op: np.ndarray
    B_op: np.ndarray
    C_op: np.ndarray
    W_op: np.ndarray
    mode: Mode = "continuous"

    def __post_init__(self):
        A = np.asarray(self.A_op, dtype=float)
        B = np.asarray(self.B_op, dtype=float)
        C = np.asarray(self.C_op, dtype=float)
        W = np.asarray(self.W_op, dtype=float)
        for name, val in (("A_op", A), ("B_op", B), ("C_op", C), ("W_op", W)):
            object.__setattr__(self, name, val)
        m = A.shape[0]
        if A.shape != (m, m):
            raise ValueError("state matrix must be square")
        if B.ndim != 2 or B.shape[0] != m:
            raise ValueError(f"input map must have {m} rows, got {B.shape}")
        if C.ndim != 2 or C.shape[1] != m:
            raise ValueError(f"output map must have {m} columns, got {C.shape}")
        n = C.shape[0]
        if W.shape != (n, n):
            raise ValueError(f"weighting must be {n}x{n}, got {W.shape}")
        if not np.allclose(W, W.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(W).max())):
            raise ValueError("weighting matrix must be symmetric")
        w_eigs = np.linalg.eigvalsh((W + W.T) / 2.0)
        if w_eigs.size and w_eigs.min() < -1e-10 * max(1.0, w_eigs.max()):
            raise ValueError(f"weighting matrix must be PSD; min eigenvalue {w_eigs.min():.3e}")
        if self.mode not in ("continuous", "discrete"):
            raise ValueError(f"unknown mode {self.mode!r}")

    @property
    def state_dim(self) -> int:
        return self.A_op.shape[0]

    @property
    def input_dim(self) -> int:
        return self.B_op.shape[1]

    @property
    def output_dim(self) -> int:
        return self.C_op.shape[0]


@dataclass(frozen=True)
class ResponseSet:
    """Impulse responses at one time: column i of ``Y`` is the response to input i."""

    t: float
    Y: np.ndarray


def _check_time(sys: LinearSystem, t: float) -> float:
    if t < 0:
        raise ValueError(f"time must be nonnegative, got {t}")
    if sys.mode == "discrete":
        if t != int(t):
            raise ValueError(f"discrete mode requires integer times, got {t}")
        return int(t)
    return float(t)


def propagator(sys: LinearSystem, t: float) -> np.ndarray:
    """State propagator: ``expm(A t)`` in continuous mode, ``A^t`` in discrete mode.

    The continuous case uses dense scaling-and-squaring (Pade order 13), the
    discrete case binary exponentiation.
    """
    t = _check_time(sys, t)
    if sys.mode == "discrete":
        return np.linalg.matrix_power(sys.A_op, int(t))
    if t == 0.0:
        return np.eye(sys.state_dim)
    return scipy.linalg.expm(sys.A_op * t)


def impulse_response_matrix(sys: LinearSystem, t: float) -> ResponseSet:
    """Zero-state impulse responses ``Y(t) = C propagator(t) B`` for all inputs."""
    return ResponseSet(t=t, Y=sys.C_op @ propagator(sys, t) @ sys.B_op)


def _identity_system(A: np.ndarray, mode: Mode, weighting: np.ndarray | None) -> LinearSystem:
    n = A.shape[0]
    W = np.eye(n) if weighting is None else weighting
    return LinearSystem(A, np.eye(n), np.eye(n), W, mode)


def diffusion_system(g: Graph, weighting: np.ndarray | None = None) -> LinearSystem:
    """Continuous diffusion/consensus generated by the combinatorial Laplacian."""
    return _identity_system(-combinatorial_laplacian(g), "continuous", weighting)


def random_walk_system(g: Graph, weighting: np.ndarray | None = None) -> LinearSystem:
    """Continuous-time unbiased random walk; propagates probability columns."""
    return _identity_system(-random_walk_laplacian(g).T, "continuous", weighting)


def signed_system(g: Graph, weighting: np.ndarray | None = None) -> LinearSystem:
    """Opinion dynamics on a signed undirected graph, generated by -L_s."""
    return _identity_system(-signed_laplacian(g), "continuous", weighting)


def influence_system(g: Graph, weighting: np.ndarray | None = None) -> LinearSystem:
    """In-degree-normalized influence dynamics for directed graphs."""
    return _identity_system(influence_operator(g), "continuous", weighting)


def teleported_system(g: Graph, tau: float, weighting: np.ndarray | None = None) -> LinearSystem:
    """Diffusion under the teleportation-adjusted Laplacian at rate ``tau``."""
    return _identity_system(-teleportation_laplacian(g, tau), "continuous", weighting)


def discrete_walk_system(g: Graph, weighting: np.ndarray | None = None) -> LinearSystem:
    """Discrete-time random walk; one-step propagator is ``M^T``.

    With identity input/output maps the similarity at integer time t equals
    ``M^t (M^t)^T``, i.e. inner products of the t-step occupation profiles
    seeded at each node.
    """
    return _identity_system(discrete_transition_matrix(g).T, "discrete", weighting)
