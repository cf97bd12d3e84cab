"""Agent networks, combination weights and Perron centrality.

The combination matrix ``A`` is column-stochastic: entry ``A[l, k]`` is the
weight agent ``k`` gives to neighbor ``l`` when it pools beliefs, so column
``k`` holds agent ``k``'s weights.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import networkx as nx
import numpy as np

from .errors import ConvergenceError, TopologyError

NORMAL = "normal"
MALICIOUS = "malicious"
ROLES = (NORMAL, MALICIOUS)

COLUMN_SUM_TOL = 1e-12
MAX_REDRAWS = 1000


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Network:
    roles: tuple[str, ...]
    adjacency: np.ndarray
    combination_matrix: np.ndarray
    name: str = "network"

    def __post_init__(self):
        roles = tuple(self.roles)
        adj = np.asarray(self.adjacency, dtype=bool)
        A = np.asarray(self.combination_matrix, dtype=float)
        n = len(roles)
        if n < 1:
            raise TopologyError("network needs at least one agent")
        bad = [r for r in roles if r not in ROLES]
        if bad:
            raise TopologyError(f"unknown role(s) {sorted(set(bad))}; expected one of {ROLES}")
        if adj.shape != (n, n) or A.shape != (n, n):
            raise TopologyError(
                f"adjacency {adj.shape} and combination matrix {A.shape} must both be {n}x{n}"
            )
        if not np.array_equal(adj, adj.T):
            raise TopologyError("adjacency must be symmetric")
        if not np.all(np.isfinite(A)) or np.any(A < 0):
            raise TopologyError("combination weights must be finite and nonnegative")
        if not np.array_equal(A > 0, adj):
            raise TopologyError("combination weights must be positive exactly on the neighbor sets")
        col = A.sum(axis=0)
        worst = float(np.max(np.abs(col - 1.0)))
        if worst > COLUMN_SUM_TOL:
            raise TopologyError(f"combination matrix columns must sum to 1 (worst deviation {worst:.3e})")
        object.__setattr__(self, "roles", roles)
        object.__setattr__(self, "adjacency", _frozen(adj))
        object.__setattr__(self, "combination_matrix", _frozen(A))

    @property
    def n_agents(self) -> int:
        return len(self.roles)

    @property
    def malicious_mask(self) -> np.ndarray:
        return np.array([r == MALICIOUS for r in self.roles], dtype=bool)

    @property
    def malicious(self) -> list[int]:
        return [k for k, r in enumerate(self.roles) if r == MALICIOUS]

    @property
    def normal(self) -> list[int]:
        return [k for k, r in enumerate(self.roles) if r == NORMAL]

    def neighbors(self, k: int) -> list[int]:
        return [int(l) for l in np.flatnonzero(self.adjacency[:, k])]

    @classmethod
    def from_matrix(cls, combination_matrix, roles: Sequence[str], name: str = "explicit") -> "Network":
        A = np.asarray(combination_matrix, dtype=float)
        return cls(tuple(roles), A > 0, A, name=name)


def build_uniform_weights(adjacency, roles: Sequence[str], name: str = "network") -> Network:
    """Each agent splits its trust evenly across its neighbor set (itself included)."""
    adj = np.asarray(adjacency, dtype=bool)
    if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
        raise TopologyError(f"adjacency must be square, got shape {adj.shape}")
    degree = adj.sum(axis=0)
    empty = np.flatnonzero(degree == 0)
    if empty.size:
        raise TopologyError(f"agents {empty.tolist()} have an empty neighbor set")
    A = adj / degree[np.newaxis, :]
    return Network(tuple(roles), adj, A, name=name)


def is_strongly_connected(net: Network) -> bool:
    A = net.combination_matrix
    if not np.any(np.diag(A) > 0):
        return False
    g = nx.from_numpy_array((A > 0).astype(int), create_using=nx.DiGraph)
    return nx.is_strongly_connected(g)


def perron_eigenvector(net: Network, tol: float = 1e-12, max_iter: int = 100_000) -> np.ndarray:
    """Centrality vector: the positive fixed point of ``A u = u`` with ``sum(u) = 1``.

    Power iteration from the uniform vector, L1-renormalized every step.
    Raises ``ConvergenceError`` if the step change stays above ``tol``.
    """
    if not is_strongly_connected(net):
        raise TopologyError("Perron centrality needs a strongly connected network with a self-loop")
    A = net.combination_matrix
    n = net.n_agents
    u = np.full(n, 1.0 / n)
    residual = np.inf
    for _ in range(max_iter):
        nxt = A @ u
        nxt /= nxt.sum()
        residual = float(np.max(np.abs(nxt - u)))
        u = nxt
        if residual < tol:
            break
    else:
        raise ConvergenceError(f"power iteration did not converge in {max_iter} steps", residual)
    return u


def random_topology(
    n: int, n_malicious: int, edge_prob: float = 0.3, seed: int = 0
) -> Network:
    """Erdos-Renyi graph with self-loops on every agent, redrawn until connected.

    Malicious roles go to the first ``n_malicious`` agents of a seeded shuffle.
    """
    if not 0 < edge_prob <= 1:
        raise TopologyError(f"edge_prob must lie in (0, 1], got {edge_prob}")
    _check_counts(n, n_malicious)
    rng = np.random.default_rng(seed)
    iu = np.triu_indices(n, k=1)
    for _ in range(MAX_REDRAWS):
        adj = np.zeros((n, n), dtype=bool)
        adj[iu] = rng.random(iu[0].size) < edge_prob
        adj |= adj.T
        np.fill_diagonal(adj, True)
        net = build_uniform_weights(adj, [NORMAL] * n)
        if is_strongly_connected(net):
            break
    else:
        raise TopologyError(
            f"no connected G({n}, {edge_prob}) draw in {MAX_REDRAWS} attempts; raise edge_prob"
        )
    order = rng.permutation(n)
    roles = [NORMAL] * n
    for k in order[:n_malicious]:
        roles[int(k)] = MALICIOUS
    return build_uniform_weights(adj, roles, name=f"random(n={n},p={edge_prob},seed={seed})")


def regular_topology(n: int, degree: int, n_malicious: int, seed: int = 0) -> Network:
    """Random ``degree``-regular graph plus self-loops.

    Uniform weights on a regular graph give a doubly-stochastic matrix, so every
    agent ends up with centrality ``1/n``.
    """
    _check_counts(n, n_malicious)
    if not 0 <= degree < n or (n * degree) % 2:
        raise TopologyError(f"no {degree}-regular graph on {n} agents")
    rng = np.random.default_rng(seed)
    for _ in range(MAX_REDRAWS):
        g = nx.random_regular_graph(degree, n, seed=int(rng.integers(2**31)))
        adj = nx.to_numpy_array(g, nodelist=range(n), dtype=bool)
        np.fill_diagonal(adj, True)
        net = build_uniform_weights(adj, [NORMAL] * n)
        if is_strongly_connected(net):
            break
    else:
        raise TopologyError(f"no connected {degree}-regular draw in {MAX_REDRAWS} attempts")
    order = rng.permutation(n)
    roles = [NORMAL] * n
    for k in order[:n_malicious]:
        roles[int(k)] = MALICIOUS
    return build_uniform_weights(adj, roles, name=f"regular(n={n},d={degree},seed={seed})")


def star_topology(n: int, hub_is_malicious: bool = True, n_malicious: int = 1) -> Network:
    """Hub at index 0 linked to every leaf; malicious leaves take the lowest indices."""
    if n < 2:
        raise TopologyError("a star needs at least 2 agents")
    _check_counts(n, n_malicious)
    if hub_is_malicious and n_malicious < 1:
        raise TopologyError("hub_is_malicious requires n_malicious >= 1")
    adj = np.eye(n, dtype=bool)
    adj[0, :] = True
    adj[:, 0] = True
    roles = [NORMAL] * n
    if hub_is_malicious:
        bad = [0, *range(1, n_malicious)]
    else:
        bad = list(range(1, n_malicious + 1))
    for k in bad:
        roles[k] = MALICIOUS
    return build_uniform_weights(adj, roles, name=f"star(n={n},hub_malicious={hub_is_malicious})")


def _check_counts(n: int, n_malicious: int) -> None:
    if n < 1:
        raise TopologyError(f"n must be positive, got {n}")
    if not 0 <= n_malicious < n:
        raise TopologyError(f"n_malicious must satisfy 0 <= n_malicious < n, got {n_malicious} of {n}")
