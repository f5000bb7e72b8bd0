"""Communication graph, Laplacian and the visibility-weighted matrix H.

Drones are indexed from 0.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class GraphError(ValueError):
    pass


class NotPositiveDefinite(ValueError):
    """H = L + D_v failed to be positive definite; carries the offending matrix."""

    def __init__(self, matrix: np.ndarray, min_eig: float):
        super().__init__(f"H is not positive definite (min eigenvalue {min_eig:.3e})")
        self.matrix = matrix
        self.min_eig = min_eig


@dataclass(frozen=True)
class DroneGraph:
    n: int
    edges: frozenset = field(default_factory=frozenset)
    d: tuple = ()
    v: tuple = ()

    def __post_init__(self):
        if self.n < 1:
            raise GraphError("graph needs at least one drone")
        edges = set()
        for i, j in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise GraphError(f"self-loop at drone {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise GraphError(f"edge ({i}, {j}) out of range for n={self.n}")
            edges.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", frozenset(edges))

        d = tuple(float(x) for x in self.d) if len(self.d) else (1.0,) * self.n
        v = tuple(int(x) for x in self.v) if len(self.v) else (1,) * self.n
        if len(d) != self.n or len(v) != self.n:
            raise GraphError("d and v must have one entry per drone")
        if any(x <= 0 for x in d):
            raise GraphError("visibility weights d_i must be positive")
        if any(x not in (0, 1) for x in v):
            raise GraphError("visibility flags must be 0 or 1")
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "v", v)

        if not _connected(self.n, self.edges):
            raise GraphError("communication graph must be connected")

    @classmethod
    def complete(cls, n: int, d: Sequence[float] = ()) -> DroneGraph:
        return cls(n, frozenset((i, j) for i in range(n) for j in range(i + 1, n)), tuple(d))

    @classmethod
    def path(cls, n: int, d: Sequence[float] = ()) -> DroneGraph:
        return cls(n, frozenset((i, i + 1) for i in range(n - 1)), tuple(d))

    @classmethod
    def from_json(cls, obj: dict) -> DroneGraph:
        n = int(obj["n"])
        edges = obj.get("edges")
        if edges is None:
            return cls.complete(n, obj.get("d", ()))
        return cls(n, frozenset(tuple(e) for e in edges), tuple(obj.get("d", ())))

    def to_json(self) -> dict:
        return {"n": self.n, "edges": [list(e) for e in sorted(self.edges)], "d": list(self.d)}

    def with_visibility(self, v: Iterable[int]) -> DroneGraph:
        return DroneGraph(self.n, self.edges, self.d, tuple(v))


def _connected(n: int, edges: Iterable[tuple[int, int]]) -> bool:
    adj = [[] for _ in range(n)]
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    seen = {0}
    queue = deque([0])
    while queue:
        k = queue.popleft()
        for j in adj[k]:
            if j not in seen:
                seen.add(j)
                queue.append(j)
    return len(seen) == n


def adjacency(g: DroneGraph) -> np.ndarray:
    A = np.zeros((g.n, g.n))
    for i, j in g.edges:
        A[i, j] = A[j, i] = 1.0
    return A


def laplacian(g: DroneGraph) -> np.ndarray:
    A = adjacency(g)
    return np.diag(A.sum(axis=1)) - A


def h_matrix(g: DroneGraph, check: bool = True, tol: float = 1e-10) -> np.ndarray:
    """H = L + diag(d_i v_i).

    With ``check`` set, raises :class:`NotPositiveDefinite` when the smallest
    eigenvalue is not above ``tol``; this happens exactly when no drone sees
    the target.
    """
    H = laplacian(g) + np.diag(np.asarray(g.d) * np.asarray(g.v))
    if check:
        lam = float(np.linalg.eigvalsh(H)[0])
        if lam <= tol:
            raise NotPositiveDefinite(H, lam)
    return H


def p_matrix(i: int, n: int) -> np.ndarray:
    if not 0 <= i < n:
        raise IndexError(f"drone index {i} out of range for n={n}")
    P = np.zeros((n, n))
    P[i, :] = 0.5
    P[:, i] = 0.5
    P[i, i] = 1.0
    return P


def neighbors(g: DroneGraph, i: int) -> frozenset:
    if not 0 <= i < g.n:
        raise IndexError(f"drone index {i} out of range for n={g.n}")
    out = set()
    for a, b in g.edges:
        if a == i:
            out.add(b)
        elif b == i:
            out.add(a)
    return frozenset(out)
