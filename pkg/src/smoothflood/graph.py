"""Undirected simple graphs on vertices ``0..n-1``.

Edges are stored as a sorted, duplicate-free ``int64`` array of keys
``u * n + v`` with ``u < v``.  Every round of a simulation rebuilds or
perturbs O(n) edges, so bulk numpy operations on the key array beat
per-edge Python set manipulation by a wide margin.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from .errors import UsageError

Edge = tuple[int, int]
INFINITE = math.inf


def edge(u: int, v: int) -> Edge:
    """Canonical form of the undirected edge ``{u, v}``."""
    if u == v:
        raise UsageError(f"self-loop ({u}, {v}) is not an edge")
    return (u, v) if u < v else (v, u)


class Graph:
    """Immutable undirected simple graph.

    ``keys`` holds the sorted edge keys; ``u`` and ``v`` hold the matching
    endpoint arrays (``u < v``).  Instances must not be mutated after
    construction; all operations return new graphs.
    """

    __slots__ = ("n", "keys", "_u", "_v", "_adj", "_hash")

    def __init__(self, n: int, edges: Iterable[Edge] = ()):
        if n < 0:
            raise UsageError("vertex count must be non-negative")
        pairs = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
        if pairs.size:
            if pairs.min() < 0 or pairs.max() >= n:
                raise UsageError(f"edge endpoint outside [0, {n})")
            if np.any(pairs[:, 0] == pairs[:, 1]):
                raise UsageError("self-loops are not allowed")
        lo = pairs.min(axis=1)
        hi = pairs.max(axis=1)
        self._init(n, np.unique(lo * n + hi))

    def _init(self, n, keys):
        self.n = n
        self.keys = keys
        self.keys.flags.writeable = False
        self._u = None
        self._v = None
        self._adj = None
        self._hash = None

    @classmethod
    def from_keys(cls, n: int, keys, *, is_sorted: bool = False) -> Graph:
        """Build from edge keys.  ``is_sorted`` skips sorting and dedup."""
        g = cls.__new__(cls)
        keys = np.asarray(keys, dtype=np.int64)
        if not is_sorted:
            keys = np.unique(keys)
        g._init(n, keys)
        return g

    @classmethod
    def empty(cls, n: int) -> Graph:
        return cls.from_keys(n, np.empty(0, dtype=np.int64), is_sorted=True)

    @classmethod
    def complete(cls, n: int) -> Graph:
        u, v = np.triu_indices(n, k=1)
        return cls.from_keys(n, u * n + v, is_sorted=True)

    @classmethod
    def path(cls, n: int) -> Graph:
        u = np.arange(n - 1, dtype=np.int64)
        return cls.from_keys(n, u * n + u + 1, is_sorted=True)

    @classmethod
    def cycle(cls, n: int) -> Graph:
        if n < 3:
            raise UsageError("a cycle needs at least 3 vertices")
        return cls(n, [(i, (i + 1) % n) for i in range(n)])

    @classmethod
    def star(cls, n: int, center: int = 0) -> Graph:
        others = np.delete(np.arange(n, dtype=np.int64), center)
        lo = np.minimum(others, center)
        hi = np.maximum(others, center)
        return cls.from_keys(n, lo * n + hi)

    # -- basic queries ---------------------------------------------------

    @property
    def m(self) -> int:
        return len(self.keys)

    def __len__(self) -> int:
        return len(self.keys)

    @property
    def u(self) -> np.ndarray:
        if self._u is None:
            self._u = self.keys // self.n
        return self._u

    @property
    def v(self) -> np.ndarray:
        if self._v is None:
            self._v = self.keys - self.u * self.n
        return self._v

    def edges(self) -> list[Edge]:
        return list(zip(self.u.tolist(), self.v.tolist()))

    def edge_set(self) -> set[Edge]:
        return set(self.edges())

    def has_edge(self, a: int, b: int) -> bool:
        if a == b:
            return False
        lo, hi = (a, b) if a < b else (b, a)
        key = lo * self.n + hi
        i = np.searchsorted(self.keys, key)
        return bool(i < len(self.keys) and self.keys[i] == key)

    def contains_keys(self, keys) -> np.ndarray:
        """Boolean membership of each key in ``keys``."""
        keys = np.asarray(keys, dtype=np.int64)
        if not len(self.keys):
            return np.zeros(keys.shape, dtype=bool)
        pos = np.searchsorted(self.keys, keys)
        pos = np.minimum(pos, len(self.keys) - 1)
        return self.keys[pos] == keys

    def adjacency(self) -> list[list[int]]:
        """Neighbor lists, built once per graph."""
        if self._adj is None:
            adj = [[] for _ in range(self.n)]
            for a, b in zip(self.u.tolist(), self.v.tolist()):
                adj[a].append(b)
                adj[b].append(a)
            self._adj = adj
        return self._adj

    def neighbors(self, x: int) -> list[int]:
        return self.adjacency()[x]

    def degree(self, x: int) -> int:
        return len(self.adjacency()[x])

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.keys, other.keys)

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.n, self.keys.tobytes()))
        return self._hash

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, m={self.m})"

    # -- text I/O --------------------------------------------------------

    def to_edgelist(self) -> str:
        """Header ``"n m"`` then one ``"u v"`` line per edge."""
        lines = [f"{self.n} {self.m}"]
        lines.extend(f"{a} {b}" for a, b in self.edges())
        return "\n".join(lines) + "\n"

    @classmethod
    def from_edgelist(cls, text: str) -> Graph:
        rows = [ln.split() for ln in text.splitlines() if ln.strip()]
        if not rows:
            raise UsageError("empty edge list")
        n, m = int(rows[0][0]), int(rows[0][1])
        edges = [(int(a), int(b)) for a, b in rows[1:]]
        if len(edges) != m:
            raise UsageError(f"header announces {m} edges, found {len(edges)}")
        return cls(n, edges)


@dataclass(frozen=True)
class EdgeDelta:
    """Edges to add and remove when moving from one graph to the next."""

    added: frozenset = field(default_factory=frozenset)
    removed: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "added", frozenset(edge(*e) for e in self.added))
        object.__setattr__(self, "removed", frozenset(edge(*e) for e in self.removed))
        if self.added & self.removed:
            raise UsageError("an edge cannot be both added and removed")

    def __len__(self) -> int:
        return len(self.added) + len(self.removed)


def _check_same_n(g1: Graph, g2: Graph):
    if g1.n != g2.n:
        raise UsageError(f"graphs on different vertex counts ({g1.n} vs {g2.n})")


def _keys_of(n: int, edges) -> np.ndarray:
    if not edges:
        return np.empty(0, dtype=np.int64)
    arr = np.asarray(sorted(edges), dtype=np.int64)
    return arr[:, 0] * n + arr[:, 1]


def symmetric_difference(g1: Graph, g2: Graph) -> set[Edge]:
    """Edges present in exactly one of the two graphs."""
    _check_same_n(g1, g2)
    keys = np.setxor1d(g1.keys, g2.keys, assume_unique=True)
    n = g1.n
    return {(int(k // n), int(k % n)) for k in keys}


def shared_edge_count(g1: Graph, g2: Graph) -> int:
    a, b = (g1.keys, g2.keys) if len(g1.keys) >= len(g2.keys) else (g2.keys, g1.keys)
    if not len(a) or not len(b):
        return 0
    pos = np.minimum(np.searchsorted(a, b), len(a) - 1)
    return int(np.count_nonzero(a[pos] == b))


def hamming_distance(g1: Graph, g2: Graph) -> int:
    """``|E1 xor E2|``, computed without materializing the difference."""
    _check_same_n(g1, g2)
    return g1.m + g2.m - 2 * shared_edge_count(g1, g2)


def delta_between(g: Graph, h: Graph) -> EdgeDelta:
    """The delta that turns ``g`` into ``h``."""
    _check_same_n(g, h)
    n = g.n
    add = np.setdiff1d(h.keys, g.keys, assume_unique=True)
    rem = np.setdiff1d(g.keys, h.keys, assume_unique=True)
    return EdgeDelta(
        added=frozenset((int(k // n), int(k % n)) for k in add),
        removed=frozenset((int(k // n), int(k % n)) for k in rem),
    )


def apply_delta(g: Graph, d: EdgeDelta) -> Graph:
    """``(E minus removed) union added``; raises if the delta does not fit ``g``."""
    if not len(d):
        return g
    for e in d.added | d.removed:
        if not 0 <= e[0] < e[1] < g.n:
            raise UsageError(f"delta edge {e} outside [0, {g.n})")
    rem = _keys_of(g.n, d.removed)
    add = _keys_of(g.n, d.added)
    if len(rem) and not g.contains_keys(rem).all():
        raise UsageError("delta removes edges absent from the graph")
    if len(add) and g.contains_keys(add).any():
        raise UsageError("delta adds edges already in the graph")
    keys = g.keys
    if len(rem):
        keys = keys[~np.isin(keys, rem, assume_unique=True)]
    if len(add):
        keys = np.insert(keys, np.searchsorted(keys, add), add)
    return Graph.from_keys(g.n, keys, is_sorted=True)


def toggle_keys(g: Graph, toggles: np.ndarray) -> Graph:
    """Flip the edge slots given as distinct keys."""
    toggles = np.sort(np.asarray(toggles, dtype=np.int64))
    if not len(toggles):
        return g
    present = g.contains_keys(toggles)
    keys = g.keys
    if present.any():
        pos = np.searchsorted(keys, toggles[present])
        keep = np.ones(len(keys), dtype=bool)
        keep[pos] = False
        keys = keys[keep]
    add = toggles[~present]
    if len(add):
        keys = np.insert(keys, np.searchsorted(keys, add), add)
    return Graph.from_keys(g.n, keys, is_sorted=True)


def is_connected(g: Graph) -> bool:
    """Reachability of every vertex from vertex 0."""
    if g.n <= 1:
        return True
    if g.m < g.n - 1:
        return False
    adj = g.adjacency()
    seen = [False] * g.n
    seen[0] = True
    stack = [0]
    count = 1
    while stack:
        x = stack.pop()
        for y in adj[x]:
            if not seen[y]:
                seen[y] = True
                count += 1
                stack.append(y)
    return count == g.n


def bfs_distances(g: Graph, source: int) -> list[float]:
    adj = g.adjacency()
    dist = [INFINITE] * g.n
    dist[source] = 0
    queue = deque([source])
    while queue:
        x = queue.popleft()
        for y in adj[x]:
            if dist[y] == INFINITE:
                dist[y] = dist[x] + 1
                queue.append(y)
    return dist


def to_csr(g: Graph):
    return csr_matrix((np.ones(g.m, dtype=np.int8), (g.u, g.v)), shape=(g.n, g.n))


def diameter(g: Graph):
    """Largest shortest-path distance; ``math.inf`` if disconnected.

    Runs a BFS from every vertex (scipy's unweighted shortest paths).
    """
    if g.n <= 1:
        return 0
    if not is_connected(g):
        return INFINITE
    dist = shortest_path(to_csr(g), directed=False, unweighted=True)
    return int(dist.max())
