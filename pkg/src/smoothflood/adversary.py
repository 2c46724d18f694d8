"""Adversary strategies: the graph proposed for each round.

Vertex ids are 0-based: the flooding source (vertex 1 in the usual
1-based write-up of these constructions) is index 0 and the last vertex
is ``n - 1``.

Oblivious adversaries implement ``graph_at(round)`` and never see the
noise.  Adaptive ones receive an :class:`AdversaryView` holding the last
smoothed graph and the informed set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import ConfigError, UsageError
from .graph import EdgeDelta, Graph, delta_between, hamming_distance, is_connected
from .smoothing import Proportional, SmoothingModel, Targeted


@dataclass(frozen=True)
class AdversaryView:
    round: int
    prev_smoothed: Graph | None
    informed: np.ndarray

    @property
    def informed_set(self) -> set[int]:
        return set(np.flatnonzero(self.informed).tolist())


class Adversary:
    adaptive = False
    kind = ""

    def __init__(self, n: int, source: int = 0):
        if n < 2:
            raise ConfigError("need at least 2 vertices")
        self.n = n
        self.source = source
        self._prev = None
        self._cur = None

    def initial_graph(self) -> Graph | None:
        """Explicit ``G'_0``; ``None`` means ``G'_0 = G_1``."""
        return None

    def _track(self, g: Graph) -> Graph:
        self._prev, self._cur = self._cur, g
        return g

    @property
    def last_delta(self) -> EdgeDelta | None:
        """Change between the last two proposals (``None`` before round 2)."""
        if self._prev is None or self._cur is None:
            return None
        return delta_between(self._prev, self._cur)


class ObliviousAdversary(Adversary):
    def graph_at(self, round: int) -> Graph:
        raise NotImplementedError

    def propose(self, round: int) -> Graph:
        return self._track(self.graph_at(round))


class AdaptiveAdversary(Adversary):
    adaptive = True

    def propose(self, view: AdversaryView) -> Graph:
        raise NotImplementedError


def _keys(n, lo, hi):
    lo = np.asarray(lo, dtype=np.int64)
    hi = np.asarray(hi, dtype=np.int64)
    return np.minimum(lo, hi) * n + np.maximum(lo, hi)


class StaticAdversary(ObliviousAdversary):
    kind = "static"

    def __init__(self, g0: Graph, source: int = 0):
        super().__init__(g0.n, source)
        if not is_connected(g0):
            raise ConfigError("static adversary graph must be connected")
        self.g0 = g0

    def graph_at(self, round):
        return self.g0


class SpoolingAdversary(ObliviousAdversary):
    """Two stars bridged by one edge; the uninformed spool's head advances.

    Round ``i``: star around ``i-1`` with leaves ``0..i-2`` (informed
    spool), bridge ``(i-1, i)``, star around ``i`` with leaves
    ``i+1..n-1``.  Rounds past ``n-1`` repeat the last graph.
    """

    kind = "spooling"

    def graph_at(self, round):
        n = self.n
        i = min(max(round, 1), n - 1)
        a, b = i - 1, i
        left = np.arange(a, dtype=np.int64) * n + a
        right = b * n + np.arange(b + 1, n, dtype=np.int64)
        keys = np.concatenate([left, [a * n + b], right])
        return Graph.from_keys(n, keys, is_sorted=True)


class CassetteAdversary(ObliviousAdversary):
    """Path plus shortcut edges that migrate from ``n-1`` to ``0``.

    Round ``i`` with ``J = (i-1) // t``: path edges, ``(0, jt)`` for
    ``1 <= j <= J`` and ``(jt, n-1)`` for ``J+2 <= j <= (n-2) // t``.
    Rounds past ``n`` repeat ``G_n``.
    """

    kind = "cassette"

    def __init__(self, n: int, t: int, source: int = 0):
        super().__init__(n, source)
        if t < 1:
            raise ConfigError(
                "cassette spacing t = floor(c log_{1/eps} n) is below 1; increase n or c, "
                "or decrease eps"
            )
        self.t = t

    @staticmethod
    def spacing(n: int, c: float, epsilon: float) -> int:
        if not 0 < epsilon < 1:
            raise ConfigError(f"cassette needs 0 < epsilon < 1, got {epsilon:g}")
        return math.floor(c * math.log(n) / math.log(1 / epsilon))

    def graph_at(self, round):
        n, t = self.n, self.t
        i = min(max(round, 1), n)
        J = (i - 1) // t
        path = np.arange(n - 1, dtype=np.int64)
        left = np.arange(1, J + 1, dtype=np.int64) * t
        right = np.arange(J + 2, (n - 2) // t + 1, dtype=np.int64) * t
        keys = np.concatenate([path * n + path + 1, left, right * n + (n - 1)])
        return Graph.from_keys(n, keys)


class StarRecenterAdversary(ObliviousAdversary):
    """Double star around ``c = ((round - 1) // period) mod n`` and ``c - 1``.

    ``G'_0`` is centered one step behind ``G_1``.

    Recentering drops the older star and adds a new one, so targeted
    noise keeps firing while the diameter stays 2.  The shared star keeps
    every smoothed graph connected with high probability once
    ``eps**period`` is small against ``1/n``; a bare single star would be
    disconnected by targeted noise almost surely at every recentering.
    """

    kind = "star_recenter"

    def __init__(self, n: int, period: int | None = None, source: int = 0):
        super().__init__(n, source)
        if n < 3:
            raise ConfigError("star recentering needs n >= 3")
        if period is None:
            period = self.default_period(n)
        if period < 1:
            raise ConfigError("period must be at least 1")
        self.period = period

    @staticmethod
    def default_period(n: int) -> int:
        return 2 * math.ceil(math.log2(n))

    def center(self, round: int) -> int:
        return ((round - 1) // self.period) % self.n

    def initial_graph(self):
        # one step behind G_1, so the first round is already a recentering
        return self._double_star(self.center(1) - 1)

    def graph_at(self, round):
        return self._double_star(self.center(round))

    def _double_star(self, c):
        n = self.n
        c = c % n
        b = (c - 1) % n
        others = np.arange(n, dtype=np.int64)
        keys = np.concatenate([
            _keys(n, np.full(n - 1, c), np.delete(others, c)),
            _keys(n, np.full(n - 1, b), np.delete(others, b)),
        ])
        return Graph.from_keys(n, keys)


class AdaptiveSpoolingAdversary(AdaptiveAdversary):
    """Informed star around the source, bridged to an uninformed head.

    With ``u = min`` uninformed vertex, round ``i+1`` proposes
    ``{source} x (I - {source})``, ``(source, u)`` and ``{u} x (rest of the
    uninformed)``.  Round 1 is the star around vertex 1.
    """

    kind = "adaptive_spooling"

    def __init__(self, n, source=0):
        super().__init__(n, source)
        if source != 0:
            raise ConfigError("adaptive spooling assumes the source is vertex 0")

    def propose(self, view):
        n, s = self.n, self.source
        informed = view.informed
        unin = np.flatnonzero(~informed)
        if not len(unin):
            raise UsageError("all vertices informed; nothing to propose")
        u = unin[0]
        inf = np.flatnonzero(informed)
        inf = inf[inf != s]
        rest = unin[1:]
        keys = np.concatenate([
            _keys(n, np.full(len(inf), s), inf),
            _keys(n, [s], [u]),
            _keys(n, np.full(len(rest), u), rest),
        ])
        return self._track(Graph.from_keys(n, keys))


class LowChurnSpoolingAdversary(AdaptiveAdversary):
    """Stars around the source and the sink ``n-1`` joined by a connector.

    Every round repairs the last round's noise and moves the connector:

    (a) a noisy edge from a previously informed vertex to an uninformed
        ``w != n-1`` is removed, and ``w`` is moved from the sink star to
        the source star;
    (b) a noisy edge between two previously uninformed vertices is cut;
    (c) any other noisy toggle is reverted;

    then ``(u_old, n-1)`` is removed and ``(0, u_new)`` added, with
    ``u_new`` the smallest uninformed vertex.  With at most one noisy
    edge per round the proposal differs from the last smoothed graph in
    2 to 5 edges.

    ``G'_0`` is the star around ``n-1``, whose connector is the source
    itself; round 1 therefore changes exactly 2 edges.
    """

    kind = "low_churn_spooling"

    def __init__(self, n, source=0, debug=False):
        super().__init__(n, source)
        if source != 0:
            raise ConfigError("low-churn spooling assumes the source is vertex 0")
        self.sink = n - 1
        self.debug = debug
        self._last = None
        self._before = None
        self._connector = None

    def initial_graph(self):
        return Graph.star(self.n, self.sink)

    def _key(self, a, b):
        return min(a, b) * self.n + max(a, b)

    def propose(self, view):
        n, s, z = self.n, self.source, self.sink
        prev = view.prev_smoothed
        informed = view.informed
        if self._last is None:
            self._last = self.initial_graph()
            self._before = informed.copy()
            self._connector = s
        if prev is None:
            prev = self._last
        before = self._before
        noise = np.setxor1d(prev.keys, self._last.keys, assume_unique=True)
        in_prev = prev.contains_keys(noise)
        remove, add = set(), set()
        for key, added in zip(noise.tolist(), in_prev.tolist()):
            a, b = divmod(key, n)
            if not added:
                add.add(key)  # (c) revert a noisy deletion
                continue
            ia, ib = bool(before[a]), bool(before[b])
            remove.add(key)
            if ia != ib:
                w = b if ia else a
                if w != z:  # (a)
                    remove.add(self._key(w, z))
                    add.add(self._key(s, w))
            # (b) and (c): the noisy edge is simply removed
        unin = np.flatnonzero(~informed)
        if not len(unin):
            raise UsageError("all vertices informed; nothing to propose")
        u_new = int(unin[0])
        if self._connector != z:
            remove.add(self._key(self._connector, z))
        add.add(self._key(s, u_new))
        remove -= add
        keys = prev.keys
        if remove:
            keys = keys[~np.isin(keys, np.fromiter(remove, dtype=np.int64))]
        g = Graph.from_keys(n, np.concatenate([keys, np.fromiter(add, dtype=np.int64)]))
        if self.debug:
            churn = hamming_distance(prev, g)
            if not 2 <= churn <= 5:
                raise AssertionError(f"low-churn proposal changed {churn} edges in round {view.round}")
        self._last = g
        self._before = informed.copy()
        self._connector = u_new
        return self._track(g)


def low_churn_target(n: int, informed: np.ndarray, source: int = 0) -> Graph:
    """Closed form of the low-churn proposal for a given informed set."""
    sink = n - 1
    inf = [x for x in np.flatnonzero(informed).tolist() if x != source]
    unin = np.flatnonzero(~informed).tolist()
    u = unin[0]
    edges = {(source, x) for x in inf}
    edges |= {(x, sink) for x in unin if x != sink}
    edges.add((source, u))
    return Graph(n, edges)


# -- configuration --------------------------------------------------------------

KINDS = ("static", "spooling", "adaptive_spooling", "low_churn_spooling", "cassette", "star_recenter")
_STATIC_GRAPHS = {"path": Graph.path, "star": Graph.star, "complete": Graph.complete, "cycle": Graph.cycle}
_SPEC_KEYS = {
    "static": {"graph", "edges"},
    "spooling": set(),
    "adaptive_spooling": set(),
    "low_churn_spooling": set(),
    "cassette": {"c"},
    "star_recenter": {"period"},
}


@dataclass(frozen=True)
class AdversarySpec:
    kind: str
    n: int
    source: int = 0
    c: float | None = None
    period: int | None = None
    graph: str | None = None
    edges: tuple | None = None

    @property
    def label(self) -> str:
        if self.kind == "cassette":
            return f"cassette(c={self.c:g})"
        if self.kind == "star_recenter":
            return "star_recenter" if self.period is None else f"star_recenter(period={self.period})"
        if self.kind == "static":
            return f"static({self.graph or 'edges'})"
        return self.kind

    def to_dict(self) -> dict[str, Any]:
        d = {"kind": self.kind}
        for name in sorted(_SPEC_KEYS[self.kind]):
            value = getattr(self, name)
            if value is not None:
                d[name] = [list(e) for e in value] if name == "edges" else value
        if self.source:
            d["source"] = self.source
        return d

    @classmethod
    def from_dict(cls, d: dict, n: int) -> AdversarySpec:
        d = dict(d)
        kind = d.pop("kind", None)
        if kind not in KINDS:
            raise ConfigError(f"unknown adversary kind {kind!r}; expected one of {list(KINDS)}")
        extra = set(d) - _SPEC_KEYS[kind] - {"source"}
        if extra:
            raise ConfigError(f"unknown keys for {kind} adversary: {sorted(extra)}")
        if "edges" in d:
            d["edges"] = tuple(tuple(e) for e in d["edges"])
        return cls(kind=kind, n=n, **d)


def build_adversary(spec: AdversarySpec, model: SmoothingModel | None = None) -> Adversary:
    """Instantiate and validate an adversary, including its model pairing."""
    n, kind = spec.n, spec.kind
    if not 0 <= spec.source < n:
        raise ConfigError(f"source {spec.source} outside [0, {n})")
    if kind == "static":
        if spec.edges is not None:
            g0 = Graph(n, spec.edges)
        elif spec.graph in _STATIC_GRAPHS:
            g0 = _STATIC_GRAPHS[spec.graph](n)
        else:
            raise ConfigError(f"static adversary needs 'edges' or graph in {sorted(_STATIC_GRAPHS)}")
        return StaticAdversary(g0, spec.source)
    if kind == "spooling":
        _require_source0(spec)
        return SpoolingAdversary(n)
    if kind == "adaptive_spooling":
        _require_source0(spec)
        return AdaptiveSpoolingAdversary(n)
    if kind == "low_churn_spooling":
        _require_source0(spec)
        if model is not None:
            if not isinstance(model, Proportional):
                raise ConfigError("low-churn spooling is paired with the proportional model")
            if model.epsilon > 0.2:
                raise ConfigError(
                    f"low-churn spooling needs epsilon <= 1/5 (one noisy edge per round), "
                    f"got {model.epsilon:g}"
                )
        return LowChurnSpoolingAdversary(n)
    if kind == "cassette":
        _require_source0(spec)
        if spec.c is None or spec.c <= 0:
            raise ConfigError("cassette needs a positive constant c")
        if not isinstance(model, Targeted):
            raise ConfigError("cassette is paired with the targeted model")
        return CassetteAdversary(n, CassetteAdversary.spacing(n, spec.c, model.epsilon))
    if kind == "star_recenter":
        return StarRecenterAdversary(n, spec.period, spec.source)
    raise ConfigError(f"unknown adversary kind {kind!r}")


def _require_source0(spec):
    if spec.source != 0:
        raise ConfigError(f"{spec.kind} floods from vertex 0; source={spec.source} unsupported")
