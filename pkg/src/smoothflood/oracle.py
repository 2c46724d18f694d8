"""Brute-force references on tiny instances.

Nothing here shares code with the samplers: supports are enumerated with
``itertools`` over explicit edge tuples and connectivity is plain BFS.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

from .errors import BudgetExceededError, UsageError
from .graph import Graph, is_connected
from .smoothing import KSmooth, Proportional, Targeted


@dataclass
class SupportTable:
    """Exact distribution over graphs: ``probabilities[g]`` per candidate."""

    probabilities: dict
    context: dict

    @property
    def candidates(self) -> list[tuple[Graph, float]]:
        return list(self.probabilities.items())

    def __len__(self) -> int:
        return len(self.probabilities)

    def total(self) -> float:
        return math.fsum(self.probabilities.values())


def _all_slots(n):
    return list(itertools.combinations(range(n), 2))


def enumerate_t_smoothing(g_adv: Graph, t: int) -> SupportTable:
    """Uniform distribution over connected graphs within distance ``t``."""
    if g_adv.n > 6 or t > 3:
        raise BudgetExceededError(f"enumeration budget is n <= 6, t <= 3 (got n={g_adv.n}, t={t})")
    if t < 0:
        raise UsageError("t must be non-negative")
    base = g_adv.edge_set()
    slots = _all_slots(g_adv.n)
    survivors = []
    for j in range(t + 1):
        for flips in itertools.combinations(slots, j):
            edges = base.symmetric_difference(flips)
            g = Graph(g_adv.n, edges)
            if is_connected(g):
                survivors.append(g)
    p = 1.0 / len(survivors)
    return SupportTable({g: p for g in survivors}, {"g_adv": g_adv, "t": t, "family": "connected"})


def exact_targeted_distribution(g_old: Graph, g_adv: Graph, epsilon) -> SupportTable:
    """Targeted smoothing conditioned on connectivity, by enumeration.

    Probabilities are computed in exact rational arithmetic from
    ``Fraction(epsilon)`` and converted to floats at the end.
    """
    if g_old.n != g_adv.n:
        raise UsageError("graphs on different vertex counts")
    old, adv = g_old.edge_set(), g_adv.edge_set()
    diff = sorted(old ^ adv)
    if len(diff) > 12:
        raise BudgetExceededError(f"|g_old xor g_adv| = {len(diff)} exceeds 12")
    eps = Fraction(epsilon)
    mass = {}
    for flips in itertools.product((False, True), repeat=len(diff)):
        k = sum(flips)
        weight = eps**k * (1 - eps) ** (len(diff) - k)
        if weight == 0:
            continue
        flipped = {e for e, f in zip(diff, flips) if f}
        g = Graph(g_adv.n, adv.symmetric_difference(flipped))
        if is_connected(g):
            mass[g] = mass.get(g, 0) + weight
    total = sum(mass.values())
    if total == 0:
        raise UsageError("no connected outcome has positive probability")
    probs = {g: float(w / total) for g, w in mass.items()}
    return SupportTable(probs, {"g_old": g_old, "g_adv": g_adv, "epsilon": epsilon})


def _roundp_branches(x):
    lo = math.floor(x)
    frac = Fraction(x) - lo
    if frac == 0:
        return [(lo, Fraction(1))]
    return [(lo, 1 - frac), (lo + 1, frac)]


def _flood(g: Graph, informed: frozenset) -> frozenset:
    out = set(informed)
    for a, b in g.edges():
        if a in informed:
            out.add(b)
        if b in informed:
            out.add(a)
    return frozenset(out)


def _hamming(g1: Graph, g2: Graph) -> int:
    return len(g1.edge_set() ^ g2.edge_set())


def exhaustive_flooding_time(
    sequence: list[Graph], model, source: int = 0, max_leaves: int = 10**5
) -> dict[int, float]:
    """Exact flooding-time distribution by walking every noise outcome.

    ``sequence`` holds at most four graphs; the last one repeats.  States
    with identical ``(G'_{i-1}, informed)`` are merged.
    """
    if not 1 <= len(sequence) <= 4:
        raise UsageError("sequence must contain 1 to 4 graphs")
    n = sequence[0].n
    if n > 5:
        raise BudgetExceededError(f"exhaustive flooding needs n <= 5, got {n}")
    start = frozenset({source})
    states = {(None, start): Fraction(1)}
    result = {}
    leaves = 0
    for i in range(1, n):
        g_i = sequence[min(i, len(sequence)) - 1]
        nxt = {}
        for (prev, informed), p in states.items():
            prev = g_i if prev is None else prev
            for g_new, q in _round_outcomes(prev, g_i, model):
                leaves += 1
                if leaves > max_leaves:
                    raise BudgetExceededError(f"probability tree exceeds {max_leaves} leaves")
                inf2 = _flood(g_new, informed)
                w = p * q
                if len(inf2) == n:
                    result[i] = result.get(i, 0) + w
                else:
                    key = (g_new, inf2)
                    nxt[key] = nxt.get(key, 0) + w
        states = nxt
        if not states:
            break
    if states:
        raise UsageError("flooding did not finish within n-1 rounds; is some graph disconnected?")
    return {k: float(v) for k, v in sorted(result.items())}


def _round_outcomes(prev: Graph, g_i: Graph, model):
    if isinstance(model, KSmooth):
        branches = _roundp_branches(model.k)
    elif isinstance(model, Proportional):
        cap = model.cap_for(g_i.n)
        branches = [(min(t, cap), q) for t, q in _roundp_branches(model.epsilon * _hamming(prev, g_i))]
    elif isinstance(model, Targeted):
        table = exact_targeted_distribution(prev, g_i, model.epsilon)
        return [(g, Fraction(p)) for g, p in table.probabilities.items()]
    else:
        raise UsageError(f"unsupported model {model!r}")
    out = []
    for t, q in branches:
        for g, p in enumerate_t_smoothing(g_i, t).probabilities.items():
            out.append((g, q * Fraction(p)))
    return out


def total_variation(p: dict, q: dict) -> float:
    keys = set(p) | set(q)
    return 0.5 * math.fsum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def connected_graph_classes(n: int) -> list[Graph]:
    """One representative per isomorphism class of connected graphs on ``n`` vertices.

    Brute force over all labeled graphs and vertex permutations; meant for
    ``n <= 5`` (1024 labeled graphs, 120 permutations).
    """
    if n > 5:
        raise BudgetExceededError(f"isomorphism enumeration needs n <= 5, got {n}")
    slots = _all_slots(n)
    perms = list(itertools.permutations(range(n)))
    seen = set()
    reps = []
    for mask in range(1 << len(slots)):
        edges = [slots[i] for i in range(len(slots)) if mask >> i & 1]
        canon = min(
            tuple(sorted((min(p[a], p[b]), max(p[a], p[b])) for a, b in edges)) for p in perms
        )
        if canon in seen:
            continue
        seen.add(canon)
        g = Graph(n, canon)
        if is_connected(g):
            reps.append(g)
    return reps
