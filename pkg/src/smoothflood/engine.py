"""Single-trial round loop: adversary -> smoothing -> flooding."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .adversary import Adversary, AdversarySpec, AdversaryView, build_adversary
from .graph import Graph, hamming_distance
from .smoothing import DEFAULT_MAX_RETRIES

TRACE_FIELDS = (
    "proposed_churn",
    "noise_magnitude",
    "toggled_count",
    "informed_count",
    "cap_bound",
    "rejections",
)


@dataclass(frozen=True)
class RoundTrace:
    round: int
    proposed_churn: int
    noise_magnitude: int
    toggled_count: int
    informed_count: int
    cap_bound: bool
    rejections: int


@dataclass
class TrialRecord:
    """Outcome of one trial.  ``flooding_time`` is ``None`` if the cap was hit."""

    n: int
    flooding_time: int | None
    max_rounds: int
    trace: dict[str, np.ndarray]
    lineage: tuple = ()

    @property
    def censored(self) -> bool:
        return self.flooding_time is None

    @property
    def rounds_run(self) -> int:
        return len(self.trace["informed_count"])

    @property
    def rounds(self) -> list[RoundTrace]:
        cols = [self.trace[f].tolist() for f in TRACE_FIELDS]
        return [RoundTrace(i + 1, *row) for i, row in enumerate(zip(*cols))]

    @property
    def total_noise(self) -> int:
        return int(self.trace["noise_magnitude"].sum())

    @property
    def total_rejections(self) -> int:
        return int(self.trace["rejections"].sum())

    @property
    def cap_bound_rounds(self) -> int:
        return int(self.trace["cap_bound"].sum())


def flood_mask(g: Graph, informed: np.ndarray) -> np.ndarray:
    """One synchronous flooding round on a boolean informed mask."""
    u, v = g.u, g.v
    iu = informed[u]
    iv = informed[v]
    out = informed.copy()
    out[v[iu & ~iv]] = True
    out[u[iv & ~iu]] = True
    return out


def flood_step(g: Graph, informed: set[int]) -> set[int]:
    """``informed`` plus all its neighbors in ``g``."""
    mask = np.zeros(g.n, dtype=bool)
    mask[list(informed)] = True
    return set(np.flatnonzero(flood_mask(g, mask)).tolist())


def run_trial(
    adversary: AdversarySpec | Adversary,
    model,
    max_rounds: int | None = None,
    rng: np.random.Generator | int | None = None,
    *,
    lineage: tuple = (),
    check_premises: bool = True,
    max_retries: int = DEFAULT_MAX_RETRIES,
) -> TrialRecord:
    """Flood from the adversary's source until everyone is informed.

    Round ``i`` obtains ``G_i`` from the adversary, smooths it into
    ``G'_i`` and lets every informed vertex inform its ``G'_i``-neighbors.
    ``G'_0`` is the adversary's explicit initial graph if it has one,
    else ``G_1``; it never carries messages.

    ``check_premises=False`` admits models outside their theorem regime
    (e.g. ``k > n/16`` on tiny oracle instances).
    """
    if isinstance(adversary, AdversarySpec):
        adversary = build_adversary(adversary, model)
    n = adversary.n
    if check_premises:
        model.validate(n)
    if max_rounds is None:
        max_rounds = 4 * n
    if max_rounds < 1:
        raise ValueError("max_rounds must be at least 1")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)

    informed = np.zeros(n, dtype=bool)
    informed[adversary.source] = True
    count = 1
    prev = adversary.initial_graph()
    cols = {f: [] for f in TRACE_FIELDS}
    flooding_time = None
    if n == 1:
        flooding_time = 0
    i = 0
    while flooding_time is None and i < max_rounds:
        i += 1
        if adversary.adaptive:
            proposed = adversary.propose(AdversaryView(i, prev, informed))
        else:
            proposed = adversary.propose(i)
        if prev is None:
            prev = proposed
        out = model.step(prev, proposed, rng, max_retries)
        churn = out.churn if out.churn is not None else hamming_distance(prev, proposed)
        informed = flood_mask(out.smoothed, informed)
        new_count = int(np.count_nonzero(informed))
        if new_count == count and count < n:
            raise RuntimeError(f"no vertex informed in round {i}: smoothed graph is disconnected")
        count = new_count
        cols["proposed_churn"].append(churn)
        cols["noise_magnitude"].append(out.noise_magnitude)
        cols["toggled_count"].append(len(out.toggled))
        cols["informed_count"].append(count)
        cols["cap_bound"].append(out.cap_bound)
        cols["rejections"].append(out.rejections)
        prev = out.smoothed
        if count == n:
            flooding_time = i
    trace = {f: np.asarray(cols[f], dtype=bool if f == "cap_bound" else np.int64) for f in TRACE_FIELDS}
    return TrialRecord(n, flooding_time, max_rounds, trace, tuple(lineage))
