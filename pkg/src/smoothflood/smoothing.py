"""Noise models: randomized rounding, t-smoothing, targeted smoothing.

Every sampler here is exact.  A t-smoothing is drawn by choosing the
toggle-set size ``j`` with weight ``C(M, j)`` (``M = n(n-1)/2`` edge slots),
a uniform ``j``-subset of slots, and rejecting disconnected outcomes.
Toggle sets are in bijection with the graphs at Hamming distance at most
``t``, so the accepted graph is uniform over the connected ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import ClassVar

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import ConfigError, SamplerStarvationError, UsageError
from .graph import Graph, hamming_distance, is_connected, toggle_keys

DEFAULT_MAX_RETRIES = 10**6
# cap on (rows x edges) handled by one block connectivity call
_SMALL_WORK = 256
_BLOCK_BUDGET = 2_000_000


@dataclass
class NoiseOutcome:
    smoothed: Graph
    noise_magnitude: int
    toggled: np.ndarray
    rejections: int = 0
    cap_bound: bool = False
    churn: int | None = None

    @property
    def toggled_edges(self) -> set[tuple[int, int]]:
        n = self.smoothed.n
        return {(int(k // n), int(k % n)) for k in self.toggled}


@dataclass
class ToggleBatch:
    """Many accepted draws against one base graph.

    ``toggles`` has one row per draw, padded with ``-1``; row ``r`` toggled
    against ``base`` gives the ``r``-th smoothed graph.
    """

    base: Graph
    toggles: np.ndarray
    magnitudes: np.ndarray
    rejections: int = 0

    def __len__(self) -> int:
        return len(self.toggles)

    def graph(self, r: int) -> Graph:
        row = self.toggles[r]
        return toggle_keys(self.base, row[row >= 0])

    def toggle_codes(self) -> np.ndarray:
        """One integer per row identifying its toggle set (tiny graphs only)."""
        if self.base.n * self.base.n > 62:
            raise UsageError("toggle codes need n*n <= 62")
        bits = np.where(self.toggles >= 0, np.left_shift(1, np.maximum(self.toggles, 0)), 0)
        return bits.sum(axis=1)

    def contains_any(self, keys) -> np.ndarray:
        """Per row: does the smoothed graph contain an edge of ``keys``?"""
        keys = np.unique(np.asarray(keys, dtype=np.int64))
        in_base = self.base.contains_keys(keys)
        hit_toggle = np.isin(self.toggles, keys)
        base_hits = keys[in_base]
        # a base edge of S survives unless this row toggled it off
        removed_base = np.isin(self.toggles, base_hits).sum(axis=1)
        added = (hit_toggle & ~np.isin(self.toggles, base_hits)).any(axis=1)
        return added | (removed_base < len(base_hits))


# -- randomized rounding ----------------------------------------------------


def roundp_sample(x: float, rng: np.random.Generator) -> int:
    """``ceil(x)`` with probability ``x - floor(x)``, else ``floor(x)``."""
    if x < 0 or math.isnan(x):
        raise UsageError(f"roundp needs a non-negative number, got {x}")
    lo = math.floor(x)
    frac = x - lo
    if frac == 0.0:
        return int(lo)
    return int(lo) + int(rng.random() < frac)


# -- t-smoothing --------------------------------------------------------------


@lru_cache(maxsize=256)
def toggle_size_cdf(num_slots: int, t: int) -> np.ndarray:
    """CDF of the toggle-set size ``j in 0..t``, weight ``C(M, j)``.

    Log weights are accumulated via ``C(M,j)/C(M,j-1) = (M-j+1)/j``.
    """
    t = min(t, num_slots)
    logw = np.zeros(t + 1)
    for j in range(1, t + 1):
        logw[j] = logw[j - 1] + math.log(num_slots - j + 1) - math.log(j)
    w = np.exp(logw - logw.max())
    cdf = np.cumsum(w / w.sum())
    cdf[-1] = 1.0
    return cdf


def propose_toggle_sets(n: int, t: int, size: int, rng: np.random.Generator):
    """Unconditioned proposals: ``size`` uniform toggle sets of size ``<= t``.

    Returns ``(sizes, toggles)``; ``toggles`` is ``size x t`` with ``-1``
    beyond each row's size.  Columns are filled one at a time and redrawn
    on collision with an earlier column, i.e. sampling without replacement.
    """
    num_slots = n * (n - 1) // 2
    t = min(t, num_slots)
    sizes = np.searchsorted(toggle_size_cdf(num_slots, t), rng.random(size), side="right")
    sizes = np.minimum(sizes, t)
    toggles = np.full((size, t), -1, dtype=np.int64)
    for c in range(t):
        rows = np.flatnonzero(sizes > c)
        while len(rows):
            a = rng.integers(0, n, size=len(rows))
            b = rng.integers(0, n, size=len(rows))
            keys = np.minimum(a, b) * n + np.maximum(a, b)
            bad = a == b
            if c:
                bad |= (toggles[rows, :c] == keys[:, None]).any(axis=1)
            good = ~bad
            toggles[rows[good], c] = keys[good]
            rows = rows[bad]
    return sizes, toggles


def connected_after_toggles(g: Graph, toggles: np.ndarray, base_connected: bool = True) -> np.ndarray:
    """For each row of toggles (``-1`` padded), is ``g`` xor row connected?

    With ``base_connected`` (the caller vouches that ``g`` is connected)
    rows that only add edges are connected for free; the rest are checked
    together as one block-diagonal graph.
    """
    toggles = np.atleast_2d(toggles)
    rows = toggles.shape[0]
    valid = toggles >= 0
    present = g.contains_keys(np.maximum(toggles, 0)) & valid
    ok = np.ones(rows, dtype=bool)
    if base_connected:
        todo = np.flatnonzero(present.any(axis=1))
    else:
        todo = np.arange(rows)
    if not len(todo):
        return ok
    n = g.n
    if len(todo) * (n + g.m) <= _SMALL_WORK:
        # scipy's setup cost dominates on tiny inputs
        for r in todo:
            row = toggles[r]
            ok[r] = is_connected(toggle_keys(g, row[row >= 0]))
        return ok
    chunk = max(1, _BLOCK_BUDGET // max(1, g.m + toggles.shape[1]))
    for start in range(0, len(todo), chunk):
        idx = todo[start:start + chunk]
        ok[idx] = _block_connected(g, toggles[idx], present[idx], valid[idx], n)
    return ok


def _block_connected(g, toggles, present, valid, n):
    r = len(toggles)
    span = n * n
    row_id = np.arange(r, dtype=np.int64)[:, None]
    base = (row_id * span + g.keys[None, :]).ravel()
    removed = (row_id * span + toggles)[present]
    keep = ~np.isin(base, removed)
    base = base[keep]
    added_mask = valid & ~present
    added = (row_id * span + toggles)[added_mask]
    combined = np.concatenate([base, added])
    blk, local = np.divmod(combined, span)
    lo, hi = np.divmod(local, n)
    offset = blk * n
    size = r * n
    mat = coo_matrix(
        (np.ones(len(combined), dtype=np.int8), (lo + offset, hi + offset)),
        shape=(size, size),
    )
    _, labels = connected_components(mat, directed=False)
    labels = labels.reshape(r, n)
    return (labels == labels[:, :1]).all(axis=1)


def sample_t_smoothing(
    g_adv: Graph,
    t: int,
    rng: np.random.Generator,
    max_retries: int = DEFAULT_MAX_RETRIES,
) -> NoiseOutcome:
    """Uniform connected graph within Hamming distance ``t`` of ``g_adv``."""
    if t < 0:
        raise UsageError("noise parameter t must be non-negative")
    if t == 0 or g_adv.n < 2:
        return NoiseOutcome(g_adv, t, np.empty(0, dtype=np.int64))
    rejections = 0
    while True:
        _, toggles = propose_toggle_sets(g_adv.n, t, 1, rng)
        if connected_after_toggles(g_adv, toggles)[0]:
            row = np.sort(toggles[0][toggles[0] >= 0])
            return NoiseOutcome(toggle_keys(g_adv, row), t, row, rejections)
        rejections += 1
        if rejections > max_retries:
            raise SamplerStarvationError(
                f"t-smoothing rejected {rejections} proposals (n={g_adv.n}, t={t}); "
                "is t far above n/16?",
                rejections,
            )


def _collect(base, propose, size, rng, max_retries, what):
    """Draw proposal batches until ``size`` connected rows are accepted."""
    kept_t, kept_s = [], []
    base_connected = is_connected(base)
    have = 0
    rejections = 0
    accept_rate = 1.0
    while have < size:
        want = size - have
        batch = int(min(200_000, max(64, want / max(accept_rate, 1e-3) * 1.1)))
        sizes, toggles = propose(batch)
        ok = connected_after_toggles(base, toggles, base_connected)
        acc = int(ok.sum())
        accept_rate = max(acc / batch, 1e-3)
        # keep proposal order so the first `want` accepted rows are used
        acc_idx = np.flatnonzero(ok)[:want]
        last = acc_idx[-1] + 1 if len(acc_idx) == want else batch
        rejections += int(last - len(acc_idx))
        kept_t.append(toggles[acc_idx])
        kept_s.append(sizes[acc_idx])
        have += len(acc_idx)
        if rejections > max_retries * max(1, have):
            raise SamplerStarvationError(f"{what} rejected {rejections} proposals", rejections)
    width = max(t.shape[1] for t in kept_t)
    out = np.full((size, width), -1, dtype=np.int64)
    pos = 0
    for t in kept_t:
        out[pos:pos + len(t), : t.shape[1]] = t
        pos += len(t)
    return ToggleBatch(base, out, np.concatenate(kept_s), rejections)


def sample_t_smoothing_many(
    g_adv: Graph,
    t: int,
    size: int,
    rng: np.random.Generator,
    max_retries: int = DEFAULT_MAX_RETRIES,
) -> ToggleBatch:
    """``size`` independent t-smoothings of ``g_adv`` (vectorized)."""
    if t < 0:
        raise UsageError("noise parameter t must be non-negative")
    batch = _collect(
        g_adv,
        lambda b: propose_toggle_sets(g_adv.n, t, b, rng),
        size,
        rng,
        max_retries,
        "t-smoothing",
    )
    batch.magnitudes = np.full(size, t)
    return batch


# -- targeted smoothing ---------------------------------------------------------


def _targeted_proposals(diff, eps, size, rng):
    flips = rng.random((size, len(diff))) < eps
    toggles = np.where(flips, diff[None, :], -1)
    return flips.sum(axis=1), toggles


def sample_targeted_smoothing(
    g_adv: Graph,
    g_old: Graph,
    epsilon: float,
    rng: np.random.Generator,
    max_retries: int = DEFAULT_MAX_RETRIES,
) -> NoiseOutcome:
    """Revert each adversary change independently with probability ``epsilon``.

    Edges of ``g_old - g_adv`` come back and edges of ``g_adv - g_old`` are
    dropped; a disconnected result repeats the whole draw.  ``g_adv`` must
    be connected, as every adversary proposal is.
    """
    if g_adv.n != g_old.n:
        raise UsageError("graphs on different vertex counts")
    if not 0 <= epsilon <= 1:
        raise UsageError(f"epsilon must lie in [0, 1], got {epsilon}")
    diff = np.setxor1d(g_adv.keys, g_old.keys, assume_unique=True)
    if not len(diff) or epsilon == 0:
        return NoiseOutcome(g_adv, 0, np.empty(0, dtype=np.int64), churn=len(diff))
    rejections = 0
    while True:
        flips = rng.random(len(diff)) < epsilon
        toggles = diff[flips]
        if connected_after_toggles(g_adv, toggles[None, :])[0]:
            return NoiseOutcome(
                toggle_keys(g_adv, toggles), len(toggles), toggles, rejections, churn=len(diff)
            )
        rejections += 1
        if rejections > max_retries:
            raise SamplerStarvationError(
                f"targeted smoothing rejected {rejections} proposals (|diff|={len(diff)})",
                rejections,
            )


def sample_targeted_many(
    g_adv: Graph,
    g_old: Graph,
    epsilon: float,
    size: int,
    rng: np.random.Generator,
    max_retries: int = DEFAULT_MAX_RETRIES,
) -> ToggleBatch:
    """``size`` independent targeted smoothings (vectorized)."""
    if g_adv.n != g_old.n:
        raise UsageError("graphs on different vertex counts")
    diff = np.setxor1d(g_adv.keys, g_old.keys, assume_unique=True)
    return _collect(
        g_adv,
        lambda b: _targeted_proposals(diff, epsilon, b, rng),
        size,
        rng,
        max_retries,
        "targeted smoothing",
    )


# -- per-round dynamics -----------------------------------------------------------


def next_k_smoothed(g_adv: Graph, k: float, rng, max_retries=DEFAULT_MAX_RETRIES) -> NoiseOutcome:
    """Round of background noise: ``t = roundp(k)`` drawn afresh each call."""
    t = roundp_sample(k, rng)
    return sample_t_smoothing(g_adv, t, rng, max_retries)


def next_proportional(
    g_prev_smoothed: Graph,
    g_adv: Graph,
    epsilon: float,
    cap: int,
    rng,
    max_retries=DEFAULT_MAX_RETRIES,
) -> NoiseOutcome:
    """Noise proportional to churn ``|G'_{i-1} xor G_i|``, capped at ``cap``."""
    churn = hamming_distance(g_prev_smoothed, g_adv)
    t = roundp_sample(epsilon * churn, rng) if churn else 0
    capped = t > cap
    t = min(t, cap)
    out = sample_t_smoothing(g_adv, t, rng, max_retries)
    out.cap_bound = capped
    out.churn = churn
    return out


def next_targeted(g_prev_smoothed: Graph, g_adv: Graph, epsilon: float, rng,
                  max_retries=DEFAULT_MAX_RETRIES) -> NoiseOutcome:
    return sample_targeted_smoothing(g_adv, g_prev_smoothed, epsilon, rng, max_retries)


# -- model configurations -----------------------------------------------------------


def _fmt(x) -> str:
    return repr(float(x)).rstrip("0").rstrip(".") if float(x) != int(x) else str(int(x))


class SmoothingModel:
    """Base of the three noise models; subclasses are frozen dataclasses."""

    kind: ClassVar[str] = ""

    def validate(self, n: int) -> None:
        raise NotImplementedError

    def step(self, prev_smoothed: Graph, proposed: Graph, rng, max_retries=DEFAULT_MAX_RETRIES):
        raise NotImplementedError

    @property
    def label(self) -> str:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class KSmooth(SmoothingModel):
    k: float
    kind: ClassVar[str] = "ksmooth"

    def validate(self, n):
        if not 0 <= self.k <= n / 16:
            raise ConfigError(f"k-smoothing needs 0 <= k <= n/16 = {n / 16:g}, got k={self.k:g}")

    def step(self, prev_smoothed, proposed, rng, max_retries=DEFAULT_MAX_RETRIES):
        return next_k_smoothed(proposed, self.k, rng, max_retries)

    @property
    def label(self):
        return f"ksmooth(k={_fmt(self.k)})"

    def to_dict(self):
        return {"kind": self.kind, "k": self.k}


@dataclass(frozen=True)
class Proportional(SmoothingModel):
    """``cap=None`` resolves to ``floor(n/16)``."""

    epsilon: float
    cap: int | None = None
    kind: ClassVar[str] = "proportional"

    def cap_for(self, n: int) -> int:
        return n // 16 if self.cap is None else self.cap

    def validate(self, n):
        if not 0 < self.epsilon <= 1:
            raise ConfigError(f"proportional noise needs 0 < epsilon <= 1, got {self.epsilon:g}")
        if self.cap is not None and not 0 <= self.cap <= n / 16:
            raise ConfigError(f"proportional cap must lie in [0, n/16 = {n / 16:g}], got {self.cap}")

    def step(self, prev_smoothed, proposed, rng, max_retries=DEFAULT_MAX_RETRIES):
        return next_proportional(
            prev_smoothed, proposed, self.epsilon, self.cap_for(proposed.n), rng, max_retries
        )

    @property
    def label(self):
        cap = "" if self.cap is None else f",cap={self.cap}"
        return f"proportional(eps={_fmt(self.epsilon)}{cap})"

    def to_dict(self):
        return {"kind": self.kind, "epsilon": self.epsilon, "cap": self.cap}


@dataclass(frozen=True)
class Targeted(SmoothingModel):
    epsilon: float
    kind: ClassVar[str] = "targeted"

    def validate(self, n):
        if not 0 <= self.epsilon < 1:
            raise ConfigError(f"targeted noise needs 0 <= epsilon < 1, got {self.epsilon:g}")

    def step(self, prev_smoothed, proposed, rng, max_retries=DEFAULT_MAX_RETRIES):
        return next_targeted(prev_smoothed, proposed, self.epsilon, rng, max_retries)

    @property
    def label(self):
        return f"targeted(eps={_fmt(self.epsilon)})"

    def to_dict(self):
        return {"kind": self.kind, "epsilon": self.epsilon}


_MODELS = {cls.kind: cls for cls in (KSmooth, Proportional, Targeted)}
_MODEL_KEYS = {"ksmooth": {"k"}, "proportional": {"epsilon", "cap"}, "targeted": {"epsilon"}}


def model_from_dict(d: dict) -> SmoothingModel:
    d = dict(d)
    kind = d.pop("kind", None)
    if kind not in _MODELS:
        raise ConfigError(f"unknown smoothing model kind {kind!r}; expected one of {sorted(_MODELS)}")
    extra = set(d) - _MODEL_KEYS[kind]
    if extra:
        raise ConfigError(f"unknown keys for {kind} model: {sorted(extra)}")
    try:
        return _MODELS[kind](**d)
    except TypeError as exc:
        raise ConfigError(f"bad {kind} model parameters: {exc}") from None
