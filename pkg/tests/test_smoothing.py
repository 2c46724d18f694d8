import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from smoothflood.errors import ConfigError, SamplerStarvationError, UsageError
from smoothflood.graph import Graph, hamming_distance, is_connected
from smoothflood.oracle import enumerate_t_smoothing, exact_targeted_distribution, total_variation
from smoothflood.smoothing import (
    KSmooth,
    Proportional,
    Targeted,
    model_from_dict,
    next_k_smoothed,
    next_proportional,
    next_targeted,
    roundp_sample,
    sample_t_smoothing,
    sample_t_smoothing_many,
    sample_targeted_many,
    sample_targeted_smoothing,
    toggle_size_cdf,
)

DRAWS = 100_000


def triangle():
    return Graph(3, [(0, 1), (0, 2), (1, 2)])


def empirical(batch, draws):
    codes, counts = np.unique(batch.toggle_codes(), return_counts=True)
    return {int(c): k / draws for c, k in zip(codes, counts)}


def exact_codes(base, table):
    out = {}
    for h, p in table.probabilities.items():
        diff = np.setxor1d(base.keys, h.keys)
        out[int(sum(1 << int(k) for k in diff))] = p
    return out


# -- roundp ----------------------------------------------------------------


def test_roundp_integer(rng):
    assert {roundp_sample(3.0, rng) for _ in range(100)} == {3}


def test_roundp_half(rng):
    draws = np.array([roundp_sample(0.5, rng) for _ in range(DRAWS)])
    assert set(np.unique(draws)) == {0, 1}
    assert abs(draws.mean() - 0.5) < 0.01


def test_roundp_mean(rng):
    draws = np.array([roundp_sample(2.25, rng) for _ in range(DRAWS)])
    assert set(np.unique(draws)) == {2, 3}
    assert 2.24 <= draws.mean() <= 2.26


def test_roundp_negative(rng):
    with pytest.raises(UsageError):
        roundp_sample(-0.1, rng)


# -- t-smoothing -----------------------------------------------------------


def test_size_weights_large_m():
    m = 4096 * 4095 // 2
    cdf = toggle_size_cdf(m, 256)
    assert np.all(np.isfinite(cdf)) and cdf[-1] == 1.0
    # the top size dominates: C(M, t) / C(M, t-1) = (M - t + 1) / t
    assert cdf[-2] < 1e-4


def test_t_zero_identity(rng):
    g = Graph.path(6)
    out = sample_t_smoothing(g, 0, rng)
    assert out.smoothed == g and len(out.toggled) == 0


def test_triangle_t1_uniform(rng):
    table = enumerate_t_smoothing(triangle(), 1)
    assert len(table) == 4
    batch = sample_t_smoothing_many(triangle(), 1, DRAWS, rng)
    emp = empirical(batch, DRAWS)
    assert len(emp) == 4
    assert all(abs(p - 0.25) <= 0.01 for p in emp.values())


def test_path4_t1_against_oracle(rng):
    g = Graph.path(4)
    table = enumerate_t_smoothing(g, 1)
    # the path itself, three chords added; removing any path edge disconnects
    assert len(table) == 4
    batch = sample_t_smoothing_many(g, 1, DRAWS, rng)
    assert total_variation(exact_codes(g, table), empirical(batch, DRAWS)) < 0.02


def test_single_draw_matches_batch_distribution(rng):
    g = Graph.star(4, 0)
    table = enumerate_t_smoothing(g, 2)
    counts = {}
    draws = 20_000
    for _ in range(draws):
        out = sample_t_smoothing(g, 2, rng)
        counts[out.smoothed] = counts.get(out.smoothed, 0) + 1
    emp = {h: c / draws for h, c in counts.items()}
    assert total_variation(table.probabilities, emp) < 0.03


@given(st.integers(2, 12), st.integers(0, 4), st.integers(0, 2**32 - 1))
def test_outcome_is_connected_and_close(n, t, seed):
    rng = np.random.default_rng(seed)
    g = Graph.path(n)
    out = sample_t_smoothing(g, t, rng)
    assert is_connected(out.smoothed)
    assert hamming_distance(out.smoothed, g) == len(out.toggled) <= out.noise_magnitude == t


def test_starvation(rng):
    # about 16% of size-6 toggle sets disconnect a 12-vertex path; with no
    # retries allowed the first rejection must raise
    g = Graph.path(12)
    with pytest.raises(SamplerStarvationError) as info:
        for _ in range(200):
            sample_t_smoothing(g, 6, rng, max_retries=0)
    assert info.value.retries == 1


def test_reproducible():
    g = Graph.cycle(30)
    a = sample_t_smoothing(g, 3, np.random.default_rng(5))
    b = sample_t_smoothing(g, 3, np.random.default_rng(5))
    assert a.smoothed == b.smoothed and np.array_equal(a.toggled, b.toggled)


# -- the hit-probability lemmas, as monotone trends ------------------------


def _hit_rate(g, t, targets, draws, rng):
    keys = [a * g.n + b for a, b in targets]
    batch = sample_t_smoothing_many(g, t, draws, rng)
    return float(batch.contains_any(keys).mean())


def test_hit_probability_monotone_in_target_set(rng):
    n = 32
    g = Graph.path(n)
    s1 = [(0, 10), (3, 20)]
    s2 = s1 + [(5, 25), (7, 30), (1, 15), (2, 18)]
    p1 = _hit_rate(g, 2, s1, 50_000, rng)
    p2 = _hit_rate(g, 2, s2, 50_000, rng)
    assert 0 < p1 <= p2


def test_hit_probability_monotone_in_t(rng):
    n = 32
    g = Graph.path(n)
    s = [(0, 10), (3, 20), (5, 25)]
    rates = [_hit_rate(g, t, s, 50_000, rng) for t in (1, 2, 4)]
    assert rates[0] <= rates[1] <= rates[2]


def test_hit_probability_linear_in_t_times_s(rng):
    # for S disjoint from the graph the hit rate tracks t|S|/n^2
    n = 64
    g = Graph.path(n)
    far = [(a, b) for a in range(n) for b in range(a + 2, n)]
    picks = np.random.default_rng(1).permutation(len(far))
    ratios = []
    for t, size in [(1, 2), (2, 4), (4, 8)]:  # t|S| spans 2..32, a 16x range
        targets = [far[i] for i in picks[:size]]
        p = _hit_rate(g, t, targets, 100_000, rng)
        ratios.append(p / (t * size / n**2))
    assert max(ratios) / min(ratios) <= 4


# -- targeted smoothing ----------------------------------------------------


def test_targeted_no_change(rng):
    g = Graph.path(5)
    out = sample_targeted_smoothing(g, g, 0.5, rng)
    assert out.smoothed == g and len(out.toggled) == 0


def test_targeted_eps_zero(rng):
    old, new = Graph.path(5), Graph.star(5, 2)
    for _ in range(50):
        assert sample_targeted_smoothing(new, old, 0.0, rng).smoothed == new


def test_targeted_single_addition(rng):
    old = Graph.path(4)
    new = Graph(4, [(0, 1), (1, 2), (2, 3), (0, 3)])
    batch = sample_targeted_many(new, old, 0.3, DRAWS, rng)
    reverted = (batch.toggles >= 0).any(axis=1).mean()
    assert abs(reverted - 0.3) <= 0.01


def test_targeted_two_changes_quarter_each(rng):
    old = Graph.cycle(4)
    new = Graph(4, [(0, 1), (1, 2), (2, 3), (0, 2)])  # drop (0,3), add (0,2)
    table = exact_targeted_distribution(old, new, 0.5)
    assert len(table) == 4
    assert all(abs(p - 0.25) < 1e-12 for p in table.probabilities.values())
    batch = sample_targeted_many(new, old, 0.5, DRAWS, rng)
    emp = empirical(batch, DRAWS)
    assert all(abs(p - 0.25) <= 0.01 for p in emp.values())


def test_targeted_toggles_within_difference(rng):
    old, new = Graph.path(6), Graph.star(6, 0)
    diff = set(np.setxor1d(old.keys, new.keys).tolist())
    for _ in range(200):
        out = sample_targeted_smoothing(new, old, 0.4, rng)
        assert set(out.toggled.tolist()) <= diff
        assert is_connected(out.smoothed)


def test_targeted_conditioning_on_connectivity(rng):
    # old: path 0-1-2-3; new moves the 2-3 edge to 1-3.  Reverting only the
    # removal is fine, reverting only the addition isolates 3.
    old = Graph.path(4)
    new = Graph(4, [(0, 1), (1, 2), (1, 3)])
    table = exact_targeted_distribution(old, new, 0.5)
    assert len(table) == 3
    batch = sample_targeted_many(new, old, 0.5, DRAWS, rng)
    exact = exact_codes(new, table)
    assert total_variation(exact, empirical(batch, DRAWS)) < 0.02


# -- per-round dynamics ----------------------------------------------------


def test_k_zero_identity(rng):
    g = Graph.cycle(10)
    assert next_k_smoothed(g, 0, rng).smoothed == g


def test_k_quarter_magnitude(rng):
    g = Graph.path(64)
    mags = np.array([next_k_smoothed(g, 0.25, rng).noise_magnitude for _ in range(DRAWS)])
    assert set(np.unique(mags)) == {0, 1}
    assert abs(mags.mean() - 0.25) <= 0.01


def test_k_integer_magnitude(rng):
    g = Graph.path(64)
    assert {next_k_smoothed(g, 2, rng).noise_magnitude for _ in range(200)} == {2}


def test_proportional_waiting_game(rng):
    g = Graph.star(40, 3)
    out = next_proportional(g, g, 0.5, 2, rng)
    assert out.smoothed == g and out.noise_magnitude == 0 and out.churn == 0


def test_proportional_integer_product(rng):
    old = Graph.path(80)
    new = Graph.from_keys(80, np.concatenate([old.keys[2:], [0 * 80 + 5, 0 * 80 + 9, 0 * 80 + 11]]))
    assert hamming_distance(old, new) == 5
    assert {next_proportional(old, new, 0.2, 5, rng).noise_magnitude for _ in range(200)} == {1}


def test_proportional_fractional_product(rng):
    old = Graph.path(80)
    new = Graph.from_keys(80, np.concatenate([old.keys[1:], [5]]))
    assert hamming_distance(old, new) == 2
    mags = np.array([next_proportional(old, new, 0.2, 5, rng).noise_magnitude for _ in range(DRAWS)])
    assert set(np.unique(mags)) == {0, 1}
    assert abs(mags.mean() - 0.4) <= 0.01


def test_proportional_cap_binds(rng):
    old = Graph.path(64)
    new = Graph.star(64, 0)
    out = next_proportional(old, new, 1.0, 4, rng)
    assert out.noise_magnitude == 4 and out.cap_bound


def test_targeted_round_no_change(rng):
    g = Graph.path(7)
    assert next_targeted(g, g, 0.9, rng).smoothed == g


# -- models ----------------------------------------------------------------


def test_premises():
    KSmooth(0.5).validate(8)
    with pytest.raises(ConfigError, match="n/16"):
        KSmooth(8).validate(8)
    with pytest.raises(ConfigError):
        Targeted(1.0).validate(100)
    with pytest.raises(ConfigError):
        Proportional(0.5, cap=10).validate(64)
    assert Proportional(0.5).cap_for(64) == 4


def test_model_dicts_roundtrip():
    for m in (KSmooth(0.25), Proportional(0.2), Proportional(0.1, cap=3), Targeted(0.5)):
        assert model_from_dict(m.to_dict()) == m
    with pytest.raises(ConfigError):
        model_from_dict({"kind": "ksmooth", "k": 1, "eps": 2})
    with pytest.raises(ConfigError):
        model_from_dict({"kind": "gaussian"})


@given(st.sampled_from([KSmooth(0), Proportional(0.5), Targeted(0.0)]), st.integers(3, 30))
def test_zero_noise_identity(model, n):
    g = Graph.cycle(n)
    out = model.step(g, g, np.random.default_rng(0))
    assert out.smoothed == g
