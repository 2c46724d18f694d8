"""
How much noise does it take to beat the spooling graph?
=======================================================

Without noise the spooling sequence forces one new vertex per round.  A
handful of random edge toggles per round is enough to cut the flooding
time from n - 1 to roughly n^(2/3) / k^(1/3).
"""

import numpy as np

from smoothflood import AdversarySpec, KSmooth, run_trial

n = 1000
spec = AdversarySpec("spooling", n)

# zero noise: exactly n - 1 rounds
print("k = 0:", run_trial(spec, KSmooth(0)).flooding_time)

# a little noise goes a long way
rng = np.random.default_rng(7)
for k in (0.25, 1, 4, 16, 62):
    times = [run_trial(spec, KSmooth(k), rng=rng).flooding_time for _ in range(30)]
    print(f"k = {k:>5}: median {np.median(times):6.1f}   n^(2/3)/k^(1/3) = {n ** (2 / 3) / k ** (1 / 3):6.1f}")
