"""
Small diameter does not mean fast flooding
==========================================

Targeted smoothing only perturbs edges the adversary just changed: each
change fails with probability eps.  The cassette sequence keeps every
graph within diameter 5t + 4 of a path, yet it moves its shortcut edges
so slowly that the message still needs n - 1 rounds.
"""

import numpy as np

from smoothflood import AdversarySpec, CassetteAdversary, Targeted, diameter, run_trial

n, c, eps = 256, 2, 0.5
t = CassetteAdversary.spacing(n, c, eps)
adv = CassetteAdversary(n, t)
print(f"n = {n}, t = {t}, largest diameter over the sequence:",
      max(diameter(adv.graph_at(i)) for i in range(1, n + 1)), f"(bound 5t+4 = {5 * t + 4})")

rng = np.random.default_rng(5)
times = [run_trial(AdversarySpec("cassette", n, c=c), Targeted(eps), rng=rng).flooding_time for _ in range(20)]
print("flooding times:", times)
