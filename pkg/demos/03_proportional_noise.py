"""
Noise proportional to change
============================

Under proportional smoothing an adversary that changes nothing gets no
noise at all, and one that changes only a few edges per round gets only
about eps times that many random toggles.  The low-churn spooling
adversary exploits this: it changes 2 to 5 edges per round and still
keeps flooding linear.
"""

import numpy as np

from smoothflood import AdversarySpec, Proportional, run_trial

# the waiting game: a static graph is never perturbed
rec = run_trial(AdversarySpec("static", 200, graph="path"), Proportional(0.5))
print("static path: flooding time", rec.flooding_time, " total noise", rec.total_noise)

rng = np.random.default_rng(11)
n = 500
recs = [run_trial(AdversarySpec("low_churn_spooling", n), Proportional(0.2), rng=rng) for _ in range(10)]
churn = np.concatenate([r.trace["proposed_churn"] for r in recs])
print(f"low-churn n={n}: flooding times {[r.flooding_time for r in recs]}")
print(f"proposed churn per round ranges over {churn.min()}..{churn.max()}")
