"""
Checking the sampler against brute force
========================================

A t-smoothing is a uniform draw among connected graphs within Hamming
distance t.  On tiny graphs the oracle module enumerates that set
exactly, and the vectorized sampler should reproduce it.
"""

import numpy as np

from smoothflood.graph import Graph
from smoothflood.oracle import enumerate_t_smoothing, exhaustive_flooding_time
from smoothflood.smoothing import KSmooth, sample_t_smoothing_many

g = Graph.path(4)
table = enumerate_t_smoothing(g, 2)
print(f"path on 4 vertices, t = 2: {len(table)} connected graphs, each with probability {1 / len(table):.4f}")

batch = sample_t_smoothing_many(g, 2, 100_000, np.random.default_rng(1))
codes, counts = np.unique(batch.toggle_codes(), return_counts=True)
print("empirical frequencies range over", counts.min() / 1e5, "to", counts.max() / 1e5)
print("rejected proposals:", batch.rejections)

# exact flooding-time distribution for a static 3-vertex path with k = 1
print("static path n=3, k=1:", exhaustive_flooding_time([Graph.path(3)], KSmooth(1)))
