"""
Adaptive adversaries undo the noise
===================================

The adaptive spooling adversary looks at who is informed and always
bridges the informed star to a single uninformed head.  Random toggles
that happened to inform extra vertices are simply absorbed, so the
flooding time stays close to linear.
"""

import numpy as np

from smoothflood import AdversarySpec, KSmooth, run_trial

rng = np.random.default_rng(3)
k = 4
for n in (256, 512, 1024):
    model = KSmooth(k)
    obl = [run_trial(AdversarySpec("spooling", n), model, rng=rng).flooding_time for _ in range(20)]
    ada = [run_trial(AdversarySpec("adaptive_spooling", n), model, rng=rng).flooding_time for _ in range(20)]
    print(f"n = {n:5d}: oblivious median {np.median(obl):7.1f}   adaptive median {np.median(ada):7.1f}"
          f"   ratio {np.median(ada) / np.median(obl):5.2f}")
