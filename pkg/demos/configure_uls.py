"""Pick a ULS group size and cohort size with Estimate-and-Double.

Run: python3 demos/configure_uls.py
"""

import numpy as np

from userdp import heuristics, simulate
from userdp.pld import PrivacyParams

spec = simulate.SyntheticSpec(seed=0, N=256, K=16, d=32, sigma1=1.0, sigma2=4.0)
data = simulate.generate_synthetic(spec)
target = PrivacyParams(1.0, 1e-6)

res = heuristics.estimate_and_double(data, np.zeros(spec.d), 1, 32, 1024, target, 256, seed=0)
for s in res.trace:
    print(f"step {s.step}: (G={s.G}, M={s.M}) tau_G={s.tau_G:.4f} tau_M={s.tau_M:.4f} "
          f"-> {s.decision} {s.note}")
print(f"chosen: G={res.G}, M={res.M}")
print(f"ELS group size from the median user: {heuristics.els_group_size_heuristic(data)}")
