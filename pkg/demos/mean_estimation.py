"""Private mean estimation on synthetic user data with ELS and ULS DP-SGD.

Run: python3 demos/mean_estimation.py   (about a minute)
"""

from userdp import simulate
from userdp.pld import PrivacyParams

spec = simulate.SyntheticSpec(seed=0, N=256, K=16, d=32, sigma1=1.0, sigma2=4.0)
target = PrivacyParams(1.0, 1e-6)
budget, trials = 64, 32

print(simulate.SAMPLING_CAVEAT, "\n")
els = simulate.sweep(spec, "els", target, budget, [16], trials=trials, master_seed=7, T=256)
uls = simulate.sweep(spec, "uls", target, budget, [1, 2, 4, 8, 16], trials=trials,
                     master_seed=7, T=256)
b = els.best
print(f"ELS G=16: best loss {b.mean_loss:.4g} +- {b.stderr:.2g} (eta={b.eta}, C={b.C}, sigma={b.sigma:.3f})")
for G in (1, 2, 4, 8, 16):
    r = uls.best_for(G)
    print(f"ULS G={G:>2} M={r.M_or_B:>3}: best loss {r.mean_loss:.4g} +- {r.stderr:.2g} "
          f"(eta={r.eta}, C={r.C}, sigma={r.sigma:.3f})")
