"""User-level accounting for example-level sampling versus the black-box conversion.

Run: python3 demos/accounting.py
"""

from userdp import mechanisms
from userdp.mechanisms import ElsEventSpec

T, p, delta = 2000, 0.01, 1e-6

print("Privacy of a user with G examples, sigma=4, p=0.01, T=2000, delta=1e-6")
print(f"{'G':>4} {'eps (mixture)':>14} {'ratio to G/2':>13}")
prev = None
for G in (1, 2, 4, 8, 16, 32, 64):
    eps = mechanisms.event_epsilon(ElsEventSpec(4.0, p, G, T), delta)
    ratio = "" if prev is None else f"{eps / prev:13.3f}"
    print(f"{G:>4} {eps:14.4f} {ratio}")
    prev = eps

# At low noise the group-privacy conversion blows up long before the direct bound does.
eps_ex = mechanisms.event_epsilon(ElsEventSpec(1.0, p, 1, T), delta)
direct = mechanisms.event_epsilon(ElsEventSpec(1.0, p, 64, T), delta)
bound = mechanisms.blackbox_group_epsilon(eps_ex, delta, 64)
print(f"\nsigma=1, G=64: direct eps = {direct:.2f}; black-box from eps_1 = {eps_ex:.3f} "
      f"gives delta' = {bound.delta:.3g} (diverged: {bound.diverged})")

sigma = mechanisms.calibrate_sigma(mechanisms.UlsFamily(0.0625, 256),
                                   mechanisms.PrivacyParams(1.0, 1e-6))
print(f"\nULS noise multiplier for (1, 1e-6) at q=1/16, T=256: sigma = {sigma:.4f}")
