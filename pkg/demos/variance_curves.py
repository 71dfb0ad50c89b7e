"""Noise variance of ELS and ULS at equal compute, for the two Lipschitz rules.

Run: python3 demos/variance_curves.py
"""

from userdp import variance

grid = variance.budget_grid(epsilons=(1.0, 4.0), budgets=(16, 64, 256), cohorts=(16,), T=200)
print(" ".join(f"{h:>16}" for h in variance.CSV_HEADER))
for row in variance.variance_curves(grid):
    print(" ".join(f"{v:>16.6g}" if isinstance(v, float) else f"{v:>16}" for v in row))
print("\nAt a fixed cohort, extra budget goes into larger groups. That buys ULS nothing "
      "when L_uls = L_els, but once group averaging shrinks the Lipschitz constant by "
      "1/sqrt(G), ULS pulls ahead as the budget grows.")
