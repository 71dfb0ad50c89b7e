"""Per-step noise variance of ELS and ULS under a fixed compute budget."""

from __future__ import annotations

import dataclasses
import math
from typing import Iterable, Sequence

from userdp import mechanisms
from userdp.mechanisms import ElsFamily, UlsFamily
from userdp.pld import PrivacyParams
from userdp._parallel import parallel_map

L_ULS_RULES = ("equal", "inverse_sqrt")
DEFAULT_EPSILONS = (0.25, 1.0, 4.0, 16.0, 64.0)
CSV_HEADER = ("budget", "cohort", "epsilon", "var_els", "var_uls_equal", "var_uls_diverse")


@dataclasses.dataclass(frozen=True)
class BudgetSetting:
    """A compute budget ``B`` split as ``B = G_els * (p N)`` and ``B = G_uls * M``."""

    N: int
    K: int
    T: int
    B: int
    M: int
    G_els: int
    G_uls: int
    d: int
    L_els: float
    L_uls: float
    target: PrivacyParams

    def __post_init__(self):
        if not 0 <= self.p <= 1:
            raise ValueError(f"p = B/(G_els N) = {self.p} is not a probability")
        if not 0 <= self.q <= 1:
            raise ValueError(f"q = M/N = {self.q} is not a probability")
        if self.L_uls > self.L_els * (1 + 1e-12):
            raise ValueError("L_uls cannot exceed L_els")

    @property
    def p(self) -> float:
        return self.B / (self.G_els * self.N)

    @property
    def q(self) -> float:
        return self.M / self.N


def sigma_els(s: BudgetSetting) -> float:
    return mechanisms.calibrate_sigma(ElsFamily(s.p, s.G_els, s.T), s.target)


def sigma_uls(s: BudgetSetting) -> float:
    return mechanisms.calibrate_sigma(UlsFamily(s.q, s.T), s.target)


def noise_variance_els(s: BudgetSetting, sigma: float | None = None) -> float:
    """Total variance ``d (sigma L_els / B)^2`` of the ELS noise term."""
    sigma = sigma_els(s) if sigma is None else sigma
    return s.d * (sigma * s.L_els / s.B) ** 2


def noise_variance_uls(s: BudgetSetting, sigma: float | None = None) -> float:
    sigma = sigma_uls(s) if sigma is None else sigma
    return s.d * (sigma * s.L_uls / s.M) ** 2


def l_uls(rule: str, L_els: float, G_uls: int) -> float:
    if rule == "equal":
        return L_els
    if rule == "inverse_sqrt":
        return L_els / math.sqrt(G_uls)
    raise ValueError(f"unknown L_uls rule {rule!r}")


def budget_grid(epsilons: Sequence[float] = DEFAULT_EPSILONS,
                budgets: Sequence[int] = (16, 32, 64, 128, 256, 512),
                cohorts: Sequence[int] = (16,),
                N: int = 1024, K: int = 32, T: int = 1000, delta: float = 1e-6,
                L_els: float = 10.0, d: int = 1) -> list[BudgetSetting]:
    """Settings with ``G_els = K`` and ``G_uls = B / M``; cells with ``G_uls``
    outside ``[1, K]`` are skipped."""
    out = []
    for eps in epsilons:
        for M in cohorts:
            for B in budgets:
                if B % M or not 1 <= B // M <= K:
                    continue
                out.append(BudgetSetting(
                    N=N, K=K, T=T, B=B, M=M, G_els=K, G_uls=B // M, d=d,
                    L_els=L_els, L_uls=L_els, target=PrivacyParams(eps, delta)))
    return out


def _row(s: BudgetSetting):
    var_els = noise_variance_els(s)
    sig_uls = sigma_uls(s)
    equal = noise_variance_uls(
        dataclasses.replace(s, L_uls=l_uls("equal", s.L_els, s.G_uls)), sig_uls)
    diverse = noise_variance_uls(
        dataclasses.replace(s, L_uls=l_uls("inverse_sqrt", s.L_els, s.G_uls)), sig_uls)
    return (s.B, s.M, s.target.epsilon, var_els, equal, diverse)


def variance_curves(grid: Iterable[BudgetSetting]) -> list[tuple]:
    """One row per setting: ``(B, M, eps, var_els, var_uls_equal, var_uls_diverse)``.

    ``L_uls`` of each setting is replaced by the two diversity rules; rows are
    sorted by ``(eps, M, B)``.
    """
    rows = parallel_map(_row, list(grid))
    return sorted(rows, key=lambda r: (r[2], r[1], r[0]))
