"""Configuration heuristics: ELS group size and ULS Estimate-and-Double."""

from __future__ import annotations

import dataclasses
import math
from typing import Literal, Optional, Sequence

import numpy as np

from userdp import mechanisms
from userdp.mechanisms import UlsFamily
from userdp.pld import PrivacyParams
from userdp.simulate import UserDataset

Statistic = Literal["median", "max"]


@dataclasses.dataclass(frozen=True)
class LipschitzEstimate:
    group_size: int
    value: float
    sample_size: int
    statistic: str = "median"

    def __post_init__(self):
        if not self.value >= 0:
            raise ValueError("estimate must be non-negative")
        if self.sample_size < 1:
            raise ValueError("sample_size must be >= 1")


def els_group_size_heuristic(data: UserDataset) -> int:
    """Median user dataset size (lower median on ties)."""
    sizes = np.sort(np.asarray(data.sizes))
    if sizes.size == 0:
        raise ValueError("dataset has no users")
    return int(sizes[(sizes.size - 1) // 2])


def _user_gradient_norms(data: UserDataset, theta, G: int, n_users: int, rng):
    theta = np.asarray(theta, dtype=np.float64)
    users = rng.choice(data.num_users, size=n_users, replace=False)
    norms = np.empty(n_users)
    for i, u in enumerate(users):
        n = int(data.sizes[u])
        rows = rng.choice(n, size=min(G, n), replace=False)
        grad = theta - data.examples[u, rows].mean(axis=0)
        norms[i] = np.linalg.norm(grad)
    return norms


def estimate_L_uls(data: UserDataset, theta, G: int, n_users: int = 128,
                   seed: int = 0, statistic: Statistic = "median") -> LipschitzEstimate:
    """Estimate the per-user gradient norm bound at group size ``G``.

    Uses the squared-distance loss gradient ``theta - z``. ``n_users`` is capped
    at the number of users.
    """
    if G < 1 or n_users < 1:
        raise ValueError("G and n_users must be >= 1")
    n_users = min(n_users, data.num_users)
    norms = _user_gradient_norms(data, theta, G, n_users, np.random.default_rng(seed))
    if statistic == "median":
        value = float(np.median(norms))
    elif statistic == "max":
        value = float(np.max(norms))
    else:
        raise ValueError(f"unknown statistic {statistic!r}")
    return LipschitzEstimate(G, value, n_users, statistic)


def _is_pow2(x: int) -> bool:
    return int(x) == x and x >= 1 and (int(x) & (int(x) - 1)) == 0


@dataclasses.dataclass(frozen=True)
class DoublingStep:
    step: int
    G: int
    M: int
    tau_G: float
    tau_M: float
    decision: str
    note: str = ""


@dataclasses.dataclass(frozen=True)
class DoublingResult:
    G: int
    M: int
    trace: tuple[DoublingStep, ...]


def estimate_and_double(data: UserDataset, theta, G0: int, M0: int, budget: int,
                        target: PrivacyParams, T: int, seed: int = 0,
                        n_users: int = 128,
                        noise_ratio: Literal["effective", "multiplier"] = "effective",
                        grid_spacing: Optional[float] = None) -> DoublingResult:
    """Split ``budget = G * M`` by greedily doubling group size or cohort size.

    ``tau_G = L(2G) / L(G)`` and ``tau_M`` is the ratio of noise standard
    deviations on the averaged update, ``(sigma(2M) / 2M) / (sigma(M) / M)``.
    ``noise_ratio="multiplier"`` uses the bare ``sigma(2M) / sigma(M)`` instead.
    Ties double ``M``. When ``2M`` would exceed the number of users, ``G`` is
    doubled and the fallback is noted in the trace.
    """
    for name, v in (("G0", G0), ("M0", M0), ("budget", budget)):
        if not _is_pow2(v):
            raise ValueError(f"{name}={v} is not a power of two")
    if G0 * M0 > budget:
        raise ValueError(f"G0*M0 = {G0 * M0} exceeds the budget {budget}")
    N = data.num_users
    if M0 > N:
        raise ValueError(f"M0={M0} exceeds the {N} users")
    kw = {} if grid_spacing is None else {"grid_spacing": grid_spacing}

    def L(G):
        # Same seed for every G, so the user sample is shared between estimates.
        return estimate_L_uls(data, theta, G, n_users, seed).value

    def noise(M):
        sigma = mechanisms.calibrate_sigma(UlsFamily(M / N, T), target, **kw)
        return sigma / M if noise_ratio == "effective" else sigma

    G, M = int(G0), int(M0)
    trace = []
    step = 0
    while G * M < budget:
        l_g = L(G)
        tau_G = L(2 * G) / l_g if l_g > 0 else 1.0
        note = ""
        if 2 * M > N:
            tau_M = math.inf
            decision = "double_G"
            note = "2M exceeds N"
        else:
            tau_M = noise(2 * M) / noise(M)
            decision = "double_G" if tau_G < tau_M - 1e-9 else "double_M"
        trace.append(DoublingStep(step, G, M, tau_G, tau_M, decision, note))
        if decision == "double_G":
            G *= 2
        else:
            M *= 2
        step += 1
    return DoublingResult(G, M, tuple(trace))


def power_of_two_cells(budget: int, N: int, K: int) -> list[tuple[int, int]]:
    """All ``(G, M)`` with ``G * M = budget``, ``G <= K`` and ``M <= N``, powers of two."""
    cells = []
    G = 1
    while G <= min(K, budget):
        M = budget // G
        if M <= N and G * M == budget:
            cells.append((G, M))
        G *= 2
    return cells


@dataclasses.dataclass(frozen=True)
class StrategyComparison:
    """Losses per cell and the sub-optimality of each strategy."""

    budget: int
    epsilon: float
    cell_losses: dict
    cell_stderrs: dict
    best_cell: tuple[int, int]
    heuristic_cell: tuple[int, int]

    @property
    def best_loss(self) -> float:
        return self.cell_losses[self.best_cell]

    @property
    def heuristic_suboptimality(self) -> float:
        return self.cell_losses[self.heuristic_cell] - self.best_loss

    @property
    def random_suboptimality(self) -> float:
        """Expected sub-optimality of a uniformly random cell."""
        return float(np.mean([v - self.best_loss for v in self.cell_losses.values()]))

    @property
    def combined_stderr(self) -> float:
        return math.hypot(self.cell_stderrs[self.heuristic_cell],
                          self.cell_stderrs[self.best_cell])


def compare_strategies(cell_losses: dict, cell_stderrs: dict, heuristic_cell,
                       budget: int, epsilon: float) -> StrategyComparison:
    best = min(cell_losses, key=cell_losses.get)
    return StrategyComparison(budget, epsilon, dict(cell_losses), dict(cell_stderrs),
                              best, tuple(heuristic_cell))


def random_strategy(cells: Sequence[tuple[int, int]], seed: int) -> tuple[int, int]:
    """One draw of the Random strategy: a uniformly chosen valid cell."""
    rng = np.random.default_rng(seed)
    return tuple(cells[int(rng.integers(len(cells)))])
