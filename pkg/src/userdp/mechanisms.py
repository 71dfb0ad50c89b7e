"""DP events for example-level (ELS) and user-level (ULS) sampling.

ELS with group size ``K`` and example sampling probability ``p`` is accounted
by the mixture ``N(Bin(K, p), sigma^2)`` against ``N(0, sigma^2)``; ULS with
user sampling probability ``q`` by ``N(Bern(q), sigma^2)``. Both are composed
over ``T`` steps.
"""

from __future__ import annotations

import dataclasses
import functools
import math
from typing import Union

import numpy as np

from userdp import pld
from userdp.pld import MoGMechanism, PrivacyParams, UnsatisfiableError

# Tolerance on sigma used by calibration (relative).
CALIBRATION_RTOL = 1e-3
SIGMA_MAX = 1e6


@dataclasses.dataclass(frozen=True)
class ElsEventSpec:
    sigma: float
    p: float
    K: int
    T: int

    def __post_init__(self):
        _check_common(self.sigma, self.p, self.T)
        if int(self.K) != self.K or self.K < 1:
            raise ValueError(f"K must be a positive integer, got {self.K}")


@dataclasses.dataclass(frozen=True)
class UlsEventSpec:
    sigma: float
    q: float
    T: int

    def __post_init__(self):
        _check_common(self.sigma, self.q, self.T)


def _check_common(sigma, prob, steps):
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if not 0 <= prob <= 1:
        raise ValueError(f"sampling probability must be in [0, 1], got {prob}")
    if int(steps) != steps or steps < 1:
        raise ValueError(f"T must be a positive integer, got {steps}")


@dataclasses.dataclass(frozen=True)
class ElsFamily:
    """ELS events with ``sigma`` left free, for calibration."""
    p: float
    K: int
    T: int

    def event(self, sigma: float) -> ElsEventSpec:
        return ElsEventSpec(sigma, self.p, self.K, self.T)


@dataclasses.dataclass(frozen=True)
class UlsFamily:
    q: float
    T: int

    def event(self, sigma: float) -> UlsEventSpec:
        return UlsEventSpec(sigma, self.q, self.T)


EventSpec = Union[ElsEventSpec, UlsEventSpec]
EventFamily = Union[ElsFamily, UlsFamily]


def els_mechanism(spec: ElsEventSpec) -> MoGMechanism:
    return pld.mixture(spec.sigma, range(spec.K + 1), pld.binomial_weights(spec.K, spec.p))


def uls_mechanism(spec: UlsEventSpec) -> MoGMechanism:
    return pld.mixture(spec.sigma, (0.0, 1.0), (1.0 - spec.q, spec.q))


def mechanism(spec: EventSpec) -> MoGMechanism:
    if isinstance(spec, ElsEventSpec):
        return els_mechanism(spec)
    return uls_mechanism(spec)


def event_delta(spec: EventSpec, epsilon: float,
                grid_spacing: float = pld.DEFAULT_GRID_SPACING) -> float:
    return pld.symmetric_delta(mechanism(spec), spec.T, epsilon, grid_spacing)


def event_epsilon(spec: EventSpec, delta: float,
                  grid_spacing: float = pld.DEFAULT_GRID_SPACING) -> float:
    return pld.symmetric_epsilon(mechanism(spec), spec.T, delta, grid_spacing)


def _meets(family: EventFamily, sigma: float, target: PrivacyParams,
           grid_spacing: float) -> bool:
    mech = mechanism(family.event(sigma))
    try:
        for direction in ("add", "remove"):
            single = pld.build_pld(mech, direction, grid_spacing)
            composed = pld.compose(single, family.T)
            if pld.delta_at_epsilon(composed, target.epsilon) > target.delta:
                return False
    except pld.CapacityError:
        # Only tiny noise produces loss ranges this wide; treat as too little noise.
        return False
    return True


def calibrate_sigma(family: EventFamily, target: PrivacyParams,
                    rtol: float = CALIBRATION_RTOL,
                    grid_spacing: float = pld.DEFAULT_GRID_SPACING) -> float:
    """Smallest noise multiplier meeting ``target``, to relative tolerance ``rtol``.

    Returns the upper end of the final bisection bracket, so the result always
    satisfies the target while ``sigma / (1 + rtol)`` does not.
    """
    if not 0 < target.delta < 1:
        raise ValueError(f"target delta must be in (0, 1), got {target.delta}")
    return _calibrate_cached(family, target.epsilon, target.delta, rtol, grid_spacing)


# The search runs on a grid this many times coarser first. Grids are nested, and
# refining a nested grid never increases delta, so a sigma that meets the target
# on the coarse grid also meets it on the fine one.
_COARSE_FACTOR = 10


def _bisect(meets, lo, hi, rtol):
    while hi / lo > 1 + rtol:
        mid = math.sqrt(lo * hi)
        if meets(mid):
            hi = mid
        else:
            lo = mid
    return lo, hi


def _bracket(meets, epsilon, delta):
    lo, hi = 1e-3, 1e3
    if meets(lo):
        return lo, lo
    while not meets(hi):
        lo, hi = hi, hi * 10
        if hi > SIGMA_MAX:
            raise UnsatisfiableError(
                f"no sigma <= {SIGMA_MAX:g} reaches delta={delta:g} at epsilon={epsilon:g}")
    return lo, hi


@functools.lru_cache(maxsize=4096)
def _calibrate_cached(family, epsilon, delta, rtol, grid_spacing):
    target = PrivacyParams(epsilon, delta)

    def fine(s):
        return _meets(family, s, target, grid_spacing)

    def coarse(s):
        return _meets(family, s, target, grid_spacing * _COARSE_FACTOR)

    try:
        lo, hi = _bracket(coarse, epsilon, delta)
    except UnsatisfiableError:
        lo, hi = _bracket(fine, epsilon, delta)
        return _bisect(fine, lo, hi, rtol)[1]
    if lo == hi:
        return hi
    lo, hi = _bisect(coarse, lo, hi, rtol)
    if not fine(hi):
        # Not expected; fall back to a plain search on the fine grid.
        lo, hi = _bracket(fine, epsilon, delta)
        return _bisect(fine, lo, hi, rtol)[1]
    step = 1 + 8 * rtol
    lo = hi / step
    while fine(lo):
        hi, step = lo, step * step
        lo = hi / step
        if lo < 1e-3:
            return hi
    return _bisect(fine, lo, hi, rtol)[1]


@dataclasses.dataclass(frozen=True)
class GroupPrivacyBound:
    """An ``(epsilon, delta)`` pair from group privacy; ``delta`` may exceed 1."""
    epsilon: float
    delta: float

    @property
    def diverged(self) -> bool:
        return not self.delta <= 1.0


def blackbox_group_epsilon(example_eps: float, example_delta: float,
                           group_size: int) -> GroupPrivacyBound:
    """Promote an example-level guarantee to groups of ``group_size`` examples.

    Uses ``(eps, delta) -> (G eps, delta (e^{G eps} - 1) / (e^eps - 1))``, the
    form where each of the ``G`` hops contributes ``delta`` scaled by the
    accumulated ``e^{eps}`` factor.
    """
    if not example_eps > 0:
        raise ValueError(f"example_eps must be positive, got {example_eps}")
    if int(group_size) != group_size or group_size < 1:
        raise ValueError(f"group_size must be a positive integer, got {group_size}")
    g = int(group_size)
    # (e^{g eps} - 1) / (e^eps - 1) = sum_{i<g} e^{i eps}, evaluated in log space.
    log_factor = (np.logaddexp.reduce(np.arange(g) * example_eps)
                  if g > 1 else 0.0)
    log_delta = math.log(example_delta) + log_factor if example_delta > 0 else -math.inf
    delta = math.exp(log_delta) if log_delta < 700 else math.inf
    return GroupPrivacyBound(g * example_eps, delta)


def blackbox_user_epsilon(sigma: float, p: float, T: int, group_size: int,
                          delta: float, n_grid: int = 400,
                          grid_spacing: float = pld.DEFAULT_GRID_SPACING) -> float:
    """Best user-level epsilon reachable by group-promoting the example-level curve.

    The example-level curve ``delta_ex(eps_ex)`` comes from the loss accountant at
    group size one. Every ``eps_ex`` on a log grid is promoted and the smallest
    ``G * eps_ex`` whose promoted delta is at most ``delta`` is returned; ``inf``
    means the baseline diverged.
    """
    mech = els_mechanism(ElsEventSpec(sigma, p, 1, T))
    plds = pld.composed_pair(mech, T, grid_spacing)
    best = math.inf
    for eps_ex in np.geomspace(1e-4, 50.0, n_grid):
        delta_ex = max(pld.delta_at_epsilon(d, eps_ex) for d in plds)
        bound = blackbox_group_epsilon(float(eps_ex), delta_ex, group_size)
        if bound.delta <= delta:
            best = min(best, bound.epsilon)
    return best
