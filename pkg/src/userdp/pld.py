"""Privacy loss distributions for Mixture-of-Gaussians mechanism pairs.

A mechanism pair is ``P = N(X, sigma^2)`` against ``Q = N(0, sigma^2)`` where
``X`` is a discrete, non-negative sensitivity distribution. The privacy loss
``ln P(x)/Q(x)`` is non-decreasing in ``x``, so a loss grid can be pulled back
to breakpoints on the real line and bucket masses read off the Gaussian CDFs.

Two pessimistic discretizations are available:

* ``"round_up"``: every realized loss is rounded up to the grid.
* ``"split"``: the mass of every grid cell is split between its two end
  points so that both the total mass and ``E[exp(-loss)]`` are preserved.
  Since ``(1 - e^eps * y)_+`` is convex in ``y = exp(-loss)``, this spreads
  can only increase delta, and the bias is second order in the grid spacing.

Both remain upper bounds after composition.
"""

from __future__ import annotations

import dataclasses
import functools
import json
import math
from typing import Literal, Sequence

import numpy as np
from scipy import optimize, signal, special

Direction = Literal["add", "remove"]
Discretization = Literal["split", "round_up"]

DEFAULT_GRID_SPACING = 1e-3
ORACLE_GRID_SPACING = 1e-4
DEFAULT_TAIL_MASS = 1e-15
DEFAULT_BUCKET_CAP = 2**22

# Breakpoint inversion: size of the coarse lookup table and the x tolerance.
_TABLE_SIZE = 16385
_X_TOL = 1e-12
_DIRECT_CONV_LIMIT = 4_000_000


class CapacityError(RuntimeError):
    """Raised when a loss distribution would exceed the bucket cap."""


class UnsatisfiableError(ValueError):
    """Raised when no epsilon (or sigma) can meet the requested delta."""


@dataclasses.dataclass(frozen=True)
class MoGMechanism:
    """``N(X, sigma^2)`` vs ``N(0, sigma^2)`` with ``X`` on ``sensitivities``."""

    sigma: float
    sensitivities: tuple[float, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "sigma", float(self.sigma))
        object.__setattr__(
            self, "sensitivities", tuple(float(c) for c in self.sensitivities))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if not self.sigma > 0 or not math.isfinite(self.sigma):
            raise ValueError(f"sigma must be positive and finite, got {self.sigma}")
        if len(self.sensitivities) == 0:
            raise ValueError("sensitivities must be non-empty")
        if len(self.sensitivities) != len(self.weights):
            raise ValueError("sensitivities and weights must have equal length")
        c = np.asarray(self.sensitivities)
        if c[0] < 0 or np.any(np.diff(c) <= 0):
            raise ValueError("sensitivities must be non-negative and strictly increasing")
        w = np.asarray(self.weights)
        if np.any(w < 0) or abs(math.fsum(self.weights) - 1.0) > 1e-12:
            raise ValueError("weights must be non-negative and sum to 1")

    def active(self) -> tuple[np.ndarray, np.ndarray]:
        """Sensitivities and log-weights of the components with positive weight."""
        c = np.asarray(self.sensitivities)
        w = np.asarray(self.weights)
        keep = w > 0
        return c[keep], np.log(w[keep])

    @property
    def is_identity(self) -> bool:
        c, _ = self.active()
        return bool(np.all(c == 0))


@dataclasses.dataclass(frozen=True, eq=False)
class PrivacyLossDistribution:
    """Discrete privacy loss on the grid ``(origin_index + i) * grid_spacing``."""

    grid_spacing: float
    origin_index: int
    masses: np.ndarray
    infinity_mass: float = 0.0
    pessimistic: bool = True

    def __post_init__(self):
        masses = np.array(self.masses, dtype=np.float64)
        masses.setflags(write=False)
        object.__setattr__(self, "masses", masses)
        object.__setattr__(self, "origin_index", int(self.origin_index))
        object.__setattr__(self, "infinity_mass", float(self.infinity_mass))
        if not self.grid_spacing > 0:
            raise ValueError(f"grid_spacing must be positive, got {self.grid_spacing}")
        if masses.ndim != 1 or masses.size == 0:
            raise ValueError("masses must be a non-empty 1-d array")
        if np.any(masses < 0) or self.infinity_mass < 0:
            raise ValueError("masses must be non-negative")
        total = self.infinity_mass + float(np.sum(masses))
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"total mass {total!r} differs from 1")

    @property
    def losses(self) -> np.ndarray:
        return (self.origin_index + np.arange(self.masses.size)) * self.grid_spacing

    def __eq__(self, other):
        if not isinstance(other, PrivacyLossDistribution):
            return NotImplemented
        return (self.grid_spacing == other.grid_spacing
                and self.origin_index == other.origin_index
                and self.infinity_mass == other.infinity_mass
                and self.pessimistic == other.pessimistic
                and np.array_equal(self.masses, other.masses))

    def to_json(self) -> str:
        return json.dumps({
            "grid_spacing": self.grid_spacing,
            "origin_index": self.origin_index,
            "masses": self.masses.tolist(),
            "infinity_mass": self.infinity_mass,
            "pessimistic": self.pessimistic,
        })

    @classmethod
    def from_json(cls, text: str) -> "PrivacyLossDistribution":
        d = json.loads(text)
        return cls(grid_spacing=float(d["grid_spacing"]),
                   origin_index=int(d["origin_index"]),
                   masses=np.asarray(d["masses"], dtype=np.float64),
                   infinity_mass=float(d["infinity_mass"]),
                   pessimistic=bool(d["pessimistic"]))


@dataclasses.dataclass(frozen=True)
class PrivacyParams:
    epsilon: float
    delta: float

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if not 0 <= self.delta <= 1:
            raise ValueError(f"delta must be in [0, 1], got {self.delta}")


# ---------------------------------------------------------------------------
# Privacy loss of a single round
# ---------------------------------------------------------------------------


def _loss_terms(c, logw, sigma, x):
    x = np.asarray(x, dtype=np.float64)
    return logw + (2.0 * c * x[..., None] - c * c) / (2.0 * sigma * sigma)


def privacy_loss(mech: MoGMechanism, x):
    """``ln P(x)/Q(x)``, evaluated with log-sum-exp. Accepts scalars or arrays."""
    c, logw = mech.active()
    out = special.logsumexp(_loss_terms(c, logw, mech.sigma, x), axis=-1)
    return float(out) if np.ndim(x) == 0 else out


def _loss_and_slope(c, logw, sigma, x):
    terms = _loss_terms(c, logw, sigma, x)
    loss = special.logsumexp(terms, axis=-1)
    resp = np.exp(terms - loss[..., None])
    return loss, resp @ c / (sigma * sigma)


def _log_cdf(c, logw, sigma, x):
    return special.logsumexp(logw + special.log_ndtr((x - c) / sigma))


def _log_sf(c, logw, sigma, x):
    return special.logsumexp(logw + special.log_ndtr((c - x) / sigma))


def _tail_bounds(c, logw, sigma, tail_mass):
    """Interval outside of which the mixture has at most ``tail_mass`` per side."""
    z = special.ndtri(tail_mass)  # negative
    log_tail = math.log(tail_mass)
    lo_a, lo_b = c[0] + sigma * z, c[-1] + sigma * z
    hi_a, hi_b = c[0] - sigma * z, c[-1] - sigma * z
    x_lo = _bracketed_root(lambda x: _log_cdf(c, logw, sigma, x) - log_tail, lo_a, lo_b)
    x_hi = _bracketed_root(lambda x: log_tail - _log_sf(c, logw, sigma, x), hi_a, hi_b)
    return x_lo, x_hi


def _bracketed_root(f, a, b):
    """Root of increasing ``f`` on ``[a, b]``, clamped to the ends."""
    if b - a <= 1e-12 or f(a) >= 0:
        return a
    if f(b) <= 0:
        return b
    return optimize.brentq(f, a, b, xtol=1e-12)


def _invert_loss(c, logw, sigma, targets, x_lo, x_hi, side):
    """Solve ``loss(x) = target`` for each target inside ``(loss(x_lo), loss(x_hi))``.

    Each root is bracketed by a cell of a lookup table, started from linear
    interpolation inside the cell and refined by safeguarded Newton steps on
    the entries that have not converged. ``side`` picks which way the result is
    nudged by the tolerance.
    """
    table_x = np.linspace(x_lo, x_hi, _TABLE_SIZE)
    table_l = special.logsumexp(_loss_terms(c, logw, sigma, table_x), axis=-1)
    idx = np.searchsorted(table_l, targets, side="left")
    idx = np.clip(idx, 1, _TABLE_SIZE - 1)
    lo = table_x[idx - 1].copy()
    hi = table_x[idx].copy()
    l_lo, l_hi = table_l[idx - 1], table_l[idx]
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.clip((targets - l_lo) / (l_hi - l_lo), 0.0, 1.0)
    x = np.where(np.isfinite(frac), lo + frac * (hi - lo), hi)
    active = np.arange(x.size)
    for _ in range(200):
        if active.size == 0:
            break
        xa, la, ha, ta = x[active], lo[active], hi[active], targets[active]
        loss, slope = _loss_and_slope(c, logw, sigma, xa)
        above = loss >= ta
        ha = np.where(above, np.minimum(ha, xa), ha)
        la = np.where(above, la, np.maximum(la, xa))
        with np.errstate(divide="ignore", invalid="ignore"):
            x_new = xa - (loss - ta) / slope
        bad = ~np.isfinite(x_new) | (x_new < la) | (x_new > ha)
        x_new = np.where(bad, 0.5 * (la + ha), x_new)
        tol = _X_TOL * np.maximum(1.0, np.abs(xa))
        converged = (np.abs(x_new - xa) <= tol) | (ha - la <= tol)
        x[active], lo[active], hi[active] = x_new, la, ha
        active = active[~converged]
    nudge = 2 * _X_TOL * np.maximum(1.0, np.abs(x))
    return x - nudge if side == "lo" else x + nudge


def _interval_masses(c, w, sigma, xs):
    """Mixture mass of each interval ``[xs[k], xs[k+1]]`` (xs ascending)."""
    out = np.zeros(xs.size - 1)
    for ci, wi in zip(c, w):
        z = (xs - ci) / sigma
        lower = special.ndtr(z)
        upper = special.ndtr(-z)
        by_cdf = lower[1:] - lower[:-1]
        by_sf = upper[:-1] - upper[1:]
        out += wi * np.where(xs[1:] <= ci, by_cdf, by_sf)
    return np.maximum(out, 0.0)


def _mixture_cdf(c, w, sigma, x):
    return float(np.sum(w * special.ndtr((x - c) / sigma)))


def _mixture_sf(c, w, sigma, x):
    return float(np.sum(w * special.ndtr((c - x) / sigma)))


def build_pld(mech: MoGMechanism,
              direction: Direction,
              grid_spacing: float = DEFAULT_GRID_SPACING,
              tail_mass: float = DEFAULT_TAIL_MASS,
              discretization: Discretization = "split",
              bucket_cap: int = DEFAULT_BUCKET_CAP) -> PrivacyLossDistribution:
    """Single-round privacy loss distribution of ``mech``.

    ``direction="add"`` is the loss ``ln P/Q`` under ``x ~ P``; ``"remove"`` is
    ``ln Q/P`` under ``x ~ Q``. Sampling-distribution tails beyond
    ``tail_mass`` go to infinity (high loss) or to the lowest bucket (low loss).
    """
    if not grid_spacing > 0:
        raise ValueError(f"grid_spacing must be positive, got {grid_spacing}")
    if not 0 < tail_mass < 1e-6:
        raise ValueError(f"tail_mass must be in (0, 1e-6), got {tail_mass}")
    if direction not in ("add", "remove"):
        raise ValueError(f"unknown direction {direction!r}")
    if discretization not in ("split", "round_up"):
        raise ValueError(f"unknown discretization {discretization!r}")
    return _build_pld_cached(mech, direction, float(grid_spacing), float(tail_mass),
                             discretization, int(bucket_cap))


@functools.lru_cache(maxsize=256)
def _build_pld_cached(mech, direction, grid_spacing, tail_mass, discretization,
                      bucket_cap):
    if mech.is_identity:
        return PrivacyLossDistribution(grid_spacing, 0, np.ones(1), 0.0, True)

    c, logw = mech.active()
    w = np.exp(logw)
    sigma = mech.sigma
    zero = np.zeros(1)
    if direction == "add":
        x_lo, x_hi = _tail_bounds(c, logw, sigma, tail_mass)
        samp_c, samp_w, other_c, other_w = c, w, zero, np.ones(1)
        low_tail = _mixture_cdf(c, w, sigma, x_lo)
        high_tail = _mixture_sf(c, w, sigma, x_hi)
    else:
        x_lo, x_hi = _tail_bounds(zero, np.zeros(1), sigma, tail_mass)
        samp_c, samp_w, other_c, other_w = zero, np.ones(1), c, w
        # Loss is -ln P/Q, so the upper x tail carries the lowest losses.
        low_tail = _mixture_sf(zero, np.ones(1), sigma, x_hi)
        high_tail = _mixture_cdf(zero, np.ones(1), sigma, x_lo)

    l_a = float(special.logsumexp(_loss_terms(c, logw, sigma, x_lo)))
    l_b = float(special.logsumexp(_loss_terms(c, logw, sigma, x_hi)))
    sign = 1.0 if direction == "add" else -1.0
    loss_min, loss_max = min(sign * l_a, sign * l_b), max(sign * l_a, sign * l_b)

    i_lo = math.floor(loss_min / grid_spacing)
    i_hi = math.ceil(loss_max / grid_spacing)
    if i_hi == i_lo:
        i_hi = i_lo + 1
    n_points = i_hi - i_lo + 1
    if n_points > bucket_cap:
        raise CapacityError(
            f"single-round loss needs {n_points} buckets (cap {bucket_cap}); "
            "use a coarser grid_spacing")

    inner = (np.arange(i_lo + 1, i_hi) * grid_spacing)
    inner = inner[(inner > loss_min) & (inner < loss_max)]
    # Breakpoints in x, ascending; pessimistic side of each bracket.
    if direction == "add":
        xs_inner = _invert_loss(c, logw, sigma, inner, x_lo, x_hi, side="lo")
    else:
        xs_inner = _invert_loss(c, logw, sigma, -inner[::-1], x_lo, x_hi, side="hi")
    xs = np.concatenate([[x_lo], xs_inner, [x_hi]])
    xs = np.maximum.accumulate(xs)

    samp = _interval_masses(samp_c, samp_w, sigma, xs)
    other = _interval_masses(other_c, other_w, sigma, xs)
    if direction == "remove":
        samp, other = samp[::-1], other[::-1]

    # Segment k spans the cell between grid points cell_lo[k] and cell_lo[k] + 1.
    edges = np.concatenate([[loss_min], inner, [loss_max]])
    mids = 0.5 * (edges[:-1] + edges[1:])
    cell_lo = np.floor(mids / grid_spacing).astype(np.int64)
    cell_lo = np.clip(cell_lo, i_lo, i_hi - 1) - i_lo

    masses = np.zeros(n_points)
    if discretization == "round_up":
        np.add.at(masses, cell_lo + 1, samp)
    else:
        cell_loss = (cell_lo + i_lo) * grid_spacing
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            scaled_other = np.exp(np.log(other) + cell_loss)
        scaled_other = np.where(np.isfinite(scaled_other), scaled_other, np.inf)
        upper = (samp - scaled_other) / -math.expm1(-grid_spacing)
        upper = np.clip(np.nan_to_num(upper, nan=0.0, posinf=0.0), 0.0, samp)
        np.add.at(masses, cell_lo, samp - upper)
        np.add.at(masses, cell_lo + 1, upper)

    # Losses below loss_min are rounded up onto the first grid point >= loss_min.
    low_index = min(math.ceil(loss_min / grid_spacing) - i_lo, n_points - 1)
    masses[low_index] += low_tail
    return _trimmed(PrivacyLossDistribution(grid_spacing, i_lo, masses, high_tail, True))


def _trimmed(pld: PrivacyLossDistribution) -> PrivacyLossDistribution:
    nz = np.flatnonzero(pld.masses)
    if nz.size == 0:
        return PrivacyLossDistribution(pld.grid_spacing, 0, np.zeros(1),
                                       pld.infinity_mass, pld.pessimistic)
    lo, hi = nz[0], nz[-1] + 1
    if lo == 0 and hi == pld.masses.size:
        return pld
    return PrivacyLossDistribution(pld.grid_spacing, pld.origin_index + lo,
                                   pld.masses[lo:hi], pld.infinity_mass,
                                   pld.pessimistic)


# ---------------------------------------------------------------------------
# Composition
# ---------------------------------------------------------------------------


def _truncate_tails(masses: np.ndarray, origin: int, infinity_mass: float,
                    truncation_mass: float):
    """Pessimistically drop light tails: top to infinity, bottom rounded up."""
    if truncation_mass <= 0 or masses.size <= 1:
        return masses, origin, infinity_mass
    cum_top = np.cumsum(masses[::-1])
    n_top = int(np.searchsorted(cum_top, truncation_mass, side="right"))
    n_top = min(n_top, masses.size - 1)
    if n_top:
        infinity_mass += float(cum_top[n_top - 1])
        masses = masses[:-n_top]
    cum_bottom = np.cumsum(masses)
    n_bottom = int(np.searchsorted(cum_bottom, truncation_mass, side="right"))
    n_bottom = min(n_bottom, masses.size - 1)
    if n_bottom:
        swept = float(cum_bottom[n_bottom - 1])
        masses = masses[n_bottom:].copy()
        masses[0] += swept
        origin += n_bottom
    return masses, origin, infinity_mass


def convolve_masses(a: np.ndarray, b: np.ndarray, method: str = "auto") -> np.ndarray:
    """Convolution of two mass vectors; FFT output is clipped at zero."""
    if method == "auto":
        method = "direct" if a.size * b.size <= _DIRECT_CONV_LIMIT else "fft"
    if method == "direct":
        return np.convolve(a, b)
    if method == "fft":
        return np.maximum(signal.fftconvolve(a, b), 0.0)
    raise ValueError(f"unknown convolution method {method!r}")


def compose_pair(first: PrivacyLossDistribution, second: PrivacyLossDistribution,
                 truncation_mass: float = DEFAULT_TAIL_MASS,
                 bucket_cap: int = DEFAULT_BUCKET_CAP,
                 method: str = "auto") -> PrivacyLossDistribution:
    """Distribution of the sum of independent losses from ``first`` and ``second``."""
    if first.grid_spacing != second.grid_spacing:
        raise ValueError("grid spacings differ")
    size = first.masses.size + second.masses.size - 1
    if size > bucket_cap:
        raise CapacityError(
            f"composition needs {size} buckets (cap {bucket_cap}); "
            "use a coarser grid_spacing")
    masses = convolve_masses(first.masses, second.masses, method)
    infinity = 1.0 - (1.0 - first.infinity_mass) * (1.0 - second.infinity_mass)
    origin = first.origin_index + second.origin_index
    masses, origin, infinity = _truncate_tails(masses, origin, infinity, truncation_mass)
    return _trimmed(PrivacyLossDistribution(
        first.grid_spacing, origin, masses, min(infinity, 1.0),
        first.pessimistic and second.pessimistic))


def compose(pld: PrivacyLossDistribution, t: int,
            truncation_mass: float = DEFAULT_TAIL_MASS,
            bucket_cap: int = DEFAULT_BUCKET_CAP,
            method: str = "auto") -> PrivacyLossDistribution:
    """``t``-fold self-composition by repeated squaring."""
    if int(t) != t or t < 1:
        raise ValueError(f"t must be a positive integer, got {t}")
    t = int(t)
    result = None
    base = pld
    while True:
        if t & 1:
            result = base if result is None else compose_pair(
                result, base, truncation_mass, bucket_cap, method)
        t >>= 1
        if not t:
            break
        base = compose_pair(base, base, truncation_mass, bucket_cap, method)
    return result


# ---------------------------------------------------------------------------
# Queries
# ---------------------------------------------------------------------------


def delta_at_epsilon(pld: PrivacyLossDistribution, epsilon: float) -> float:
    """Hockey-stick divergence ``H_{e^eps}`` read off the loss distribution."""
    losses = pld.losses
    above = losses > epsilon
    gain = -np.expm1(epsilon - losses[above])
    delta = pld.infinity_mass + float(np.dot(pld.masses[above], gain))
    return min(max(delta, 0.0), 1.0)


def epsilon_at_delta(pld: PrivacyLossDistribution, delta: float) -> float:
    """Smallest ``eps >= 0`` with ``delta_at_epsilon(pld, eps) <= delta``.

    Delta is piecewise of the form ``a - b e^eps`` between grid points, so the
    bracketing cell is located by binary search and the equation solved there.
    """
    if not 0 < delta < 1:
        raise ValueError(f"delta must be in (0, 1), got {delta}")
    if delta <= pld.infinity_mass:
        raise UnsatisfiableError(
            f"delta={delta:g} is not above the infinity mass {pld.infinity_mass:g}")
    if delta_at_epsilon(pld, 0.0) <= delta:
        return 0.0
    losses = pld.losses
    masses = pld.masses
    first_pos = int(np.searchsorted(losses, 0.0, side="right"))
    lo, hi = first_pos, losses.size - 1
    # delta(losses[hi]) == infinity_mass < delta, find first index where it is <= delta.
    while lo < hi:
        mid = (lo + hi) // 2
        if delta_at_epsilon(pld, losses[mid]) <= delta:
            hi = mid
        else:
            lo = mid + 1
    k = lo
    left = 0.0 if k == first_pos else float(losses[k - 1])
    tail_m = masses[k:]
    tail_l = losses[k:]
    s = float(np.sum(tail_m))
    r = float(np.dot(tail_m, np.exp(left - tail_l)))
    excess = pld.infinity_mass + s - delta
    if r <= 0 or excess <= 0:
        return float(losses[k])
    eps = left + math.log(excess / r)
    return float(min(max(eps, left), losses[k]))


def composed_pair(mech: MoGMechanism, t: int,
                  grid_spacing: float = DEFAULT_GRID_SPACING,
                  tail_mass: float = DEFAULT_TAIL_MASS,
                  discretization: Discretization = "split",
                  bucket_cap: int = DEFAULT_BUCKET_CAP):
    """Composed ``(add, remove)`` loss distributions of ``t`` rounds of ``mech``."""
    return tuple(
        compose(build_pld(mech, d, grid_spacing, tail_mass, discretization, bucket_cap),
                t, tail_mass, bucket_cap)
        for d in ("add", "remove"))


def symmetric_delta(mech: MoGMechanism, t: int, epsilon: float,
                    grid_spacing: float = DEFAULT_GRID_SPACING,
                    tail_mass: float = DEFAULT_TAIL_MASS,
                    discretization: Discretization = "split",
                    bucket_cap: int = DEFAULT_BUCKET_CAP) -> float:
    """``max`` over both directions of delta at ``epsilon`` after ``t`` rounds."""
    return max(delta_at_epsilon(p, epsilon)
               for p in composed_pair(mech, t, grid_spacing, tail_mass,
                                      discretization, bucket_cap))


def symmetric_epsilon(mech: MoGMechanism, t: int, delta: float,
                      grid_spacing: float = DEFAULT_GRID_SPACING,
                      tail_mass: float = DEFAULT_TAIL_MASS,
                      discretization: Discretization = "split",
                      bucket_cap: int = DEFAULT_BUCKET_CAP) -> float:
    return max(epsilon_at_delta(p, delta)
               for p in composed_pair(mech, t, grid_spacing, tail_mass,
                                      discretization, bucket_cap))


def binomial_weights(k: int, p: float) -> np.ndarray:
    """``Bin(k, p)`` pmf on ``0..k`` via log-gamma, exact at the endpoints."""
    if not 0 <= p <= 1:
        raise ValueError(f"p must be in [0, 1], got {p}")
    i = np.arange(k + 1)
    if p == 0 or p == 1:
        out = np.zeros(k + 1)
        out[0 if p == 0 else k] = 1.0
        return out
    if k == 1:
        return np.array([1.0 - p, p])
    log_coef = special.gammaln(k + 1) - special.gammaln(i + 1) - special.gammaln(k - i + 1)
    return np.exp(log_coef + i * math.log(p) + (k - i) * math.log1p(-p))


def mixture(sigma: float, sensitivities: Sequence[float], weights: Sequence[float]) -> MoGMechanism:
    """Build a mechanism, renormalizing ``weights`` that sum to 1 up to rounding."""
    w = np.asarray(weights, dtype=np.float64)
    w = w / math.fsum(w)
    return MoGMechanism(sigma, tuple(sensitivities), tuple(w))
