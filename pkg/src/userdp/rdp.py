"""Exact integer-order Rényi divergences of Mixture-of-Gaussians mechanisms.

For ``P = N(X, s^2)`` and ``Q = N(0, s^2)`` with ``X`` discrete,

    exp((a - 1) R_a(P, Q)) = sum over a-tuples (c_1..c_a) of
        prod_i w(c_i) * exp(((sum c_i)^2 - sum c_i^2) / (2 s^2)),

which follows from the Gaussian moment generating function. Tuples are
enumerated as multisets with multinomial multiplicities.
"""

from __future__ import annotations

import dataclasses
import itertools
import math

import numpy as np
from scipy import integrate, special

from userdp import pld
from userdp.pld import MoGMechanism

ENUMERATION_CAP = 10**7


class EnumerationTooLarge(ValueError):
    """The multiset enumeration would exceed ``ENUMERATION_CAP`` terms."""


@dataclasses.dataclass(frozen=True)
class RenyiQuery:
    alpha: int
    mech: MoGMechanism

    def __post_init__(self):
        if int(self.alpha) != self.alpha or self.alpha < 2:
            raise ValueError(f"alpha must be an integer >= 2, got {self.alpha}")


def renyi_mog(query: RenyiQuery) -> float:
    """``R_alpha(P, Q)`` for the mechanism in ``query``."""
    alpha = int(query.alpha)
    c, logw = query.mech.active()
    s2 = query.mech.sigma ** 2
    m = c.size
    n_terms = math.comb(m + alpha - 1, alpha)
    if n_terms > ENUMERATION_CAP:
        raise EnumerationTooLarge(
            f"{n_terms} multisets exceeds the cap {ENUMERATION_CAP}; "
            "use a quadrature fallback")
    if np.all(c == 0):
        return 0.0
    combos = np.array(list(itertools.combinations_with_replacement(range(m), alpha)),
                      dtype=np.int64)
    counts = np.zeros((combos.shape[0], m), dtype=np.int64)
    rows = np.repeat(np.arange(combos.shape[0]), alpha)
    np.add.at(counts, (rows, combos.ravel()), 1)
    log_multinom = special.gammaln(alpha + 1) - special.gammaln(counts + 1).sum(axis=1)
    total = counts @ c
    square_sum = counts @ (c * c)
    log_terms = (log_multinom + counts @ logw
                 + (total * total - square_sum) / (2.0 * s2))
    log_moment = special.logsumexp(log_terms)
    return max(float(log_moment) / (alpha - 1), 0.0)


def renyi_quadrature(mech: MoGMechanism, alpha: float, reverse: bool = False) -> float:
    """Rényi divergence by numerical integration, for non-integer orders and
    for the reverse direction ``R_alpha(Q, P)``."""
    c, logw = mech.active()
    sigma = mech.sigma

    def integrand(x):
        loss = pld.privacy_loss(mech, x)
        log_q = -0.5 * (x / sigma) ** 2
        if reverse:
            # E_P[(Q/P)^a] = E_Q[(P/Q)^(1-a)]
            return math.exp((1 - alpha) * loss + log_q)
        return math.exp(alpha * loss + log_q)

    # The tilted integrand concentrates near alpha * c for the forward direction.
    reach = max(alpha, 1.0) * c[-1]
    lo = -12 * sigma - (alpha * c[-1] if reverse else 0.0)
    hi = reach + 12 * sigma
    val, _ = integrate.quad(integrand, lo, hi, limit=400, epsabs=0, epsrel=1e-12,
                            points=sorted(set(np.concatenate([c, alpha * c]))))
    val /= math.sqrt(2 * math.pi) * sigma
    return math.log(val) / (alpha - 1)


@dataclasses.dataclass(frozen=True)
class LemmaCheck:
    lhs: float
    rhs: float
    holds: bool


def check_lemma1(alpha: int, K: int, p: float, sigma: float) -> LemmaCheck:
    """Compare the ``Bin(K, p)`` mixture at noise ``K sigma`` with ``Bern(p)`` at ``sigma``."""
    group = pld.mixture(K * sigma, range(K + 1), pld.binomial_weights(K, p))
    single = pld.mixture(sigma, (0.0, 1.0), (1.0 - p, p))
    lhs = renyi_mog(RenyiQuery(alpha, group))
    rhs = renyi_mog(RenyiQuery(alpha, single))
    return LemmaCheck(lhs, rhs, lhs <= rhs + 1e-10)


DEFAULT_GRID = {
    "alpha": (2, 3, 4, 8),
    "K": (2, 4, 8, 16),
    "p": (0.01, 0.1, 0.5),
    "sigma": (0.5, 1.0, 2.0),
}


def lemma1_grid(grid=None):
    """Rows ``(alpha, K, p, sigma, lhs, rhs, holds)`` over the product grid."""
    grid = DEFAULT_GRID if grid is None else grid
    rows = []
    for alpha, K, p, sigma in itertools.product(
            grid["alpha"], grid["K"], grid["p"], grid["sigma"]):
        res = check_lemma1(alpha, K, p, sigma)
        rows.append((alpha, K, p, sigma, res.lhs, res.rhs, res.holds))
    return rows
