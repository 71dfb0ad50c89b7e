"""DP-SGD with example-level (ELS) and user-level (ULS) sampling.

The default task is mean estimation with ``f(theta, z) = ||theta - z||^2 / 2``,
so ``grad f = theta - z``. For that loss the clipped sum over a batch is
``(sum_b a_b) theta - sum_b a_b z_b`` with ``a_b = min(1, C / ||theta - z_b||)``,
and the norms only need ``theta . z_b``. Runs that share a trial also share its
sampling and noise draws, so a whole (learning rate, clip norm) grid is
advanced with batched matrix products.

Sampling is by shuffling with a fixed batch size ``B`` (ELS) or cohort size
``M`` (ULS); incomplete batches at the end of an epoch are dropped. The privacy
accounting assumes Poisson sampling instead.
"""

from __future__ import annotations

import dataclasses
import itertools
import math
from typing import Callable, Literal, Optional, Sequence

import numpy as np

from userdp import mechanisms
from userdp.mechanisms import ElsFamily, UlsFamily
from userdp.pld import PrivacyParams
from userdp._parallel import parallel_map

Variant = Literal["els", "uls"]

SAMPLING_CAVEAT = (
    "accounting assumes Poisson sampling; the simulation uses shuffling with "
    "fixed batch/cohort sizes")

DEFAULT_LR_GRID = tuple(2.0 ** k for k in range(-6, 4))
DEFAULT_CLIP_GRID = tuple(2.0 ** k for k in range(-2, 6))

_DATA_STREAM = 0
_ALGO_STREAM = {"els": 1, "uls": 2}


@dataclasses.dataclass(frozen=True)
class SyntheticSpec:
    seed: int
    N: int = 256
    K: int = 16
    d: int = 32
    sigma1: float = 1.0
    sigma2: float = 1.0

    def __post_init__(self):
        if min(self.N, self.K, self.d) < 1:
            raise ValueError("N, K and d must be positive")
        if self.sigma1 < 0 or self.sigma2 < 0:
            raise ValueError("sigma1 and sigma2 must be non-negative")


@dataclasses.dataclass(frozen=True, eq=False)
class UserDataset:
    """Per-user examples stored padded as ``(N, K_max, d)`` with ``sizes``."""

    true_mean: np.ndarray
    examples: np.ndarray
    sizes: np.ndarray

    def __post_init__(self):
        if self.examples.ndim != 3 or self.examples.shape[2] != self.true_mean.size:
            raise ValueError("examples must have shape (N, K_max, d)")
        if self.sizes.shape != (self.examples.shape[0],):
            raise ValueError("sizes must have one entry per user")
        if np.any(self.sizes < 1) or np.any(self.sizes > self.examples.shape[1]):
            raise ValueError("every user needs between 1 and K_max examples")

    @classmethod
    def from_users(cls, true_mean, users: Sequence[np.ndarray]) -> "UserDataset":
        true_mean = np.asarray(true_mean, dtype=np.float64)
        sizes = np.array([len(u) for u in users])
        if sizes.size == 0:
            raise ValueError("dataset has no users")
        out = np.zeros((len(users), sizes.max(), true_mean.size))
        for i, u in enumerate(users):
            out[i, :len(u)] = u
        return cls(true_mean, out, sizes)

    @property
    def users(self) -> list[np.ndarray]:
        return [self.examples[i, :n] for i, n in enumerate(self.sizes)]

    @property
    def num_users(self) -> int:
        return self.examples.shape[0]

    @property
    def dim(self) -> int:
        return self.true_mean.size


def generate_synthetic(spec: SyntheticSpec) -> UserDataset:
    rng = np.random.default_rng(spec.seed)
    mu = rng.standard_normal(spec.d)
    user_means = mu + spec.sigma1 * rng.standard_normal((spec.N, spec.d))
    x = user_means[:, None, :] + spec.sigma2 * rng.standard_normal((spec.N, spec.K, spec.d))
    return UserDataset(mu, x, np.full(spec.N, spec.K))


def clip(v, C: float) -> np.ndarray:
    """Scale ``v`` (or each row of ``v``) to norm at most ``C``."""
    if not C > 0:
        raise ValueError(f"clip norm must be positive, got {C}")
    v = np.asarray(v, dtype=np.float64)
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    with np.errstate(divide="ignore"):
        scale = np.minimum(1.0, C / norm)
    return v * scale


@dataclasses.dataclass(frozen=True)
class TrainConfig:
    """``batch_size`` is ``B`` for ELS and the cohort size ``M`` for ULS."""

    variant: Variant
    T: int
    learning_rate: float
    clip_norm: float
    group_size: int
    batch_size: int
    seed: int

    def __post_init__(self):
        if self.variant not in ("els", "uls"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.T < 1 or self.group_size < 1 or self.batch_size < 1:
            raise ValueError("T, group_size and batch_size must be positive")
        if not self.learning_rate > 0 or not self.clip_norm > 0:
            raise ValueError("learning_rate and clip_norm must be positive")


@dataclasses.dataclass(frozen=True, eq=False)
class RunResult:
    final_params: np.ndarray
    eval_loss: float
    per_trial_losses: tuple[float, ...]
    config: TrainConfig

    @property
    def stderr(self) -> float:
        losses = np.asarray(self.per_trial_losses)
        if losses.size < 2:
            return 0.0
        return float(np.std(losses, ddof=1) / math.sqrt(losses.size))


# ---------------------------------------------------------------------------
# Sampling plans (one per trial, shared by every cell of a grid)
# ---------------------------------------------------------------------------


def _subset(rng, sizes, k_max, g):
    """Row-wise without-replacement picks of ``min(g, size)`` slots."""
    keys = rng.random(sizes.shape + (k_max,))
    keys = np.where(np.arange(k_max) < sizes[..., None], keys, np.inf)
    order = np.argsort(keys, axis=-1, kind="stable")[..., :min(g, k_max)]
    valid = np.arange(order.shape[-1]) < np.minimum(sizes, g)[..., None]
    return order, valid


def _els_plan(data: UserDataset, G: int, B: int, T: int, rng):
    k_max = data.examples.shape[1]
    picks, valid = _subset(rng, data.sizes, k_max, G)
    users = np.broadcast_to(np.arange(data.num_users)[:, None], picks.shape)
    pool = (users * k_max + picks)[valid]
    if B > pool.size:
        raise ValueError(f"batch size {B} exceeds the {pool.size} examples kept")
    per_epoch = pool.size // B
    epochs = -(-T // per_epoch)
    batches = np.concatenate(
        [rng.permutation(pool)[:per_epoch * B].reshape(per_epoch, B) for _ in range(epochs)])
    noise = rng.standard_normal((T, data.dim))
    return batches[:T], noise, pool


def _uls_plan(data: UserDataset, G: int, M: int, T: int, rng):
    N = data.num_users
    if M > N:
        raise ValueError(f"cohort size {M} exceeds the {N} users")
    per_epoch = N // M
    epochs = -(-T // per_epoch)
    cohorts = np.concatenate(
        [rng.permutation(N)[:per_epoch * M].reshape(per_epoch, M) for _ in range(epochs)])[:T]
    k_max = data.examples.shape[1]
    sizes = data.sizes[cohorts]
    if G >= k_max:
        picks = np.broadcast_to(np.arange(k_max), cohorts.shape + (k_max,))
        valid = picks < sizes[..., None]
    else:
        picks, valid = _subset(rng, sizes, k_max, G)
    noise = rng.standard_normal((T, data.dim))
    return cohorts, picks, valid, noise


# ---------------------------------------------------------------------------
# Batched engine over (trial, cell)
# ---------------------------------------------------------------------------


def _step(theta, Z, weights, clips, scale, noise_t, sigma, lrs, check):
    """One update for all cells; ``Z`` is ``(trials, n, d)`` with row ``weights``.

    ``theta`` has shape ``(trials, cells, d)``; returns the new iterate.
    """
    theta_sq = np.einsum("tcd,tcd->tc", theta, theta)
    z_sq = np.einsum("tnd,tnd->tn", Z, Z)
    dots = np.matmul(theta, np.swapaxes(Z, 1, 2))  # (t, c, n)
    norm = np.sqrt(np.maximum(theta_sq[..., None] - 2 * dots + z_sq[:, None, :], 0.0))
    with np.errstate(divide="ignore"):
        a = np.minimum(1.0, clips[None, :, None] / norm)
    a = a * weights[:, None, :]
    if check:
        contrib = a * norm
        if np.any(contrib > clips[None, :, None] * (1 + 1e-9) + 1e-12):
            raise AssertionError("clipped contribution exceeds the clip norm")
    g_sum = a.sum(axis=-1)[..., None] * theta - np.matmul(a, Z)
    noisy = g_sum + (clips[None, :, None] * sigma) * noise_t[:, None, :]
    return theta - lrs[None, :, None] * noisy / scale


def _simulate(datasets, variant, G, size, T, sigma, lrs, clips, seeds, check=False):
    """Final iterates ``(trials, cells, d)`` for ``datasets[i]`` with ``seeds[i]``."""
    lrs = np.asarray(lrs, dtype=np.float64)
    clips = np.asarray(clips, dtype=np.float64)
    n_trials = len(datasets)
    d = datasets[0].dim
    theta = np.zeros((n_trials, lrs.size, d))
    rngs = [np.random.default_rng(s) for s in seeds]
    if variant == "els":
        plans = [_els_plan(ds, G, size, T, r) for ds, r in zip(datasets, rngs)]
        flat = np.stack([ds.examples.reshape(-1, d) for ds in datasets])
        batches = np.stack([p[0] for p in plans])
        noise = np.stack([p[1] for p in plans])
        ones = np.ones((n_trials, size))
        tix = np.arange(n_trials)[:, None]
        for t in range(T):
            Z = flat[tix, batches[:, t]]
            theta = _step(theta, Z, ones, clips, size, noise[:, t], sigma, lrs, check)
    elif variant == "uls":
        plans = [_uls_plan(ds, G, size, T, r) for ds, r in zip(datasets, rngs)]
        examples = np.stack([ds.examples for ds in datasets])
        cohorts = np.stack([p[0] for p in plans])
        picks = np.stack([np.broadcast_to(p[1], plans[0][1].shape) for p in plans])
        valid = np.stack([p[2] for p in plans])
        noise = np.stack([p[3] for p in plans])
        ones = np.ones((n_trials, size))
        tix = np.arange(n_trials)[:, None, None]
        for t in range(T):
            users = cohorts[:, t]
            X = examples[tix, users[..., None], picks[:, t]]  # (trials, M, g, d)
            w = valid[:, t]
            Z = (X * w[..., None]).sum(axis=2) / w.sum(axis=2)[..., None]
            theta = _step(theta, Z, ones, clips, size, noise[:, t], sigma, lrs, check)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return theta


def _eval_losses(theta, datasets):
    mu = np.stack([ds.true_mean for ds in datasets])
    with np.errstate(over="ignore", invalid="ignore"):
        loss = np.mean((theta - mu[:, None, :]) ** 2, axis=-1)
    return np.where(np.isfinite(loss), loss, np.inf)


def _run_single(data, cfg, sigma, variant, check):
    if cfg.variant != variant:
        raise ValueError(f"config variant is {cfg.variant!r}, expected {variant!r}")
    theta = _simulate([data], variant, cfg.group_size, cfg.batch_size, cfg.T, sigma,
                      [cfg.learning_rate], [cfg.clip_norm], [cfg.seed], check)
    loss = float(_eval_losses(theta, [data])[0, 0])
    return RunResult(theta[0, 0], loss, (loss,), cfg)


def dp_sgd_els(data: UserDataset, cfg: TrainConfig, sigma: float,
               check: bool = False) -> RunResult:
    """Example-level sampling: cap each user at ``G`` examples, then DP-SGD."""
    return _run_single(data, cfg, sigma, "els", check)


def dp_sgd_uls(data: UserDataset, cfg: TrainConfig, sigma: float,
               check: bool = False) -> RunResult:
    """User-level sampling: clip and noise per-user averages of ``G`` examples."""
    return _run_single(data, cfg, sigma, "uls", check)


def dp_sgd_reference(data: UserDataset, cfg: TrainConfig, sigma: float,
                     grad_fn: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
                     ) -> RunResult:
    """Straightforward per-example implementation with a pluggable gradient.

    ``grad_fn(theta, Z)`` maps a ``(n, d)`` batch to ``(n, d)`` gradients;
    draws the same randomness as :func:`dp_sgd_els` / :func:`dp_sgd_uls`.
    """
    grad_fn = grad_fn or (lambda theta, Z: theta - Z)
    rng = np.random.default_rng(cfg.seed)
    d = data.dim
    theta = np.zeros(d)
    C, lr, size = cfg.clip_norm, cfg.learning_rate, cfg.batch_size
    if cfg.variant == "els":
        batches, noise, _ = _els_plan(data, cfg.group_size, size, cfg.T, rng)
        flat = data.examples.reshape(-1, d)
        for t in range(cfg.T):
            g = clip(grad_fn(theta, flat[batches[t]]), C).sum(axis=0)
            theta = theta - lr * (g + C * sigma * noise[t]) / size
    else:
        cohorts, picks, valid, noise = _uls_plan(data, cfg.group_size, size, cfg.T, rng)
        for t in range(cfg.T):
            g = np.zeros(d)
            for j, u in enumerate(cohorts[t]):
                rows = picks[t, j][valid[t, j]]
                g += clip(grad_fn(theta, data.examples[u, rows]).mean(axis=0), C)
            theta = theta - lr * (g + C * sigma * noise[t]) / size
    loss = float(np.mean((theta - data.true_mean) ** 2))
    return RunResult(theta, loss, (loss,), cfg)


# ---------------------------------------------------------------------------
# Seeds and sweeps
# ---------------------------------------------------------------------------


def derive_seed(master_seed: int, *key: int) -> int:
    """Counter-based 64-bit child seed of ``master_seed`` for the path ``key``."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


def trial_datasets(data_spec: SyntheticSpec, trials: int, master_seed: int):
    return [generate_synthetic(dataclasses.replace(
        data_spec, seed=derive_seed(master_seed, _DATA_STREAM, i))) for i in range(trials)]


def algorithm_seed(master_seed: int, variant: Variant, group_size: int, trial: int) -> int:
    return derive_seed(master_seed, _ALGO_STREAM[variant], group_size, trial)


def calibrated_sigma(variant: Variant, N: int, G: int, budget: int, T: int,
                     target: PrivacyParams) -> float:
    """Noise multiplier for ``variant`` at compute budget ``budget``."""
    if variant == "els":
        return mechanisms.calibrate_sigma(ElsFamily(budget / (G * N), G, T), target)
    return mechanisms.calibrate_sigma(UlsFamily((budget // G) / N, T), target)


@dataclasses.dataclass(frozen=True)
class SweepRow:
    variant: str
    G: int
    M_or_B: int
    eta: float
    C: float
    sigma: float
    mean_loss: float
    stderr: float

    CSV_HEADER = ("variant", "G", "M_or_B", "eta", "C", "sigma", "mean_loss", "stderr")

    def as_tuple(self):
        return tuple(getattr(self, f) for f in self.CSV_HEADER)


@dataclasses.dataclass(frozen=True)
class SweepResult:
    best: SweepRow
    rows: tuple[SweepRow, ...]
    best_per_group: dict

    def best_for(self, G: int) -> SweepRow:
        return self.best_per_group[G]


def _grid_losses(datasets, variant, G, size, T, sigma, lr_grid, clip_grid, master_seed):
    cells = list(itertools.product(lr_grid, clip_grid))
    seeds = [algorithm_seed(master_seed, variant, G, i) for i in range(len(datasets))]
    theta = _simulate(datasets, variant, G, size, T, sigma,
                      [c[0] for c in cells], [c[1] for c in cells], seeds)
    return cells, _eval_losses(theta, datasets)  # (trials, cells)


def _sweep_group(args):
    (data_spec, variant, target, budget, G, T, lr_grid, clip_grid, trials,
     master_seed, sigma) = args
    size = budget if variant == "els" else budget // G
    if sigma is None:
        sigma = calibrated_sigma(variant, data_spec.N, G, budget, T, target)
    datasets = trial_datasets(data_spec, trials, master_seed)
    cells, losses = _grid_losses(datasets, variant, G, size, T, sigma,
                                 lr_grid, clip_grid, master_seed)
    rows = []
    for j, (eta, C) in enumerate(cells):
        col = losses[:, j]
        mean = float(np.mean(col))
        se = float(np.std(col, ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
        if not math.isfinite(mean):
            mean, se = math.inf, math.inf
        rows.append(SweepRow(variant, G, size, eta, C, sigma, mean, se))
    return rows


def sweep(data_spec: SyntheticSpec, variant: Variant, target: PrivacyParams, budget: int,
          group_sizes: Sequence[int], lr_grid: Sequence[float] = DEFAULT_LR_GRID,
          clip_grid: Sequence[float] = DEFAULT_CLIP_GRID, trials: int = 128,
          master_seed: int = 0, T: int = 256,
          sigma: Optional[float] = None) -> SweepResult:
    """Mean final loss over ``trials`` for every ``(G, eta, C)`` cell.

    Trial ``i`` uses the same synthetic dataset in every cell, and its sampling
    and noise are shared across the ``(eta, C)`` cells of a group size.
    ``sigma=None`` calibrates the noise to ``target``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    jobs = []
    for G in group_sizes:
        if variant == "uls" and budget % G:
            raise ValueError(f"budget {budget} is not divisible by G={G}")
        jobs.append((data_spec, variant, target, budget, G, T, tuple(lr_grid),
                     tuple(clip_grid), trials, master_seed, sigma))
    rows = [r for group in parallel_map(_sweep_group, jobs) for r in group]
    best_per_group = {}
    for r in rows:
        cur = best_per_group.get(r.G)
        if cur is None or r.mean_loss < cur.mean_loss:
            best_per_group[r.G] = r
    best = min(best_per_group.values(), key=lambda r: r.mean_loss)
    return SweepResult(best, tuple(rows), best_per_group)
