"""Bounded, biased integer random walks and the red-volume walk of a trajectory."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.stats import norm

from .dynamics import RED
from .stats import EstimateWithCI, wilson_interval

ALPHA_3SIGMA = norm.sf(3.0)


class WalkContractError(ValueError):
    pass


@dataclass(frozen=True)
class WalkConfig:
    d: int
    p: float
    x: float
    trials: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if self.p <= 0:
            raise ValueError("p must be > 0")
        if self.x <= 0:
            raise ValueError("x must be > 0")


def martingale_bound(d, p, x):
    """``(2x/p) exp(-p x / (4 d^2))``; may exceed 1."""
    WalkConfig(d, p, x)
    return 2 * x / p * math.exp(-p * x / (4 * d * d))


@dataclass(frozen=True)
class WalkKind:
    """An i.i.d. step distribution on the integers."""

    name: str
    values: np.ndarray
    probs: np.ndarray

    @property
    def mean(self):
        return float(self.values @ self.probs)

    @property
    def max_step(self):
        return int(np.abs(self.values).max())


def pm1_walk(p):
    if not 0 < p <= 1:
        raise ValueError("the +-1 walk supports 0 < p <= 1")
    return WalkKind("pm1", np.array([-1, 1]), np.array([(1 - p) / 2, (1 + p) / 2]))


def lazy_walk(d, p):
    """Steps of +-d or 0 with mean exactly p; moves with probability 1/2 + p/(2d)."""
    if not 0 < p <= d:
        raise ValueError("the lazy walk supports 0 < p <= d")
    move = 0.5 + p / (2 * d)
    up = (move + p / d) / 2
    down = (move - p / d) / 2
    return WalkKind("lazy", np.array([-d, 0, d]), np.array([down, 1 - move, up]))


def builtin_walk(kind, d, p):
    if kind == "pm1":
        return pm1_walk(p)
    if kind == "lazy":
        return lazy_walk(d, p)
    raise ValueError(f"unknown walk kind {kind!r}")


@njit(cache=True)
def _seed_numba(seed):
    np.random.seed(seed)


@njit(cache=True)
def _sample_steps(values, cdf, count):
    out = np.empty(count, dtype=np.int64)
    for i in range(count):
        u = np.random.random()
        j = 0
        while j < cdf.shape[0] - 1 and u >= cdf[j]:
            j += 1
        out[i] = values[j]
    return out


@njit(cache=True)
def _hit_lower_first(values, cdf, x, trials, max_steps):
    lower = 0
    unresolved = 0
    for _ in range(trials):
        z = 0
        steps = 0
        while True:
            u = np.random.random()
            j = 0
            while j < cdf.shape[0] - 1 and u >= cdf[j]:
                j += 1
            z += values[j]
            steps += 1
            if z < -x:
                lower += 1
                break
            if z > x:
                break
            if steps >= max_steps:
                unresolved += 1
                break
    return lower, unresolved


def _cdf(kind):
    c = np.cumsum(kind.probs)
    c[-1] = 1.0
    return c


@dataclass(frozen=True)
class DriftAudit:
    batches: int
    batch_means: np.ndarray = field(repr=False)
    thresholds: np.ndarray = field(repr=False)
    max_abs_step: int
    passed: bool


def audit_drift(kind, d, p, steps=100_000, batches=10, seed=0):
    """Batched check that a walk kind is d-bounded with mean step at least p.

    Each batch mean must clear ``p - z * s/sqrt(k)`` where z is a 3-sigma
    one-sided quantile Bonferroni-split over the batches.
    """
    _seed_numba(seed)
    sample = _sample_steps(kind.values.astype(np.int64), _cdf(kind), steps)
    z = norm.isf(ALPHA_3SIGMA / batches)
    parts = np.array_split(sample, batches)
    means = np.array([b.mean() for b in parts])
    thresholds = np.array([p - z * b.std(ddof=1) / math.sqrt(b.size) for b in parts])
    max_abs = int(np.abs(sample).max())
    passed = bool(np.all(means >= thresholds) and max_abs <= d)
    return DriftAudit(batches, means, thresholds, max_abs, passed)


@dataclass(frozen=True)
class HittingResult:
    kind: str
    d: int
    p: float
    x: float
    estimate: EstimateWithCI
    bound: float
    unresolved: int

    @property
    def within_bound(self):
        """Empirical probability is not more than 3 sigma above the bound."""
        est = self.estimate
        sigma = math.sqrt(max(self.bound * (1 - self.bound), 0.0) / est.trials) if self.bound < 1 else 0.0
        return est.point <= self.bound + 3 * sigma


def simulate_hitting(kind, d, p, x, trials, seed, audit=True):
    """Estimate Pr[walk drops below -x before it exceeds x]."""
    WalkConfig(d, p, x, trials, seed)
    if isinstance(kind, str):
        kind = builtin_walk(kind, d, p)
    if audit:
        result = audit_drift(kind, d, p, seed=seed)
        if not result.passed:
            raise WalkContractError(
                f"walk {kind.name} fails the d-bounded p-biased contract "
                f"(max |step| {result.max_abs_step}, batch means {result.batch_means.round(4)})")
    _seed_numba(seed + 1)
    max_steps = int(200 * x / p) + 10_000
    lower, unresolved = _hit_lower_first(kind.values.astype(np.int64), _cdf(kind), float(x),
                                         trials, max_steps)
    return HittingResult(kind.name, d, p, x, wilson_interval(lower, trials), martingale_bound(d, p, x),
                         unresolved)


# --------------------------------------------------------------------------
# coupling with the dynamics


@dataclass(frozen=True)
class CoupledWalk:
    """Red-volume walk over the steps that change the red volume.

    ``trace[k]`` is the red volume after the k-th such step minus the
    initial red volume. The audit covers steps whose pre-step state had
    Vol(B∩R') >= c Vol(R∩B') and Vol(B∩R') >= 1.
    """

    trace: np.ndarray = field(repr=False)
    times: np.ndarray = field(repr=False)
    steps: np.ndarray = field(repr=False)
    max_abs_step: int
    bounded_by: int
    c: float
    bias: float
    audited: int
    min_conditional_mean: float | None
    batch_z: np.ndarray = field(repr=False)
    z_threshold: float
    audit_passed: bool

    @property
    def endpoint(self):
        return int(self.trace[-1]) if self.trace.size else 0

    @property
    def is_bounded(self):
        return self.max_abs_step <= self.bounded_by


def coupled_volume_walk(record, degrees, c=2.0, batches=10):
    """Build the red-volume walk of a trajectory recorded with ``record_changes``."""
    if record.changes is None:
        raise ValueError("trajectory was recorded without its change log")
    if c <= 1:
        raise ValueError("c must exceed 1")
    ch = record.changes
    old, new, node = ch[:, 2], ch[:, 3], ch[:, 1]
    deg = np.asarray(degrees)[node]
    signed = np.where(new == RED, deg, np.where(old == RED, -deg, 0))
    moves = signed != 0
    steps = signed[moves]
    trace = np.cumsum(steps)
    up_vol, down_vol = ch[moves, 4].astype(float), ch[moves, 5].astype(float)
    up_cnt, down_cnt = ch[moves, 6].astype(float), ch[moves, 7].astype(float)
    up_sq, down_sq = ch[moves, 8].astype(float), ch[moves, 9].astype(float)
    bias = (c - 1) / (c + 1)
    mask = (up_vol >= c * down_vol) & (up_vol >= 1)
    movers = up_cnt + down_cnt
    with np.errstate(divide="ignore", invalid="ignore"):
        mu = (up_vol - down_vol) / movers
        second = (up_sq + down_sq) / movers
    var = np.maximum(second - mu ** 2, 0.0)
    audited = int(mask.sum())
    z_thr = float(norm.isf(ALPHA_3SIGMA / batches))
    batch_z = np.zeros(0)
    ok = True
    min_mu = None
    if audited:
        mu_a, var_a, y_a = mu[mask], var[mask], steps[mask].astype(float)
        min_mu = float(mu_a.min())
        ok = min_mu >= bias - 1e-12
        zs = []
        for idx in np.array_split(np.arange(audited), min(batches, audited)):
            sd = math.sqrt(var_a[idx].sum())
            excess = y_a[idx].sum() - bias * idx.size
            zs.append(excess / sd if sd > 0 else (0.0 if excess >= 0 else -np.inf))
        batch_z = np.array(zs)
        ok = ok and bool(np.all(batch_z >= -z_thr))
    return CoupledWalk(
        trace=trace, times=ch[moves, 0], steps=steps,
        max_abs_step=int(np.abs(steps).max()) if steps.size else 0,
        bounded_by=int(np.max(degrees)) if len(degrees) else 0,
        c=c, bias=bias, audited=audited, min_conditional_mean=min_mu,
        batch_z=batch_z, z_threshold=z_thr, audit_passed=bool(ok),
    )


def dips_after_reaching(walk, initial_red_volume, upper, lower):
    """Whether the red volume, after first reaching ``upper``, later falls to ``lower`` or below.

    Returns None if ``upper`` is never reached.
    """
    path = initial_red_volume + walk.trace
    hits = np.flatnonzero(path >= upper)
    if not hits.size:
        return None
    return bool(np.any(path[hits[0]:] <= lower))

