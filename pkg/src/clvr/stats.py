"""Statistical uncertainty and inference-cost accounting.

Binomial standard errors, Wilson score intervals, standard error of the
mean with normal confidence intervals, NFE (number of function evaluations)
accounting for diffusion sampling, and iteration histograms over trajectory
datasets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.special import ndtri

from .trajectory import Trajectory

# Fixed z scores for the common confidence levels; anything else falls back
# to the exact normal quantile.
_Z_TABLE = {0.90: 1.644854, 0.95: 1.959964, 0.99: 2.575829}


def z_score(confidence: float) -> float:
    if not 0.0 < confidence < 1.0:
        raise ValueError(f"confidence must be in (0,1), got {confidence}")
    if confidence in _Z_TABLE:
        return _Z_TABLE[confidence]
    return float(ndtri(0.5 + confidence / 2.0))


def se_binomial(p_hat: float, n: int) -> float:
    """Wald standard error sqrt(p(1-p)/n) of a binomial proportion."""
    _check_binomial(p_hat, n)
    return math.sqrt(p_hat * (1.0 - p_hat) / n)


def wilson_interval(
    p_hat: float, n: int, confidence: float = 0.95
) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion, clipped to [0, 1]."""
    _check_binomial(p_hat, n)
    z = z_score(confidence)
    z2 = z * z
    denom = 1.0 + z2 / n
    center = (p_hat + z2 / (2.0 * n)) / denom
    half = z * math.sqrt(p_hat * (1.0 - p_hat) / n + z2 / (4.0 * n * n)) / denom
    return (max(0.0, center - half), min(1.0, center + half))


def se_mean(values) -> float:
    """Standard error of the mean, s/sqrt(N) with sample (n-1) std."""
    xs = [float(v) for v in values]
    n = len(xs)
    if n < 2:
        raise ValueError("se_mean needs at least 2 values")
    mean = sum(xs) / n
    var = sum((x - mean) ** 2 for x in xs) / (n - 1)
    return math.sqrt(var / n)


def normal_ci(mean: float, se: float, confidence: float = 0.95) -> tuple[float, float]:
    """Normal-approximation confidence interval mean ± z·se."""
    if se < 0:
        raise ValueError("se must be nonnegative")
    z = z_score(confidence)
    return (mean - z * se, mean + z * se)


def _check_binomial(p_hat: float, n: int) -> None:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not 0.0 <= p_hat <= 1.0:
        raise ValueError(f"p_hat must be in [0,1], got {p_hat}")


@dataclass(frozen=True)
class BinomialSummary:
    """Proportion estimate with its Wald SE and Wilson interval."""

    p_hat: float
    n: int
    se: float
    ci_low: float
    ci_high: float
    confidence: float = 0.95


def binomial_summary(p_hat: float, n: int, confidence: float = 0.95) -> BinomialSummary:
    low, high = wilson_interval(p_hat, n, confidence)
    return BinomialSummary(p_hat, n, se_binomial(p_hat, n), low, high, confidence)


@dataclass(frozen=True)
class NfeConfig:
    """Sampling cost of one closed-loop generation run.

    CFG doubles the evaluations per sampling step; `iterations` counts the
    images generated in the loop.
    """

    sampling_steps: int
    cfg_enabled: bool
    iterations: int = 1

    def __post_init__(self):
        if self.sampling_steps < 1:
            raise ValueError("sampling_steps must be >= 1")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")


def nfe(config: NfeConfig) -> int:
    """Total function evaluations: steps × (2 if CFG else 1) × iterations."""
    per_image = config.sampling_steps * (2 if config.cfg_enabled else 1)
    return per_image * config.iterations


def speedup(base_seconds: float, fast_seconds: float) -> float:
    """Wall-clock ratio base/fast."""
    if fast_seconds <= 0:
        raise ValueError("fast_seconds must be positive")
    return base_seconds / fast_seconds


@dataclass(frozen=True)
class IterationHistogram:
    """Counts of trajectories by number of image-bearing iterations."""

    counts: dict

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def to_dict(self) -> dict:
        return {str(k): v for k, v in sorted(self.counts.items())}


def histogram(trajs: list[Trajectory]) -> IterationHistogram:
    """Histogram of image-bearing iteration counts over a dataset."""
    counts: dict[int, int] = {}
    for traj in trajs:
        k = len(traj.image_steps)
        counts[k] = counts.get(k, 0) + 1
    return IterationHistogram(counts)
