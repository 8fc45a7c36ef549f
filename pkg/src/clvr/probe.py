"""Complexity-tier evaluation: stratification, aggregation, AUC, and the
capacity fit.

Prompts scored by C_task are stratified into ten decile tiers; per-prompt
pass/recall values are aggregated into a tier curve; the area under the
pass curve (unnormalized trapezoid) summarizes robustness to complexity;
and the entropy effective rank of a checkpoint's weight matrices gives the
capacity axis for the power-law fit of AUC against effective rank.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .container import TensorMap

#: Image seeds used by the standard evaluation protocol (4 images/prompt).
EVAL_SEEDS = (42, 123, 456, 789)


@dataclass(frozen=True)
class Tiering:
    """Ten complexity tiers with word intervals and per-tier score medians.

    ``flagged`` lists (tier_index, prompt_id) pairs whose word count fell
    outside the tier's interval; they are excluded from the tier membership
    and queued for trimming.
    """

    tiers: tuple[tuple[str, ...], ...]
    intervals: tuple[tuple[float, float], ...]
    medians: tuple[float, ...]
    flagged: tuple[tuple[int, str], ...] = ()

    def __post_init__(self):
        if len(self.tiers) != 10 or len(self.intervals) != 10 or len(self.medians) != 10:
            raise ValueError("a tiering has exactly 10 tiers")
        if any(b < a for a, b in zip(self.medians, self.medians[1:])):
            raise ValueError("tier medians must be nondecreasing")


def unconstrained_intervals() -> tuple[tuple[float, float], ...]:
    """Word intervals that never flag anything."""
    return tuple((0.0, math.inf) for _ in range(10))


def stratify(records, intervals=None) -> Tiering:
    """Partition (id, C_task, W) records into ten decile tiers.

    Records are sorted by (C_task, id) — the id breaks score ties — and cut
    at decile ranks. Members whose W violates their tier's word interval are
    flagged for trimming and dropped from the tier; medians use the
    lower-middle rule on the remaining members.
    """
    rows = [(str(r[0]), float(r[1]), float(r[2])) for r in records]
    if len(rows) < 10:
        raise ValueError(f"need at least 10 records, got {len(rows)}")
    if intervals is None:
        intervals = unconstrained_intervals()
    intervals = tuple((float(lo), float(hi)) for lo, hi in intervals)
    if len(intervals) != 10:
        raise ValueError("need exactly 10 word intervals")
    rows.sort(key=lambda r: (r[1], r[0]))
    n = len(rows)
    tiers: list[tuple[str, ...]] = []
    medians: list[float] = []
    flagged: list[tuple[int, str]] = []
    for k in range(10):
        lo, hi = intervals[k]
        chunk = rows[k * n // 10 : (k + 1) * n // 10]
        kept = [r for r in chunk if lo <= r[2] <= hi]
        flagged.extend((k, r[0]) for r in chunk if not lo <= r[2] <= hi)
        if not kept:
            raise ValueError(f"tier {k + 1} has no members inside its word interval")
        tiers.append(tuple(r[0] for r in kept))
        medians.append(kept[(len(kept) - 1) // 2][1])
    return Tiering(tuple(tiers), intervals, tuple(medians), tuple(flagged))


@dataclass(frozen=True)
class PromptScore:
    pass_rate: float
    mean_recall: float
    images: int


def aggregate_prompts(
    rows,
    images_per_prompt: int = 4,
    mode: str = "fraction",
    allow_ragged: bool = False,
) -> dict:
    """Collapse per-image scores to per-prompt statistics.

    ``rows`` holds (prompt_id, seed, recall, passed) tuples. The pass rate
    is the fraction of a prompt's images that passed ("fraction" mode) or
    1.0 as soon as any image passed ("any" mode); recall is averaged. Every
    prompt must have exactly ``images_per_prompt`` rows unless
    ``allow_ragged`` is set.
    """
    if mode not in ("fraction", "any"):
        raise ValueError(f"bad mode {mode!r}")
    by_prompt: dict[str, list[tuple[float, bool]]] = {}
    for pid, _seed, recall, passed in rows:
        by_prompt.setdefault(str(pid), []).append((float(recall), bool(passed)))
    out: dict[str, PromptScore] = {}
    for pid in sorted(by_prompt):
        scores = by_prompt[pid]
        if not allow_ragged and len(scores) != images_per_prompt:
            raise ValueError(
                f"prompt {pid!r} has {len(scores)} images, expected {images_per_prompt}"
            )
        passes = [p for _, p in scores]
        if mode == "fraction":
            rate = sum(passes) / len(passes)
        else:
            rate = 1.0 if any(passes) else 0.0
        out[pid] = PromptScore(
            pass_rate=rate,
            mean_recall=sum(r for r, _ in scores) / len(scores),
            images=len(scores),
        )
    return out


@dataclass(frozen=True)
class TierCurve:
    """Ten (median C_task, pass rate) points plus mean recall per tier."""

    points: tuple[tuple[float, float], ...]
    recalls: tuple[float, ...] = ()

    def __post_init__(self):
        if len(self.points) != 10:
            raise ValueError("a tier curve has exactly 10 points")
        if any(not 0.0 <= y <= 1.0 for _, y in self.points):
            raise ValueError("pass rates must lie in [0, 1]")


def tier_curve(tiering: Tiering, per_prompt: dict) -> TierCurve:
    """Average per-prompt scores within each tier against its median."""
    points = []
    recalls = []
    for k, members in enumerate(tiering.tiers):
        missing = [pid for pid in members if pid not in per_prompt]
        if missing:
            raise ValueError(f"tier {k + 1}: no scores for prompts {missing}")
        scores = [per_prompt[pid] for pid in members]
        points.append(
            (tiering.medians[k], sum(s.pass_rate for s in scores) / len(scores))
        )
        recalls.append(sum(s.mean_recall for s in scores) / len(scores))
    return TierCurve(tuple(points), tuple(recalls))


def auc_pass(curve: TierCurve) -> float:
    """Unnormalized trapezoidal area under the tier pass curve."""
    xs = [x for x, _ in curve.points]
    ys = [y for _, y in curve.points]
    if any(b <= a for a, b in zip(xs, xs[1:])):
        raise ValueError("tier medians must be strictly increasing")
    return sum(
        (xs[k + 1] - xs[k]) / 2.0 * (ys[k] + ys[k + 1]) for k in range(len(xs) - 1)
    )


def effective_rank(singular_values) -> float:
    """Entropy effective rank exp(−Σ p_i ln p_i), p_i = σ_i²/Σσ_j².

    Zero singular values contribute nothing to the entropy.
    """
    sv = np.asarray(singular_values, dtype=np.float64)
    if sv.size == 0 or np.any(sv < 0):
        raise ValueError("singular values must be nonnegative and nonempty")
    energy = sv * sv
    total = float(np.sum(energy))
    if total == 0.0:
        raise ValueError("all-zero spectrum has no effective rank")
    p = energy[energy > 0] / total
    return float(np.exp(-np.sum(p * np.log(p))))


def i_eff(ckpt: TensorMap, name_filter=None) -> float:
    """Median entropy effective rank over a checkpoint's weight matrices.

    ``name_filter`` selects tensors by name: None keeps everything, a
    string is a regular-expression search, and a callable is a predicate.
    Every selected tensor must be a 2-D matrix.
    """
    if name_filter is None:
        keep = lambda name: True
    elif callable(name_filter):
        keep = name_filter
    else:
        pattern = re.compile(name_filter)
        keep = lambda name: pattern.search(name) is not None
    names = [n for n in ckpt.names() if keep(n)]
    if not names:
        raise ValueError("name filter selected no tensors")
    ranks = []
    for name in names:
        mat = ckpt[name]
        if mat.ndim != 2:
            raise ValueError(f"tensor {name!r} is {mat.ndim}-D; filter must select matrices")
        sv = np.linalg.svd(mat, compute_uv=False)
        ranks.append(effective_rank(sv))
    return float(np.median(ranks))


@dataclass(frozen=True)
class PowerLawFit:
    """log-log least-squares fit y ∝ x^slope with fit quality measures."""

    slope: float
    intercept: float
    r_squared: float
    spearman_rho: float

    def __post_init__(self):
        if not 0.0 <= self.r_squared <= 1.0 + 1e-12:
            raise ValueError("r_squared must lie in [0, 1]")
        if abs(self.spearman_rho) > 1.0 + 1e-12:
            raise ValueError("|spearman_rho| must be <= 1")

    def to_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "spearman_rho": self.spearman_rho,
        }


def _ranks(values) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=np.float64)
    ranks[order] = np.arange(1, len(values) + 1)
    return ranks


def fit_power_law(points) -> PowerLawFit:
    """Fit ln(y) = intercept + slope·ln(x) by least squares.

    R² comes from the same log-space regression; Spearman's rho uses the
    exact rank-difference formula, which requires tie-free inputs.
    """
    xs = np.asarray([p[0] for p in points], dtype=np.float64)
    ys = np.asarray([p[1] for p in points], dtype=np.float64)
    if xs.size < 3:
        raise ValueError("need at least 3 points")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise ValueError("points must be strictly positive for a log-log fit")
    if len(set(xs.tolist())) != xs.size or len(set(ys.tolist())) != ys.size:
        raise ValueError("tied values are not supported by the rank formula")
    lx, ly = np.log(xs), np.log(ys)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    d = _ranks(xs) - _ranks(ys)
    n = xs.size
    rho = 1.0 - 6.0 * float(np.sum(d * d)) / (n * (n * n - 1))
    return PowerLawFit(float(slope), float(intercept), r_squared, rho)
