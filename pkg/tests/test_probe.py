"""Tier stratification, aggregation, AUC, effective rank, power-law fit."""

import math

import numpy as np
import pytest

from clvr import (
    EVAL_SEEDS,
    PowerLawFit,
    PromptScore,
    TensorMap,
    TierCurve,
    Tiering,
    auc_pass,
    aggregate_prompts,
    effective_rank,
    fit_power_law,
    i_eff,
    stratify,
    tier_curve,
    unconstrained_intervals,
)


def records(n=20):
    """n records with distinct scores: id pNN, C_task = NN, W = 5."""
    return [(f"p{i:02d}", float(i), 5.0) for i in range(n)]


# --------------------------------------------------------------- stratify


def test_stratify_cuts_deciles_in_score_order():
    t = stratify(records(20))
    assert len(t.tiers) == 10
    assert t.tiers[0] == ("p00", "p01")
    assert t.tiers[9] == ("p18", "p19")
    assert t.flagged == ()


def test_stratify_medians_use_lower_middle():
    t = stratify(records(20))
    # two members per tier: the lower one is the median
    assert t.medians == tuple(float(2 * k) for k in range(10))


def test_stratify_breaks_score_ties_by_id():
    rows = [(f"p{i:02d}", 1.0, 5.0) for i in range(10)]
    rows += [(f"q{i:02d}", 2.0, 5.0) for i in range(10)]
    t = stratify(rows)
    assert t.tiers[0] == ("p00", "p01")
    assert t.tiers[5] == ("q00", "q01")


def test_stratify_flags_word_count_violations():
    rows = records(20)
    rows[3] = ("p03", 3.0, 50.0)  # falls in tier 2; too wordy
    intervals = tuple((0.0, 10.0) for _ in range(10))
    t = stratify(rows, intervals)
    assert t.flagged == ((1, "p03"),)
    assert t.tiers[1] == ("p02",)
    assert t.medians[1] == 2.0


def test_stratify_rejects_emptied_tiers():
    rows = records(20)
    rows[0] = ("p00", 0.0, 50.0)
    rows[1] = ("p01", 1.0, 50.0)
    with pytest.raises(ValueError, match="tier 1 has no members"):
        stratify(rows, tuple((0.0, 10.0) for _ in range(10)))


def test_stratify_input_validation():
    with pytest.raises(ValueError, match="at least 10"):
        stratify(records(9))
    with pytest.raises(ValueError, match="exactly 10 word intervals"):
        stratify(records(20), intervals=((0.0, 1.0),) * 9)


def test_unconstrained_intervals_never_flag():
    assert unconstrained_intervals() == ((0.0, math.inf),) * 10


def test_tiering_validation():
    with pytest.raises(ValueError, match="exactly 10"):
        Tiering((("a",),) * 9, ((0.0, 1.0),) * 9, (0.0,) * 9)
    with pytest.raises(ValueError, match="nondecreasing"):
        Tiering(
            (("a",),) * 10,
            unconstrained_intervals(),
            (5.0, 4.0) + (6.0,) * 8,
        )


# -------------------------------------------------------------- aggregation


def test_aggregate_fraction_mode():
    rows = [
        ("p1", 42, 1.0, True),
        ("p1", 123, 0.5, False),
        ("p1", 456, 0.75, True),
        ("p1", 789, 0.25, False),
    ]
    got = aggregate_prompts(rows)
    assert got == {"p1": PromptScore(pass_rate=0.5, mean_recall=0.625, images=4)}


def test_aggregate_any_mode():
    rows = [("p1", s, 0.0, s == 123) for s in EVAL_SEEDS]
    got = aggregate_prompts(rows, mode="any")
    assert got["p1"].pass_rate == 1.0
    all_fail = [("p2", s, 0.0, False) for s in EVAL_SEEDS]
    assert aggregate_prompts(all_fail, mode="any")["p2"].pass_rate == 0.0


def test_aggregate_rejects_ragged_prompts():
    rows = [("p1", 42, 1.0, True)]
    with pytest.raises(ValueError, match="expected 4"):
        aggregate_prompts(rows)
    got = aggregate_prompts(rows, allow_ragged=True)
    assert got["p1"].images == 1


def test_aggregate_rejects_bad_mode():
    with pytest.raises(ValueError, match="bad mode"):
        aggregate_prompts([], mode="median")


def test_aggregate_keys_are_sorted():
    rows = [(pid, s, 1.0, True) for pid in ("b", "a") for s in EVAL_SEEDS]
    assert list(aggregate_prompts(rows)) == ["a", "b"]


# ------------------------------------------------------------------- curves


def hand_curve() -> TierCurve:
    return TierCurve(tuple((float(k), k / 10.0) for k in range(1, 11)))


def test_tier_curve_averages_members():
    tiering = stratify(records(20))
    per_prompt = {
        f"p{i:02d}": PromptScore(pass_rate=i % 2, mean_recall=0.5, images=4)
        for i in range(20)
    }
    curve = tier_curve(tiering, per_prompt)
    assert all(y == 0.5 for _, y in curve.points)  # each tier holds one of each
    assert curve.recalls == (0.5,) * 10


def test_tier_curve_requires_scores_for_every_member():
    tiering = stratify(records(20))
    with pytest.raises(ValueError, match="no scores"):
        tier_curve(tiering, {})


def test_curve_validation():
    with pytest.raises(ValueError, match="exactly 10"):
        TierCurve(((1.0, 0.5),) * 9)
    bad = tuple((float(k), 1.5) for k in range(10))
    with pytest.raises(ValueError, match="pass rates"):
        TierCurve(bad)


def test_auc_hand_value():
    assert auc_pass(hand_curve()) == pytest.approx(4.95, abs=1e-12)


def test_auc_requires_increasing_medians():
    pts = list(hand_curve().points)
    pts[5] = (pts[4][0], pts[5][1])  # duplicate x
    with pytest.raises(ValueError, match="strictly increasing"):
        auc_pass(TierCurve(tuple(pts)))


# ----------------------------------------------------------- effective rank


def test_effective_rank_uniform_spectrum():
    assert effective_rank([2.0] * 7) == pytest.approx(7.0, rel=1e-12)


def test_effective_rank_hand_value():
    assert effective_rank([3.0, 1.0]) == pytest.approx(1.3841454884616867, rel=1e-12)


def test_effective_rank_ignores_zero_modes():
    assert effective_rank([5.0, 0.0, 0.0]) == pytest.approx(1.0, rel=1e-12)


def test_effective_rank_validation():
    with pytest.raises(ValueError):
        effective_rank([])
    with pytest.raises(ValueError):
        effective_rank([1.0, -0.5])
    with pytest.raises(ValueError, match="all-zero"):
        effective_rank([0.0, 0.0])


def test_i_eff_takes_median_over_matrices():
    ckpt = TensorMap(
        {
            "blk0.attn": np.diag([3.0, 1.0]),  # erank 1.3841…
            "blk1.attn": np.diag([1.0, 1.0]),  # erank 2
            "blk2.attn": np.diag([2.0, 2.0]),  # erank 2
        }
    )
    assert i_eff(ckpt) == pytest.approx(2.0, rel=1e-12)


def test_i_eff_name_filters():
    ckpt = TensorMap(
        {
            "blk0.attn.weight": np.diag([3.0, 1.0]),
            "blk0.norm.scale": np.ones(2),  # 1-D: must be filtered out
        }
    )
    got = i_eff(ckpt, name_filter=r"attn")
    assert got == pytest.approx(1.3841454884616867, rel=1e-12)
    assert i_eff(ckpt, name_filter=lambda n: "attn" in n) == pytest.approx(got)
    with pytest.raises(ValueError, match="selected no tensors"):
        i_eff(ckpt, name_filter=r"conv")
    with pytest.raises(ValueError, match="must select matrices"):
        i_eff(ckpt)


# ---------------------------------------------------------------- power law


def test_fit_recovers_an_exact_power_law():
    points = [(x, 2.5 * x**1.7) for x in (1.0, 2.0, 3.0, 5.0, 8.0)]
    fit = fit_power_law(points)
    assert fit.slope == pytest.approx(1.7, abs=1e-12)
    assert fit.intercept == pytest.approx(math.log(2.5), abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
    assert fit.spearman_rho == 1.0


def test_fit_rho_is_sign_aware():
    points = [(x, 100.0 / x) for x in (1.0, 2.0, 4.0)]
    assert fit_power_law(points).spearman_rho == -1.0


def test_fit_validation():
    with pytest.raises(ValueError, match="at least 3"):
        fit_power_law([(1.0, 1.0), (2.0, 2.0)])
    with pytest.raises(ValueError, match="strictly positive"):
        fit_power_law([(1.0, 1.0), (2.0, -2.0), (3.0, 3.0)])
    with pytest.raises(ValueError, match="tied values"):
        fit_power_law([(1.0, 1.0), (2.0, 1.0), (3.0, 3.0)])


def test_power_law_fit_dataclass_validation():
    with pytest.raises(ValueError, match="r_squared"):
        PowerLawFit(1.0, 0.0, 1.5, 0.5)
    with pytest.raises(ValueError, match="spearman"):
        PowerLawFit(1.0, 0.0, 0.5, 1.5)
    d = PowerLawFit(1.0, -3.0, 0.8, 0.9).to_dict()
    assert set(d) == {"slope", "intercept", "r_squared", "spearman_rho"}


def test_eval_seed_protocol():
    assert EVAL_SEEDS == (42, 123, 456, 789)
