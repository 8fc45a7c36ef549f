"""Confidence intervals and compute accounting for benchmark tables.

Binomial pass rates get Wilson intervals (well-behaved near 0 and 1, unlike
the plain Wald interval), mean scores get normal intervals, and sampler cost
is counted in function evaluations so a distilled model's speedup is exact
rather than anecdotal.
"""

from clvr import (
    NfeConfig,
    binomial_summary,
    nfe,
    normal_ci,
    speedup,
    wilson_interval,
)

BENCH_PASS = (0.8645, 553)  # pass rate, prompt count
MEAN_SCORE = (0.7405, 0.0093)  # mean, standard error


def main():
    p, n = BENCH_PASS
    low, high = wilson_interval(p, n)
    summary = binomial_summary(p, n)
    print(f"pass rate {p} over n={n}")
    print(f"  wilson 95% CI [{low:.4f}, {high:.4f}], se {summary.se:.4f}")

    zero_low, zero_high = wilson_interval(0.0, 10)
    print(f"  0/10 passes still bounds the rate: [{zero_low:.4f}, {zero_high:.4f}]")

    mean, se = MEAN_SCORE
    low, high = normal_ci(mean, se)
    print(f"mean score {mean}: 95% CI [{low:.4f}, {high:.4f}]\n")

    teacher = nfe(NfeConfig(sampling_steps=28, cfg_enabled=True))
    student = nfe(NfeConfig(sampling_steps=4, cfg_enabled=False))
    print(f"teacher sampler: {teacher} function evaluations per image")
    print(f"distilled sampler: {student} function evaluations per image")
    print(f"wall-clock speedup at 287.0s -> 25.5s: {speedup(287.0, 25.5):.2f}x")


if __name__ == "__main__":
    main()
