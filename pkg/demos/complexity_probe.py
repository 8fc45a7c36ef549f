"""Score prompt complexity, stratify a corpus, and fit the capacity curve.

The DSL names entity groups, attributes, relations, and extra constraints;
C_task turns that into one number. A corpus stratifies into ten tiers by
score, per-tier pass rates become a curve, and the area under it (AUC_pass)
is the capability summary that scales with model capacity.
"""

import numpy as np

from clvr import (
    aggregate_prompts,
    auc_pass,
    c_task,
    fit_power_law,
    node_edge_counts,
    parse_dsl,
    stratify,
    tier_curve,
    trim,
)

PROMPTS = (
    "1[]dog",
    "2[red]car; 1[]garage; @rel(1,inside,2)",
    "3[tall,green]tree; 2[]bench; @rel(2,under,1); @count",
    '4[blue]bird; 2[small]cage; @rel(1,above,2); @neg(empty); @text("sunset")',
)

# capacity study: (I_eff, AUC_pass) per checkpoint
CAPACITY = (
    (514.48, 17.67),
    (604.11, 42.53),
    (852.15, 31.75),
    (977.86, 53.79),
    (1063.40, 55.71),
    (1411.05, 70.83),
    (1586.36, 73.89),
)


def main():
    print("prompt scores")
    for text in PROMPTS:
        g = parse_dsl(text)
        n, _e_attr, e = node_edge_counts(g)
        print(f"  C_task {c_task(g):7.3f}  (N={n}, E={e})  {text[:56]}")

    g = parse_dsl(PROMPTS[-1])
    log = []
    trimmed = trim(g, ((None, 12.0), (None, None)), log=log)
    print(f"\ntrim to C_task <= 12: {c_task(g):.3f} -> {c_task(trimmed):.3f} "
          f"({len(log)} removals)")

    # a 40-prompt synthetic corpus with rising difficulty and falling passes
    rng = np.random.default_rng(3)
    records = [(f"p{i:02d}", 2.0 + 0.9 * i, 4 + i % 7) for i in range(40)]
    tiering = stratify(records)
    rows = [
        (pid, seed, float(rng.random()), bool(rng.random() < 1.0 - score / 45.0))
        for pid, score, _w in records
        for seed in (42, 123, 456, 789)
    ]
    curve = tier_curve(tiering, aggregate_prompts(rows, images_per_prompt=4))
    print(f"tier medians: {tiering.medians[0]:.2f} .. {tiering.medians[-1]:.2f}")
    print(f"AUC_pass: {auc_pass(curve):.3f}")

    fit = fit_power_law(CAPACITY)
    print(f"\ncapacity fit: slope {fit.slope:.3f}, R^2 {fit.r_squared:.3f}, "
          f"spearman {fit.spearman_rho:.3f}")


if __name__ == "__main__":
    main()
