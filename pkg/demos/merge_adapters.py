"""Fuse task deltas into a base checkpoint and audit the shift per tensor.

Two workflows stack here: expanding low-rank adapters to dense deltas, and
delta-space arithmetic over full checkpoints. The report at the end shows
the relative Frobenius shift each delta caused, which is the number to watch
before shipping a merged model.
"""

import numpy as np

from clvr import (
    LoraAdapter,
    TensorMap,
    apply_merge,
    delta,
    expand_lora,
    merge_report,
    relative_frobenius,
    scale,
)

SEED = 7
LAYERS = {"attn.q": (8, 8), "attn.k": (8, 8), "mlp.up": (16, 8)}


def main():
    rng = np.random.default_rng(SEED)
    base = TensorMap(
        {name: rng.standard_normal(shape) for name, shape in LAYERS.items()}
    )

    # a finetuned checkpoint, reduced to its delta
    tuned = TensorMap(
        {name: base[name] + 0.05 * rng.standard_normal(base[name].shape) for name in base.names()}
    )
    d_tuned = delta(tuned, base)

    # a rank-2 adapter targeting one layer, expanded to a dense delta
    rank = 2
    adapter = LoraAdapter(
        target="mlp.up",
        a=rng.standard_normal((rank, 8)),
        b=0.02 * rng.standard_normal((16, rank)),
        alpha=4.0,
        rank=rank,
    )
    d_adapter = expand_lora(adapter)

    merged = apply_merge(base, [d_tuned, d_adapter], strict=False)
    print(f"merged {len(merged.names())} tensors")
    print(f"total relative shift: {relative_frobenius(base, merged):.6f}")
    print(f"half-strength tuned delta alone: "
          f"{relative_frobenius(base, apply_merge(base, [scale(d_tuned, 0.5)])):.6f}\n")

    report = merge_report(base, d_tuned)
    print(f"{'tensor':<8} {'|delta|_F':>10} {'|base|_F':>10}")
    for name, row in report.per_tensor.items():
        print(f"{name:<8} {row['delta_frobenius']:>10.4f} {row['base_frobenius']:>10.4f}")
    print(f"global relative shift: {report.global_relative_shift:.6f}")


if __name__ == "__main__":
    main()
