"""Delta-space checkpoint arithmetic.

A fine-tuned model is represented by its offset from a base checkpoint:
delta = ckpt − base. Fused models are built by summing deltas back onto the
base (left fold, argument order, float64 accumulation). LoRA adapters expand
to dense deltas via (alpha/rank)·B·A, and the relative Frobenius norm
measures how far a checkpoint moved from its reference, aggregated over all
tensors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .container import TensorMap


def _check_shapes(a: TensorMap, b: TensorMap, keys) -> None:
    for k in keys:
        if a[k].shape != b[k].shape:
            raise ValueError(
                f"shape mismatch for {k!r}: {a[k].shape} vs {b[k].shape}"
            )


def delta(ckpt: TensorMap, base: TensorMap, strict: bool = True) -> TensorMap:
    """Elementwise ckpt − base.

    Strict mode requires identical key sets; non-strict restricts to the
    shared keys (use merge_report to see what differs). Differences are held
    in float64, so applying the delta back onto the base is exact.
    """
    ckpt_keys, base_keys = set(ckpt.names()), set(base.names())
    if strict and ckpt_keys != base_keys:
        extra = sorted(ckpt_keys - base_keys)
        missing = sorted(base_keys - ckpt_keys)
        raise ValueError(
            f"key-set mismatch: extra in ckpt {extra}, missing from ckpt {missing}"
        )
    shared = sorted(ckpt_keys & base_keys)
    _check_shapes(ckpt, base, shared)
    return TensorMap({k: ckpt[k] - base[k] for k in shared})


def apply_merge(
    base: TensorMap, deltas: list[TensorMap], strict: bool = True
) -> TensorMap:
    """Fused map = base + Σ deltas, elementwise.

    Summation is a left fold over the deltas in argument order, in float64.
    Strict mode errors when a delta key is absent from the base; non-strict
    skips such keys (merge_report lists them) and treats base keys without a
    delta entry as unchanged.
    """
    fused = {k: base[k].copy() for k in base.names()}
    for i, d in enumerate(deltas):
        for k in d.names():
            if k not in fused:
                if strict:
                    raise ValueError(f"delta {i}: key {k!r} absent from base")
                continue
            if d[k].shape != fused[k].shape:
                raise ValueError(
                    f"delta {i}: shape mismatch for {k!r}: "
                    f"{d[k].shape} vs {fused[k].shape}"
                )
            fused[k] = fused[k] + d[k]
    return TensorMap(fused)


def scale(tm: TensorMap, s: float) -> TensorMap:
    """Scale every tensor by s."""
    return TensorMap({k: tm[k] * float(s) for k in tm.names()})


@dataclass(frozen=True)
class LoraAdapter:
    """Low-rank adapter for one target tensor: ΔW = (alpha/rank)·B·A."""

    target: str
    a: np.ndarray  # rank × n
    b: np.ndarray  # m × rank
    alpha: float
    rank: int

    def __post_init__(self):
        a = np.asarray(self.a, dtype=np.float64)
        b = np.asarray(self.b, dtype=np.float64)
        if a.ndim != 2 or b.ndim != 2:
            raise ValueError("A and B must be matrices")
        if self.rank < 1:
            raise ValueError("rank must be >= 1")
        if a.shape[0] != self.rank or b.shape[1] != self.rank:
            raise ValueError(
                f"inner dimensions disagree: A is {a.shape}, B is {b.shape}, "
                f"rank {self.rank}"
            )
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)


def expand_lora(adapter: LoraAdapter) -> TensorMap:
    """Densify an adapter into a single-tensor delta (alpha/rank)·B·A."""
    dense = (adapter.alpha / adapter.rank) * (adapter.b @ adapter.a)
    return TensorMap({adapter.target: dense})


def relative_frobenius(reference: TensorMap, other: TensorMap) -> float:
    """Global relative shift sqrt(Σ‖Δ_k‖²_F) / sqrt(Σ‖ref_k‖²_F).

    Δ = other − reference, summed over all shared tensors; float64
    accumulation throughout.
    """
    if set(reference.names()) != set(other.names()):
        raise ValueError("key sets must match")
    _check_shapes(reference, other, reference.names())
    num = 0.0
    den = 0.0
    for k in reference.names():
        d = other[k] - reference[k]
        num += float(np.sum(d * d))
        den += float(np.sum(reference[k] * reference[k]))
    if den == 0.0:
        raise ValueError("reference norm is zero; relative shift undefined")
    return float(np.sqrt(num) / np.sqrt(den))


@dataclass(frozen=True)
class MergeReport:
    """Per-tensor and global shift diagnostics for one delta against a base."""

    per_tensor: dict
    global_relative_shift: float
    missing_in_base: tuple[str, ...]
    missing_in_delta: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "per_tensor": {
                k: dict(v) for k, v in sorted(self.per_tensor.items())
            },
            "global_relative_shift": self.global_relative_shift,
            "missing_in_base": list(self.missing_in_base),
            "missing_in_delta": list(self.missing_in_delta),
        }


def merge_report(base: TensorMap, d: TensorMap) -> MergeReport:
    """Shift diagnostics: per-tensor Frobenius norms plus the global ratio.

    Keys present on only one side are reported, never silently dropped; the
    global value covers the shared key set and is recomputable from the
    per-tensor entries.
    """
    base_keys, delta_keys = set(base.names()), set(d.names())
    shared = sorted(base_keys & delta_keys)
    _check_shapes(base, d, shared)
    per_tensor = {}
    num = 0.0
    den = 0.0
    for k in shared:
        df = float(np.sqrt(np.sum(d[k] * d[k])))
        bf = float(np.sqrt(np.sum(base[k] * base[k])))
        per_tensor[k] = {"delta_frobenius": df, "base_frobenius": bf}
        num += df * df
        den += bf * bf
    if den == 0.0:
        raise ValueError("base norm is zero on the shared key set")
    return MergeReport(
        per_tensor=per_tensor,
        global_relative_shift=float(np.sqrt(num) / np.sqrt(den)),
        missing_in_base=tuple(sorted(delta_keys - base_keys)),
        missing_in_delta=tuple(sorted(base_keys - delta_keys)),
    )
