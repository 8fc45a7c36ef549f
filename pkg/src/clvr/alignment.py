"""RL preparation on top of truncated trajectories.

A truncated sample's long multimodal context is distilled into an explicit
proxy-prompt triple — a scene description, an optional edit instruction,
and reference-image indices — so reward models can score the target image
without reading the whole context. The proxy reward averages the two reward
paths on edit steps and reduces to the text-to-image score on first steps.
Batch assembly draws tasks from a configurable T2I/I2I mix with per-edit-
depth buckets. The optimizer configuration here is recorded, not executed.
"""

from __future__ import annotations

from dataclasses import dataclass

from .trajectory import ImageRef, Trajectory, TruncatedSample, truncate_at


@dataclass(frozen=True)
class ProxyPrompts:
    """Explicit instruction triple distilled from a truncated context.

    First-step samples carry only the scene description; edit steps add
    the edit instruction and the indices of the reference images inside
    the context's image list.
    """

    p_t2i: str
    p_i2i: str | None = None
    i_ref: tuple[int, ...] | None = None

    def __post_init__(self):
        if (self.p_i2i is None) != (self.i_ref is None):
            raise ValueError("p_i2i and i_ref must be present together")
        if self.i_ref is not None:
            refs = tuple(int(i) for i in self.i_ref)
            if any(i < 0 for i in refs):
                raise ValueError("reference indices must be nonnegative")
            object.__setattr__(self, "i_ref", refs)

    def to_dict(self) -> dict:
        return {
            "p_t2i": self.p_t2i,
            "p_i2i": self.p_i2i,
            "i_ref": list(self.i_ref) if self.i_ref is not None else None,
        }


def extract_proxy(sample: TruncatedSample, extractor) -> ProxyPrompts:
    """Run an extractor adapter and enforce the step-index contract.

    ``extractor(sample)`` may return a ProxyPrompts or a plain
    (p_t2i, p_i2i, i_ref) triple. First steps (t = 0) must come back with
    no edit fields; later steps must carry both, and every reference index
    must point inside the sample's context images.
    """
    raw = extractor(sample)
    prompts = raw if isinstance(raw, ProxyPrompts) else ProxyPrompts(*raw)
    if sample.t == 0:
        if prompts.p_i2i is not None:
            raise ValueError("a t=0 sample takes no edit prompt or references")
        return prompts
    if prompts.p_i2i is None:
        raise ValueError(f"a t={sample.t} sample needs an edit prompt and references")
    n = len(sample.context_images)
    bad = [i for i in prompts.i_ref if i >= n]
    if bad:
        raise ValueError(f"reference indices {bad} out of range for {n} context image(s)")
    return prompts


def sim_extractor(sample: TruncatedSample) -> ProxyPrompts:
    """Bundled stand-in for the foundation-model extractor.

    Concatenates every context text as the scene description; on edit
    steps the last reasoning becomes the edit instruction and the most
    recent context image is the single reference.
    """
    texts = sample.context_texts
    p_t2i = " ".join(texts)
    if sample.t == 0:
        return ProxyPrompts(p_t2i)
    return ProxyPrompts(p_t2i, texts[-1], (sample.t - 1,))


@dataclass(frozen=True)
class RewardInputs:
    """Scores feeding the proxy reward for one sample."""

    t: int
    r_t2i: float
    r_i2i: float | None = None

    def __post_init__(self):
        if self.t < 0:
            raise ValueError("step index must be nonnegative")
        if not 0.0 <= self.r_t2i <= 1.0:
            raise ValueError(f"r_t2i must lie in [0, 1], got {self.r_t2i}")
        if self.t == 0:
            if self.r_i2i is not None:
                raise ValueError("a t=0 reward takes no edit score")
        else:
            if self.r_i2i is None:
                raise ValueError(f"a t={self.t} reward needs an edit score")
            if not 0.0 <= self.r_i2i <= 1.0:
                raise ValueError(f"r_i2i must lie in [0, 1], got {self.r_i2i}")


def proxy_reward(inputs: RewardInputs) -> float:
    """Dual-path proxy reward: r_t2i at t=0, else the even blend of both."""
    if inputs.t == 0:
        return inputs.r_t2i
    return 0.5 * inputs.r_t2i + 0.5 * inputs.r_i2i


@dataclass(frozen=True)
class TaskMixWeights:
    """Sampling weights for the T2I/I2I task mix.

    The four bucket weights cover I2I samples with 1, 2, 3, and >= 4 prior
    edit steps. Weights are nonnegative with a positive total, so a weight
    of zero cleanly disables a branch.
    """

    t2i_weight: float = 1.0
    i2i_weight: float = 1.0
    i2i_step_bucket_weights: tuple = (1.0, 1.0, 1.0, 1.0)

    def __post_init__(self):
        buckets = tuple(float(w) for w in self.i2i_step_bucket_weights)
        object.__setattr__(self, "i2i_step_bucket_weights", buckets)
        if len(buckets) != 4:
            raise ValueError("exactly 4 bucket weights are required")
        weights = (self.t2i_weight, self.i2i_weight, *buckets)
        if any(w < 0 for w in weights):
            raise ValueError("weights must be nonnegative")
        if self.t2i_weight + self.i2i_weight <= 0:
            raise ValueError("task weights must not all be zero")
        if self.i2i_weight > 0 and sum(buckets) <= 0:
            raise ValueError("i2i is enabled but every bucket weight is zero")


@dataclass(frozen=True)
class TaskDraw:
    """One categorical draw: the task kind and, for i2i, its bucket.

    Buckets 1..3 mean exactly that many prior images; bucket 4 means four
    or more.
    """

    kind: str
    bucket: int | None = None

    def __post_init__(self):
        if self.kind not in ("t2i", "i2i"):
            raise ValueError(f"bad task kind {self.kind!r}")
        if (self.kind == "i2i") != (self.bucket is not None):
            raise ValueError("i2i draws carry a bucket; t2i draws do not")
        if self.bucket is not None and self.bucket not in (1, 2, 3, 4):
            raise ValueError(f"bucket must be 1..4, got {self.bucket}")


def sample_task(rng, weights: TaskMixWeights | None = None) -> TaskDraw:
    """Draw a task kind proportional to the mix weights, then its bucket."""
    w = weights or TaskMixWeights()
    if rng.random() * (w.t2i_weight + w.i2i_weight) < w.t2i_weight:
        return TaskDraw("t2i")
    buckets = w.i2i_step_bucket_weights
    u = rng.random() * sum(buckets)
    acc = 0.0
    for k, bw in enumerate(buckets):
        acc += bw
        if u < acc:
            return TaskDraw("i2i", k + 1)
    return TaskDraw("i2i", 4)


@dataclass(frozen=True)
class BatchItem:
    """One RL training item: conditional context, proxy prompts, target."""

    sample: TruncatedSample
    prompts: ProxyPrompts
    target: ImageRef

    def to_dict(self) -> dict:
        d = {"t": self.sample.t}
        d.update(self.prompts.to_dict())
        d["target"] = self.target.to_dict()
        return d


def _pool_key(image_ordinal: int):
    return "t2i" if image_ordinal == 0 else min(image_ordinal, 4)


def build_rl_batch(
    trajectories,
    rng,
    weights: TaskMixWeights | None = None,
    extractor=sim_extractor,
    n: int = 16,
    max_retries: int = 100,
) -> list[BatchItem]:
    """Assemble an RL batch by repeated task draws over the trajectory pool.

    Each item draws a task, picks uniformly among the truncation points
    matching it (a T2I item targets a first image; an I2I bucket-k item
    targets an image with k prior images, >= 4 for the last bucket), and
    extracts proxy prompts. A drawn task with no matching truncation point
    is resampled, at most `max_retries` times per item.
    """
    pools: dict = {"t2i": [], 1: [], 2: [], 3: [], 4: []}
    for traj in trajectories:
        if not isinstance(traj, Trajectory):
            raise TypeError(f"expected Trajectory, got {type(traj)!r}")
        for ordinal, position in enumerate(traj.image_steps):
            pools[_pool_key(ordinal)].append((traj, position))
    items: list[BatchItem] = []
    for _ in range(n):
        retries = 0
        while True:
            task = sample_task(rng, weights)
            pool = pools["t2i" if task.kind == "t2i" else task.bucket]
            if pool:
                break
            retries += 1
            if retries > max_retries:
                label = task.kind if task.kind == "t2i" else f"i2i bucket {task.bucket}"
                raise ValueError(
                    f"no trajectory offers a {label} sample after {max_retries} resamples"
                )
        traj, position = pool[int(rng.integers(len(pool)))]
        sample = truncate_at(traj, position)
        prompts = extract_proxy(sample, extractor)
        items.append(BatchItem(sample, prompts, sample.target))
    return items


@dataclass(frozen=True)
class RLConfig:
    """Recorded optimizer configuration; nothing here runs a gradient step."""

    learning_rate: float = 1e-4
    kl_beta: float = 1e-5
    lora_rank: int = 128
    lora_alpha: float = 256.0
    group_size: int = 16
    cfg_scale: float = 4.0
    rollout_steps: int = 8
    resolution: int = 512

    def __post_init__(self):
        if self.lora_rank < 1:
            raise ValueError("lora_rank must be >= 1")
        if self.lora_alpha <= 0:
            raise ValueError("lora_alpha must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.kl_beta < 0:
            raise ValueError("kl_beta must be nonnegative")
        for name in ("group_size", "rollout_steps", "resolution"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "kl_beta": self.kl_beta,
            "lora_rank": self.lora_rank,
            "lora_alpha": self.lora_alpha,
            "group_size": self.group_size,
            "cfg_scale": self.cfg_scale,
            "rollout_steps": self.rollout_steps,
            "resolution": self.resolution,
        }
