"""Canonical data model for interleaved text/image reasoning trajectories.

A trajectory records the closed loop of a visual-reasoning agent: a prompt,
then alternating reasoning texts and generated images, optionally closed by a
terminate action. This module defines the value types, trajectory validation,
truncation into per-image training samples, and the two serialization formats
(JSONL and ShareGPT-style JSON).

Images are carried as references with content hashes, never as pixels; in
simulation the hash is a 32-byte BLAKE2b digest of the reference id.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

IMAGE_GEN_TOKEN = "<|image_gen|>"
TERMINATE_TOKEN = "<|terminate|>"

#: Hard cap on image-bearing steps per trajectory.
MAX_ITERATIONS = 8

_HEX_DIGITS = set("0123456789abcdef")


def sim_content_hash(image_id: str) -> str:
    """32-byte BLAKE2b digest of an image id, hex-encoded lowercase.

    Stands in for a pixel-payload digest when no real image exists.
    """
    return hashlib.blake2b(image_id.encode("utf-8"), digest_size=32).hexdigest()


@dataclass(frozen=True)
class ImageRef:
    """Reference to a generated or edited image.

    Attributes:
        id: unique identifier within a trajectory.
        source: "generated" (fresh canvas) or "edited" (refined canvas).
        content_hash: 64 lowercase hex chars (32-byte digest of the payload,
            or of the id string in simulation).
        uri: optional locator for the actual payload.
    """

    id: str
    source: str
    content_hash: str
    uri: str | None = None

    def __post_init__(self):
        if self.source not in ("generated", "edited"):
            raise ValueError(f"bad image source {self.source!r}")
        h = self.content_hash
        if len(h) != 64 or not set(h) <= _HEX_DIGITS:
            raise ValueError("content_hash must be 64 lowercase hex chars")

    def to_dict(self) -> dict:
        d = {"id": self.id, "source": self.source, "content_hash": self.content_hash}
        if self.uri is not None:
            d["uri"] = self.uri
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ImageRef":
        return cls(
            id=d["id"],
            source=d["source"],
            content_hash=d["content_hash"],
            uri=d.get("uri"),
        )


@dataclass(frozen=True)
class Action:
    """Agent action: generate an image, terminate, or call a named tool.

    The tokens for the two core actions are bit-exact protocol strings.
    """

    kind: str
    token: str
    name: str | None = None

    def __post_init__(self):
        if self.kind == "image_gen":
            expected = IMAGE_GEN_TOKEN
        elif self.kind == "terminate":
            expected = TERMINATE_TOKEN
        elif self.kind == "tool":
            if not self.name:
                raise ValueError("tool action needs a name")
            expected = f"<|tool:{self.name}|>"
        else:
            raise ValueError(f"bad action kind {self.kind!r}")
        if self.token != expected:
            raise ValueError(f"action token {self.token!r} != {expected!r}")

    @classmethod
    def image_gen(cls) -> "Action":
        return cls("image_gen", IMAGE_GEN_TOKEN)

    @classmethod
    def terminate(cls) -> "Action":
        return cls("terminate", TERMINATE_TOKEN)

    @classmethod
    def tool(cls, name: str) -> "Action":
        return cls("tool", f"<|tool:{name}|>", name)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "token": self.token}

    @classmethod
    def from_dict(cls, d: dict) -> "Action":
        kind, token = d["kind"], d["token"]
        if kind == "tool":
            name = token.removeprefix("<|tool:").removesuffix("|>")
            return cls(kind, token, name)
        return cls(kind, token)


@dataclass(frozen=True)
class ReasoningStep:
    """One loop iteration: reasoning text, action, and its outcome.

    `image` must be present exactly when the action generated one.
    `passive_pass` records the step-level checklist verdict; `active_gaps`
    records unmet-requirement feedback from the global verifier.
    """

    index: int
    reasoning: str
    action: Action
    image: ImageRef | None = None
    passive_pass: bool | None = None
    active_gaps: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "active_gaps", tuple(self.active_gaps))

    def to_dict(self) -> dict:
        d: dict = {
            "index": self.index,
            "reasoning": self.reasoning,
            "action": self.action.to_dict(),
        }
        if self.image is not None:
            d["image"] = self.image.to_dict()
        if self.passive_pass is not None:
            d["passive_pass"] = self.passive_pass
        d["active_gaps"] = list(self.active_gaps)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ReasoningStep":
        img = d.get("image")
        return cls(
            index=d["index"],
            reasoning=d["reasoning"],
            action=Action.from_dict(d["action"]),
            image=ImageRef.from_dict(img) if img is not None else None,
            passive_pass=d.get("passive_pass"),
            active_gaps=tuple(d.get("active_gaps", ())),
        )


@dataclass(frozen=True)
class Trajectory:
    """A full closed-loop run: prompt plus ordered reasoning steps."""

    id: str
    prompt: str
    steps: tuple[ReasoningStep, ...]
    terminated: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))

    @property
    def image_steps(self) -> tuple[int, ...]:
        """Positions of image-bearing steps."""
        return tuple(i for i, s in enumerate(self.steps) if s.image is not None)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "prompt": self.prompt,
            "terminated": self.terminated,
            "meta": self.meta,
            "steps": [s.to_dict() for s in self.steps],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Trajectory":
        return cls(
            id=d["id"],
            prompt=d["prompt"],
            steps=tuple(ReasoningStep.from_dict(s) for s in d["steps"]),
            terminated=d["terminated"],
            meta=dict(d.get("meta", {})),
        )


@dataclass(frozen=True)
class TruncatedSample:
    """Training sample cut from a trajectory at image step t.

    `context` is the ordered multimodal list: the prompt, then each earlier
    (reasoning, image) pair, then the reasoning of step t. It always ends
    with reasoning text; `target` is the image that reasoning produced.
    """

    context: tuple
    target: ImageRef
    t: int

    def __post_init__(self):
        object.__setattr__(self, "context", tuple(self.context))

    @property
    def context_images(self) -> tuple[ImageRef, ...]:
        """The images visible in the context, in order."""
        return tuple(x for x in self.context if isinstance(x, ImageRef))

    @property
    def context_texts(self) -> tuple[str, ...]:
        return tuple(x for x in self.context if isinstance(x, str))


@dataclass(frozen=True)
class ShareGPTRecord:
    """Conversation-style export with <IMG_GEN_n> placeholders.

    `images` holds the referenced images in token order; token numbering is
    1-based and contiguous.
    """

    conversations: tuple[tuple[str, str], ...]
    image_tokens: tuple[str, ...]
    images: tuple[ImageRef, ...]

    def to_dict(self) -> dict:
        wire_role = {"human": "human", "assistant": "gpt"}
        return {
            "conversations": [
                {"from": wire_role[role], "value": text}
                for role, text in self.conversations
            ],
            "images": [img.to_dict() for img in self.images],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, separators=(",", ":"))


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_trajectory(
    traj: Trajectory,
    max_iterations: int = MAX_ITERATIONS,
    retained: bool = False,
) -> ValidationReport:
    """Check every trajectory invariant and report violations.

    With ``retained=True``, additionally requires passive_pass to be true on
    every image-bearing step, as holds for trajectories kept by the data
    engine.
    """
    bad: list[str] = []
    if traj.terminated:
        if not traj.steps or traj.steps[-1].action.kind != "terminate":
            bad.append("terminated trajectory must end with a terminate action")
    indices = [s.index for s in traj.steps]
    if any(b <= a for a, b in zip(indices, indices[1:])):
        bad.append("step indices must be strictly increasing")
    for pos, step in enumerate(traj.steps):
        has_image = step.image is not None
        wants_image = step.action.kind == "image_gen"
        if has_image != wants_image:
            bad.append(f"step {pos}: image present iff action is image_gen")
        if retained and wants_image and step.passive_pass is not True:
            bad.append(f"step {pos}: retained trajectory requires passive_pass")
    image_ids = [s.image.id for s in traj.steps if s.image is not None]
    if len(set(image_ids)) != len(image_ids):
        bad.append("image ids must be unique within a trajectory")
    if len(image_ids) > max_iterations:
        bad.append(
            f"iteration budget: {len(image_ids)} image steps > max {max_iterations}"
        )
    return ValidationReport(tuple(bad))


def truncate_at(traj: Trajectory, t: int) -> TruncatedSample:
    """Cut a training sample at image step t.

    The context collects the prompt, the (reasoning, image) pairs of steps
    0..t-1, and the reasoning of step t; the target is image x_t. Steps are
    addressed by position, which coincides with the step index for engine
    output.
    """
    if t < 0 or t >= len(traj.steps):
        raise IndexError(f"step {t} out of range for {len(traj.steps)} steps")
    step = traj.steps[t]
    if step.image is None:
        raise ValueError(f"step {t} lacks an image")
    context: list = [traj.prompt]
    for pos, prior in enumerate(traj.steps[:t]):
        if prior.image is None:
            raise ValueError(
                f"step {pos} lacks an image; cannot truncate at {t}"
            )
        context.append(prior.reasoning)
        context.append(prior.image)
    context.append(step.reasoning)
    return TruncatedSample(tuple(context), step.image, t)


def expand_all(traj: Trajectory) -> list[TruncatedSample]:
    """Decompose a trajectory into one training sample per generated image."""
    report = validate_trajectory(traj)
    if not report.ok:
        raise ValueError(f"invalid trajectory: {'; '.join(report.violations)}")
    return [truncate_at(traj, t) for t in traj.image_steps]


def export_sharegpt(traj: Trajectory) -> ShareGPTRecord:
    """Export a trajectory as a two-party conversation.

    The human turn carries the prompt; each step becomes an assistant turn of
    its reasoning text, followed on a new line by ``<IMG_GEN_n>`` when the
    step generated an image. Reasoning text is exported verbatim.
    """
    report = validate_trajectory(traj)
    if not report.ok:
        raise ValueError(f"invalid trajectory: {'; '.join(report.violations)}")
    conversations: list[tuple[str, str]] = [("human", traj.prompt)]
    tokens: list[str] = []
    images: list[ImageRef] = []
    for step in traj.steps:
        value = step.reasoning
        if step.image is not None:
            token = f"<IMG_GEN_{len(images) + 1}>"
            tokens.append(token)
            images.append(step.image)
            value = f"{value}\n{token}"
        conversations.append(("assistant", value))
    return ShareGPTRecord(tuple(conversations), tuple(tokens), tuple(images))


def parse_sharegpt(obj: dict) -> Trajectory:
    """Rebuild a trajectory skeleton from a ShareGPT-style object.

    The skeleton restores prompt, reasoning texts, and image order; verdict
    fields (passive_pass, active_gaps) are not representable in this format
    and come back empty. Terminate actions are likewise not represented, so
    the skeleton is never marked terminated.
    """
    convs = obj["conversations"]
    if not convs or convs[0]["from"] != "human":
        raise ValueError("first conversation turn must be the human prompt")
    images = [ImageRef.from_dict(d) for d in obj.get("images", [])]
    steps: list[ReasoningStep] = []
    used = 0
    for turn in convs[1:]:
        if turn["from"] != "gpt":
            raise ValueError(f"unexpected turn role {turn['from']!r}")
        value = turn["value"]
        token = f"<IMG_GEN_{used + 1}>"
        if value.endswith(f"\n{token}"):
            reasoning = value[: -(len(token) + 1)]
            steps.append(
                ReasoningStep(
                    index=len(steps),
                    reasoning=reasoning,
                    action=Action.image_gen(),
                    image=images[used],
                )
            )
            used += 1
        else:
            steps.append(
                ReasoningStep(
                    index=len(steps),
                    reasoning=value,
                    action=Action.terminate(),
                )
            )
    if used != len(images):
        raise ValueError(f"{len(images)} images but {used} image tokens")
    return Trajectory(id="", prompt=convs[0]["value"], steps=tuple(steps))


def serialize_jsonl(trajectories: list[Trajectory]) -> bytes:
    """Serialize trajectories to JSONL with deterministic field ordering."""
    lines = [
        json.dumps(t.to_dict(), ensure_ascii=False, separators=(",", ":"))
        for t in trajectories
    ]
    return ("\n".join(lines) + "\n").encode("utf-8") if lines else b""


def parse_trajectory_jsonl(payload: bytes) -> list[Trajectory]:
    """Parse a JSONL trajectory file; rejects malformed lines and duplicate ids."""
    out: list[Trajectory] = []
    seen: set[str] = set()
    for lineno, line in enumerate(payload.decode("utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            traj = Trajectory.from_dict(obj)
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed trajectory on line {lineno}: {exc}") from exc
        if traj.id in seen:
            raise ValueError(f"duplicate trajectory id {traj.id!r} on line {lineno}")
        seen.add(traj.id)
        out.append(traj)
    return out
