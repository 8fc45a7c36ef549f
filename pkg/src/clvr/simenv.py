"""Deterministic simulated environment behind the agent adapter seams.

The simulator gives every prompt a checklist of atomic requirements (the
prompt's ``;``-separated clauses when present, otherwise a seeded synthetic
count). Generated images are pure bookkeeping: a registry entry mapping the
image's content hash to the requirement subset it actually satisfies, drawn
per item with probability q. Verifiers and judges read that hidden registry
— the controller itself never does — so gatekeeping, gap feedback, and
consensus behave like their model-backed counterparts while every outcome
is a deterministic function of (config, master seed, prompt).
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass

from .controller import (
    AdapterFault,
    AgentAdapters,
    PlannerContext,
    PlannerReply,
    ToolFailure,
)
from .rng import stream
from .trajectory import Action, ImageRef, sim_content_hash


@dataclass(frozen=True)
class SimEnvConfig:
    """Knobs of the simulated environment.

    per_item_success_prob: chance q that a generation or edit actually
        satisfies each requirement it renders.
    judge_agreement_prob: chance p that a judge votes for the genuinely
        better image; both judges draw independently, so consensus
        retention of a surviving episode is p².
    plan_min_items / plan_max_items: bounds of the synthetic checklist
        size for prompts without explicit ``;`` clauses.
    gen_failure_prob: chance of a mechanical tool failure per generator
        call (retried by the engine within budget).
    master_seed: root of every stream the simulator draws from.
    """

    per_item_success_prob: float = 0.8
    judge_agreement_prob: float = 0.7
    plan_min_items: int = 1
    plan_max_items: int = 8
    gen_failure_prob: float = 0.0
    master_seed: int = 0

    def __post_init__(self):
        for name in ("per_item_success_prob", "judge_agreement_prob", "gen_failure_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if not 1 <= self.plan_min_items <= self.plan_max_items:
            raise ValueError("need 1 <= plan_min_items <= plan_max_items")
        if self.master_seed < 0:
            raise ValueError("master_seed must be nonnegative")

    @classmethod
    def from_dict(cls, d: dict) -> "SimEnvConfig":
        known = {f for f in cls.__dataclass_fields__}
        stray = set(d) - known
        if stray:
            raise ValueError(f"unknown config keys: {sorted(stray)}")
        return cls(**d)


@dataclass(frozen=True)
class SimImage:
    """Hidden ground truth of one simulated image."""

    satisfied: frozenset
    depth: int
    prompt: str


class SimEnv:
    """Adapter bundle over a shared, thread-safe image registry."""

    def __init__(self, config: SimEnvConfig | None = None):
        self.config = config or SimEnvConfig()
        self._registry: dict[str, SimImage] = {}
        self._lock = threading.Lock()

    # ------------------------------------------------------------------ plan

    def checklist_for(self, prompt: str) -> tuple[str, ...]:
        """The prompt's requirement list, identical on every call.

        Explicit ``;`` clauses become the items verbatim (deduplicated);
        otherwise the item count is drawn once from the plan-length stream
        keyed by the prompt text.
        """
        clauses = list(dict.fromkeys(c.strip() for c in prompt.split(";") if c.strip()))
        if len(clauses) > 1:
            return tuple(clauses)
        cfg = self.config
        n = int(
            stream(cfg.master_seed, "plan", prompt).integers(
                cfg.plan_min_items, cfg.plan_max_items + 1
            )
        )
        return tuple(f"{prompt} :: requirement {i + 1} of {n}" for i in range(n))

    def plan(self, ctx: PlannerContext) -> PlannerReply:
        """Checklist decomposition planner.

        Engine phase: the first turn plans the checklist and asks for the
        base canvas; later turns repair the first reported gap. Inference
        phase: reads its own gap check and edits until nothing is missing.
        """
        items = self.checklist_for(ctx.prompt)
        if ctx.phase == "engine":
            if ctx.checklist is None:
                return PlannerReply(
                    reasoning=(
                        f"The prompt decomposes into {len(items)} requirement(s); "
                        f"rendering the base canvas for {items[0]!r}."
                    ),
                    action=Action.image_gen(),
                    instruction=self._instruction("base", ctx.prompt, target=items[0]),
                    checklist=items,
                    targets=(items[0],),
                )
            if not ctx.gaps:
                raise AdapterFault("edit turn without gap feedback")
            target = ctx.gaps[0]
            return PlannerReply(
                reasoning=f"Validation flagged {target!r}; editing the canvas to add it.",
                action=Action.image_gen(),
                instruction=self._instruction(
                    "edit", ctx.prompt, target=target, parent=ctx.canvas.content_hash
                ),
                targets=(target,),
            )
        # Inference: look at the canvas, fix what is missing, stop when done.
        if ctx.canvas is None:
            return PlannerReply(
                reasoning=f"Starting from scratch on {len(items)} requirement(s).",
                action=Action.image_gen(),
                instruction=self._instruction("base", ctx.prompt, target=items[0]),
                targets=(items[0],),
            )
        gaps = self.gaps_for(ctx.canvas, ctx.prompt)
        if gaps:
            return PlannerReply(
                reasoning=f"The canvas still lacks {gaps[0]!r}; editing.",
                action=Action.image_gen(),
                instruction=self._instruction(
                    "edit", ctx.prompt, target=gaps[0], parent=ctx.canvas.content_hash
                ),
                targets=(gaps[0],),
            )
        return PlannerReply(
            reasoning="Every requirement reads as satisfied; terminating.",
            action=Action.terminate(),
        )

    @staticmethod
    def _instruction(op: str, prompt: str, **extra) -> str:
        return json.dumps({"op": op, "prompt": prompt, **extra}, ensure_ascii=False)

    # -------------------------------------------------------------- generate

    def generate(self, instruction: str, rng):
        """Simulated image tool; returns (ImageRef, hidden satisfied set).

        ``base`` and ``oneshot`` render every checklist item with
        independent success probability q; ``edit`` inherits the parent's
        satisfied set and gains its target with probability q. Edits never
        regress. The failure coin is drawn first so the stream layout does
        not depend on the failure probability.
        """
        try:
            spec = json.loads(instruction)
            op = spec["op"]
            prompt = spec["prompt"]
        except (ValueError, TypeError, KeyError) as exc:
            raise AdapterFault(f"unintelligible instruction: {exc}") from exc
        if rng.random() < self.config.gen_failure_prob:
            raise ToolFailure(f"simulated {op} tool failure")
        q = self.config.per_item_success_prob
        if op in ("base", "oneshot"):
            items = self.checklist_for(prompt)
            satisfied = frozenset(it for it in items if rng.random() < q)
            depth = 1 if op == "base" else 0
            source = "generated"
        elif op == "edit":
            parent = self._registry.get(spec.get("parent", ""))
            if parent is None:
                raise AdapterFault("edit references an unknown parent image")
            gained = {spec["target"]} if rng.random() < q else set()
            satisfied = parent.satisfied | gained
            depth = parent.depth + 1
            source = "edited"
        else:
            raise AdapterFault(f"unknown instruction op {op!r}")
        ref = self._new_ref(rng, source)
        with self._lock:
            self._registry[ref.content_hash] = SimImage(satisfied, depth, prompt)
        return ref, satisfied

    @staticmethod
    def _new_ref(rng, source: str) -> ImageRef:
        image_id = f"img-{int(rng.integers(1 << 63)):016x}"
        return ImageRef(image_id, source, sim_content_hash(image_id))

    def lookup(self, image: ImageRef) -> SimImage:
        entry = self._registry.get(image.content_hash)
        if entry is None:
            raise AdapterFault(f"unknown image {image.id}")
        return entry

    # ---------------------------------------------------------------- verify

    def passive(self, image: ImageRef, items) -> bool:
        """True iff the image satisfies every listed requirement."""
        if not items:
            raise ValueError("passive verification needs a nonempty checklist")
        truth = self.lookup(image).satisfied
        return all(it in truth for it in items)

    def gaps_for(self, image: ImageRef, prompt: str) -> tuple[str, ...]:
        """Unmet requirements of `prompt` on this image, in checklist order."""
        truth = self.lookup(image).satisfied
        return tuple(it for it in self.checklist_for(prompt) if it not in truth)

    # ----------------------------------------------------------------- judge

    def judge(self, judge_index: int):
        """One consensus judge, keyed to content (never to slot order).

        The genuinely better image is the one satisfying more requirements,
        with refinement depth breaking ties (a refined canvas carries more
        detail than a single shot). The judge votes for it with probability
        judge_agreement_prob, drawn from a stream keyed by the unordered
        pair of content hashes, so the verdict is identical however the
        slots are arranged.
        """

        def _judge(first: ImageRef, second: ImageRef) -> bool:
            a, b = self.lookup(first), self.lookup(second)
            score_first = (len(a.satisfied), a.depth, first.content_hash)
            score_second = (len(b.satisfied), b.depth, second.content_hash)
            lo, hi = sorted((first.content_hash, second.content_hash))
            u = stream(
                self.config.master_seed, "judge", judge_index, lo, hi
            ).random()
            prefers_better = u < self.config.judge_agreement_prob
            return (score_first > score_second) == prefers_better

        return _judge

    # ---------------------------------------------------------------- bundle

    def adapters(self) -> AgentAdapters:
        return AgentAdapters(
            planner=self.plan,
            generator=self.generate,
            passive_verifier=self.passive,
            active_verifier=self.gaps_for,
            judges=(self.judge(0), self.judge(1)),
        )

    # --------------------------------------------------------------- rewards

    def t2i_reward(self, text: str, image: ImageRef) -> float:
        """Fraction of the image's satisfied requirements named in `text`."""
        truth = self.lookup(image).satisfied
        if not truth:
            return 0.0
        return sum(1 for item in truth if item in text) / len(truth)

    def i2i_reward(self, text: str, image: ImageRef) -> float:
        """Edit-instruction score; the simulator scores it like t2i."""
        return self.t2i_reward(text, image)
