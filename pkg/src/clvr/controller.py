"""Closed-loop data engine and inference loop.

The engine walks a fixed state machine — generate_base_image → inspect →
edit_refine → validate → finalize — against pluggable agent adapters. Each
image-bearing step passes a passive checklist gate (one failure discards the
whole episode), validation feeds unmet-requirement gaps back to the planner,
and retained results must survive blind A/B consensus against a one-shot
baseline. Inference reuses the same adapters without gates: the planner
iterates until it terminates or hits the image cap.

Episodes are pure functions of (prompt, adapters, budget, master_seed), so
datasets come out bit-identical no matter how many workers run them.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

from .rng import child_seed, stream
from .stats import histogram as _iteration_histogram
from .trajectory import MAX_ITERATIONS, Action, ImageRef, ReasoningStep, Trajectory


class EngineState(Enum):
    GENERATE_BASE_IMAGE = "generate_base_image"
    INSPECT = "inspect"
    EDIT_REFINE = "edit_refine"
    VALIDATE = "validate"
    FINALIZE = "finalize"
    FAILED = "failed"


class Event(Enum):
    GEN_OK = "gen_ok"
    GEN_FAIL = "gen_fail"
    NEEDS_EDIT = "needs_edit"
    EDIT_OK = "edit_ok"
    EDIT_FAIL = "edit_fail"
    VALIDATE_OK = "validate_ok"
    VALIDATE_PARTIAL = "validate_partial"
    BUDGET_EXHAUSTED = "budget_exhausted"


#: States that perform work and therefore consume retry budget.
WORKING_STATES = (
    EngineState.GENERATE_BASE_IMAGE,
    EngineState.INSPECT,
    EngineState.EDIT_REFINE,
    EngineState.VALIDATE,
)

DISCARD_REASONS = ("passive_failure", "budget", "consensus_reject", "format_violation")


class IllegalTransition(ValueError):
    """A (state, event) pair outside the machine's transition table."""


class ToolFailure(RuntimeError):
    """A retryable mechanical tool failure (the state is re-attempted)."""


class AdapterFault(RuntimeError):
    """A fatal adapter malfunction; the episode is discarded with FAIL(mid)."""


_TRANSITIONS = {
    (EngineState.GENERATE_BASE_IMAGE, Event.GEN_OK): EngineState.INSPECT,
    (EngineState.GENERATE_BASE_IMAGE, Event.GEN_FAIL): EngineState.GENERATE_BASE_IMAGE,
    (EngineState.INSPECT, Event.NEEDS_EDIT): EngineState.EDIT_REFINE,
    (EngineState.INSPECT, Event.VALIDATE_OK): EngineState.VALIDATE,
    (EngineState.EDIT_REFINE, Event.EDIT_OK): EngineState.VALIDATE,
    (EngineState.EDIT_REFINE, Event.EDIT_FAIL): EngineState.EDIT_REFINE,
    (EngineState.VALIDATE, Event.VALIDATE_OK): EngineState.FINALIZE,
    (EngineState.VALIDATE, Event.VALIDATE_PARTIAL): EngineState.EDIT_REFINE,
}


def step_state(state: EngineState, event: Event) -> EngineState:
    """Pure transition function of the engine's state machine.

    Failed is absorbing, Finalize is terminal (any event is illegal there),
    and BudgetExhausted sends every working state to Failed. A clean
    inspection (ValidateOk at Inspect) moves straight to Validate; *Fail
    events loop on their own state so the caller may retry within budget.
    """
    if state is EngineState.FAILED:
        return EngineState.FAILED
    if state is EngineState.FINALIZE:
        raise IllegalTransition(f"finalize is terminal; got event {event.value}")
    if event is Event.BUDGET_EXHAUSTED:
        return EngineState.FAILED
    nxt = _TRANSITIONS.get((state, event))
    if nxt is None:
        raise IllegalTransition(f"illegal transition {state.value} x {event.value}")
    return nxt


class RetryBudget:
    """Per-state attempt limits with consecutive-run accounting.

    ``used[s]`` counts attempts in the current uninterrupted run of state
    ``s`` and resets when the machine moves to a different state, so a
    limit of 2 means "at most one retry before giving up" each visit, not
    per episode. A limit of 0 forbids even the first attempt.
    """

    def __init__(self, per_state_limit=2):
        if isinstance(per_state_limit, int):
            limits = {s: per_state_limit for s in WORKING_STATES}
        else:
            limits = {}
            for key, value in dict(per_state_limit).items():
                state = key if isinstance(key, EngineState) else EngineState(key)
                limits[state] = int(value)
            for s in WORKING_STATES:
                limits.setdefault(s, 2)
        for s, limit in limits.items():
            if limit < 0:
                raise ValueError(f"negative budget for {s.value}")
        self.per_state_limit = limits
        self.used = {s: 0 for s in WORKING_STATES}
        self._max_run = {s: 0 for s in WORKING_STATES}
        self._total = {s: 0 for s in WORKING_STATES}

    def fresh(self) -> "RetryBudget":
        """A zeroed copy with the same limits."""
        return RetryBudget(self.per_state_limit)

    def charge(self, state: EngineState) -> bool:
        """Record one attempt at `state`; False when the budget is spent."""
        if self.used[state] >= self.per_state_limit[state]:
            return False
        self.used[state] += 1
        self._total[state] += 1
        self._max_run[state] = max(self._max_run[state], self.used[state])
        return True

    def note_transition(self, src: EngineState, dst: EngineState) -> None:
        """Reset the run counter of a state the machine just left."""
        if src is not dst and src in self.used:
            self.used[src] = 0

    def snapshot(self) -> dict:
        return {
            "limits": {s.value: v for s, v in sorted(self.per_state_limit.items(), key=lambda kv: kv[0].value)},
            "max_consecutive": {s.value: v for s, v in self._max_run.items()},
            "total_attempts": {s.value: v for s, v in self._total.items()},
        }


def normalize_budget(budget) -> RetryBudget:
    """Coerce an int, mapping, or RetryBudget into a fresh ledger."""
    if isinstance(budget, RetryBudget):
        return budget.fresh()
    return RetryBudget(budget)


@dataclass(frozen=True)
class Checklist:
    """Atomic requirements with parallel satisfaction flags."""

    items: tuple[str, ...]
    satisfied: tuple[bool, ...]

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))
        object.__setattr__(self, "satisfied", tuple(bool(b) for b in self.satisfied))
        if len(self.items) != len(self.satisfied):
            raise ValueError("items and satisfied flags must have equal length")

    @classmethod
    def fresh(cls, items) -> "Checklist":
        items = tuple(items)
        return cls(items, (False,) * len(items))

    def with_gaps(self, gaps) -> "Checklist":
        """Mark every item satisfied except those named in `gaps`."""
        unmet = set(gaps)
        return Checklist(self.items, tuple(it not in unmet for it in self.items))

    @property
    def complete(self) -> bool:
        return all(self.satisfied)

    def unmet(self) -> tuple[str, ...]:
        return tuple(it for it, ok in zip(self.items, self.satisfied) if not ok)


@dataclass(frozen=True)
class PlannerContext:
    """What the planner sees when asked for its next move.

    ``checklist is None`` marks the planning turn of an engine episode;
    afterwards the engine passes the items plus the gaps reported by the
    most recent validation. Inference contexts carry only the canvas.
    """

    prompt: str
    phase: str  # "engine" or "inference"
    checklist: tuple[str, ...] | None = None
    canvas: ImageRef | None = None
    images_so_far: int = 0
    gaps: tuple[str, ...] = ()

    def __post_init__(self):
        if self.phase not in ("engine", "inference"):
            raise ValueError(f"bad planner phase {self.phase!r}")
        if self.checklist is not None:
            object.__setattr__(self, "checklist", tuple(self.checklist))
        object.__setattr__(self, "gaps", tuple(self.gaps))


@dataclass(frozen=True)
class PlannerReply:
    """Planner output: reasoning, an action, and generation details.

    On the planning turn the reply must carry the checklist; image_gen
    replies must carry the generator instruction and name the checklist
    items the step claims to address (``targets``) so the passive gate
    knows what to verify.
    """

    reasoning: str
    action: Action
    instruction: str | None = None
    checklist: tuple[str, ...] | None = None
    targets: tuple[str, ...] = ()

    def __post_init__(self):
        if self.checklist is not None:
            object.__setattr__(self, "checklist", tuple(self.checklist))
        object.__setattr__(self, "targets", tuple(self.targets))


@dataclass(frozen=True)
class AgentAdapters:
    """The five tool seams of the engine.

    planner(ctx: PlannerContext) -> PlannerReply
    generator(instruction: str, rng) -> (ImageRef, frozenset of satisfied
        requirement texts) — the second element is hidden ground truth for
        auditing; the controller never reads it.
    passive_verifier(image, items: tuple[str, ...]) -> bool
    active_verifier(image, prompt: str) -> iterable of gap strings
    judges: two callables judge(first, second) -> bool, True when the judge
        prefers the image shown first. Judges see slots, never labels.

    Adapters must be deterministic in their inputs plus any seed they were
    built with, and reentrant (episodes may run on several threads).
    """

    planner: object
    generator: object
    passive_verifier: object
    active_verifier: object
    judges: tuple

    def __post_init__(self):
        object.__setattr__(self, "judges", tuple(self.judges))
        if len(self.judges) != 2:
            raise ValueError("exactly two judges are required")


@dataclass
class EpisodeLog:
    """Audit record of one engine episode."""

    prompt: str
    final_state: EngineState
    discard_reason: str | None = None
    fault: str | None = None
    iterations: int = 0
    state_path: tuple = ()
    checklist: Checklist | None = None
    budget: dict = field(default_factory=dict)

    @property
    def retained_by_engine(self) -> bool:
        return self.final_state is EngineState.FINALIZE


class _ReplyError(Exception):
    """Internal: planner reply violates the engine protocol."""


def passive_verify(image: ImageRef, checklist_items, adapter) -> bool:
    """Step-level gatekeeper: every listed item must be satisfied."""
    items = tuple(checklist_items)
    if not items:
        raise ValueError("passive verification needs a nonempty checklist")
    return bool(adapter(image, items))


def active_verify(image: ImageRef, prompt: str, adapter) -> tuple[str, ...]:
    """Global gap check; an empty result means the canvas is aligned."""
    return tuple(adapter(image, prompt))


def oneshot_instruction(prompt: str) -> str:
    """Controller-authored instruction for the single-shot consensus baseline."""
    return json.dumps({"op": "oneshot", "prompt": prompt}, ensure_ascii=False)


def _checked_image_reply(reply: PlannerReply, checklist) -> PlannerReply:
    if reply.action.kind != "image_gen":
        raise _ReplyError(f"expected an image_gen action, got {reply.action.kind}")
    if not reply.instruction:
        raise _ReplyError("image_gen reply lacks a generator instruction")
    if not reply.targets:
        raise _ReplyError("image_gen reply names no target items")
    if checklist is not None:
        known = set(checklist)
        stray = [t for t in reply.targets if t not in known]
        if stray:
            raise _ReplyError(f"targets {stray} are not checklist items")
    return reply


def run_episode(
    prompt: str,
    adapters: AgentAdapters,
    budget,
    master_seed: int,
    *,
    trajectory_id: str | None = None,
    max_iterations: int = MAX_ITERATIONS,
):
    """Run one data-engine episode; returns (Trajectory | None, EpisodeLog).

    The trajectory is returned only when the machine reaches Finalize with
    every image step passive-verified; any passive failure discards the
    entire context immediately. Discard reasons: passive_failure, budget
    (retry budget or the image-iteration cap), and format_violation
    (adapter fault, logged as FAIL(mid)). Consensus filtering happens in
    synthesize_dataset, not here.
    """
    if max_iterations < 1 or max_iterations > MAX_ITERATIONS:
        raise ValueError(f"max_iterations must be in 1..{MAX_ITERATIONS}")
    ledger = normalize_budget(budget)
    gen_rng = stream(master_seed, "gen")
    tid = trajectory_id or f"traj-{master_seed:016x}"

    state = EngineState.GENERATE_BASE_IMAGE
    path = [state]
    steps: list[ReasoningStep] = []
    checklist: Checklist | None = None
    canvas: ImageRef | None = None
    images = 0
    addressed: list[str] = []
    pending_gaps: tuple[str, ...] = ()
    reason: str | None = None
    fault: str | None = None

    def move(event: Event) -> None:
        nonlocal state
        nxt = step_state(state, event)
        ledger.note_transition(state, nxt)
        path.append(nxt)
        state = nxt

    def abort(why: str, detail: str | None = None) -> None:
        nonlocal state, reason, fault
        reason, fault = why, detail
        state = EngineState.FAILED
        path.append(state)

    while state not in (EngineState.FINALIZE, EngineState.FAILED):
        if not ledger.charge(state):
            move(Event.BUDGET_EXHAUSTED)
            reason = "budget"
            continue
        try:
            if state is EngineState.GENERATE_BASE_IMAGE:
                reply = adapters.planner(PlannerContext(prompt, "engine"))
                if not reply.checklist:
                    raise _ReplyError("planning turn returned no checklist")
                if len(set(reply.checklist)) != len(reply.checklist):
                    raise _ReplyError("checklist items must be unique")
                _checked_image_reply(reply, reply.checklist)
                checklist = Checklist.fresh(reply.checklist)
                try:
                    image, _truth = adapters.generator(reply.instruction, gen_rng)
                except ToolFailure:
                    move(Event.GEN_FAIL)
                    continue
                addressed = list(dict.fromkeys(reply.targets))
                if not passive_verify(image, addressed, adapters.passive_verifier):
                    abort("passive_failure")
                    continue
                canvas = image
                images += 1
                steps.append(
                    ReasoningStep(
                        index=len(steps),
                        reasoning=reply.reasoning,
                        action=Action.image_gen(),
                        image=image,
                        passive_pass=True,
                    )
                )
                move(Event.GEN_OK)

            elif state is EngineState.INSPECT:
                gaps = active_verify(canvas, prompt, adapters.active_verifier)
                checklist = checklist.with_gaps(gaps)
                pending_gaps = gaps
                move(Event.NEEDS_EDIT if gaps else Event.VALIDATE_OK)

            elif state is EngineState.EDIT_REFINE:
                if images >= max_iterations:
                    abort("budget")
                    continue
                reply = adapters.planner(
                    PlannerContext(
                        prompt,
                        "engine",
                        checklist=checklist.items,
                        canvas=canvas,
                        images_so_far=images,
                        gaps=pending_gaps,
                    )
                )
                _checked_image_reply(reply, checklist.items)
                try:
                    image, _truth = adapters.generator(reply.instruction, gen_rng)
                except ToolFailure:
                    move(Event.EDIT_FAIL)
                    continue
                addressed.extend(t for t in reply.targets if t not in addressed)
                if not passive_verify(image, addressed, adapters.passive_verifier):
                    abort("passive_failure")
                    continue
                canvas = image
                images += 1
                steps.append(
                    ReasoningStep(
                        index=len(steps),
                        reasoning=reply.reasoning,
                        action=Action.image_gen(),
                        image=image,
                        passive_pass=True,
                        active_gaps=pending_gaps,
                    )
                )
                move(Event.EDIT_OK)

            elif state is EngineState.VALIDATE:
                gaps = active_verify(canvas, prompt, adapters.active_verifier)
                checklist = checklist.with_gaps(gaps)
                pending_gaps = gaps
                move(Event.VALIDATE_PARTIAL if gaps else Event.VALIDATE_OK)

        except (AdapterFault, _ReplyError) as exc:
            abort("format_violation", f"FAIL(mid): {exc}")

    log = EpisodeLog(
        prompt=prompt,
        final_state=state,
        discard_reason=reason,
        fault=fault,
        iterations=images,
        state_path=tuple(s.value for s in path),
        checklist=checklist,
        budget=ledger.snapshot(),
    )
    if state is not EngineState.FINALIZE:
        return None, log

    steps.append(
        ReasoningStep(
            index=len(steps),
            reasoning="All checklist items verified; finalizing the canvas.",
            action=Action.terminate(),
        )
    )
    traj = Trajectory(
        id=tid,
        prompt=prompt,
        steps=tuple(steps),
        terminated=True,
        meta={"plan_items": len(checklist.items)},
    )
    return traj, log


def blind_ab(candidate, baseline, judge, rng):
    """Randomized-slot A/B comparison; returns the chosen underlying item.

    The presentation order comes from ``rng`` and the judge sees only the
    two slots, so a judge keyed to content picks the same item regardless
    of order while a slot-biased judge degrades to a coin flip.
    """
    if judge is None:
        raise ValueError("missing judgment: no judge supplied")
    if candidate.content_hash == baseline.content_hash:
        raise ValueError("candidate and baseline must be distinct")
    swapped = bool(rng.random() < 0.5)
    first, second = (baseline, candidate) if swapped else (candidate, baseline)
    verdict = judge(first, second)
    if verdict is None:
        raise ValueError("missing judgment: judge returned None")
    return first if verdict else second


def consensus_filter(multi_step_result, baseline_result, judge1, judge2, rng) -> bool:
    """True only when both judges prefer the multi-step result (logical AND)."""
    keep = True
    for judge in (judge1, judge2):
        choice = blind_ab(multi_step_result, baseline_result, judge, rng)
        keep = keep and (choice is multi_step_result)
    return keep


@dataclass(frozen=True)
class SynthesisStats:
    """Bookkeeping for one synthesis run."""

    attempted: int
    retained: int
    discard_reasons: dict
    iteration_histogram: dict

    def __post_init__(self):
        if self.retained > self.attempted:
            raise ValueError("retained cannot exceed attempted")
        if sum(self.iteration_histogram.values()) != self.retained:
            raise ValueError("iteration histogram must sum to retained")
        discarded = self.attempted - self.retained
        if sum(self.discard_reasons.values()) != discarded:
            raise ValueError("discard reasons must partition the discards")

    @property
    def retention_rate(self) -> float:
        return self.retained / self.attempted if self.attempted else 0.0

    def to_dict(self) -> dict:
        return {
            "attempted": self.attempted,
            "retained": self.retained,
            "retention_rate": self.retention_rate,
            "discard_reasons": {k: self.discard_reasons[k] for k in sorted(self.discard_reasons)},
            "iteration_histogram": {str(k): v for k, v in sorted(self.iteration_histogram.items())},
        }


def synthesize_dataset(
    prompts,
    adapters: AgentAdapters,
    budget,
    master_seed: int,
    *,
    workers: int = 1,
    max_iterations: int = MAX_ITERATIONS,
):
    """Run the engine over `prompts` and consensus-filter the survivors.

    Returns (trajectories, SynthesisStats). Every random draw is keyed by
    (master_seed, item index), and results are collected by index, so the
    output is bit-identical for any `workers` count. Survivor ids are
    ``traj-<index>``.
    """
    prompts = list(prompts)
    if not prompts:
        raise ValueError("prompts must be nonempty")
    if workers < 1:
        raise ValueError("workers must be >= 1")
    template = normalize_budget(budget)

    def one(index: int):
        prompt = prompts[index]
        traj, log = run_episode(
            prompt,
            adapters,
            template.fresh(),
            child_seed(master_seed, "episode", index),
            trajectory_id=f"traj-{index:06d}",
            max_iterations=max_iterations,
        )
        if traj is None:
            return traj, log.discard_reason
        final_image = traj.steps[traj.image_steps[-1]].image
        try:
            baseline, _truth = adapters.generator(
                oneshot_instruction(prompt), stream(master_seed, "baseline", index)
            )
            keep = consensus_filter(
                final_image,
                baseline,
                adapters.judges[0],
                adapters.judges[1],
                stream(master_seed, "ab", index),
            )
        except (AdapterFault, ToolFailure):
            return None, "format_violation"
        if not keep:
            return None, "consensus_reject"
        return traj, None

    if workers == 1:
        outcomes = [one(i) for i in range(len(prompts))]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(one, range(len(prompts))))

    retained = [traj for traj, _ in outcomes if traj is not None]
    reasons: dict[str, int] = {}
    for traj, why in outcomes:
        if traj is None:
            reasons[why] = reasons.get(why, 0) + 1
    stats = SynthesisStats(
        attempted=len(prompts),
        retained=len(retained),
        discard_reasons=reasons,
        iteration_histogram=dict(_iteration_histogram(retained).counts) if retained else {},
    )
    return retained, stats


def run_inference(
    prompt: str,
    adapters: AgentAdapters,
    max_iterations: int = MAX_ITERATIONS,
    *,
    master_seed: int = 0,
    trajectory_id: str | None = None,
):
    """Closed-loop inference: plan, generate, repeat until terminate.

    Returns (final canvas or None, Trajectory). There is no verification
    here — the planner decides when the canvas is done — but a terminate
    step is forced once `max_iterations` images exist. Generator failures
    propagate to the caller.
    """
    if max_iterations < 1:
        raise ValueError("max_iterations must be >= 1")
    gen_rng = stream(master_seed, "infer-gen")
    tid = trajectory_id or f"infer-{master_seed:016x}"
    steps: list[ReasoningStep] = []
    canvas: ImageRef | None = None
    images = 0

    while True:
        if images >= max_iterations:
            steps.append(
                ReasoningStep(
                    index=len(steps),
                    reasoning="Iteration cap reached; emitting the current canvas.",
                    action=Action.terminate(),
                )
            )
            break
        reply = adapters.planner(
            PlannerContext(
                prompt, "inference", canvas=canvas, images_so_far=images
            )
        )
        if reply.action.kind == "terminate":
            steps.append(
                ReasoningStep(
                    index=len(steps),
                    reasoning=reply.reasoning,
                    action=Action.terminate(),
                )
            )
            break
        if reply.action.kind != "image_gen" or not reply.instruction:
            raise AdapterFault(
                "inference planner must emit image_gen with an instruction, or terminate"
            )
        image, _truth = adapters.generator(reply.instruction, gen_rng)
        canvas = image
        images += 1
        steps.append(
            ReasoningStep(
                index=len(steps),
                reasoning=reply.reasoning,
                action=Action.image_gen(),
                image=image,
            )
        )

    traj = Trajectory(
        id=tid, prompt=prompt, steps=tuple(steps), terminated=True, meta={}
    )
    return canvas, traj
