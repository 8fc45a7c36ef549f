"""Shared fixtures and the acceptance-criteria terminal summary."""

from __future__ import annotations

import re

import pytest

from clvr import Action, ImageRef, ReasoningStep, Trajectory
from clvr.trajectory import sim_content_hash


def make_image(name: str, source: str = "generated") -> ImageRef:
    return ImageRef(name, source, sim_content_hash(name))


def make_trajectory(
    n_images: int,
    *,
    tid: str = "traj-000000",
    prompt: str = "a red cube on a table",
    terminated: bool = True,
    passive_pass: bool | None = True,
) -> Trajectory:
    """A well-formed trajectory: n image steps, then one terminate step."""
    steps = [
        ReasoningStep(
            index=i,
            reasoning=f"step {i}: render toward the prompt",
            action=Action.image_gen(),
            image=make_image(f"{tid}-img-{i}", "generated" if i == 0 else "edited"),
            passive_pass=passive_pass,
        )
        for i in range(n_images)
    ]
    if terminated:
        steps.append(
            ReasoningStep(
                index=n_images,
                reasoning="done; emitting the canvas",
                action=Action.terminate(),
            )
        )
    return Trajectory(id=tid, prompt=prompt, steps=tuple(steps), terminated=terminated)


@pytest.fixture
def trajectory() -> Trajectory:
    return make_trajectory(3)


_CRITERION = re.compile(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One PASS/FAIL line per acceptance criterion, after the normal output."""
    rows: dict[int, tuple[str, str]] = {}
    for status, reports in terminalreporter.stats.items():
        if status not in ("passed", "failed", "error"):
            continue
        for rep in reports:
            m = _CRITERION.search(getattr(rep, "nodeid", ""))
            if not m:
                continue
            num, label = int(m.group(1)), m.group(2).replace("_", " ")
            verdict = "PASS" if status == "passed" else "FAIL"
            if rows.get(num, ("", "PASS"))[1] != "FAIL":
                rows[num] = (label, verdict)
    if rows:
        terminalreporter.write_sep("-", "acceptance criteria")
        for num in sorted(rows):
            label, verdict = rows[num]
            terminalreporter.write_line(f"criterion {num:02d} ({label}): {verdict}")
