"""Semantic dependency graphs for prompt-complexity scoring.

A prompt is modeled as entity groups (label, count, attribute set), typed
relations between groups, and a multiset of hard constraints (global, count,
text, neg). Graphs come from annotation dicts or from a small prompt DSL:

    prompt := stmt (";" stmt)*
    stmt   := group | rel | cnst
    group  := INT "[" attrs? "]" WORD
    attrs  := WORD ("," WORD)*
    rel    := "@rel(" INT "," WORD "," INT ")"
    cnst   := "@count" | "@global(" WORD ")" | "@text(" STRING ")" | "@neg(" WORD ")"

Relation arguments are 1-based group references on the surface; graphs store
them 0-based. The word count W of a DSL prompt is the number of
whitespace-separated tokens in the raw text.

The complexity score is

    C_task = alpha·N·ln(1+N) + beta·E + gamma_w·ln(1+W) + R_extra

with N the total entity count, E the attribute edges plus relations, and
R_extra the weighted constraint total.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

CONSTRAINT_TYPES = ("global", "count", "text", "neg")


@dataclass(frozen=True)
class EntityGroup:
    """A group of `count` identical entities sharing an attribute set."""

    label: str
    count: int
    attributes: frozenset = frozenset()

    def __post_init__(self):
        if self.count < 1:
            raise ValueError(f"group {self.label!r}: count must be >= 1")
        object.__setattr__(self, "attributes", frozenset(self.attributes))


@dataclass(frozen=True)
class SemanticGraph:
    """Entity groups, relations, constraints, and the prompt word count."""

    groups: tuple[EntityGroup, ...] = ()
    relations: tuple[tuple[int, str, int], ...] = ()
    constraints: dict = field(default_factory=dict)
    word_count: int = 0

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(self.groups))
        object.__setattr__(
            self, "relations", tuple((int(i), w, int(j)) for i, w, j in self.relations)
        )
        object.__setattr__(self, "constraints", dict(self.constraints))
        for i, word, j in self.relations:
            for idx in (i, j):
                if not 0 <= idx < len(self.groups):
                    raise ValueError(
                        f"relation ({i},{word!r},{j}): group index {idx} out of range"
                    )
        for ctype, n in self.constraints.items():
            if ctype not in CONSTRAINT_TYPES:
                raise ValueError(f"unknown constraint type {ctype!r}")
            if n < 0:
                raise ValueError(f"constraint {ctype!r}: negative multiplicity")
        if self.word_count < 0:
            raise ValueError("word_count must be >= 0")

    def to_dict(self) -> dict:
        return {
            "groups": [
                {
                    "label": g.label,
                    "count": g.count,
                    "attributes": sorted(g.attributes),
                }
                for g in self.groups
            ],
            "relations": [[i, w, j] for i, w, j in self.relations],
            "constraints": {k: self.constraints[k] for k in sorted(self.constraints)},
            "word_count": self.word_count,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SemanticGraph":
        return cls(
            groups=tuple(
                EntityGroup(g["label"], g["count"], frozenset(g.get("attributes", ())))
                for g in d.get("groups", ())
            ),
            relations=tuple((r[0], r[1], r[2]) for r in d.get("relations", ())),
            constraints=dict(d.get("constraints", {})),
            word_count=d.get("word_count", 0),
        )


@dataclass(frozen=True)
class ComplexityWeights:
    """Weights of the C_task score; defaults follow the reference protocol."""

    alpha: float = 1.0
    beta: float = 1.0
    gamma_w: float = 1.0
    c_global: float = 0.5
    c_count: float = 2.0
    c_text: float = 3.0
    c_neg: float = 1.5

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma_w", "c_global", "c_count", "c_text", "c_neg"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    def constraint_weight(self, ctype: str) -> float:
        return {
            "global": self.c_global,
            "count": self.c_count,
            "text": self.c_text,
            "neg": self.c_neg,
        }[ctype]


class DslSyntaxError(ValueError):
    """DSL parse failure with 1-based line/column position."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class _Scanner:
    """Character scanner with line/column tracking."""

    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def _linecol(self, pos: int) -> tuple[int, int]:
        line = self.text.count("\n", 0, pos) + 1
        start = self.text.rfind("\n", 0, pos) + 1
        return line, pos - start + 1

    def error(self, message: str, pos: int | None = None) -> DslSyntaxError:
        line, col = self._linecol(self.pos if pos is None else pos)
        return DslSyntaxError(message, line, col)

    def skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def at_end(self) -> bool:
        self.skip_ws()
        return self.pos >= len(self.text)

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, char: str) -> None:
        if self.peek() != char:
            raise self.error(f"expected {char!r}")
        self.pos += 1

    def take_int(self) -> int:
        self.skip_ws()
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos].isdigit():
            self.pos += 1
        if self.pos == start:
            raise self.error("expected an integer")
        return int(self.text[start : self.pos])

    def take_word(self) -> str:
        self.skip_ws()
        start = self.pos
        while self.pos < len(self.text) and (
            self.text[self.pos].isalnum() or self.text[self.pos] == "_"
        ):
            self.pos += 1
        if self.pos == start or self.text[start].isdigit():
            raise self.error("expected a word")
        return self.text[start : self.pos]

    def take_string(self) -> str:
        self.skip_ws()
        if self.peek() != '"':
            raise self.error("expected a quoted string")
        start = self.pos
        self.pos += 1
        end = self.text.find('"', self.pos)
        if end < 0:
            raise self.error("unterminated string", pos=start)
        value = self.text[self.pos : end]
        self.pos = end + 1
        return value


def parse_dsl(text: str) -> SemanticGraph:
    """Parse a prompt written in the structured DSL into a SemanticGraph.

    Empty input yields the empty graph. Relation references are resolved
    after the full prompt is read, so forward references are legal; a
    reference to a missing group is a dangling-reference error.
    """
    words = len(text.split())
    sc = _Scanner(text)
    groups: list[EntityGroup] = []
    relations: list[tuple[int, str, int, int]] = []  # (i, word, j, src_pos)
    constraints: dict[str, int] = {}
    if sc.at_end():
        return SemanticGraph(word_count=words)
    while True:
        _parse_stmt(sc, groups, relations, constraints)
        if sc.at_end():
            break
        sc.expect(";")
        if sc.at_end():
            raise sc.error("expected a statement after ';'")
    resolved = []
    for i, word, j, src in relations:
        for ref in (i, j):
            if not 1 <= ref <= len(groups):
                raise sc.error(
                    f"dangling reference: group {ref} of {len(groups)}", pos=src
                )
        resolved.append((i - 1, word, j - 1))
    return SemanticGraph(tuple(groups), tuple(resolved), constraints, words)


def _parse_stmt(sc: _Scanner, groups, relations, constraints) -> None:
    ch = sc.peek()
    if ch == "@":
        at_pos = sc.pos
        sc.pos += 1
        tag = sc.take_word()
        if tag == "rel":
            sc.expect("(")
            i = sc.take_int()
            sc.expect(",")
            word = sc.take_word()
            sc.expect(",")
            j = sc.take_int()
            sc.expect(")")
            relations.append((i, word, j, at_pos))
        elif tag == "count":
            constraints["count"] = constraints.get("count", 0) + 1
        elif tag in ("global", "neg"):
            sc.expect("(")
            sc.take_word()
            sc.expect(")")
            constraints[tag] = constraints.get(tag, 0) + 1
        elif tag == "text":
            sc.expect("(")
            sc.take_string()
            sc.expect(")")
            constraints["text"] = constraints.get("text", 0) + 1
        else:
            raise sc.error(f"unknown constraint tag @{tag}", pos=at_pos)
    elif ch.isdigit():
        count = sc.take_int()
        sc.expect("[")
        attrs: list[str] = []
        if sc.peek() != "]":
            attrs.append(sc.take_word())
            while sc.peek() == ",":
                sc.expect(",")
                attrs.append(sc.take_word())
        sc.expect("]")
        label = sc.take_word()
        groups.append(EntityGroup(label, count, frozenset(attrs)))
    else:
        raise sc.error("expected a statement")


def node_edge_counts(g: SemanticGraph) -> tuple[int, int, int]:
    """(N, E_attr, E): entity total, attribute edges, and all edges."""
    n = sum(grp.count for grp in g.groups)
    e_attr = sum(grp.count * len(grp.attributes) for grp in g.groups)
    return n, e_attr, e_attr + len(g.relations)


def r_extra(g: SemanticGraph, w: ComplexityWeights) -> float:
    """Weighted constraint total Σ c_type · n_type."""
    return sum(
        w.constraint_weight(ctype) * n for ctype, n in g.constraints.items()
    )


def c_task(
    g: SemanticGraph, w: ComplexityWeights | None = None, log_base: float | None = None
) -> float:
    """Complexity score alpha·N·ln(1+N) + beta·E + gamma_w·ln(1+W) + R_extra.

    Logarithms are natural by default; pass log_base to change the base.
    """
    w = w or ComplexityWeights()
    log = math.log if log_base is None else lambda x: math.log(x, log_base)
    n, _, e = node_edge_counts(g)
    return (
        w.alpha * n * log(1 + n)
        + w.beta * e
        + w.gamma_w * log(1 + g.word_count)
        + r_extra(g, w)
    )


class InfeasibleTrimError(ValueError):
    """Raised when no removal sequence can reach the trim target."""


def _removal_candidate(g: SemanticGraph):
    """Next element to remove, per the fixed priority order.

    Attributes go first (lexicographically last attribute first; the
    highest-indexed group breaks ties), then relations (last in list order),
    then entity count decrements (largest group first, lowest index on
    ties). Constraints are never removed. Returns None when nothing is
    removable.
    """
    attrs = [
        (attr, idx)
        for idx, grp in enumerate(g.groups)
        for attr in grp.attributes
    ]
    if attrs:
        attr, idx = max(attrs)
        return ("attribute", idx, attr)
    if g.relations:
        return ("relation", len(g.relations) - 1, g.relations[-1])
    countable = [(grp.count, -idx) for idx, grp in enumerate(g.groups) if grp.count > 1]
    if countable:
        _, neg_idx = max(countable)
        return ("count", -neg_idx, None)
    return None


def _apply_removal(g: SemanticGraph, removal) -> SemanticGraph:
    kind, idx, payload = removal
    groups = list(g.groups)
    relations = list(g.relations)
    if kind == "attribute":
        grp = groups[idx]
        groups[idx] = EntityGroup(grp.label, grp.count, grp.attributes - {payload})
    elif kind == "relation":
        del relations[idx]
    elif kind == "count":
        grp = groups[idx]
        groups[idx] = EntityGroup(grp.label, grp.count - 1, grp.attributes)
    else:  # pragma: no cover - internal
        raise AssertionError(kind)
    return SemanticGraph(tuple(groups), tuple(relations), g.constraints, g.word_count)


def trim(
    g: SemanticGraph,
    target: tuple,
    w: ComplexityWeights | None = None,
    log: list | None = None,
) -> SemanticGraph:
    """Remove elements until C_task falls inside the target region.

    ``target`` is ((c_lo, c_hi), (w_lo, w_hi)); None bounds are open.
    Trimming only deletes graph elements, so the word count is fixed: a W
    outside its range is infeasible up front. Removal follows the fixed
    priority order and stops as soon as the score is inside [c_lo, c_hi];
    overshooting below c_lo or running out of removable elements raises
    InfeasibleTrimError. Pass ``log`` to collect (removal, graph_after)
    pairs for replay.
    """
    w = w or ComplexityWeights()
    (c_lo, c_hi), (w_lo, w_hi) = target
    c_lo = -math.inf if c_lo is None else c_lo
    c_hi = math.inf if c_hi is None else c_hi
    w_lo = -math.inf if w_lo is None else w_lo
    w_hi = math.inf if w_hi is None else w_hi
    if not w_lo <= g.word_count <= w_hi:
        raise InfeasibleTrimError(
            f"word count {g.word_count} outside [{w_lo}, {w_hi}] "
            "and trimming cannot change it"
        )
    score = c_task(g, w)
    if score < c_lo:
        raise InfeasibleTrimError(
            f"C_task {score:.4f} already below target minimum {c_lo}"
        )
    while score > c_hi:
        removal = _removal_candidate(g)
        if removal is None:
            raise InfeasibleTrimError(
                f"no removable elements left at C_task {score:.4f} > {c_hi}"
            )
        g = _apply_removal(g, removal)
        score = c_task(g, w)
        if log is not None:
            log.append((removal, g))
        if score < c_lo:
            raise InfeasibleTrimError(
                f"removal overshot: C_task {score:.4f} fell below {c_lo}"
            )
    return g
