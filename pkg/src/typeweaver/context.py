"""Model-input assembly: the four-segment context (preamble, usees, main
code, users) with marker tokens, per-segment token budgets, and center-out
truncation that favors certain usages."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Protocol

from .assignment import TypeAssignment
from .graph import CERTAIN, POTENTIAL, GraphError, UsageGraph
from .project import CodeElement, ElementId, ElementKind, ModuleSource, ProjectSource
from .pytypes import PyType


@dataclass(frozen=True)
class Budgets:
    """Per-segment token limits. The preamble shares the usee window, so the
    total never exceeds usees + main + users."""

    preamble: int = 1000
    usees: int = 2048
    main: int = 512
    users: int = 1536

    @property
    def total(self) -> int:
        return self.usees + self.main + self.users


class Tokenizer(Protocol):
    def tokenize(self, text: str) -> list[str]: ...


_ATOMS = re.compile(r"<extra_id_\d+>|\w+|[^\w\s]")


class AtomTokenizer:
    """Deterministic offline tokenizer: one token per identifier, number, or
    punctuation atom. Whitespace rides along with the following atom, so the
    tokens of a text concatenate back to the text; marker tokens are never
    split."""

    def tokenize(self, text: str) -> list[str]:
        tokens: list[str] = []
        pos = 0
        for m in _ATOMS.finditer(text):
            tokens.append(text[pos : m.end()])
            pos = m.end()
        if tokens and pos < len(text):
            tokens[-1] += text[pos:]
        return tokens

    def count(self, text: str) -> int:
        return len(self.tokenize(text))


def marker(index: int) -> str:
    return f"<extra_id_{index}>"


MARKER_RE = re.compile(r"<extra_id_(\d+)>")


@dataclass
class MaskedRendering:
    text: str
    slot_map: dict[int, int]  # marker index -> slot index
    element: ElementId

    @property
    def marker_count(self) -> int:
        return len(self.slot_map)


@dataclass
class SegmentItem:
    element: ElementId
    certainty: str
    tokens: int
    status: str  # "kept" | "truncated" | "dropped"
    text: str


@dataclass
class ModelInput:
    element: ElementId
    preamble: str
    usee_context: str
    main_code: str
    user_context: str
    marker_count: int
    token_counts: dict[str, int]
    slot_map: dict[int, int] = field(default_factory=dict)
    usee_items: list[SegmentItem] = field(default_factory=list)
    user_items: list[SegmentItem] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def concatenated(self) -> str:
        parts = [
            p
            for p in (self.preamble, self.usee_context, self.main_code, self.user_context)
            if p
        ]
        return "\n\n".join(parts) + "\n"


# ---------------------------------------------------------------------------
# element renderings


def _pinned_types(element: CodeElement, assignment: TypeAssignment) -> dict[int, PyType]:
    pinned = {}
    for slot in element.slots:
        entry = assignment.entry(element.id, slot.index)
        if entry is not None and entry.provenance in ("user_override", "gold"):
            pinned[slot.index] = entry.type
    return pinned


def _assigned_types(element: CodeElement, assignment: TypeAssignment) -> dict[int, PyType]:
    out = {}
    for slot in element.slots:
        entry = assignment.entry(element.id, slot.index)
        if entry is not None:
            out[slot.index] = entry.type
    return out


def _render_with_slots(
    element: CodeElement,
    types: dict[int, PyType],
    markers: dict[int, int],
) -> str:
    """The element's source with each slot region rewritten: a type, a marker,
    or nothing (existing annotations are never shown unless assigned)."""
    edits = []
    for slot in element.slots:
        if slot.index in markers:
            replacement = slot.prefix + marker(markers[slot.index])
        elif slot.index in types:
            replacement = slot.prefix + types[slot.index].render()
        else:
            replacement = ""
        edits.append((slot.span[0], slot.span[1], replacement))
    text = element.source
    for start, end, replacement in sorted(edits, reverse=True):
        text = text[:start] + replacement + text[end:]
    return text


def render_main_code(
    element: CodeElement,
    assignment: TypeAssignment,
    marker_base: int = 0,
) -> MaskedRendering:
    """The main-code segment: the element's own source with indexed markers at
    every slot that is not pinned by a user override or gold entry; methods
    and attributes are shown under their class header."""
    pinned = _pinned_types(element, assignment)
    markers: dict[int, int] = {}
    slot_map: dict[int, int] = {}
    next_marker = marker_base
    for slot in element.slots:
        if slot.index in pinned:
            continue
        markers[slot.index] = next_marker
        slot_map[next_marker] = slot.index
        next_marker += 1
    body = _render_with_slots(element, pinned, markers)
    if element.owner_class:
        body = element.owner_class + "\n" + body
    return MaskedRendering(text=body, slot_map=slot_map, element=element.id)


def render_untyped_source(element: CodeElement, assignment: TypeAssignment) -> str:
    """Full source with annotations taken from the assignment only (used for
    the user context)."""
    body = _render_with_slots(element, _assigned_types(element, assignment), {})
    if element.owner_class:
        body = element.owner_class + "\n" + body
    return body


def render_signature(element: CodeElement, assignment: TypeAssignment) -> str:
    """One-line signature with types filled from the assignment where
    available; function bodies are elided."""
    types = _assigned_types(element, assignment)
    if element.kind in (ElementKind.FUNCTION, ElementKind.METHOD):
        parts = []
        for p in element.params:
            if not p.name and p.display:
                parts.append(p.display)
                continue
            piece = p.display
            if p.slot_index is not None and p.slot_index in types:
                piece += f": {types[p.slot_index].render()}"
            if p.default is not None:
                piece += f" = {p.default}" if ":" in piece else f"={p.default}"
            parts.append(piece)
        ret_slot = element.slots[-1] if element.slots else None
        ret = ""
        if (
            ret_slot is not None
            and ret_slot.role == "return"
            and ret_slot.index in types
        ):
            ret = f" -> {types[ret_slot.index].render()}"
        prefix = "async def" if element.is_async else "def"
        return f"{prefix} {element.name}({', '.join(parts)}){ret}: ..."
    slot = element.slots[0] if element.slots else None
    if slot is not None and slot.index in types:
        return f"{element.name}: {types[slot.index].render()}"
    return element.name


def build_preamble(module: ModuleSource) -> str:
    """Imports, class headers, and type-variable declarations of the module,
    in source order."""
    items: list[tuple[int, str]] = []
    items.extend(module.import_stmts)
    items.extend(module.class_headers)
    items.extend(module.type_var_decls)
    items.sort()
    if not items:
        return ""
    return "\n".join(text for _, text in items)


# ---------------------------------------------------------------------------
# segment assembly


def _truncate_items(
    items: list[SegmentItem],
    budget: int,
    tokenizer,
    inner_first: list[SegmentItem],
    cut_from_start: bool,
) -> None:
    """Allocate `budget` tokens walking from the center outwards; the boundary
    item keeps its inner-facing tokens."""
    remaining = budget
    for item in inner_first:
        if remaining <= 0:
            item.status = "dropped"
            item.text = ""
            continue
        if item.tokens <= remaining:
            item.status = "kept"
            remaining -= item.tokens
            continue
        toks = tokenizer.tokenize(item.text)
        kept = toks[-remaining:] if cut_from_start else toks[:remaining]
        item.status = "truncated"
        item.text = "".join(kept)
        remaining = 0


def _render_usee_item(project: ProjectSource, eid: ElementId, assignment) -> str:
    return render_signature(project.element(eid), assignment)


def _render_user_item(project: ProjectSource, eid: ElementId, assignment) -> str:
    source = render_untyped_source(project.element(eid), assignment)
    return f"# module: {eid.module}\n{source}"


def build_model_input(
    project: ProjectSource,
    graph: UsageGraph,
    element_id: ElementId,
    assignment: TypeAssignment,
    tokenizer: Tokenizer | None = None,
    budgets: Budgets | None = None,
    marker_base: int = 0,
) -> ModelInput:
    """Assemble the four-part model input for one element. Certain-usage items
    sit adjacent to the main code; truncation removes tokens from the outer
    ends of the usee/user segments and never cuts certain items while a
    potential item on the same side survives."""
    tokenizer = tokenizer or AtomTokenizer()
    budgets = budgets or Budgets()
    if element_id not in set(graph.nodes):
        raise GraphError(f"element not in graph: {element_id}")
    element = project.element(element_id)
    module = project.modules[element_id.module]
    warnings: list[str] = []

    # Main code.
    rendering = render_main_code(element, assignment, marker_base)
    main_text = rendering.text
    slot_map = dict(rendering.slot_map)
    main_tokens = tokenizer.tokenize(main_text)
    if len(main_tokens) > budgets.main:
        main_text = "".join(main_tokens[: budgets.main])
        kept_markers = {int(m.group(1)) for m in MARKER_RE.finditer(main_text)}
        slot_map = {m: s for m, s in slot_map.items() if m in kept_markers}
        warnings.append(
            f"main code exceeds budget ({len(main_tokens)} > {budgets.main}); tail truncated"
        )
    main_count = min(len(main_tokens), budgets.main)

    # Preamble (outer end is the start; counted within the usee allotment).
    preamble_text = build_preamble(module)
    pre_tokens = tokenizer.tokenize(preamble_text)
    if len(pre_tokens) > budgets.preamble:
        preamble_text = "".join(pre_tokens[-budgets.preamble :])
        warnings.append("preamble truncated")
    pre_count = min(len(pre_tokens), budgets.preamble)

    # Usee items: direct usees plus the usees of every user.
    usee_certainty: dict[ElementId, str] = {}
    for edge in graph.usee_edges(element_id):
        usee_certainty[edge.usee] = edge.certainty
    for user_edge in graph.user_edges(element_id):
        for edge in graph.usee_edges(user_edge.user):
            prev = usee_certainty.get(edge.usee)
            if prev is None or (prev == POTENTIAL and edge.certainty == CERTAIN):
                usee_certainty[edge.usee] = edge.certainty
    usee_certainty.pop(element_id, None)

    def order_key(eid: ElementId) -> tuple:
        return graph.order_keys.get(eid, (str(eid),))

    certain_usees = sorted(
        (e for e, c in usee_certainty.items() if c == CERTAIN), key=order_key
    )
    potential_usees = sorted(
        (e for e, c in usee_certainty.items() if c == POTENTIAL), key=order_key
    )
    # Reading order: potential first (outer), certain adjacent to main code.
    usee_items = [
        SegmentItem(e, POTENTIAL, 0, "kept", _render_usee_item(project, e, assignment))
        for e in potential_usees
    ] + [
        SegmentItem(e, CERTAIN, 0, "kept", _render_usee_item(project, e, assignment))
        for e in certain_usees
    ]
    for item in usee_items:
        item.tokens = len(tokenizer.tokenize(item.text))
    usee_budget = max(0, budgets.usees - pre_count)
    _truncate_items(
        usee_items,
        usee_budget,
        tokenizer,
        inner_first=list(reversed(usee_items)),
        cut_from_start=True,
    )
    usee_text = "\n".join(i.text for i in usee_items if i.status != "dropped")

    # User items: full sources, certain adjacent to main code (reading order:
    # certain first, potential after).
    user_edges = graph.user_edges(element_id)
    seen_users = set()
    user_items = []
    for edge in user_edges:
        if edge.user in seen_users or edge.user == element_id:
            continue
        seen_users.add(edge.user)
        user_items.append(
            SegmentItem(
                edge.user,
                edge.certainty,
                0,
                "kept",
                _render_user_item(project, edge.user, assignment),
            )
        )
    for item in user_items:
        item.tokens = len(tokenizer.tokenize(item.text))
    _truncate_items(
        user_items,
        budgets.users,
        tokenizer,
        inner_first=list(user_items),
        cut_from_start=False,
    )
    user_text = "\n".join(i.text for i in user_items if i.status != "dropped")

    usee_count = len(tokenizer.tokenize(usee_text))
    user_count = len(tokenizer.tokenize(user_text))
    token_counts = {
        "preamble": pre_count,
        "usees": usee_count,
        "main": main_count,
        "users": user_count,
        "total": pre_count + usee_count + main_count + user_count,
    }
    return ModelInput(
        element=element_id,
        preamble=preamble_text,
        usee_context=usee_text,
        main_code=main_text,
        user_context=user_text,
        marker_count=len(slot_map),
        token_counts=token_counts,
        slot_map=slot_map,
        usee_items=usee_items,
        user_items=user_items,
        warnings=warnings,
    )
