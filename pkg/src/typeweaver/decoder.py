"""Decoding orchestration: visit schedules per strategy, iterative decoding
that threads the growing type assignment through every context, user-guided
decoding with overrides, and the stepwise interactive engine."""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field
from enum import Enum

from .assignment import GOLD, PREDICTED, USER_OVERRIDE, TypeAssignment
from .context import Budgets, ModelInput, Tokenizer, build_model_input
from .graph import UsageGraph, topological_order
from .predictor import DecodeParams, PredictionRequest, PredictorError, predict
from .project import ElementId, ProjectSource, sort_key
from .pytypes import PyType, TypeParseError, normalize, parse_type


class Strategy(str, Enum):
    INDEPENDENT = "independent"
    RANDOM = "random"
    USER_TO_USEE = "usertousee"
    USEE_TO_USER = "useetouser"
    TWO_PASS = "twopass"


@dataclass
class DecodingPlan:
    strategy: Strategy
    visits: list[tuple[int, ElementId]]  # (pass number, element)
    seed: int | None = None


def make_plan(graph: UsageGraph, strategy: Strategy | str, seed: int | None = None) -> DecodingPlan:
    strategy = Strategy(strategy)
    topo = topological_order(graph)
    if strategy == Strategy.USEE_TO_USER:
        visits = [(1, e) for e in topo]
    elif strategy == Strategy.USER_TO_USEE:
        visits = [(1, e) for e in reversed(topo)]
    elif strategy == Strategy.TWO_PASS:
        visits = [(1, e) for e in topo] + [(2, e) for e in reversed(topo)]
    elif strategy == Strategy.RANDOM:
        nodes = sorted(graph.nodes, key=sort_key)
        random.Random(seed).shuffle(nodes)
        visits = [(1, e) for e in nodes]
    else:  # Independent: no ordering dependency; fixed order for determinism
        visits = [(1, e) for e in sorted(graph.nodes, key=sort_key)]
    return DecodingPlan(strategy=strategy, visits=visits, seed=seed)


@dataclass
class VisitRecord:
    pass_number: int
    element: str
    status: str  # "predicted" | "skipped" | "failed"
    token_counts: dict[str, int] = field(default_factory=dict)
    predictions: dict[int, str] = field(default_factory=dict)  # slot -> rendered type
    diff: dict[int, tuple[str | None, str]] = field(default_factory=dict)
    timestamp: float = 0.0
    error: str | None = None
    inputs: dict[str, str] | None = None


@dataclass
class DecodeTrace:
    records: list[VisitRecord] = field(default_factory=list)

    def to_json_dict(self, include_timestamps: bool = False) -> dict:
        out = []
        for r in self.records:
            rec = {
                "pass": r.pass_number,
                "element": r.element,
                "status": r.status,
                "token_counts": r.token_counts,
                "predictions": {str(k): v for k, v in sorted(r.predictions.items())},
                "diff": {
                    str(k): {"old": old, "new": new}
                    for k, (old, new) in sorted(r.diff.items())
                },
            }
            if r.error:
                rec["error"] = r.error
            if r.inputs is not None:
                rec["inputs"] = r.inputs
            if include_timestamps:
                rec["timestamp"] = r.timestamp
            out.append(rec)
        return {"schema_version": 1, "visits": out}


@dataclass
class DecoderConfig:
    budgets: Budgets = field(default_factory=Budgets)
    tokenizer: Tokenizer | None = None
    marker_base: int = 0
    decode_params: DecodeParams = field(default_factory=DecodeParams)
    include_inputs: bool = False


def _visit_element(
    project: ProjectSource,
    graph: UsageGraph,
    eid: ElementId,
    context_assignment: TypeAssignment,
    backend,
    cfg: DecoderConfig,
    pass_number: int,
) -> tuple[VisitRecord, ModelInput | None, dict[int, PyType]]:
    element = project.element(eid)
    record = VisitRecord(
        pass_number=pass_number,
        element=str(eid),
        status="skipped",
        timestamp=time.time(),
    )
    if not element.slots:
        return record, None, {}
    mi = build_model_input(
        project,
        graph,
        eid,
        context_assignment,
        tokenizer=cfg.tokenizer,
        budgets=cfg.budgets,
        marker_base=cfg.marker_base,
    )
    record.token_counts = dict(mi.token_counts)
    if cfg.include_inputs:
        record.inputs = {
            "preamble": mi.preamble,
            "usees": mi.usee_context,
            "main_code": mi.main_code,
            "users": mi.user_context,
        }
    if mi.marker_count == 0:
        return record, mi, {}
    request = PredictionRequest.from_model_input(
        mi, cfg.decode_params, cfg.marker_base
    )
    try:
        result = predict(backend, request)
    except PredictorError as e:
        record.status = "failed"
        record.error = str(e)
        return record, mi, {}
    slot_types: dict[int, PyType] = {}
    for marker_idx, slot_idx in mi.slot_map.items():
        slot_types[slot_idx] = result.types[marker_idx - cfg.marker_base]
    record.status = "predicted"
    record.predictions = {s: t.render() for s, t in slot_types.items()}
    return record, mi, slot_types


def _apply_predictions(
    assignment: TypeAssignment,
    eid: ElementId,
    slot_types: dict[int, PyType],
    record: VisitRecord,
) -> None:
    for slot_idx, t in slot_types.items():
        if assignment.provenance(eid, slot_idx) == USER_OVERRIDE:
            continue
        old = assignment.get(eid, slot_idx)
        assignment.set(eid, slot_idx, t, PREDICTED)
        new = assignment.get(eid, slot_idx)
        if old != new:
            record.diff[slot_idx] = (old.render() if old else None, new.render())


def run_decoding(
    project: ProjectSource,
    graph: UsageGraph,
    plan: DecodingPlan,
    backend,
    config: DecoderConfig | None = None,
    initial: TypeAssignment | None = None,
) -> tuple[TypeAssignment, DecodeTrace]:
    """Run the plan: each visit builds a context from the current assignment,
    predicts, and overwrites that element's entries (user overrides are never
    overwritten). Predictor failures skip the visit, never abort the run."""
    cfg = config or DecoderConfig()
    assignment = initial.copy() if initial is not None else TypeAssignment()
    frozen_context = (
        assignment.copy()
        if plan.strategy == Strategy.INDEPENDENT or getattr(backend, "wants_untyped_context", False)
        else None
    )
    trace = DecodeTrace()
    for pass_number, eid in plan.visits:
        context = frozen_context if frozen_context is not None else assignment
        record, _, slot_types = _visit_element(
            project, graph, eid, context, backend, cfg, pass_number
        )
        if slot_types:
            _apply_predictions(assignment, eid, slot_types, record)
        trace.records.append(record)
    return assignment, trace


@dataclass
class UserGuidedReport:
    oracle_slots: int
    agreements: int
    predictions: TypeAssignment  # raw model predictions before overrides
    trace: DecodeTrace

    @property
    def agreement_rate(self) -> float | None:
        if not self.oracle_slots:
            return None
        return self.agreements / self.oracle_slots


def run_user_guided(
    project: ProjectSource,
    graph: UsageGraph,
    backend,
    oracle,
    config: DecoderConfig | None = None,
) -> tuple[TypeAssignment, UserGuidedReport]:
    """Usee-to-user decoding where, after each element is predicted, every
    slot with a defined oracle value is overridden with it before decoding
    proceeds. Returns the final assignment plus agreement statistics."""
    cfg = config or DecoderConfig()
    if not callable(oracle):
        table = dict(oracle)
        oracle = lambda eid, slot: table.get((eid, slot))  # noqa: E731
    plan = make_plan(graph, Strategy.USEE_TO_USER)
    assignment = TypeAssignment()
    raw_predictions = TypeAssignment()
    trace = DecodeTrace()
    oracle_slots = 0
    agreements = 0
    for pass_number, eid in plan.visits:
        element = project.element(eid)
        record, _, slot_types = _visit_element(
            project, graph, eid, assignment, backend, cfg, pass_number
        )
        if slot_types:
            _apply_predictions(assignment, eid, slot_types, record)
            for slot_idx, t in slot_types.items():
                raw_predictions.set(eid, slot_idx, t, PREDICTED)
        for slot in element.slots:
            target = oracle(eid, slot.index)
            if target is None:
                continue
            target = normalize(target)
            oracle_slots += 1
            if slot.index in slot_types and slot_types[slot.index] == target:
                agreements += 1
            assignment.set(eid, slot.index, target, USER_OVERRIDE)
        trace.records.append(record)
    report = UserGuidedReport(
        oracle_slots=oracle_slots,
        agreements=agreements,
        predictions=raw_predictions,
        trace=trace,
    )
    return assignment, report


# ---------------------------------------------------------------------------
# stepwise interactive decoding (drives the review service)


class DecisionError(ValueError):
    """A decision that does not match the pending element or its slots."""


@dataclass
class PendingElement:
    element: ElementId
    index: int
    model_input: ModelInput
    predictions: dict[int, PyType]  # slot -> predicted type
    record: VisitRecord


class InteractiveDecoder:
    """One usee-to-user pass where every element waits for per-slot decisions
    (accept or override) before decoding moves on."""

    def __init__(
        self,
        project: ProjectSource,
        graph: UsageGraph,
        backend,
        config: DecoderConfig | None = None,
    ):
        self.project = project
        self.graph = graph
        self.backend = backend
        self.cfg = config or DecoderConfig()
        plan = make_plan(graph, Strategy.USEE_TO_USER)
        self.schedule = [
            eid for _, eid in plan.visits if project.element(eid).slots
        ]
        self.assignment = TypeAssignment()
        self.cursor = 0
        self.trace = DecodeTrace()
        self._pending: PendingElement | None = None

    @property
    def element_count(self) -> int:
        return len(self.schedule)

    @property
    def done(self) -> bool:
        return self.cursor >= len(self.schedule)

    def current(self) -> PendingElement:
        if self.done:
            raise DecisionError("decoding is complete")
        if self._pending is None:
            eid = self.schedule[self.cursor]
            record, mi, slot_types = _visit_element(
                self.project, self.graph, eid, self.assignment, self.backend, self.cfg, 1
            )
            self._pending = PendingElement(
                element=eid,
                index=self.cursor,
                model_input=mi,
                predictions=slot_types,
                record=record,
            )
        return self._pending

    def decide(self, decisions: dict[int, tuple[str, str | None]]) -> None:
        """Apply one decision per pending slot: ('accept', None) or
        ('override', type_text). The cursor advances only when every pending
        slot is decided."""
        pending = self.current()
        element = self.project.element(pending.element)
        slot_indexes = {s.index for s in element.slots}
        if set(decisions) != slot_indexes:
            raise DecisionError(
                f"decisions must cover exactly slots {sorted(slot_indexes)}"
            )
        resolved: dict[int, tuple[PyType, str]] = {}
        for slot_idx, (action, text) in decisions.items():
            if action == "accept":
                predicted = pending.predictions.get(slot_idx)
                if predicted is None:
                    raise DecisionError(f"slot {slot_idx} has no prediction to accept")
                resolved[slot_idx] = (predicted, PREDICTED)
            elif action == "override":
                resolved[slot_idx] = (normalize(parse_type(text or "")), USER_OVERRIDE)
            else:
                raise DecisionError(f"unknown action {action!r}")
        for slot_idx, (t, provenance) in resolved.items():
            self.assignment.set(pending.element, slot_idx, t, provenance)
        self.trace.records.append(pending.record)
        self.cursor += 1
        self._pending = None

    def undo(self) -> None:
        """Rewind one decided element; it becomes pending again and will be
        re-predicted against the rolled-back assignment."""
        if self.cursor == 0:
            raise DecisionError("nothing to undo")
        self.cursor -= 1
        eid = self.schedule[self.cursor]
        self.assignment.remove_element(eid)
        if self.trace.records:
            self.trace.records.pop()
        self._pending = None

    def replay(self, eid_str: str, predicted: dict[int, str], decisions: dict[int, tuple[str, str | None]]) -> None:
        """Re-apply a logged decision without calling the backend."""
        if self.done:
            raise DecisionError("decoding is complete")
        eid = self.schedule[self.cursor]
        if str(eid) != eid_str:
            raise DecisionError(f"replay out of order: {eid_str} != {eid}")
        for slot_idx, (action, text) in decisions.items():
            if action == "accept":
                self.assignment.set(
                    eid, slot_idx, parse_type(predicted[slot_idx]), PREDICTED
                )
            else:
                self.assignment.set(
                    eid, slot_idx, normalize(parse_type(text or "")), USER_OVERRIDE
                )
        self.cursor += 1
        self._pending = None
