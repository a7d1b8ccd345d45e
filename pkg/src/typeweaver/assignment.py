"""The evolving slot-to-type map threaded through decoding and evaluation."""

from __future__ import annotations

from dataclasses import dataclass

from .project import ElementId, ProjectSource
from .pytypes import PyType, normalize, parse_type

PREDICTED = "predicted"
USER_OVERRIDE = "user_override"
GOLD = "gold"

_PROVENANCES = (PREDICTED, USER_OVERRIDE, GOLD)

SlotKey = tuple[ElementId, int]


@dataclass(frozen=True)
class AssignmentEntry:
    type: PyType
    provenance: str


class TypeAssignment:
    """Maps (element, slot index) to a normalized type with provenance."""

    def __init__(self, entries: dict[SlotKey, AssignmentEntry] | None = None):
        self._entries: dict[SlotKey, AssignmentEntry] = dict(entries or {})

    def set(self, eid: ElementId, slot: int, t: PyType, provenance: str = PREDICTED) -> None:
        if provenance not in _PROVENANCES:
            raise ValueError(f"unknown provenance: {provenance}")
        self._entries[(eid, slot)] = AssignmentEntry(normalize(t), provenance)

    def get(self, eid: ElementId, slot: int) -> PyType | None:
        entry = self._entries.get((eid, slot))
        return entry.type if entry else None

    def entry(self, eid: ElementId, slot: int) -> AssignmentEntry | None:
        return self._entries.get((eid, slot))

    def provenance(self, eid: ElementId, slot: int) -> str | None:
        entry = self._entries.get((eid, slot))
        return entry.provenance if entry else None

    def for_element(self, eid: ElementId) -> dict[int, AssignmentEntry]:
        return {
            slot: entry for (e, slot), entry in self._entries.items() if e == eid
        }

    def remove_element(self, eid: ElementId) -> None:
        for key in [k for k in self._entries if k[0] == eid]:
            del self._entries[key]

    def items(self):
        return self._entries.items()

    def keys(self):
        return self._entries.keys()

    def copy(self) -> "TypeAssignment":
        return TypeAssignment(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key: SlotKey) -> bool:
        return key in self._entries

    def __eq__(self, other) -> bool:
        return isinstance(other, TypeAssignment) and self._entries == other._entries

    def to_json_dict(self) -> dict:
        records = [
            {
                "module": eid.module,
                "path": eid.path,
                "slot": slot,
                "type": entry.type.render(),
                "provenance": entry.provenance,
            }
            for (eid, slot), entry in self._entries.items()
        ]
        records.sort(key=lambda r: (r["module"], r["path"], r["slot"]))
        return {"schema_version": 1, "entries": records}

    @classmethod
    def from_json_dict(cls, data: dict) -> "TypeAssignment":
        out = cls()
        for rec in data.get("entries", []):
            eid = ElementId(rec["module"], rec["path"])
            out.set(
                eid,
                int(rec["slot"]),
                parse_type(rec["type"]),
                rec.get("provenance", PREDICTED),
            )
        return out


def gold_assignment(project: ProjectSource) -> TypeAssignment:
    """The assignment formed by the project's existing annotations."""
    gold = TypeAssignment()
    for element in project.elements():
        for slot in element.slots:
            if slot.existing_annotation is not None:
                gold.set(element.id, slot.index, slot.existing_annotation, GOLD)
    return gold
