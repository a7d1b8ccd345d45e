"""Accuracy metrics (full / adjusted / base with simple-complex and
common-rare breakdowns), dataset statistics, and coherence error counting via
an external type checker."""

from __future__ import annotations

import re
import shlex
import subprocess
from dataclasses import dataclass, field
from pathlib import Path

from .assignment import TypeAssignment
from .project import ProjectSource
from .pytypes import (
    ANY,
    NONE,
    ConstructorFrequencyTable,
    PyType,
    adjust_for_comparison,
    base_head,
    categorize,
    normalize,
)

METRICS = ("full", "adjusted", "base")
CATEGORIES = ("all", "simple", "complex", "common", "rare")


@dataclass
class MetricCell:
    correct: int = 0
    total: int = 0

    @property
    def accuracy(self) -> float | None:
        if self.total == 0:
            return None
        return 100.0 * self.correct / self.total

    def add(self, ok: bool) -> None:
        self.total += 1
        self.correct += int(ok)


@dataclass
class EvalReport:
    cells: dict[str, dict[str, MetricCell]]
    label_count: int
    missing_predictions: int
    average_type_size: float | None
    rare_ratio: float | None
    complex_ratio: float | None

    def accuracy(self, metric: str, category: str = "all") -> float | None:
        return self.cells[metric][category].accuracy

    def verify(self) -> None:
        """Structural invariants: base >= adjusted, and category counts sum to
        the all-count within each frequency split."""
        for category in CATEGORIES:
            adj = self.cells["adjusted"][category]
            base = self.cells["base"][category]
            if adj.total != base.total:
                raise AssertionError("adjusted and base denominators differ")
            if base.correct < adj.correct:
                raise AssertionError("base accuracy below adjusted accuracy")
        for metric in METRICS:
            c = self.cells[metric]
            if c["simple"].total + c["complex"].total != c["all"].total:
                raise AssertionError("shape categories do not partition labels")
            if c["common"].total + c["rare"].total != c["all"].total:
                raise AssertionError("frequency categories do not partition labels")

    def to_json_dict(self) -> dict:
        def cell(c: MetricCell) -> dict:
            acc = c.accuracy
            return {
                "correct": c.correct,
                "total": c.total,
                "accuracy": round(acc, 2) if acc is not None else None,
            }

        return {
            "schema_version": 1,
            "metrics": {
                m: {cat: cell(self.cells[m][cat]) for cat in CATEGORIES}
                for m in METRICS
            },
            "label_count": self.label_count,
            "missing_predictions": self.missing_predictions,
            "average_type_size": (
                round(self.average_type_size, 2)
                if self.average_type_size is not None
                else None
            ),
            "rare_ratio": (
                round(self.rare_ratio, 4) if self.rare_ratio is not None else None
            ),
            "complex_ratio": (
                round(self.complex_ratio, 4) if self.complex_ratio is not None else None
            ),
        }


def evaluate(
    predictions: TypeAssignment,
    gold: TypeAssignment,
    freq: ConstructorFrequencyTable,
) -> EvalReport:
    """Score predictions against gold labels. Full accuracy is exact match
    after normalization over all labels; adjusted drops None/Any labels and
    compares after name simplification and outer Optional/Final unwrapping;
    base compares only the outermost constructor on the adjusted label set.
    Missing predictions count as incorrect."""
    cells = {m: {c: MetricCell() for c in CATEGORIES} for m in METRICS}
    missing = 0
    sizes: list[int] = []
    rare_count = 0
    complex_count = 0

    for (eid, slot), gentry in gold.items():
        g = normalize(gentry.type)
        p = predictions.get(eid, slot)
        if p is None:
            missing += 1
        shape, rarity = categorize(g, freq)
        sizes.append(g.size())
        rare_count += rarity == "rare"
        complex_count += shape == "complex"
        cats = ("all", shape, rarity)

        full_ok = p is not None and normalize(p) == g
        for cat in cats:
            cells["full"][cat].add(full_ok)

        if g in (ANY, NONE):
            continue
        ga = adjust_for_comparison(g)
        pa = adjust_for_comparison(p) if p is not None else None
        adjusted_ok = pa is not None and pa == ga
        base_ok = pa is not None and base_head(pa) == base_head(ga)
        for cat in cats:
            cells["adjusted"][cat].add(adjusted_ok)
            cells["base"][cat].add(base_ok)

    n = len(sizes)
    report = EvalReport(
        cells=cells,
        label_count=n,
        missing_predictions=missing,
        average_type_size=(sum(sizes) / n) if n else None,
        rare_ratio=(rare_count / n) if n else None,
        complex_ratio=(complex_count / n) if n else None,
    )
    report.verify()
    return report


# ---------------------------------------------------------------------------
# dataset statistics


@dataclass
class ProjectStats:
    name: str
    files: int
    lines: int
    elements: int
    slots: int
    labels: int
    rare_ratio: float | None
    complex_ratio: float | None
    average_type_size: float | None
    no_labels: bool

    def to_json_dict(self) -> dict:
        return {
            "name": self.name,
            "files": self.files,
            "lines": self.lines,
            "elements": self.elements,
            "slots": self.slots,
            "labels": self.labels,
            "rare_ratio": round(self.rare_ratio, 4) if self.rare_ratio is not None else None,
            "complex_ratio": (
                round(self.complex_ratio, 4) if self.complex_ratio is not None else None
            ),
            "average_type_size": (
                round(self.average_type_size, 2)
                if self.average_type_size is not None
                else None
            ),
            "no_labels": self.no_labels,
        }


def dataset_stats(
    projects: list[tuple[str, ProjectSource]],
    gold: TypeAssignment,
    freq: ConstructorFrequencyTable,
) -> dict:
    """Per-project and aggregate slot/label counts with rare/complex ratios
    and average type size, computed from the gold labels."""
    rows: list[ProjectStats] = []
    for name, project in projects:
        module_names = set(project.modules)
        files = len(project.modules)
        lines = sum(
            len(m.original_text.splitlines()) for m in project.modules.values()
        )
        elements = project.elements()
        slots = sum(len(e.slots) for e in elements)
        labels = [
            normalize(entry.type)
            for (eid, _), entry in gold.items()
            if eid.module in module_names
        ]
        n = len(labels)
        rare = sum(categorize(t, freq)[1] == "rare" for t in labels)
        cplx = sum(categorize(t, freq)[0] == "complex" for t in labels)
        rows.append(
            ProjectStats(
                name=name,
                files=files,
                lines=lines,
                elements=len(elements),
                slots=slots,
                labels=n,
                rare_ratio=(rare / n) if n else None,
                complex_ratio=(cplx / n) if n else None,
                average_type_size=(sum(t.size() for t in labels) / n) if n else None,
                no_labels=n == 0,
            )
        )
    total_labels = sum(r.labels for r in rows)
    return {
        "schema_version": 1,
        "projects": [r.to_json_dict() for r in rows],
        "totals": {
            "projects": len(rows),
            "files": sum(r.files for r in rows),
            "lines": sum(r.lines for r in rows),
            "elements": sum(r.elements for r in rows),
            "slots": sum(r.slots for r in rows),
            "labels": total_labels,
        },
    }


# ---------------------------------------------------------------------------
# coherence checking


COHERENCE_CODES = (
    "attr-defined",
    "arg-type",
    "return-value",
    "assignment",
    "name-defined",
)

_DIAGNOSTIC_RE = re.compile(
    r"^(?P<path>[^:\n]+):(?P<line>\d+)(?::(?P<col>\d+))?:\s*"
    r"(?P<severity>error|warning|note):\s*(?P<message>.*?)"
    r"(?:\s+\[(?P<code>[\w-]+)\])?$"
)

_SUMMARY_RE = re.compile(r"^(Found \d+ error|Success:|no issues found)", re.IGNORECASE)


@dataclass
class CoherenceReport:
    available: bool
    total: int = 0
    per_code: dict[str, int] = field(default_factory=dict)
    unparsed: int = 0
    raw_output: str = ""
    reason: str | None = None

    def to_json_dict(self) -> dict:
        return {
            "schema_version": 1,
            "available": self.available,
            "total": self.total,
            "per_code": {k: self.per_code.get(k, 0) for k in sorted(self.per_code)},
            "unparsed": self.unparsed,
            "reason": self.reason,
        }


def parse_checker_output(text: str, codes=COHERENCE_CODES) -> CoherenceReport:
    per_code = {c: 0 for c in codes}
    unparsed = 0
    for line in text.splitlines():
        if not line.strip() or _SUMMARY_RE.match(line.strip()):
            continue
        m = _DIAGNOSTIC_RE.match(line.strip())
        if m is None:
            unparsed += 1
            continue
        if m.group("severity") != "error":
            continue
        code = m.group("code")
        if code in per_code:
            per_code[code] += 1
    return CoherenceReport(
        available=True,
        total=sum(per_code.values()),
        per_code=per_code,
        unparsed=unparsed,
        raw_output=text,
    )


def coherence_errors(
    project_path: Path | str,
    checker_cmd: str | list[str] = "mypy",
    codes=COHERENCE_CODES,
    timeout: float = 300.0,
) -> CoherenceReport:
    """Run the external type checker on an annotated project and count only
    the coherence-related error codes. A missing checker yields an
    'unavailable' report, never a failure."""
    cmd = shlex.split(checker_cmd) if isinstance(checker_cmd, str) else list(checker_cmd)
    try:
        proc = subprocess.run(
            [*cmd, str(project_path)],
            capture_output=True,
            text=True,
            timeout=timeout,
        )
    except FileNotFoundError:
        return CoherenceReport(available=False, reason=f"checker not found: {cmd[0]}")
    except subprocess.TimeoutExpired:
        return CoherenceReport(available=False, reason="checker timed out")
    report = parse_checker_output(proc.stdout, codes)
    return report
