"""Command-line entry points for the annotation pipeline.

Exit codes: 2 bad arguments (click), 3 unloadable or empty project,
4 backend unreachable.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .assignment import TypeAssignment, gold_assignment
from .config import Config, load_config
from .context import AtomTokenizer, build_model_input
from .decoder import DecoderConfig, Strategy, make_plan, run_decoding
from .evaluation import coherence_errors, evaluate
from .graph import build_usage_graph, graph_to_json_dict
from .predictor import BackendUnavailable, make_backend
from .project import ProjectError, apply_assignment, load_project, write_project
from .pytypes import ConstructorFrequencyTable

EXIT_BAD_PROJECT = 3
EXIT_BACKEND = 4

STRATEGIES = [s.value for s in Strategy]


def _write_json(path: str | Path, data: dict) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(
        json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _load(project_path: str):
    try:
        project = load_project(project_path)
    except ProjectError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(EXIT_BAD_PROJECT)
    return project


def _decoder_config(cfg: Config, include_inputs: bool = False) -> DecoderConfig:
    return DecoderConfig(
        budgets=cfg.budgets,
        tokenizer=AtomTokenizer(),
        marker_base=cfg.marker_base,
        decode_params=cfg.decode_params,
        include_inputs=include_inputs,
    )


def _run_pipeline(project, cfg: Config, strategy: str, seed: int | None):
    graph = build_usage_graph(project)
    if not project.elements():
        click.echo("error: project has no code elements", err=True)
        sys.exit(EXIT_BAD_PROJECT)
    plan = make_plan(graph, strategy, seed)
    backend = make_backend(
        cfg.backend, timeout=cfg.http_timeout, retries=cfg.http_retries
    )
    try:
        assignment, trace = run_decoding(
            project, graph, plan, backend, _decoder_config(cfg)
        )
    except BackendUnavailable as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(EXIT_BACKEND)
    failed = [r for r in trace.records if r.status == "failed"]
    if failed and all(r.status != "predicted" for r in trace.records):
        click.echo(f"error: backend unreachable: {failed[0].error}", err=True)
        sys.exit(EXIT_BACKEND)
    return graph, assignment, trace


@click.group()
def main():
    """Project-scale type annotation inference for Python."""


_common = [
    click.option("--project", "project_path", required=True, type=click.Path(exists=False)),
    click.option("--config", "config_file", type=click.Path(exists=True), default=None),
]


def common_options(fn):
    for opt in reversed(_common):
        fn = opt(fn)
    return fn


@main.command()
@common_options
@click.option("--backend", default=None, help="'heuristic' or a model-server URL")
@click.option("--strategy", type=click.Choice(STRATEGIES), default="twopass")
@click.option("--seed", type=int, default=None)
@click.option("--out-dir", required=True, type=click.Path())
def annotate(project_path, config_file, backend, strategy, seed, out_dir):
    """Annotate a project end to end and write the rewritten sources plus
    assignment.json and trace.json."""
    cfg = load_config(config_file, {"backend": backend})
    project = _load(project_path)
    _, assignment, trace = _run_pipeline(project, cfg, strategy, seed)
    outcome = apply_assignment(project, assignment)
    for issue in outcome.issues:
        click.echo(f"warning: {issue.element}[{issue.slot}]: {issue.reason}", err=True)
    out = Path(out_dir)
    write_project(outcome.project, out / "annotated")
    _write_json(out / "assignment.json", assignment.to_json_dict())
    _write_json(out / "trace.json", trace.to_json_dict())
    click.echo(f"annotated {len(assignment)} slots across {len(project.modules)} modules")


@main.command()
@common_options
@click.option("--out", "out_path", required=True, type=click.Path())
def graph(project_path, config_file, out_path):
    """Export the usage graph as JSON."""
    project = _load(project_path)
    g = build_usage_graph(project)
    _write_json(out_path, graph_to_json_dict(g))
    click.echo(f"{len(g.nodes)} nodes, {len(g.edges)} edges")


@main.command()
@common_options
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--assignment", "assignment_path", type=click.Path(exists=True), default=None)
def contexts(project_path, config_file, out_dir, assignment_path):
    """Export each element's exact model input plus a JSON sidecar with token
    counts and the marker-to-slot map."""
    cfg = load_config(config_file)
    project = _load(project_path)
    g = build_usage_graph(project)
    assignment = TypeAssignment()
    if assignment_path:
        assignment = TypeAssignment.from_json_dict(
            json.loads(Path(assignment_path).read_text(encoding="utf-8"))
        )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for element in project.elements():
        mi = build_model_input(
            project, g, element.id, assignment, AtomTokenizer(), cfg.budgets, cfg.marker_base
        )
        stem = str(element.id)
        (out / f"{stem}.txt").write_text(mi.concatenated(), encoding="utf-8")
        _write_json(
            out / f"{stem}.json",
            {
                "element": stem,
                "marker_count": mi.marker_count,
                "token_counts": mi.token_counts,
                "slot_map": {str(k): v for k, v in sorted(mi.slot_map.items())},
            },
        )
    click.echo(f"wrote {len(project.elements())} inputs to {out}")


@main.command()
@common_options
@click.option("--backend", default=None)
@click.option("--strategy", type=click.Choice(STRATEGIES), default="twopass")
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--trace", "trace_path", type=click.Path(), default=None)
def decode(project_path, config_file, backend, strategy, seed, out_path, trace_path):
    """Run iterative decoding and write the final type assignment."""
    cfg = load_config(config_file, {"backend": backend})
    project = _load(project_path)
    _, assignment, trace = _run_pipeline(project, cfg, strategy, seed)
    _write_json(out_path, assignment.to_json_dict())
    if trace_path:
        _write_json(trace_path, trace.to_json_dict())
    click.echo(f"decoded {len(assignment)} slots")


@main.command("eval")
@click.option("--pred", "pred_path", required=True, type=click.Path(exists=True))
@click.option(
    "--gold",
    "gold_path",
    required=True,
    type=click.Path(exists=True),
    help="gold assignment JSON, or a project directory whose annotations are the gold labels",
)
@click.option("--freq", "freq_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_path", required=True, type=click.Path())
def eval_cmd(pred_path, gold_path, freq_path, out_path):
    """Score a prediction assignment against gold labels."""
    predictions = TypeAssignment.from_json_dict(
        json.loads(Path(pred_path).read_text(encoding="utf-8"))
    )
    gold_p = Path(gold_path)
    if gold_p.is_dir():
        gold = gold_assignment(_load(gold_path))
    else:
        gold = TypeAssignment.from_json_dict(
            json.loads(gold_p.read_text(encoding="utf-8"))
        )
    if freq_path:
        freq = ConstructorFrequencyTable.from_json_dict(
            json.loads(Path(freq_path).read_text(encoding="utf-8"))
        )
    else:
        freq = ConstructorFrequencyTable.from_types(
            entry.type for _, entry in gold.items()
        )
    report = evaluate(predictions, gold, freq)
    _write_json(out_path, report.to_json_dict())
    adj = report.accuracy("adjusted")
    click.echo(
        f"full {report.accuracy('full')} adjusted {adj} base {report.accuracy('base')}"
    )


@main.command()
@common_options
@click.option("--checker", default=None, help="type checker command")
@click.option("--out", "out_path", type=click.Path(), default=None)
def check(project_path, config_file, checker, out_path):
    """Count coherence errors reported by the external type checker."""
    cfg = load_config(config_file, {"checker_cmd": checker})
    report = coherence_errors(project_path, cfg.checker_cmd)
    data = report.to_json_dict()
    if out_path:
        _write_json(out_path, data)
    click.echo(json.dumps(data, indent=2, sort_keys=True))


@main.command()
@common_options
@click.option("--backend", default=None)
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8077)
@click.option("--state-dir", default=None, type=click.Path())
def serve(project_path, config_file, backend, host, port, state_dir):
    """Start the interactive review service."""
    import uvicorn

    from .service import ServiceConfig, create_app

    cfg = load_config(config_file, {"backend": backend, "session_dir": state_dir})
    _load(project_path)  # fail fast on an unloadable project
    app = create_app(
        ServiceConfig(
            project_path=project_path,
            backend=cfg.backend,
            state_dir=cfg.session_dir,
            config=cfg,
        )
    )
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
