import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from typeweaver.cli import main


@pytest.fixture()
def runner():
    return CliRunner()


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


class TestAnnotate:
    def test_end_to_end_artifacts(self, runner, fig1_path, tmp_path):
        result = runner.invoke(
            main,
            [
                "annotate",
                "--project",
                str(fig1_path),
                "--backend",
                "heuristic",
                "--strategy",
                "twopass",
                "--out-dir",
                str(tmp_path),
            ],
        )
        assert result.exit_code == 0, result.output
        assert (tmp_path / "assignment.json").exists()
        assert (tmp_path / "trace.json").exists()
        annotated = (tmp_path / "annotated" / "data.py").read_text()
        assert "def chunk_srcs(srcs: Any, window: Any) -> list:" in annotated
        # Comments survive in rewritten sources.
        assert "# Split sources into windows of equal size." in annotated

    def test_empty_project_distinct_exit_code(self, runner, fixtures_dir, tmp_path):
        result = runner.invoke(
            main,
            [
                "annotate",
                "--project",
                str(fixtures_dir / "empty"),
                "--out-dir",
                str(tmp_path / "out"),
            ],
        )
        assert result.exit_code == 3
        assert not (tmp_path / "out" / "assignment.json").exists()

    def test_seeded_random_runs_identical(self, runner, fig1_path, tmp_path):
        outputs = []
        for run in ("one", "two"):
            out = tmp_path / run
            result = runner.invoke(
                main,
                [
                    "annotate",
                    "--project",
                    str(fig1_path),
                    "--strategy",
                    "random",
                    "--seed",
                    "7",
                    "--out-dir",
                    str(out),
                ],
            )
            assert result.exit_code == 0, result.output
            blob = (out / "assignment.json").read_bytes()
            files = sorted((out / "annotated").rglob("*.py"))
            blob += b"".join(f.read_bytes() for f in files)
            outputs.append(blob)
        assert outputs[0] == outputs[1]

    def test_missing_project_flag_is_usage_error(self, runner):
        result = runner.invoke(main, ["annotate", "--out-dir", "x"])
        assert result.exit_code == 2

    def test_unreachable_backend_distinct_exit_code(self, runner, fig1_path, tmp_path):
        result = runner.invoke(
            main,
            [
                "decode",
                "--project",
                str(fig1_path),
                "--backend",
                "http://127.0.0.1:9/",
                "--out",
                str(tmp_path / "a.json"),
            ],
        )
        assert result.exit_code == 4


class TestGraphExport:
    def test_json_schema(self, runner, fig1_path, tmp_path):
        out = tmp_path / "graph.json"
        result = runner.invoke(
            main, ["graph", "--project", str(fig1_path), "--out", str(out)]
        )
        assert result.exit_code == 0, result.output
        data = read_json(out)
        assert data["schema_version"] == 1
        assert "eval.eval_on_dataset" in data["nodes"]
        edge = data["edges"][0]
        assert set(edge) == {"user", "usee", "certainty", "site"}
        assert set(edge["site"]) == {"module", "line", "col"}


class TestContextsExport:
    def test_per_element_files_with_sidecars(self, runner, fig1_path, tmp_path):
        result = runner.invoke(
            main,
            ["contexts", "--project", str(fig1_path), "--out-dir", str(tmp_path)],
        )
        assert result.exit_code == 0, result.output
        txt = tmp_path / "eval.eval_on_dataset.txt"
        sidecar = read_json(tmp_path / "eval.eval_on_dataset.json")
        assert txt.exists()
        body = txt.read_text()
        assert "from data import chunk_srcs" in body
        assert "<extra_id_0>" in body
        assert sidecar["marker_count"] == 4
        assert sidecar["token_counts"]["total"] <= 4096
        assert set(sidecar["slot_map"]) == {"0", "1", "2", "3"}


class TestDecodeEval:
    def test_decode_then_eval_round_trip(self, runner, fixtures_dir, tmp_path):
        typed = fixtures_dir / "typed"
        pred_path = tmp_path / "pred.json"
        result = runner.invoke(
            main,
            [
                "decode",
                "--project",
                str(typed),
                "--strategy",
                "useetouser",
                "--out",
                str(pred_path),
            ],
        )
        assert result.exit_code == 0, result.output
        report_path = tmp_path / "report.json"
        result = runner.invoke(
            main,
            [
                "eval",
                "--pred",
                str(pred_path),
                "--gold",
                str(typed),
                "--out",
                str(report_path),
            ],
        )
        assert result.exit_code == 0, result.output
        report = read_json(report_path)
        assert 0.0 <= report["metrics"]["adjusted"]["all"]["accuracy"] <= 100.0
        assert report["metrics"]["base"]["all"]["accuracy"] >= (
            report["metrics"]["adjusted"]["all"]["accuracy"]
        )

    def test_eval_perfect_predictions(self, runner, fixtures_dir, tmp_path):
        typed = fixtures_dir / "typed"
        from typeweaver.assignment import gold_assignment
        from typeweaver.project import load_project

        gold = gold_assignment(load_project(typed))
        pred_path = tmp_path / "gold.json"
        pred_path.write_text(json.dumps(gold.to_json_dict()))
        report_path = tmp_path / "report.json"
        result = runner.invoke(
            main,
            ["eval", "--pred", str(pred_path), "--gold", str(typed), "--out", str(report_path)],
        )
        assert result.exit_code == 0, result.output
        report = read_json(report_path)
        assert report["metrics"]["full"]["all"]["accuracy"] == 100.0


class TestCheck:
    def test_unavailable_checker_is_clean(self, runner, fixtures_dir, tmp_path):
        out = tmp_path / "coherence.json"
        result = runner.invoke(
            main,
            [
                "check",
                "--project",
                str(fixtures_dir / "coherence" / "assignment"),
                "--checker",
                "definitely-not-a-real-checker-zz",
                "--out",
                str(out),
            ],
        )
        assert result.exit_code == 0, result.output
        data = read_json(out)
        assert data["available"] is False
