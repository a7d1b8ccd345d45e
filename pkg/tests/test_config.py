import json

import pytest

from typeweaver.config import Config, load_config
from typeweaver.context import Budgets


class TestPrecedence:
    def test_defaults(self):
        cfg = load_config(env={})
        assert cfg.backend == "heuristic"
        assert cfg.budgets == Budgets(1000, 2048, 512, 1536)
        assert cfg.decode_params.beam_width == 16
        assert cfg.decode_params.diversity_penalty == 1.0

    def test_file_overrides_defaults(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"backend": "http://file.test", "beam_width": 4}))
        cfg = load_config(path, env={})
        assert cfg.backend == "http://file.test"
        assert cfg.decode_params.beam_width == 4

    def test_env_overrides_file(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"backend": "http://file.test"}))
        cfg = load_config(path, env={"TYPEWEAVER_BACKEND": "http://env.test"})
        assert cfg.backend == "http://env.test"

    def test_cli_overrides_env(self, tmp_path):
        cfg = load_config(
            None,
            overrides={"backend": "http://cli.test"},
            env={"TYPEWEAVER_BACKEND": "http://env.test"},
        )
        assert cfg.backend == "http://cli.test"

    def test_none_override_does_not_clobber(self):
        cfg = load_config(None, overrides={"backend": None}, env={})
        assert cfg.backend == "heuristic"

    def test_budget_validation(self):
        with pytest.raises(ValueError):
            load_config(None, overrides={"budgets": [0, 2048, 512, 1536]}, env={})
        with pytest.raises(ValueError):
            load_config(None, overrides={"budgets": [3000, 2048, 512, 1536]}, env={})

    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError):
            load_config(None, overrides={"bogus_key": 1}, env={})

    def test_total_budget_consistency(self):
        cfg = load_config(env={})
        assert cfg.budgets.total == 4096
