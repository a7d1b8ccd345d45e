"""Runtime configuration with CLI > environment > config file > default
precedence."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

from .context import Budgets
from .predictor import DecodeParams

ENV_PREFIX = "TYPEWEAVER_"

ENV_VARS = {
    "backend": ENV_PREFIX + "BACKEND",
    "checker_cmd": ENV_PREFIX + "CHECKER",
    "session_dir": ENV_PREFIX + "SESSION_DIR",
    "http_timeout": ENV_PREFIX + "HTTP_TIMEOUT",
    "http_retries": ENV_PREFIX + "HTTP_RETRIES",
}


@dataclass
class Config:
    budgets: Budgets = field(default_factory=Budgets)
    marker_base: int = 0
    backend: str = "heuristic"
    decode_params: DecodeParams = field(default_factory=DecodeParams)
    checker_cmd: str = "mypy"
    workers: int = 1
    http_timeout: float = 30.0
    http_retries: int = 2
    session_dir: str | None = None

    def validate(self) -> None:
        b = self.budgets
        if min(b.preamble, b.usees, b.main, b.users) <= 0:
            raise ValueError("budgets must be positive")
        if b.preamble > b.usees:
            raise ValueError("preamble budget cannot exceed the usee window")


def load_config(
    config_file: str | Path | None = None,
    overrides: dict | None = None,
    env: dict | None = None,
) -> Config:
    env = os.environ if env is None else env
    values: dict = {}
    if config_file:
        data = json.loads(Path(config_file).read_text(encoding="utf-8"))
        values.update(data)
    for key, var in ENV_VARS.items():
        if var in env:
            values[key] = env[var]
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value

    cfg = Config()
    if "budgets" in values:
        raw = values.pop("budgets")
        if isinstance(raw, dict):
            cfg.budgets = Budgets(**raw)
        else:
            pre, usees, main, users = (int(x) for x in raw)
            cfg.budgets = Budgets(pre, usees, main, users)
    if "beam_width" in values or "diversity_penalty" in values:
        cfg.decode_params = DecodeParams(
            beam_width=int(values.pop("beam_width", cfg.decode_params.beam_width)),
            diversity_penalty=float(
                values.pop("diversity_penalty", cfg.decode_params.diversity_penalty)
            ),
        )
    casts = {f.name: f.type for f in fields(Config)}
    for key, value in values.items():
        if key not in casts:
            raise ValueError(f"unknown config key: {key}")
        if key in ("marker_base", "workers", "http_retries"):
            value = int(value)
        elif key == "http_timeout":
            value = float(value)
        setattr(cfg, key, value)
    cfg.validate()
    return cfg
