"""Layered configuration: file defaults < environment overrides < flags.

Config files are JSON; environment variables use the XLM_ prefix with
uppercase dotted keys flattened by underscores (XLM_TRAIN_LR=0.001 sets
train.lr). Flags are applied last by the CLI.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any, Optional


def _coerce(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def load_layered(path: Optional[str], env: Optional[dict] = None,
                 overrides: Optional[dict] = None,
                 env_prefix: str = "XLM_") -> dict:
    cfg: dict = {}
    if path:
        cfg = json.loads(Path(path).read_text())
    env = os.environ if env is None else env
    for key, value in sorted(env.items()):
        if not key.startswith(env_prefix):
            continue
        parts = key[len(env_prefix):].lower().split("_")
        node = cfg
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = _coerce(value)
    for dotted, value in (overrides or {}).items():
        node = cfg
        parts = dotted.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
    return cfg


def get(cfg: dict, dotted: str, default: Any = None) -> Any:
    node = cfg
    for part in dotted.split("."):
        if not isinstance(node, dict) or part not in node:
            return default
        node = node[part]
    return node
