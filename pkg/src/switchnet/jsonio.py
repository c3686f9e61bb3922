"""Deterministic JSON file helpers: sorted keys, fixed indentation, one layout."""

import json
from pathlib import Path


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))
