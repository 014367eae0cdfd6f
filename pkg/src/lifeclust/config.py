"""Flat key=value run configuration files.

UTF-8 text, one ``key=value`` per line, ``#`` starts a comment.  Values stay
strings here; typed interpretation happens at the CLI layer so a config file
and a command-line flag go through exactly the same parsing.
"""

from __future__ import annotations

from pathlib import Path

from .errors import DataFormatError


def load_config(path: str | Path) -> dict[str, str]:
    result: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataFormatError(f"{path}:{lineno}: expected key=value")
        key, _, value = line.partition("=")
        result[key.strip()] = value.strip()
    return result


def write_config(mapping: dict[str, object], path: str | Path) -> None:
    lines = [f"{key}={mapping[key]}" for key in sorted(mapping)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
