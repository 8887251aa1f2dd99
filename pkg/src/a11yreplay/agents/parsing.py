"""Pulling JSON objects out of free-form model output."""

from __future__ import annotations

import json
import re
from typing import Any

_FENCE = re.compile(r"```[A-Za-z0-9_-]*[ \t]*\n?(.*?)```", re.DOTALL)


class ParseError(ValueError):
    pass


def _first_balanced(text: str) -> str | None:
    """First ``{...}`` span with balanced braces, ignoring braces in strings."""
    start = text.find("{")
    while start != -1:
        depth = 0
        in_str = False
        escaped = False
        for i in range(start, len(text)):
            ch = text[i]
            if in_str:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == '"':
                    in_str = False
                continue
            if ch == '"':
                in_str = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    return text[start : i + 1]
        # unbalanced from here; try the next opening brace
        start = text.find("{", start + 1)
    return None


def extract_structured_block(response: str) -> str:
    for m in _FENCE.finditer(response):
        found = _first_balanced(m.group(1))
        if found is not None:
            return found
    found = _first_balanced(response)
    if found is None:
        raise ParseError("no JSON object found in response")
    return found


def parse_object(response: str) -> dict[str, Any]:
    block = extract_structured_block(response)
    try:
        value = json.loads(block)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from None
    if not isinstance(value, dict):
        raise ParseError("expected a JSON object")
    return value
