"""Shared fixtures: the generated corpus, a tiny hand-built app and a fake
model that reads the serialized screen out of each prompt."""

from __future__ import annotations

import json
import re
import sys
from pathlib import Path

import pytest

from a11yreplay.agents import AgentRole, ScriptedClient
from a11yreplay.device_sim import load_app
from a11yreplay.runner import parse_instructions

TESTS = Path(__file__).parent
FIXTURES = TESTS / "fixtures"
sys.path.insert(0, str(TESTS))

_LINE_RE = re.compile(r'^\((\d+)\) \[([A-Za-z]+)[^\]]*\](?: "([^"]*)")?', re.MULTILINE)


def corpus() -> dict:
    return json.loads((FIXTURES / "corpus.json").read_text())


def load_case(case: dict):
    """(app, spec, scripted client) for one corpus entry."""
    app = load_app(FIXTURES / case["app"])
    spec = parse_instructions((FIXTURES / case["test"]).read_text(), default_app=app.name)
    return app, spec, ScriptedClient.from_file(FIXTURES / case["script"])


def case_by_name(name: str) -> dict:
    c = corpus()
    for case in c["e2e"] + c["faults"]:
        if case["name"] == name:
            return case
    raise KeyError(name)


def screen_section(prompt: str, header: str = "Current screen:") -> str:
    """The serialized element list following ``header`` in a prompt."""
    tail = prompt.split(header, 1)[1]
    lines = []
    for line in tail.strip("\n").splitlines():
        if not line.startswith("("):
            break
        lines.append(line)
    return "\n".join(lines)


class FakeModel:
    """Plans ``steps`` verbatim, taps the element whose text the step names
    in quotes, and judges every action a success.

    ``fail_evaluations`` makes the evaluator report failure that many times
    (all of them when negative).
    """

    def __init__(self, steps: list[str], fail_evaluations: int = 0):
        self.steps = steps
        self.fail_evaluations = fail_evaluations
        self.calls: list[AgentRole] = []

    def complete(self, prompt: str, role: AgentRole) -> str:
        self.calls.append(role)
        if role is AgentRole.PLANNER:
            return json.dumps({"steps": [{"thought": "", "evaluation": "", "action": s} for s in self.steps]})
        if role is AgentRole.ACTION:
            step = re.search(r"^Current step: (.*)$", prompt, re.MULTILINE).group(1)
            want = re.search(r'"([^"]+)"', step).group(1)
            for m in _LINE_RE.finditer(screen_section(prompt)):
                if m.group(3) == want:
                    return json.dumps({"thought": "", "relevant_ui_ids": [int(m.group(1))],
                                       "action": {"name": "Tap", "id": int(m.group(1))}})
            return json.dumps({"thought": "", "action": {"name": "Stop", "feedback": f"{want} is not on screen"}})
        if self.fail_evaluations:
            self.fail_evaluations -= 1
            return '{"evaluation_criteria": "x", "result": "failure", "explanation": "nothing changed"}'
        return '{"evaluation_criteria": "x", "result": "success", "explanation": ""}'


def simple_app(screens: dict | None = None, **extra) -> dict:
    """A two-screen app definition: home with a button opening detail."""
    doc = {
        "format_version": 1,
        "app_id": "tiny",
        "name": "Tiny App",
        "width": 1170,
        "height": 2532,
        "initial_screen": "home",
        "screens": screens
        or {
            "home": {
                "elements": [
                    {"ref": "title", "kind": "Text", "text": "Welcome", "box": [60, 150, 600, 230]},
                    {"ref": "open", "kind": "Button", "text": "Open details", "clickable": True,
                     "box": [60, 400, 900, 520]},
                    {"ref": "field", "kind": "TextField", "text": "Search", "box": [60, 700, 1110, 800]},
                ],
                "transitions": [
                    {"element": "open", "action": "tap", "target": "detail"},
                    {"element": "field", "action": "submit", "target": "detail", "query": "*"},
                ],
            },
            "detail": {
                "elements": [
                    {"ref": "back", "kind": "Button", "text": "Back", "clickable": True, "box": [20, 100, 200, 180]},
                    {"ref": "body", "kind": "Text", "text": "Details here", "box": [60, 400, 700, 480]},
                ],
                "transitions": [{"element": "back", "action": "tap", "target": "home"}],
            },
        },
    }
    doc.update(extra)
    return doc


@pytest.fixture
def tiny_app():
    return load_app(simple_app())


@pytest.fixture(scope="session")
def podcast_app():
    return load_app(FIXTURES / "apps" / "podcast_app.json")
