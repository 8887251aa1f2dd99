"""Planner, action and evaluation agents and the records they exchange."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Union

from ..ui_model import element_ids
from . import prompts
from .llm import AgentRole, ExchangeLog, LLMClient, llm_complete
from .parsing import ParseError, parse_object

log = logging.getLogger(__name__)

REPROMPT_LIMIT = 2
MAX_REPLANS = 5
MAX_ACTIONS = 40


class PlanningError(RuntimeError):
    pass


class ActionError(RuntimeError):
    pass


class StepStatus(str, Enum):
    TODO = "todo"
    SUCCESS = "success"


@dataclass(frozen=True)
class PlanStep:
    action: str
    thought: str = ""
    evaluation: str = ""
    status: StepStatus = StepStatus.TODO

    def to_dict(self) -> dict:
        return {
            "thought": self.thought,
            "evaluation": self.evaluation,
            "action": self.action,
            "status": self.status.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PlanStep":
        return cls(d["action"], d.get("thought", ""), d.get("evaluation", ""), StepStatus(d.get("status", "todo")))


@dataclass(frozen=True)
class Plan:
    steps: tuple[PlanStep, ...]
    goal: str
    revision: int = 0

    def mark_success(self, index: int) -> "Plan":
        steps = list(self.steps)
        steps[index] = replace(steps[index], status=StepStatus.SUCCESS)
        return replace(self, steps=tuple(steps))

    def to_json(self) -> str:
        return json.dumps({"steps": [s.to_dict() for s in self.steps]}, indent=2)

    def to_dict(self) -> dict:
        return {"goal": self.goal, "revision": self.revision, "steps": [s.to_dict() for s in self.steps]}


@dataclass(frozen=True)
class Tap:
    id: int


@dataclass(frozen=True)
class Swipe:
    direction: str
    x: int
    y: int


@dataclass(frozen=True)
class TextEntry:
    id: int
    text: str


@dataclass(frozen=True)
class Stop:
    feedback: str


Action = Union[Tap, Swipe, TextEntry, Stop]


def action_to_dict(action: Action) -> dict:
    if isinstance(action, Tap):
        return {"name": "Tap", "id": action.id}
    if isinstance(action, Swipe):
        return {"name": "Swipe", "direction": action.direction, "x": action.x, "y": action.y}
    if isinstance(action, TextEntry):
        return {"name": "TextEntry", "id": action.id, "text": action.text}
    return {"name": "Stop", "feedback": action.feedback}


@dataclass(frozen=True)
class ActionCommand:
    thought: str
    relevant_ui_ids: tuple[int, ...]
    action: Action

    def to_dict(self) -> dict:
        return {
            "thought": self.thought,
            "relevant_ui_ids": list(self.relevant_ui_ids),
            "action": action_to_dict(self.action),
        }


class EvalResult(str, Enum):
    SUCCESS = "success"
    FAILURE = "failure"
    TASK_COMPLETE = "task_complete"


@dataclass(frozen=True)
class EvaluationResult:
    evaluation_criteria: str
    result: EvalResult
    explanation: str

    def __post_init__(self) -> None:
        if self.result is EvalResult.FAILURE and not self.explanation.strip():
            object.__setattr__(self, "explanation", "evaluation failed without explanation")

    def to_dict(self) -> dict:
        return {
            "evaluation_criteria": self.evaluation_criteria,
            "result": self.result.value,
            "explanation": self.explanation,
        }


# ------------------------------------------------------------ parsing


def _parse_steps(obj: dict[str, Any]) -> tuple[PlanStep, ...]:
    raw = obj.get("steps")
    if not isinstance(raw, list) or not raw:
        raise ParseError("'steps' must be a non-empty list")
    steps = []
    for i, s in enumerate(raw):
        if not isinstance(s, dict):
            raise ParseError(f"step {i} is not an object")
        action = s.get("action")
        if not isinstance(action, str) or not action.strip():
            raise ParseError(f"step {i} has no 'action'")
        steps.append(PlanStep(action.strip(), str(s.get("thought", "")), str(s.get("evaluation", ""))))
    return tuple(steps)


def _int(value: Any, what: str) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float, str)):
        raise ParseError(f"{what} must be an integer")
    try:
        return int(value)
    except ValueError:
        raise ParseError(f"{what} must be an integer") from None


def _parse_action(obj: dict[str, Any]) -> ActionCommand:
    raw = obj.get("action")
    if not isinstance(raw, dict):
        raise ParseError("'action' must be an object")
    name = str(raw.get("name", "")).strip().lower().replace("_", "").replace(" ", "")
    if name == "tap":
        action: Action = Tap(_int(raw.get("id"), "Tap id"))
    elif name in ("swipe", "scroll"):
        direction = str(raw.get("direction", "")).lower()
        if direction not in ("up", "down", "left", "right"):
            raise ParseError(f"bad swipe direction {direction!r}")
        action = Swipe(direction, _int(raw.get("x", 0), "x"), _int(raw.get("y", 0), "y"))
    elif name == "textentry":
        action = TextEntry(_int(raw.get("id"), "TextEntry id"), str(raw.get("text", "")))
    elif name == "stop":
        feedback = str(raw.get("feedback", "")).strip()
        if not feedback:
            raise ParseError("Stop needs non-empty feedback")
        action = Stop(feedback)
    else:
        raise ParseError(f"unknown action {raw.get('name')!r}")
    ids = obj.get("relevant_ui_ids", obj.get("relevant UI IDs", []))
    if not isinstance(ids, list):
        ids = []
    rel = tuple(i for i in (_safe_int(v) for v in ids) if i is not None)
    return ActionCommand(str(obj.get("thought", "")), rel, action)


def _safe_int(v: Any) -> int | None:
    try:
        return _int(v, "id")
    except ParseError:
        return None


def _parse_evaluation(obj: dict[str, Any]) -> EvaluationResult:
    raw = str(obj.get("result", "")).strip().lower().replace(" ", "_")
    aliases = {"complete": "task_complete", "task_completion": "task_complete", "completed": "task_complete"}
    try:
        result = EvalResult(aliases.get(raw, raw))
    except ValueError:
        raise ParseError(f"unknown result {obj.get('result')!r}") from None
    return EvaluationResult(str(obj.get("evaluation_criteria", "")), result, str(obj.get("explanation", "")))


# ------------------------------------------------------------- agents


@dataclass
class Agents:
    """The three agents sharing one client and one session audit log."""

    client: LLMClient
    audit: ExchangeLog = field(default_factory=ExchangeLog)
    reprompt_limit: int = REPROMPT_LIMIT

    def _ask(self, prompt: str, role: AgentRole, template_id: str, parse):
        """Call the model, re-prompting on unusable output."""
        attempt_prompt = prompt
        last_error: ParseError | None = None
        for _ in range(self.reprompt_limit + 1):
            response = llm_complete(self.client, attempt_prompt, role, self.audit, template_id)
            try:
                return parse(parse_object(response))
            except ParseError as exc:
                last_error = exc
                log.info("%s response unusable: %s", role.value, exc)
                attempt_prompt = prompt + prompts.REPROMPT_SUFFIX.replace("$error", str(exc))
        raise last_error  # type: ignore[misc]

    def propose_plan(self, goal: str, app_name: str, screen_text: str) -> Plan:
        prompt = prompts.render(prompts.PLANNER, app_name=app_name, goal=goal, screen=screen_text)
        try:
            steps = self._ask(prompt, AgentRole.PLANNER, prompts.PLANNER_ID, _parse_steps)
        except ParseError as exc:
            raise PlanningError(f"planner output unusable: {exc}") from exc
        return Plan(steps, goal, 0)

    def replan(
        self,
        previous: Plan,
        current_step_index: int,
        feedback: str,
        screen_text: str,
        app_name: str = "",
    ) -> Plan:
        if not 0 <= current_step_index < len(previous.steps):
            raise IndexError("current_step_index outside the plan")
        prompt = prompts.render(
            prompts.REPLANNER,
            app_name=app_name,
            goal=previous.goal,
            previous_plan=previous.to_json(),
            step_index=current_step_index,
            step_action=previous.steps[current_step_index].action,
            feedback=feedback,
            screen=screen_text,
        )
        try:
            steps = self._ask(prompt, AgentRole.PLANNER, prompts.REPLANNER_ID, _parse_steps)
        except ParseError as exc:
            raise PlanningError(f"replanner output unusable: {exc}") from exc
        return Plan(previous.steps[:current_step_index] + steps, previous.goal, previous.revision + 1)

    def next_action(self, step: PlanStep, screen_text: str) -> ActionCommand:
        prompt = prompts.render(
            prompts.ACTION, step_action=step.action, step_thought=step.thought, screen=screen_text
        )
        try:
            cmd = self._ask(prompt, AgentRole.ACTION, prompts.ACTION_ID, _parse_action)
        except ParseError as exc:
            raise ActionError(f"action output unusable: {exc}") from exc
        target = getattr(cmd.action, "id", None)
        if target is not None and target not in element_ids(screen_text):
            return replace(
                cmd,
                action=Stop(f"element id {target} is not on the current screen; the plan needs a step that reaches it"),
            )
        return cmd

    def evaluate_action(
        self,
        goal: str,
        plan: Plan,
        command: ActionCommand,
        before_text: str,
        after_text: str,
        step: PlanStep | None = None,
    ) -> EvaluationResult:
        prompt = prompts.render(
            prompts.EVALUATION,
            goal=goal,
            plan=plan.to_json(),
            step_action=step.action if step else "",
            action=json.dumps(command.to_dict(), indent=2),
            before=before_text,
            after=after_text,
        )
        try:
            result = self._ask(prompt, AgentRole.EVALUATION, prompts.EVALUATION_ID, _parse_evaluation)
        except ParseError:
            return EvaluationResult("", EvalResult.FAILURE, "evaluator unparseable")
        if (
            isinstance(command.action, Swipe)
            and before_text == after_text
            and result.result is EvalResult.SUCCESS
        ):
            return EvaluationResult(
                result.evaluation_criteria,
                EvalResult.FAILURE,
                "the screen did not change after the swipe; the scroll likely failed",
            )
        return result
