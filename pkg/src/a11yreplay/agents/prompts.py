"""Versioned prompt templates for the three agents.

Template ids are logged with every exchange so a recorded session can be
tied to the exact wording that produced it. Bump the version suffix when
changing a template's text.
"""

from __future__ import annotations

from string import Template

PLANNER_ID = "planner/v1"
REPLANNER_ID = "replanner/v1"
ACTION_ID = "action/v1"
EVALUATION_ID = "evaluation/v1"
INSTRUCTIONS_ID = "instructions/v1"
REPROMPT_SUFFIX = """

Your previous response could not be used: $error
Reply again with a single JSON object that follows the format above."""

_UI_FORMAT = """Each UI element is listed on its own line as:
(<id>) [<Kind> (Clickable)] "<text>" (<x0>, <y0>) to (<x1>, <y1>)
"(Clickable)" appears only for elements predicted to be clickable, the text
part is omitted for elements without text, and a trailing [Back] marks a
top-left back button. Coordinates are screen pixels."""

_PLAN_FORMAT = """Respond with a JSON object of the form:
{"steps": [{"thought": "<how this step moves toward the goal>",
            "evaluation": "<how to tell the step worked>",
            "action": "<one brief, specific input such as tap, swipe or enter text>",
            "status": "todo"}]}"""

PLANNER = Template(
    """You are the planner for an accessibility test running on an iOS device.
Propose a tentative plan that navigates the app "$app_name" from its current
screen to the view needed by the test below. Each step is one input on one
screen: tap an element, swipe to scroll, or enter text into a field.

Guidelines:
- Traverse backward through the app if an unexpected state is encountered
  (for example a permissions dialog or the wrong screen); use back buttons or
  dismiss dialogs first.
- It is fine to accept an imperfect plan if needed; the plan will be revised
  as execution proceeds.
- If the test needs a search but does not say what to search for, provide
  reasonable search queries based on the app name and what the current screen
  shows.

$ui_format

Test instructions:
$goal

Current screen:
$screen

$plan_format"""
)

REPLANNER = Template(
    """You are the planner for an accessibility test running on an iOS device.
Revise the tentative plan for the app "$app_name". Steps before the current
step already succeeded and are kept as they are; return only the revised
steps from the current step onward.

Guidelines:
- Traverse backward through the app if an unexpected state is encountered
  (for example a permissions dialog or the wrong screen); use back buttons or
  dismiss dialogs first.
- It is fine to accept an imperfect plan if needed; the plan will be revised
  as execution proceeds.
- If the test needs a search but does not say what to search for, provide
  reasonable search queries based on the app name and what the current screen
  shows.

$ui_format

Test instructions:
$goal

Previous plan:
$previous_plan

Current step index: $step_index
Current step: $step_action
Feedback: $feedback

Current screen:
$screen

$plan_format"""
)

ACTION = Template(
    """You are the action agent for an accessibility test on an iOS device.
Turn the current plan step into exactly one action on the screen below.

Available actions:
- Tap: tap a UI element by id. Tapping an element that is not marked
  clickable is acceptable if it is the only reasonable option on the screen.
- Swipe: swipe up, down, left or right from an (x, y) point. Swiping can be
  used to scroll and reveal more of the screen when the target is not visible.
- TextEntry: tap a UI element by id and type a text string. Come up with
  appropriate text if it is not provided.
- Stop: stop this step and give feedback for the planner. The feedback must
  say what information an updated plan needs.

$ui_format

Current step: $step_action
Step thought: $step_thought

Current screen:
$screen

Respond with a JSON object of the form:
{"thought": "<reasoning>", "relevant_ui_ids": [<ids>],
 "action": {"name": "Tap", "id": <id>}
         | {"name": "Swipe", "direction": "up|down|left|right", "x": <x>, "y": <y>}
         | {"name": "TextEntry", "id": <id>, "text": "<text>"}
         | {"name": "Stop", "feedback": "<what the planner needs>"}}"""
)

EVALUATION = Template(
    """You are the evaluation agent for an accessibility test on an iOS device.
Judge whether the last action accomplished the current step.

Hints:
- If UI elements significantly change, the action likely succeeded.
- If the state of the current screen changes but a new view is not opened,
  err on the side of the action succeeding.
- If the last action was a scroll or swipe, but the screen did not change,
  the action likely failed.
- If the target element is not visible, more scrolling may be required.
- If the last action was to click on a text field, the evaluation should be
  whether a keyboard is visible.

$ui_format

Test goal:
$goal

Tentative plan:
$plan

Current step: $step_action

Action taken:
$action

Screen before action:
$before

Screen after action:
$after

Respond with a JSON object of the form:
{"evaluation_criteria": "<what you checked>",
 "result": "success" | "failure" | "task_complete",
 "explanation": "<why; required on failure>"}"""
)

INSTRUCTIONS = Template(
    """Extract the app under test, the accessibility feature and the goal from
this accessibility test description. The feature must be one of: $features.

Test description:
$raw

Respond with a JSON object: {"app_name": "...", "feature": "...", "goal": "..."}"""
)


def render(template: Template, **values: object) -> str:
    return template.substitute(ui_format=_UI_FORMAT, plan_format=_PLAN_FORMAT, **values)
