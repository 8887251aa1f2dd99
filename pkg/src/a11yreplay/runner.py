"""Test parsing, feature staging and the plan/act/evaluate navigation loop.

A session owns one simulated device, one set of agents and one recording.
Every LLM turn advances the device clock by ``LLM_TURN_MS`` so that the
recording reflects where time goes in a real run and every step chapter has
a non-zero duration.
"""

from __future__ import annotations

import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Iterable

from .agents import (
    ActionCommand,
    AgentRole,
    Agents,
    EvalResult,
    ExchangeLog,
    LLMClient,
    Plan,
    Stop,
    Swipe,
    TextEntry,
    llm_complete,
)
from .agents import prompts
from .agents.core import MAX_ACTIONS, MAX_REPLANS, PlanningError, ActionError
from .agents.parsing import ParseError, parse_object
from .device_sim import (
    COST_MS,
    DYNAMIC_TYPE_ORDER,
    AppModel,
    Device,
    DeviceActionError,
    DeviceStateError,
    Direction,
    DynamicTypeSize,
)
from .heuristics import (
    HeuristicConfig,
    HeuristicFinding,
    button_shapes_check,
    collect_vo_findings,
    dynamic_type_check,
)
from .imaging import PixelBuffer
from .ui_model import (
    DEFAULT_CAPTION_HEIGHT_FRAC,
    ScreenSnapshot,
    detect_keyboard,
    filter_caption_panel,
    renumber,
    serialize_elements,
)
from .voiceover import (
    FINGER_TO_SCROLL,
    ActivationResult,
    VisitTrace,
    activate_from_coordinates,
    read_all,
    vo_scroll,
)

log = logging.getLogger(__name__)

LLM_TURN_MS = 1000


class SpecError(ValueError):
    pass


class Feature(str, Enum):
    VOICEOVER = "VoiceOver"
    DYNAMIC_TYPE = "DynamicType"
    BOLD_TEXT = "BoldText"
    BUTTON_SHAPES = "ButtonShapes"


class Difficulty(str, Enum):
    EASY = "Easy"
    HARD = "Hard"


# lower-case phrase -> feature; longer phrases are tried first
FEATURE_SYNONYMS: dict[str, Feature] = {
    "voiceover": Feature.VOICEOVER,
    "voice over": Feature.VOICEOVER,
    "vo": Feature.VOICEOVER,
    "screen reader": Feature.VOICEOVER,
    "dynamic type": Feature.DYNAMIC_TYPE,
    "dynamictype": Feature.DYNAMIC_TYPE,
    "large text": Feature.DYNAMIC_TYPE,
    "larger text": Feature.DYNAMIC_TYPE,
    "text size": Feature.DYNAMIC_TYPE,
    "dt": Feature.DYNAMIC_TYPE,
    "bold text": Feature.BOLD_TEXT,
    "boldtext": Feature.BOLD_TEXT,
    "bold": Feature.BOLD_TEXT,
    "button shapes": Feature.BUTTON_SHAPES,
    "button shape": Feature.BUTTON_SHAPES,
    "buttonshapes": Feature.BUTTON_SHAPES,
}
PLATFORMS = frozenset({"ios", "ipados", "android", "macos", "watchos", "tvos"})
_CONNECTORS = re.compile(r"^(?:in|on|for|of|with|at|across|the|:|-)\s+", re.IGNORECASE)
_STEP_RE = re.compile(r"^\s*(\d+)[.)]\s+(.+?)\s*$")
_KEY_RE = re.compile(r"^\s*(App|Feature|Difficulty|Target Screen|Expected Results?|Instructions?)\s*:\s*(.*)$", re.IGNORECASE)
_ORDER_RE = re.compile(r"\b(verify|navigation order|focus order|reading order|read[- ]all)\b", re.IGNORECASE)


def _synonym_pattern() -> re.Pattern:
    words = sorted(FEATURE_SYNONYMS, key=len, reverse=True)
    return re.compile(r"\b(" + "|".join(re.escape(w) for w in words) + r")\b", re.IGNORECASE)


_SYNONYM_RE = _synonym_pattern()


def feature_from_text(text: str) -> Feature | None:
    t = text.strip()
    try:
        return Feature(t)
    except ValueError:
        pass
    m = _SYNONYM_RE.search(t)
    return FEATURE_SYNONYMS[m.group(1).lower()] if m else None


@dataclass(frozen=True)
class TestSpec:
    __test__ = False  # not a pytest class

    title: str
    app_name: str
    feature: Feature
    goal: str = ""
    steps: tuple[str, ...] = ()
    expected_results: str | None = None
    difficulty: Difficulty | None = None
    target_screen: str | None = None
    raw: str = ""

    def __post_init__(self) -> None:
        if not self.app_name.strip():
            raise SpecError("app_name is empty")

    @property
    def instructions(self) -> str:
        """What the planner sees as the test instructions."""
        return self.raw.strip() or self.title

    @property
    def wants_order_check(self) -> bool:
        return bool(_ORDER_RE.search(self.instructions))

    def to_dict(self) -> dict:
        return {
            "title": self.title,
            "app_name": self.app_name,
            "feature": self.feature.value,
            "goal": self.goal,
            "steps": list(self.steps),
            "expected_results": self.expected_results,
            "difficulty": self.difficulty.value if self.difficulty else None,
            "target_screen": self.target_screen,
            "raw": self.raw,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TestSpec":
        return cls(
            title=d["title"],
            app_name=d["app_name"],
            feature=Feature(d["feature"]),
            goal=d.get("goal", ""),
            steps=tuple(d.get("steps", ())),
            expected_results=d.get("expected_results"),
            difficulty=Difficulty(d["difficulty"]) if d.get("difficulty") else None,
            target_screen=d.get("target_screen"),
            raw=d.get("raw", ""),
        )


def _strip_connectors(text: str) -> str:
    prev = None
    text = text.strip()
    while prev != text:
        prev = text
        text = _CONNECTORS.sub("", text).strip()
    return text


def _split_title(title: str) -> tuple[str | None, Feature | None, str]:
    """(app, feature, goal) from a colon-delimited title."""
    parts = [p.strip() for p in title.split(":") if p.strip()]
    if parts and parts[0].lower() in PLATFORMS:
        parts = parts[1:]
    for i, part in enumerate(parts):
        exact = FEATURE_SYNONYMS.get(part.lower())
        if exact is not None:
            app = ": ".join(parts[:i]) or None
            return app, exact, ": ".join(parts[i + 1 :])
        m = _SYNONYM_RE.search(part)
        if m is not None:
            feature = FEATURE_SYNONYMS[m.group(1).lower()]
            rest = _strip_connectors(part[: m.start()] + " " + part[m.end() :])
            goal = ": ".join([rest] + parts[i + 1 :]) if rest else ": ".join(parts[i + 1 :])
            app = ": ".join(parts[:i]) or None
            return app, feature, goal
    return (": ".join(parts[:-1]) or None), None, (parts[-1] if parts else "")


def _llm_extract(raw: str, client: LLMClient, audit: ExchangeLog | None) -> dict[str, Any]:
    prompt = prompts.INSTRUCTIONS.substitute(features=", ".join(f.value for f in Feature), raw=raw)
    audit = audit if audit is not None else ExchangeLog()
    response = llm_complete(client, prompt, AgentRole.PLANNER, audit, prompts.INSTRUCTIONS_ID)
    try:
        return parse_object(response)
    except ParseError:
        return {}


def parse_instructions(
    raw: str,
    *,
    default_app: str | None = None,
    client: LLMClient | None = None,
    audit: ExchangeLog | None = None,
) -> TestSpec:
    """Rule-based extraction with a single LLM fallback when rules fail."""
    if raw is None or not raw.strip():
        raise SpecError("empty test instructions")
    lines = raw.strip().splitlines()
    title = lines[0].strip()
    if title.lower().startswith("title:"):
        title = title[6:].strip()
    keyed: dict[str, str] = {}
    steps: list[str] = []
    expected: list[str] = []
    in_expected = False
    for line in lines[1:]:
        m = _KEY_RE.match(line)
        if m:
            key = m.group(1).lower()
            in_expected = key.startswith("expected")
            if in_expected:
                if m.group(2).strip():
                    expected.append(m.group(2).strip())
            else:
                keyed[key] = m.group(2).strip()
            continue
        s = _STEP_RE.match(line)
        if s and not in_expected:
            steps.append(s.group(2))
        elif in_expected and line.strip():
            expected.append(line.strip())

    app, feature, goal = _split_title(title)
    if "feature" in keyed:
        feature = feature_from_text(keyed["feature"]) or feature
    if "app" in keyed and keyed["app"]:
        app = keyed["app"]
    app = app or default_app

    if (feature is None or not app) and client is not None:
        extracted = _llm_extract(raw, client, audit)
        if feature is None:
            feature = feature_from_text(str(extracted.get("feature", "")))
        if not app:
            app = str(extracted.get("app_name", "")).strip() or None
        if not goal:
            goal = str(extracted.get("goal", "")).strip()
    if feature is None:
        supported = ", ".join(f.value for f in Feature)
        raise SpecError(f"cannot recognize the accessibility feature in {title!r}; supported: {supported}")
    if not app:
        raise SpecError(f"cannot find the app name in {title!r}")

    difficulty = None
    if keyed.get("difficulty"):
        try:
            difficulty = Difficulty(keyed["difficulty"].capitalize())
        except ValueError:
            raise SpecError(f"unknown difficulty {keyed['difficulty']!r}") from None
    return TestSpec(
        title=title,
        app_name=app,
        feature=feature,
        goal=goal or title,
        steps=tuple(steps),
        expected_results="\n".join(expected) or None,
        difficulty=difficulty,
        target_screen=keyed.get("target screen") or None,
        raw=raw.strip(),
    )


# ---------------------------------------------------------------- recording


class EventKind(str, Enum):
    ACTION = "Action"
    SCREENSHOT = "Screenshot"
    FINDING = "Finding"
    PLAN_REVISION = "PlanRevision"
    CHAPTER_BOUNDARY = "ChapterBoundary"


class FinalStatus(str, Enum):
    SUCCESS = "success"
    PARTIAL = "partial"
    FAIL = "fail"


class NavOutcome(str, Enum):
    REACHED = "reached"
    PARTIAL = "partial"
    FAILED = "failed"


@dataclass(frozen=True)
class Event:
    t_ms: int
    kind: EventKind
    data: dict

    def to_dict(self) -> dict:
        return {"t_ms": self.t_ms, "kind": self.kind.value, "data": self.data}

    @classmethod
    def from_dict(cls, d: dict) -> "Event":
        return cls(int(d["t_ms"]), EventKind(d["kind"]), d["data"])


@dataclass
class SessionRecording:
    spec: TestSpec | None = None
    events: list[Event] = field(default_factory=list)
    frames: list[PixelBuffer] = field(default_factory=list)
    findings: list[HeuristicFinding] = field(default_factory=list)
    final_status: FinalStatus = FinalStatus.FAIL
    exchanges: ExchangeLog = field(default_factory=ExchangeLog)
    traces: list[VisitTrace] = field(default_factory=list)

    def append(self, t_ms: int, kind: EventKind, **data: Any) -> Event:
        if self.events and t_ms < self.events[-1].t_ms:
            raise ValueError("recording timestamps must be non-decreasing")
        ev = Event(t_ms, kind, data)
        self.events.append(ev)
        return ev

    def of_kind(self, kind: EventKind) -> list[Event]:
        return [e for e in self.events if e.kind is kind]

    def to_dict(self) -> dict:
        """Everything except pixel data, in a JSON-ready form."""
        return {
            "spec": self.spec.to_dict() if self.spec else None,
            "final_status": self.final_status.value,
            "events": [e.to_dict() for e in self.events],
            "findings": [f.to_dict() for f in self.findings],
            "frame_count": len(self.frames),
        }


@dataclass
class NavigationResult:
    outcome: NavOutcome
    steps_succeeded: int
    actions: int
    replans: int
    plan: Plan | None
    explanation: str = ""


@dataclass(frozen=True)
class RunnerConfig:
    max_actions: int = MAX_ACTIONS
    max_replans: int = MAX_REPLANS
    caption_height_frac: float = DEFAULT_CAPTION_HEIGHT_FRAC
    llm_turn_ms: int = LLM_TURN_MS
    heuristics: HeuristicConfig = field(default_factory=HeuristicConfig)


class _TimedClient:
    """Charges simulated latency for each model turn."""

    def __init__(self, inner: LLMClient, device: Device, ms: int):
        self.inner, self.device, self.ms = inner, device, ms

    def complete(self, prompt: str, role: AgentRole) -> str:
        self.device.advance(self.ms)
        return self.inner.complete(prompt, role)


@dataclass
class Capture:
    """A screenshot taken for a heuristic, with the elements it shows."""

    label: str
    screen_id: str
    snapshot: ScreenSnapshot
    frame: int


class Session:
    def __init__(
        self,
        app: AppModel,
        client: LLMClient,
        config: RunnerConfig | None = None,
        spec: TestSpec | None = None,
        seed: int = 0,
    ):
        self.app = app
        self.config = config or RunnerConfig()
        self.device = Device(app, seed=seed)
        self.recording = SessionRecording(spec=spec)
        self.agents = Agents(_TimedClient(client, self.device, self.config.llm_turn_ms), self.recording.exchanges)
        self.activations: list[ActivationResult] = []
        self.label: str | None = None
        self._synced = 0

    # -- bookkeeping

    def sync(self) -> None:
        """Mirror new device events into the recording."""
        for ev in self.device.events[self._synced :]:
            self.recording.append(ev.t_ms, EventKind.ACTION, source="device", name=ev.kind, **dict(ev.detail))
        self._synced = len(self.device.events)

    def note(self, kind: EventKind, **data: Any) -> Event:
        self.sync()
        if self.label is not None:
            data.setdefault("pass", self.label)
        return self.recording.append(self.device.clock_ms, kind, **data)

    def chapter(self, title: str, step_index: int | None = None) -> None:
        shown = f"[{self.label}] {title}" if self.label else title
        self.note(EventKind.CHAPTER_BOUNDARY, title=shown, step_index=step_index)

    def screenshot(self, purpose: str = "frame", overlays: list[dict] | None = None) -> int:
        self.recording.frames.append(self.device.screenshot())
        idx = len(self.recording.frames) - 1
        self.note(
            EventKind.SCREENSHOT,
            frame=idx,
            purpose=purpose,
            screen_id=self.device.state.current_screen,
            overlays=overlays or [],
        )
        return idx

    def add_finding(self, finding: HeuristicFinding, frame: int | None) -> None:
        self.device.advance(COST_MS["finding"])
        self.recording.findings.append(finding)
        self.note(
            EventKind.FINDING,
            index=len(self.recording.findings) - 1,
            frame=frame,
            finding=finding.to_dict(),
        )

    # -- perception

    def perceive(self) -> ScreenSnapshot:
        """The screen as the agents see it: keyboard keys and the caption
        panel removed, ids renumbered in reading order."""
        snap = self.device.snapshot()
        keyboard, kept = detect_keyboard(snap)
        snap = ScreenSnapshot(tuple(kept), snap.width, snap.height, keyboard, snap.app_id, snap.screen_id)
        if self.device.feature.captions_on:
            snap = filter_caption_panel(snap, self.config.caption_height_frac)
        return renumber(snap)

    # -- acting

    def execute(self, command: ActionCommand, screen: ScreenSnapshot) -> list[dict]:
        """Perform one agent action; returns overlay descriptions."""
        action = command.action
        vo = self.device.feature.voiceover_on
        if isinstance(action, Swipe):
            d = Direction(action.direction)
            if vo:
                vo_scroll(self.device, FINGER_TO_SCROLL[d])
            else:
                self.device.swipe(d, action.x, action.y)
            return [{"type": "swipe", "x": action.x, "y": action.y, "direction": d.value}]
        el = screen.by_id(action.id)
        if el is None:
            raise DeviceActionError(f"no element with id {action.id}")
        cx, cy = el.box.center()
        if vo:
            res = activate_from_coordinates(self.device, cx, cy, el.kind, target_box=el.box, target_ref=el.ref)
            self.activations.append(res)
            if isinstance(action, TextEntry) and not res.missing:
                self.device.type_text(el.ref, action.text)
        elif isinstance(action, TextEntry):
            self.device.type_text(el.ref, action.text)
        else:
            self.device.tap(cx, cy)
        return [{"type": "tap", "x": cx, "y": cy}]


def run_navigation(
    session: Session,
    goal: str,
    max_actions: int | None = None,
    target_screen: str | None = None,
    on_step: Callable[[], None] | None = None,
) -> NavigationResult:
    """Plan, act and evaluate until the plan is done, the evaluator reports
    the task complete, or a budget runs out."""
    cfg = session.config
    max_actions = cfg.max_actions if max_actions is None else max_actions
    agents = session.agents
    screen = session.perceive()
    text = serialize_elements(screen)
    try:
        plan = agents.propose_plan(goal, session.app.name, text)
    except PlanningError as exc:
        return NavigationResult(NavOutcome.FAILED, 0, 0, 0, None, str(exc))
    session.note(EventKind.PLAN_REVISION, revision=plan.revision, plan=plan.to_dict())

    i = actions = replans = succeeded = 0
    complete = False
    failure = ""
    if plan.steps:
        session.chapter(plan.steps[0].action, 0)
    while i < len(plan.steps):
        step = plan.steps[i]
        feedback = None
        if actions >= max_actions:
            failure = f"action budget of {max_actions} exhausted"
            break
        try:
            cmd = agents.next_action(step, text)
        except ActionError as exc:
            cmd = ActionCommand("", (), Stop(str(exc)))
        if isinstance(cmd.action, Stop):
            feedback = cmd.action.feedback
            session.note(EventKind.ACTION, source="agent", command=cmd.to_dict(), step_index=i)
        else:
            try:
                overlays = session.execute(cmd, screen)
            except (DeviceActionError, DeviceStateError) as exc:
                overlays = []
                feedback = f"the action could not be performed: {exc}"
            actions += 1
            session.note(EventKind.ACTION, source="agent", command=cmd.to_dict(), step_index=i)
            after = session.perceive()
            after_text = serialize_elements(after)
            session.screenshot("frame", overlays)
            if feedback is None:
                ev = agents.evaluate_action(goal, plan, cmd, text, after_text, step)
                session.note(EventKind.ACTION, source="evaluation", result=ev.to_dict(), step_index=i)
                if ev.result is EvalResult.FAILURE:
                    feedback = ev.explanation
            screen, text = after, after_text
            if feedback is None:
                plan = plan.mark_success(i)
                succeeded += 1
                i += 1
                if on_step is not None:
                    on_step()
                if ev.result is EvalResult.TASK_COMPLETE:
                    complete = True
                    break
                if i < len(plan.steps):
                    session.chapter(plan.steps[i].action, i)
                continue
        # replanning
        if replans >= cfg.max_replans:
            failure = f"gave up after {replans} replans; last feedback: {feedback}"
            break
        replans += 1
        try:
            plan = agents.replan(plan, i, feedback, text, session.app.name)
        except PlanningError as exc:
            failure = str(exc)
            break
        session.note(EventKind.PLAN_REVISION, revision=plan.revision, plan=plan.to_dict(), feedback=feedback)
        if i < len(plan.steps):
            session.chapter(plan.steps[i].action, i)
    else:
        complete = True

    if complete and target_screen is not None and session.device.state.current_screen != target_screen:
        complete = False
        failure = f"ended on {session.device.state.current_screen!r}, expected {target_screen!r}"
    if complete:
        outcome = NavOutcome.REACHED
    else:
        outcome = NavOutcome.PARTIAL if succeeded else NavOutcome.FAILED
        log.info("navigation %s: %s", outcome.value, failure)
    return NavigationResult(outcome, succeeded, actions, replans, plan, failure)


# --------------------------------------------------------------- run_test


def _pass(
    session: Session,
    spec: TestSpec,
    label: str,
    finish: Callable[[], None] | None = None,
    **features: Any,
) -> tuple[NavigationResult, list[Capture]]:
    """Launch, stage features, navigate, kill.

    Returns one capture per tested screen (the first screen and the screen
    after each successful step), last one being the final screen.
    """
    session.label = label
    dev = session.device
    dev.launch_app(session.app.app_id)
    if features:
        dev.set_feature(**features)
    captures = [_capture(session, label)]
    result = run_navigation(
        session,
        spec.instructions,
        target_screen=spec.target_screen,
        on_step=lambda: captures.append(_capture(session, label)),
    )
    if finish is not None:
        finish()
    final = captures[-1]
    if finish is not None or final.screen_id != dev.state.current_screen:
        final = _capture(session, label)
    unique = {}
    for c in captures + [final]:
        unique.pop(c.screen_id, None)
        unique[c.screen_id] = c
    dev.kill_app()
    return result, list(unique.values())


def _capture(session: Session, label: str) -> Capture:
    snap = session.perceive()
    frame = session.screenshot("capture")
    return Capture(label, snap.screen_id, snap, frame)


def _status(results: Iterable[NavigationResult]) -> FinalStatus:
    results = list(results)
    if results and all(r.outcome is NavOutcome.REACHED for r in results):
        return FinalStatus.SUCCESS
    if any(r.steps_succeeded for r in results):
        return FinalStatus.PARTIAL
    return FinalStatus.FAIL


def _dynamic_type(session: Session, spec: TestSpec) -> list[NavigationResult]:
    sizes = [s for s in DYNAMIC_TYPE_ORDER if s is not DynamicTypeSize.OFF] + [DynamicTypeSize.OFF]
    results, finals = [], {}
    for size in sizes:
        label = f"Dynamic Type {size.value}"
        result, captures = _pass(session, spec, label, dynamic_type_size=size)
        results.append(result)
        finals[size] = captures[-1]
    ordered = [DynamicTypeSize.OFF] + [s for s in sizes if s is not DynamicTypeSize.OFF]
    session.label = "Dynamic Type"
    for small, large in zip(ordered, ordered[1:]):
        a, b = finals[small], finals[large]
        session.note(EventKind.ACTION, source="heuristic", name="dynamic_type_check", sizes=[small.value, large.value])
        if a.screen_id != b.screen_id:
            continue
        for f in dynamic_type_check(a.snapshot, b.snapshot, session.config.heuristics):
            session.add_finding(f, b.frame)
    return results


def _on_off(session: Session, spec: TestSpec, feature_flag: str, name: str) -> list[NavigationResult]:
    results = []
    on_result, on_caps = _pass(session, spec, f"{name} on", **{feature_flag: True})
    results.append(on_result)
    if feature_flag == "button_shapes_on":
        for cap in on_caps:
            pixels = session.recording.frames[cap.frame]
            for f in button_shapes_check(cap.snapshot, pixels, session.config.heuristics):
                session.add_finding(f, cap.frame)
    off_result, off_caps = _pass(session, spec, f"{name} off", **{feature_flag: False})
    results.append(off_result)
    on_ids = {c.screen_id: c.frame for c in on_caps}
    session.note(
        EventKind.ACTION,
        source="runner",
        name="screenshot_pairs",
        pairs=[[c.screen_id, on_ids[c.screen_id], c.frame] for c in off_caps if c.screen_id in on_ids],
    )
    return results


def _trace_dict(trace: VisitTrace) -> dict:
    return {
        "visited": [dict(v.element.to_dict(), caption=v.caption) for v in trace.visited],
        "truncated": trace.truncated,
        "loop": trace.loop.to_dict() if trace.loop else None,
    }


def _voiceover(session: Session, spec: TestSpec) -> list[NavigationResult]:
    dev = session.device

    def finish() -> None:
        if spec.wants_order_check:
            trace = read_all(dev)
            session.recording.traces.append(trace)
            session.note(EventKind.ACTION, source="voiceover", name="read_all", trace=_trace_dict(trace))
        last = session.screenshot("capture")
        for f in collect_vo_findings(session.recording.traces, session.activations):
            session.add_finding(f, last)

    on, _ = _pass(session, spec, "VoiceOver on", finish=finish, voiceover_on=True)
    dev.set_feature(voiceover_on=False)
    off, _ = _pass(session, spec, "VoiceOver off")
    return [on, off]


def run_test(
    spec: TestSpec,
    app: AppModel,
    client: LLMClient,
    config: RunnerConfig | None = None,
    seed: int = 0,
) -> SessionRecording:
    session = Session(app, client, config, spec, seed)
    try:
        if spec.feature is Feature.DYNAMIC_TYPE:
            results = _dynamic_type(session, spec)
        elif spec.feature is Feature.VOICEOVER:
            results = _voiceover(session, spec)
        elif spec.feature is Feature.BOLD_TEXT:
            results = _on_off(session, spec, "bold_text_on", "Bold Text")
        else:
            results = _on_off(session, spec, "button_shapes_on", "Button Shapes")
    except (DeviceStateError, DeviceActionError) as exc:
        log.warning("session aborted: %s", exc)
        session.label = None
        session.note(EventKind.ACTION, source="runner", name="aborted", error=str(exc))
        results = []
    session.recording.final_status = _status(results)
    session.sync()
    # close the timeline so the last chapter has a length
    session.device.advance(COST_MS["finding"])
    if session.recording.frames:
        session.label = None
        session.note(EventKind.SCREENSHOT, frame=len(session.recording.frames) - 1, purpose="end", overlays=[])
    return session.recording


@dataclass
class Job:
    spec: TestSpec
    app: AppModel
    client_factory: Callable[[], LLMClient]
    config: RunnerConfig | None = None
    seed: int = 0


def run_batch(
    jobs: list[Job],
    parallel: int = 1,
    on_done: Callable[[int, SessionRecording | BaseException], Any] | None = None,
) -> list[SessionRecording | BaseException]:
    """Run independent sessions on a bounded pool; results keep input order."""
    if parallel < 1:
        raise ValueError("parallel must be >= 1")

    def work(i: int) -> SessionRecording | BaseException:
        job = jobs[i]
        try:
            rec: SessionRecording | BaseException = run_test(
                job.spec, job.app, job.client_factory(), job.config, job.seed
            )
        except Exception as exc:  # one broken job must not sink the batch
            rec = exc
        if on_done is not None:
            on_done(i, rec)
        return rec

    with ThreadPoolExecutor(max_workers=parallel) as pool:
        return list(pool.map(work, range(len(jobs))))


def dumps_recording(rec: SessionRecording) -> str:
    return json.dumps(rec.to_dict(), indent=2, sort_keys=True)
