"""A deterministic simulated mobile device.

Apps are screen graphs loaded from JSON app-definition documents
(``format_version`` 1). The :class:`Device` exposes touch input, feature
toggles, app lifecycle and the low-level VoiceOver cursor primitives the
``voiceover`` module drives. Time is a simulated millisecond clock advanced
by fixed per-action costs, so every session is reproducible.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Mapping, Protocol

from . import imaging
from .ui_model import (
    BoundingBox,
    ElementKind,
    ScreenSnapshot,
    UIElement,
    make_snapshot,
)

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
VOICEOVER_SPEAKING_RATE = 0.25
DEFAULT_WIDTH = 1170
DEFAULT_HEIGHT = 2532

COST_MS = {
    "tap": 300,
    "swipe": 500,
    "type_char": 80,
    "vo_swipe": 400,
    "vo_double_tap": 300,
    "vo_scroll": 500,
    "vo_focus": 300,
    "launch": 1500,
    "kill": 500,
    "set_feature": 200,
    "finding": 1000,
}
CAPTION_MS_PER_CHAR = 20
RETURN_TARGET = "$return"


class AppLoadError(ValueError):
    pass


class DeviceStateError(RuntimeError):
    pass


class DeviceActionError(RuntimeError):
    pass


class DynamicTypeSize(str, Enum):
    OFF = "Off"
    XL = "XL"
    XXL = "XXL"
    XXXL = "XXXL"
    AX1 = "AX1"

    @property
    def rank(self) -> int:
        return DYNAMIC_TYPE_ORDER.index(self)


DYNAMIC_TYPE_ORDER = [
    DynamicTypeSize.OFF,
    DynamicTypeSize.XL,
    DynamicTypeSize.XXL,
    DynamicTypeSize.XXXL,
    DynamicTypeSize.AX1,
]


class Direction(str, Enum):
    UP = "up"
    DOWN = "down"
    LEFT = "left"
    RIGHT = "right"


@dataclass(frozen=True)
class AccessibilityFeatureState:
    voiceover_on: bool = False
    speaking_rate: float = 0.5
    captions_on: bool = False
    dynamic_type_size: DynamicTypeSize = DynamicTypeSize.OFF
    bold_text_on: bool = False
    button_shapes_on: bool = False

    def __post_init__(self) -> None:
        if not 0 < self.speaking_rate <= 1:
            raise ValueError("speaking_rate must be in (0, 1]")
        if self.captions_on and not self.voiceover_on:
            raise ValueError("captions require VoiceOver")

    def to_dict(self) -> dict:
        return {
            "voiceover_on": self.voiceover_on,
            "speaking_rate": self.speaking_rate,
            "captions_on": self.captions_on,
            "dynamic_type_size": self.dynamic_type_size.value,
            "bold_text_on": self.bold_text_on,
            "button_shapes_on": self.button_shapes_on,
        }


@dataclass(frozen=True)
class ElementDef:
    ref: str
    kind: ElementKind
    box: BoundingBox
    text: str | None = None
    clickable: bool = False
    size_boxes: Mapping[DynamicTypeSize, BoundingBox] = field(default_factory=dict)
    bold_box: BoundingBox | None = None
    underline: bool = False
    container: str | None = None
    accessibility_exposed: bool = True
    vo_order_index: int | None = None
    page: int | None = None
    glyph: bool = False
    labels: tuple[str, ...] = ()

    def visible_on(self, page: int) -> bool:
        return self.page is None or self.page == page

    def box_for(self, feature: AccessibilityFeatureState) -> BoundingBox:
        box = self.size_boxes.get(feature.dynamic_type_size, self.box)
        if feature.bold_text_on and self.bold_box is not None and feature.dynamic_type_size is DynamicTypeSize.OFF:
            box = self.bold_box
        return box


@dataclass(frozen=True)
class Transition:
    element: str | None
    action: str
    target: str
    query: str | None = None

    def accepts(self, text: str) -> bool:
        if self.query is None or self.query == "*":
            return bool(text)
        return text.strip().lower() == self.query.strip().lower()


@dataclass(frozen=True)
class ScreenDef:
    screen_id: str
    elements: tuple[ElementDef, ...]
    transitions: tuple[Transition, ...] = ()
    scroll_extent: int = 0
    vo_next: Mapping[str, str] = field(default_factory=dict)
    interrupt: str | None = None
    title: str = ""

    def element(self, ref: str) -> ElementDef | None:
        for el in self.elements:
            if el.ref == ref:
                return el
        return None

    def transition(self, ref: str | None, action: str, text: str | None = None) -> Transition | None:
        for t in self.transitions:
            if t.element == ref and t.action == action:
                if text is None or t.accepts(text):
                    return t
        return None


@dataclass(frozen=True)
class AppModel:
    app_id: str
    name: str
    screens: Mapping[str, ScreenDef]
    initial_screen: str
    width: int = DEFAULT_WIDTH
    height: int = DEFAULT_HEIGHT

    def screen(self, screen_id: str) -> ScreenDef:
        return self.screens[screen_id]


# ------------------------------------------------------------------ loading


def _box(value: Any, where: str) -> BoundingBox:
    try:
        return BoundingBox.from_list(value)
    except (TypeError, ValueError) as exc:
        raise AppLoadError(f"{where}: bad box {value!r} ({exc})") from None


def _element(raw: Mapping[str, Any], where: str) -> ElementDef:
    if "ref" not in raw:
        raise AppLoadError(f"{where}: element missing 'ref'")
    where = f"{where}/element {raw['ref']}"
    try:
        kind = ElementKind(raw.get("kind", "Other"))
    except ValueError:
        raise AppLoadError(f"{where}: unknown kind {raw.get('kind')!r}") from None
    if "box" not in raw:
        raise AppLoadError(f"{where}: missing 'box'")
    size_boxes = {}
    for size, value in (raw.get("size_boxes") or {}).items():
        try:
            size_boxes[DynamicTypeSize(size)] = _box(value, where)
        except ValueError:
            raise AppLoadError(f"{where}: unknown Dynamic Type size {size!r}") from None
    exposed = bool(raw.get("accessibility_exposed", True))
    vo_index = raw.get("vo_order_index")
    if vo_index is not None and not exposed:
        raise AppLoadError(f"{where}: unexposed element cannot have vo_order_index")
    return ElementDef(
        ref=str(raw["ref"]),
        kind=kind,
        box=_box(raw["box"], where),
        text=raw.get("text"),
        clickable=bool(raw.get("clickable", kind is ElementKind.TAB)),
        size_boxes=size_boxes,
        bold_box=_box(raw["bold_box"], where) if raw.get("bold_box") else None,
        underline=bool(raw.get("underline", False)),
        container=raw.get("container"),
        accessibility_exposed=exposed,
        vo_order_index=None if vo_index is None else int(vo_index),
        page=raw.get("page"),
        glyph=bool(raw.get("glyph", False)),
        labels=tuple(raw.get("labels", ())),
    )


def load_app(definition: Mapping[str, Any] | str | Path) -> AppModel:
    """Validate an app-definition document (mapping or JSON path)."""
    if isinstance(definition, (str, Path)):
        path = Path(definition)
        try:
            doc = json.loads(path.read_text())
        except OSError as exc:
            raise AppLoadError(f"cannot read app definition {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise AppLoadError(f"{path}: invalid JSON ({exc})") from None
    else:
        doc = definition
    version = doc.get("format_version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise AppLoadError(f"unsupported format_version {version}")
    for key in ("app_id", "initial_screen", "screens"):
        if key not in doc:
            raise AppLoadError(f"app definition missing '{key}'")
    app_id = str(doc["app_id"])
    width = int(doc.get("width", DEFAULT_WIDTH))
    height = int(doc.get("height", DEFAULT_HEIGHT))
    screens: dict[str, ScreenDef] = {}
    for sid, raw in doc["screens"].items():
        where = f"screen {sid}"
        elements = tuple(_element(e, where) for e in raw.get("elements", []))
        refs = [e.ref for e in elements]
        if len(set(refs)) != len(refs):
            raise AppLoadError(f"{where}: duplicate element refs")
        for e in elements:
            if e.box.x1 > width or e.box.y1 > height:
                raise AppLoadError(f"{where}/element {e.ref}: box outside {width}x{height}")
            if e.container is not None and e.container not in refs:
                raise AppLoadError(f"{where}/element {e.ref}: unknown container {e.container!r}")
        indices = [e.vo_order_index for e in elements if e.vo_order_index is not None]
        if len(set(indices)) != len(indices):
            raise AppLoadError(f"{where}: duplicate vo_order_index values")
        transitions = []
        for t in raw.get("transitions", []):
            ref = t.get("element")
            if ref is not None and ref not in refs:
                raise AppLoadError(f"{where}: transition from unknown element {ref!r}")
            transitions.append(Transition(ref, t.get("action", "tap"), t["target"], t.get("query")))
        vo_next = dict(raw.get("vo_next", {}))
        for a, b in vo_next.items():
            if a not in refs or b not in refs:
                raise AppLoadError(f"{where}: vo_next references unknown element")
        screens[sid] = ScreenDef(
            screen_id=sid,
            elements=elements,
            transitions=tuple(transitions),
            scroll_extent=int(raw.get("scroll_extent", 0)),
            vo_next=vo_next,
            interrupt=raw.get("interrupt"),
            title=raw.get("title", ""),
        )
    if doc["initial_screen"] not in screens:
        raise AppLoadError(f"unknown screen {doc['initial_screen']!r} as initial_screen")
    for sid, screen in screens.items():
        for t in screen.transitions:
            if t.target != RETURN_TARGET and t.target not in screens:
                raise AppLoadError(f"screen {sid}: transition to unknown screen {t.target!r}")
        if screen.interrupt is not None and screen.interrupt not in screens:
            raise AppLoadError(f"screen {sid}: interrupt to unknown screen {screen.interrupt!r}")
    return AppModel(
        app_id=app_id,
        name=str(doc.get("name", app_id)),
        screens=screens,
        initial_screen=doc["initial_screen"],
        width=width,
        height=height,
    )


# ------------------------------------------------------------------ device


@dataclass(frozen=True)
class DeviceEvent:
    t_ms: int
    kind: str
    detail: Mapping[str, Any]


@dataclass
class DeviceState:
    current_app: str | None = None
    current_screen: str | None = None
    scroll_offset: int = 0
    feature: AccessibilityFeatureState = field(default_factory=AccessibilityFeatureState)
    vo_cursor: str | None = None
    recording: bool = False
    keyboard_visible: bool = False
    return_stack: list[str] = field(default_factory=list)
    field_values: dict[str, str] = field(default_factory=dict)
    interrupts_seen: set[tuple[str, str]] = field(default_factory=set)
    focused_field: str | None = None


class DeviceDriver(Protocol):
    """What the runner needs from a device, simulated or real."""

    def launch_app(self, app_id: str) -> ScreenSnapshot: ...
    def kill_app(self, app_id: str | None = None) -> None: ...
    def tap(self, x: int, y: int) -> ScreenSnapshot: ...
    def swipe(self, direction: Direction | str, x: int, y: int) -> ScreenSnapshot: ...
    def type_text(self, element_id: int, text: str) -> ScreenSnapshot: ...
    def set_feature(self, **changes: Any) -> None: ...
    def snapshot(self) -> ScreenSnapshot: ...
    def screenshot(self) -> imaging.PixelBuffer: ...


KEYBOARD_ROWS = ("qwertyuiop", "asdfghjkl", "zxcvbnm")


class Device:
    """Simulated device. One instance per session; not thread-safe."""

    def __init__(self, apps: Mapping[str, AppModel] | AppModel | None = None, seed: int = 0):
        if isinstance(apps, AppModel):
            apps = {apps.app_id: apps}
        self.apps: dict[str, AppModel] = dict(apps or {})
        self.seed = seed
        self.state = DeviceState()
        self.clock_ms = 0
        self.events: list[DeviceEvent] = []
        self._last: ScreenSnapshot | None = None

    # -- bookkeeping

    def install(self, app: AppModel) -> None:
        self.apps[app.app_id] = app

    def advance(self, ms: int) -> None:
        self.clock_ms += max(0, int(ms))

    def _log(self, kind: str, cost: int, **detail: Any) -> None:
        self.advance(cost)
        self.events.append(DeviceEvent(self.clock_ms, kind, detail))

    @property
    def app(self) -> AppModel:
        if self.state.current_app is None:
            raise DeviceStateError("no app launched")
        return self.apps[self.state.current_app]

    @property
    def screen(self) -> ScreenDef:
        return self.app.screen(self.state.current_screen)

    @property
    def feature(self) -> AccessibilityFeatureState:
        return self.state.feature

    # -- screen graph

    def _enter(self, target: str) -> None:
        st = self.state
        if target == RETURN_TARGET:
            target = st.return_stack.pop() if st.return_stack else self.app.initial_screen
        screen = self.app.screen(target)
        st.current_screen = target
        st.scroll_offset = 0
        st.keyboard_visible = False
        st.focused_field = None
        if screen.interrupt and (target, screen.interrupt) not in st.interrupts_seen:
            st.interrupts_seen.add((target, screen.interrupt))
            st.return_stack.append(target)
            st.current_screen = screen.interrupt
        if st.feature.voiceover_on:
            order = self.vo_order()
            st.vo_cursor = order[0].ref if order else None

    # -- perception

    def visible_defs(self) -> list[ElementDef]:
        page = self.state.scroll_offset
        return [el for el in self.screen.elements if el.visible_on(page)]

    def _to_element(self, el: ElementDef) -> UIElement:
        text = el.text
        if el.kind is ElementKind.TEXT_FIELD and self.state.field_values.get(el.ref):
            text = self.state.field_values[el.ref]
        return UIElement(
            kind=el.kind,
            box=el.box_for(self.feature),
            text=text,
            clickable=el.clickable,
            ref=el.ref,
            glyph=el.glyph,
        )

    def _keyboard_elements(self) -> list[UIElement]:
        w, h = self.app.width, self.app.height
        key_w = w // 10
        key_h = h // 20
        top = h - 4 * key_h - 20
        out = []
        for r, row in enumerate(KEYBOARD_ROWS):
            x_off = (w - len(row) * key_w) // 2
            for c, ch in enumerate(row):
                box = BoundingBox(x_off + c * key_w, top + r * key_h, x_off + (c + 1) * key_w, top + (r + 1) * key_h)
                out.append(UIElement(ElementKind.TEXT, box, ch, clickable=True, ref=f"kbd:{ch}"))
        y = top + 3 * key_h
        out.append(UIElement(ElementKind.BUTTON, BoundingBox(0, y, w // 4, y + key_h), "123", True, ref="kbd:123"))
        out.append(UIElement(ElementKind.BUTTON, BoundingBox(w // 4, y, 3 * w // 4, y + key_h), "space", True, ref="kbd:space"))
        out.append(UIElement(ElementKind.BUTTON, BoundingBox(3 * w // 4, y, w, y + key_h), "search", True, ref="kbd:search"))
        return out

    def _caption_element(self) -> UIElement | None:
        el = self.vo_current()
        if el is None:
            return None
        w, h = self.app.width, self.app.height
        box = BoundingBox(0, h - h // 10, w, h)
        return UIElement(ElementKind.TEXT, box, caption_for(el), ref="vo:caption")

    def snapshot(self) -> ScreenSnapshot:
        if self.state.current_app is None:
            raise DeviceStateError("no app launched")
        els = [self._to_element(el) for el in self.visible_defs()]
        if self.state.keyboard_visible:
            els.extend(self._keyboard_elements())
        if self.feature.captions_on:
            cap = self._caption_element()
            if cap is not None:
                els.append(cap)
        snap = make_snapshot(
            els,
            self.app.width,
            self.app.height,
            app_id=self.app.app_id,
            screen_id=self.state.current_screen,
            keyboard_visible=self.state.keyboard_visible,
        )
        self._last = snap
        return snap

    def screenshot(self) -> imaging.PixelBuffer:
        buf = imaging.render_screen(
            self.screen,
            self.feature,
            self.app.width,
            self.app.height,
            page=self.state.scroll_offset,
            field_values=self.state.field_values,
        )
        arr = buf.data
        if self.state.keyboard_visible:
            for el in self._keyboard_elements():
                b = el.box
                arr[b.y0 + 4 : b.y1 - 4, b.x0 + 4 : b.x1 - 4] = (200, 203, 210)
        if self.feature.captions_on:
            cap = self._caption_element()
            if cap is not None:
                b = cap.box
                arr[b.y0 : b.y1, b.x0 : b.x1] = (30, 30, 30)
        return imaging.PixelBuffer(arr)

    # -- lifecycle

    def launch_app(self, app_id: str) -> ScreenSnapshot:
        if app_id not in self.apps:
            raise DeviceStateError(f"unknown app {app_id!r}")
        st = self.state
        st.current_app = app_id
        st.return_stack.clear()
        st.field_values.clear()
        st.interrupts_seen.clear()
        st.recording = True
        self._enter(self.apps[app_id].initial_screen)
        self._log("launch", COST_MS["launch"], app=app_id, screen=st.current_screen)
        return self.snapshot()

    def kill_app(self, app_id: str | None = None) -> None:
        st = self.state
        if st.current_app is None:
            return
        if app_id is not None and app_id not in self.apps:
            raise DeviceStateError(f"unknown app {app_id!r}")
        killed = st.current_app
        st.current_app = None
        st.current_screen = None
        st.scroll_offset = 0
        st.keyboard_visible = False
        st.vo_cursor = None
        self._log("kill", COST_MS["kill"], app=killed)

    # -- touch input

    def _require_app(self) -> None:
        if self.state.current_app is None:
            raise DeviceStateError("no app launched")

    def hit_test(self, x: int, y: int) -> ElementDef | None:
        """Topmost (smallest) visible element containing the point."""
        hits = [el for el in self.visible_defs() if el.box_for(self.feature).contains_point(x, y)]
        if not hits:
            return None
        return min(hits, key=lambda el: el.box_for(self.feature).area())

    def _activate(self, el: ElementDef | None) -> None:
        st = self.state
        if el is None:
            return
        if el.kind is ElementKind.TEXT_FIELD:
            st.keyboard_visible = True
            st.focused_field = el.ref
            return
        t = self.screen.transition(el.ref, "tap")
        if t is None and el.container is not None:
            t = self.screen.transition(el.container, "tap")
        if t is not None:
            self._enter(t.target)

    def tap(self, x: int, y: int) -> ScreenSnapshot:
        self._require_app()
        st = self.state
        if st.keyboard_visible:
            key = next((k for k in self._keyboard_elements() if k.box.contains_point(x, y)), None)
            if key is not None:
                self._log("tap", COST_MS["tap"], x=x, y=y, element=key.ref)
                if key.ref == "kbd:search":
                    self._submit()
                return self.snapshot()
        el = self.hit_test(x, y)
        self._log("tap", COST_MS["tap"], x=x, y=y, element=el.ref if el else None)
        self._activate(el)
        return self.snapshot()

    def _submit(self) -> None:
        st = self.state
        ref = st.focused_field
        if ref is None:
            return
        t = self.screen.transition(ref, "submit", st.field_values.get(ref, ""))
        if t is not None:
            st.keyboard_visible = False
            st.focused_field = None
            self._enter(t.target)

    def _scroll(self, direction: Direction) -> bool:
        """Page-scroll by content direction. Returns True if anything moved."""
        st = self.state
        screen = self.screen
        if direction is Direction.DOWN and st.scroll_offset < screen.scroll_extent:
            st.scroll_offset += 1
        elif direction is Direction.UP and st.scroll_offset > 0:
            st.scroll_offset -= 1
        elif direction in (Direction.LEFT, Direction.RIGHT):
            t = screen.transition(None, f"swipe_{'left' if direction is Direction.RIGHT else 'right'}")
            if t is None:
                return False
            self._enter(t.target)
            return True
        else:
            return False
        if st.feature.voiceover_on:
            order = self.vo_order()
            st.vo_cursor = order[0].ref if order else None
        return True

    def swipe(self, direction: Direction | str, x: int, y: int) -> ScreenSnapshot:
        """Finger swipe. Swiping up reveals the content below (scroll down)."""
        self._require_app()
        d = Direction(direction)
        content = {Direction.UP: Direction.DOWN, Direction.DOWN: Direction.UP,
                   Direction.LEFT: Direction.RIGHT, Direction.RIGHT: Direction.LEFT}[d]
        self._log("swipe", COST_MS["swipe"], direction=d.value, x=x, y=y)
        self._scroll(content)
        return self.snapshot()

    def type_text(self, element_id: int | str, text: str) -> ScreenSnapshot:
        """Tap a text field (by snapshot id or ref) and type ``text``.

        An empty string clears the field. A matching ``submit`` transition is
        followed and dismisses the keyboard.
        """
        self._require_app()
        snap = self._last if self._last is not None else self.snapshot()
        if isinstance(element_id, str):
            ref = element_id
        else:
            el = snap.by_id(element_id)
            if el is None:
                raise DeviceActionError(f"no element with id {element_id}")
            ref = el.ref
        target = self.screen.element(ref) if ref else None
        if target is None or target.kind is not ElementKind.TEXT_FIELD:
            raise DeviceActionError(f"element {element_id} is not a TextField")
        st = self.state
        st.keyboard_visible = True
        st.focused_field = ref
        st.field_values[ref] = text
        self._log("type", COST_MS["tap"] + COST_MS["type_char"] * len(text), element=ref, text=text)
        if text:
            self._submit()
        return self.snapshot()

    # -- features

    def set_feature(self, **changes: Any) -> None:
        st = self.state
        current = st.feature
        if "dynamic_type_size" in changes:
            changes["dynamic_type_size"] = DynamicTypeSize(changes["dynamic_type_size"])
        vo_on = changes.get("voiceover_on", current.voiceover_on)
        if vo_on and not current.voiceover_on:
            changes.setdefault("captions_on", True)
            changes.setdefault("speaking_rate", VOICEOVER_SPEAKING_RATE)
        if not vo_on:
            changes["captions_on"] = False
        st.feature = replace(current, **changes)
        if st.feature.voiceover_on and st.current_app is not None:
            if st.vo_cursor is None or not current.voiceover_on:
                order = self.vo_order()
                st.vo_cursor = order[0].ref if order else None
        if not st.feature.voiceover_on:
            st.vo_cursor = None
        self._log("set_feature", COST_MS["set_feature"], **{k: _plain(v) for k, v in changes.items()})

    # -- VoiceOver primitives

    def vo_order(self) -> list[ElementDef]:
        """Exposed elements in VoiceOver order: explicit indices first, then
        reading order for the rest."""
        defs = [el for el in self.visible_defs() if el.accessibility_exposed]
        by_ref = {el.ref: el for el in defs}
        ordered = [
            by_ref[e.ref]
            for e in make_snapshot(
                [self._to_element(el) for el in defs], self.app.width, self.app.height
            ).elements
        ]
        indexed = sorted((el for el in ordered if el.vo_order_index is not None), key=lambda e: e.vo_order_index)
        rest = [el for el in ordered if el.vo_order_index is None]
        return indexed + rest

    def vo_current(self) -> ElementDef | None:
        if self.state.vo_cursor is None or self.state.current_app is None:
            return None
        return self.screen.element(self.state.vo_cursor)

    def _require_vo(self) -> None:
        if not self.feature.voiceover_on:
            raise DeviceStateError("VoiceOver is off")
        self._require_app()

    def _caption_dwell(self, el: ElementDef | None) -> int:
        if el is None:
            return 0
        rate = self.feature.speaking_rate
        return round(CAPTION_MS_PER_CHAR * len(caption_for(el)) * VOICEOVER_SPEAKING_RATE / rate)

    def vo_swipe(self, forward: bool = True) -> ElementDef | None:
        """Right (forward) or Left swipe. Returns the newly focused element,
        or None when already at the end of the order."""
        self._require_vo()
        order = self.vo_order()
        cur = self.vo_current()
        nxt: ElementDef | None
        if cur is None:
            nxt = order[0] if order else None
        else:
            refs = [el.ref for el in order]
            if forward and cur.ref in self.screen.vo_next:
                nxt = self.screen.element(self.screen.vo_next[cur.ref])
            elif cur.ref in refs:
                i = refs.index(cur.ref) + (1 if forward else -1)
                nxt = order[i] if 0 <= i < len(order) else None
            else:
                nxt = order[0] if order else None
        name = "vo_right_swipe" if forward else "vo_left_swipe"
        self._log(name, COST_MS["vo_swipe"] + self._caption_dwell(nxt), element=nxt.ref if nxt else None)
        if nxt is not None:
            self.state.vo_cursor = nxt.ref
        return nxt

    def vo_focus(self, ref: str) -> ElementDef:
        """Move the cursor straight to an element (e.g. the leftmost tab)."""
        self._require_vo()
        el = self.screen.element(ref)
        if el is None or not el.accessibility_exposed:
            raise DeviceActionError(f"cannot focus {ref!r}")
        self.state.vo_cursor = ref
        self._log("vo_focus", COST_MS["vo_focus"] + self._caption_dwell(el), element=ref)
        return el

    def vo_double_tap(self) -> ElementDef | None:
        self._require_vo()
        el = self.vo_current()
        self._log("vo_double_tap", COST_MS["vo_double_tap"], element=el.ref if el else None)
        self._activate(el)
        return el

    def vo_scroll(self, direction: Direction | str) -> bool:
        """Three-finger swipe; ``direction`` is the content scroll direction."""
        self._require_vo()
        d = Direction(direction)
        self._log("vo_scroll", COST_MS["vo_scroll"], direction=d.value)
        return self._scroll(d)


def caption_for(el: ElementDef | UIElement) -> str:
    return el.text if el.text else el.kind.value


def _plain(v: Any) -> Any:
    return v.value if isinstance(v, Enum) else v


def app_to_dict(app: AppModel) -> dict:
    """Inverse of :func:`load_app`."""

    def el_dict(e: ElementDef) -> dict:
        d: dict[str, Any] = {"ref": e.ref, "kind": e.kind.value, "box": e.box.to_list()}
        if e.text is not None:
            d["text"] = e.text
        if e.clickable != (e.kind is ElementKind.TAB):
            d["clickable"] = e.clickable
        if e.size_boxes:
            d["size_boxes"] = {k.value: v.to_list() for k, v in e.size_boxes.items()}
        if e.bold_box is not None:
            d["bold_box"] = e.bold_box.to_list()
        for key in ("underline", "glyph"):
            if getattr(e, key):
                d[key] = True
        if e.container is not None:
            d["container"] = e.container
        if not e.accessibility_exposed:
            d["accessibility_exposed"] = False
        if e.vo_order_index is not None:
            d["vo_order_index"] = e.vo_order_index
        if e.page is not None:
            d["page"] = e.page
        if e.labels:
            d["labels"] = list(e.labels)
        return d

    screens = {}
    for sid, s in app.screens.items():
        sd: dict[str, Any] = {"elements": [el_dict(e) for e in s.elements]}
        if s.title:
            sd["title"] = s.title
        if s.transitions:
            sd["transitions"] = [
                {k: v for k, v in (("element", t.element), ("action", t.action), ("target", t.target), ("query", t.query)) if v is not None}
                for t in s.transitions
            ]
        if s.scroll_extent:
            sd["scroll_extent"] = s.scroll_extent
        if s.vo_next:
            sd["vo_next"] = dict(s.vo_next)
        if s.interrupt:
            sd["interrupt"] = s.interrupt
        screens[sid] = sd
    return {
        "format_version": FORMAT_VERSION,
        "app_id": app.app_id,
        "name": app.name,
        "width": app.width,
        "height": app.height,
        "initial_screen": app.initial_screen,
        "screens": screens,
    }
