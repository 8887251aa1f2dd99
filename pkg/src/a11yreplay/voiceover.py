"""VoiceOver gesture engine on top of the simulated device.

Implements read-all, activate-from-coordinates and page scrolling the way a
screen-reader user would: Right/Left swipes move the cursor one element at a
time and a Double Tap activates it. Loops in the focus order are detected on
the first revisit and, where possible, escaped by jumping to the next
element below.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .device_sim import Device, DeviceStateError, Direction, ElementDef, caption_for
from .ui_model import BoundingBox, ElementKind

READ_ALL_LIMIT = 50


@dataclass(frozen=True)
class VOElement:
    """A reference to an element as VoiceOver saw it."""

    screen_id: str
    ref: str
    kind: ElementKind
    box: BoundingBox
    text: str | None = None

    @classmethod
    def of(cls, device: Device, el: ElementDef) -> "VOElement":
        return cls(device.state.current_screen, el.ref, el.kind, el.box_for(device.feature), el.text)

    @property
    def key(self) -> tuple[str, str]:
        return (self.screen_id, self.ref)

    def to_dict(self) -> dict:
        return {
            "screen_id": self.screen_id,
            "ref": self.ref,
            "kind": self.kind.value,
            "box": self.box.to_list(),
            "text": self.text,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "VOElement":
        return cls(d["screen_id"], d["ref"], ElementKind(d["kind"]), BoundingBox.from_list(d["box"]), d.get("text"))


@dataclass(frozen=True)
class Visit:
    element: VOElement
    caption: str


@dataclass
class LoopRecord:
    repeated_element: VOElement
    first_index: int
    repeat_index: int
    detected_at: VOElement
    broke_out: bool = False

    def to_dict(self) -> dict:
        return {
            "repeated_element": self.repeated_element.to_dict(),
            "first_index": self.first_index,
            "repeat_index": self.repeat_index,
            "detected_at": self.detected_at.to_dict(),
            "broke_out": self.broke_out,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LoopRecord":
        return cls(
            VOElement.from_dict(d["repeated_element"]),
            d["first_index"],
            d["repeat_index"],
            VOElement.from_dict(d["detected_at"]),
            d.get("broke_out", False),
        )


@dataclass
class VisitTrace:
    visited: list[Visit] = field(default_factory=list)
    truncated: bool = False
    loop: LoopRecord | None = None


@dataclass
class ActivationResult:
    point: tuple[int, int]
    ui_type: ElementKind
    screen_id: str
    activated: VOElement | None = None
    swipes_forward: int = 0
    swipes_backward: int = 0
    target_box: BoundingBox | None = None
    target_ref: str | None = None
    loop: LoopRecord | None = None

    @property
    def missing(self) -> bool:
        return self.activated is None


class _Sweep:
    """Visit bookkeeping shared by read-all and activation sweeps."""

    def __init__(self, device: Device):
        self.device = device
        self.visits: list[Visit] = []
        self.seen: dict[tuple[str, str], int] = {}
        self.loop: LoopRecord | None = None

    def record(self, el: ElementDef) -> LoopRecord | None:
        """Record a visit. Returns a LoopRecord on the first revisit."""
        ve = VOElement.of(self.device, el)
        self.visits.append(Visit(ve, caption_for(el)))
        idx = len(self.visits) - 1
        if ve.key in self.seen:
            if self.loop is not None:
                return self.loop
            prev = self.visits[idx - 1].element if idx > 0 else ve
            self.loop = LoopRecord(ve, self.seen[ve.key], idx, detected_at=prev)
            return self.loop
        self.seen[ve.key] = idx
        return None


def _require_vo(device: Device) -> None:
    if not device.feature.voiceover_on:
        raise DeviceStateError("VoiceOver is off")


def break_out_of_loop(device: Device, loop: LoopRecord) -> bool:
    """Jump to the exposed element nearest below the loop.

    The anchor is the element whose Right Swipe jumped back into already
    visited territory; the escape target has the smallest ``y0`` strictly
    greater than the anchor's ``y1``.
    """
    anchor = loop.detected_at.box
    below = [el for el in device.vo_order() if el.box_for(device.feature).y0 > anchor.y1]
    if not below:
        return False
    target = min(below, key=lambda el: (el.box_for(device.feature).y0, el.box_for(device.feature).x0))
    device.vo_focus(target.ref)
    loop.broke_out = True
    return True


def read_all(device: Device, limit: int = READ_ALL_LIMIT) -> VisitTrace:
    """Right-swipe through every exposed element (capped), then the tab bar."""
    _require_vo(device)
    sweep = _Sweep(device)
    trace = VisitTrace()
    order = device.vo_order()
    if not order:
        return trace
    cur = device.vo_current()
    if cur is None:
        cur = device.vo_focus(order[0].ref)
    while True:
        if len(sweep.visits) >= limit:
            trace.truncated = True
            break
        already_looped = sweep.loop is not None
        loop = sweep.record(cur)
        if loop is not None:
            if already_looped or not break_out_of_loop(device, loop):
                break
            cur = device.vo_current()
            continue
        nxt = device.vo_swipe(forward=True)
        if nxt is None:
            break
        cur = nxt
    trace.visited = list(sweep.visits)
    trace.loop = sweep.loop

    tabs = _tabs(device)
    if tabs:
        device.vo_focus(tabs[0].ref)
        device.vo_double_tap()
        # the activated tab's screen carries its own tab bar
        for tab in _tabs(device):
            _move_to(device, tab.ref)
            trace.visited.append(Visit(VOElement.of(device, tab), caption_for(tab)))
    return trace


def _tabs(device: Device) -> list[ElementDef]:
    return sorted(
        (el for el in device.vo_order() if el.kind is ElementKind.TAB),
        key=lambda el: el.box_for(device.feature).x0,
    )


def _move_to(device: Device, ref: str) -> int:
    """Bring the cursor to ``ref``: one Right Swipe when it is next in order,
    otherwise a direct focus. Returns the number of swipes used."""
    cur = device.state.vo_cursor
    if cur == ref:
        return 0
    order = [el.ref for el in device.vo_order()]
    if cur in order and ref in order and order.index(ref) == order.index(cur) + 1:
        device.vo_swipe(forward=True)
        return 1
    device.vo_focus(ref)
    return 0


def _contains(device: Device, el: ElementDef, x: int, y: int) -> bool:
    return el.box_for(device.feature).contains_point(x, y)


def activate_from_coordinates(
    device: Device,
    x: int,
    y: int,
    ui_type: ElementKind | str,
    target_box: BoundingBox | None = None,
    target_ref: str | None = None,
) -> ActivationResult:
    """Locate the element containing (x, y) by swiping, then Double Tap it."""
    _require_vo(device)
    kind = ElementKind(ui_type)
    result = ActivationResult(
        (x, y), kind, device.state.current_screen, target_box=target_box, target_ref=target_ref
    )
    order = device.vo_order()
    if not order:
        return result

    if kind is ElementKind.TAB:
        tabs = _tabs(device)
        if tabs:
            # jump straight to the leftmost tab, then swipe right along the bar
            device.vo_focus(tabs[0].ref)
            for tab in tabs:
                result.swipes_forward += _move_to(device, tab.ref)
                if _contains(device, tab, x, y):
                    result.activated = VOElement.of(device, tab)
                    device.vo_double_tap()
                    return result
        return result

    sweep = _Sweep(device)
    cur = device.vo_current() or device.vo_focus(order[0].ref)
    # forward
    while True:
        already_looped = sweep.loop is not None
        loop = sweep.record(cur)
        if loop is not None:
            if already_looped or not break_out_of_loop(device, loop):
                break
            cur = device.vo_current()
            continue
        if _contains(device, cur, x, y):
            result.activated = VOElement.of(device, cur)
            result.loop = sweep.loop
            device.vo_double_tap()
            return result
        nxt = device.vo_swipe(forward=True)
        if nxt is None:
            break
        result.swipes_forward += 1
        cur = nxt
    result.loop = sweep.loop
    # backward, to the first element
    while True:
        prev = device.vo_swipe(forward=False)
        if prev is None:
            break
        result.swipes_backward += 1
        if _contains(device, prev, x, y):
            result.activated = VOElement.of(device, prev)
            device.vo_double_tap()
            return result
    return result


def vo_scroll(device: Device, direction: Direction | str) -> bool:
    """Three-finger swipe scrolling one page; ``direction`` is where the
    content moves into view (``down`` reveals what is below)."""
    _require_vo(device)
    return device.vo_scroll(direction)


FINGER_TO_SCROLL = {
    Direction.UP: Direction.DOWN,
    Direction.DOWN: Direction.UP,
    Direction.LEFT: Direction.RIGHT,
    Direction.RIGHT: Direction.LEFT,
}
