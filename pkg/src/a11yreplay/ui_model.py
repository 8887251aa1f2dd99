"""UI element and screen types, plus the text form handed to the agents.

Element ids are positions in reading order starting at 1, assigned per
snapshot. The serialized line format is a wire contract:

    (3) [Button (Clickable)] "Try It Free" (194, 1563) to (1042, 1744)
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Sequence

SUBMIT_KEYS = frozenset({"return", "search", "go", "done", "send"})
KEYBOARD_MIN_KEYS = 10
DEFAULT_CAPTION_HEIGHT_FRAC = 0.22
ROW_BAND_FRAC = 0.04


class ElementKind(str, Enum):
    BUTTON = "Button"
    TAB = "Tab"
    ICON = "Icon"
    TOGGLE = "Toggle"
    TEXT = "Text"
    TEXT_FIELD = "TextField"
    IMAGE = "Image"
    CONTAINER = "Container"
    OTHER = "Other"


@dataclass(frozen=True)
class BoundingBox:
    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self) -> None:
        if min(self.x0, self.y0, self.x1, self.y1) < 0:
            raise ValueError(f"negative coordinate in {self}")
        if self.x0 > self.x1 or self.y0 > self.y1:
            raise ValueError(f"inverted box {self}")

    @property
    def width(self) -> int:
        return self.x1 - self.x0

    @property
    def height(self) -> int:
        return self.y1 - self.y0

    def area(self) -> int:
        return self.width * self.height

    def center(self) -> tuple[int, int]:
        return ((self.x0 + self.x1) // 2, (self.y0 + self.y1) // 2)

    def contains_point(self, x: int, y: int) -> bool:
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1

    def contains(self, other: "BoundingBox") -> bool:
        return (
            self.x0 <= other.x0
            and self.y0 <= other.y0
            and other.x1 <= self.x1
            and other.y1 <= self.y1
        )

    def to_list(self) -> list[int]:
        return [self.x0, self.y0, self.x1, self.y1]

    @classmethod
    def from_list(cls, values: Sequence[int]) -> "BoundingBox":
        x0, y0, x1, y1 = (int(v) for v in values)
        return cls(x0, y0, x1, y1)


@dataclass(frozen=True)
class UIElement:
    """A detected element. ``ref`` is the simulator's stable identity."""

    kind: ElementKind
    box: BoundingBox
    text: str | None = None
    clickable: bool = False
    is_back_button: bool = False
    id: int = 0
    ref: str | None = None
    glyph: bool = False

    def __post_init__(self) -> None:
        if self.kind is ElementKind.TAB and not self.clickable:
            object.__setattr__(self, "clickable", True)

    def to_dict(self) -> dict:
        d = {
            "id": self.id,
            "kind": self.kind.value,
            "text": self.text,
            "clickable": self.clickable,
            "box": self.box.to_list(),
            "is_back_button": self.is_back_button,
            "ref": self.ref,
        }
        if self.glyph:
            d["glyph"] = True
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "UIElement":
        return cls(
            kind=ElementKind(d["kind"]),
            box=BoundingBox.from_list(d["box"]),
            text=d.get("text"),
            clickable=bool(d.get("clickable", False)),
            is_back_button=bool(d.get("is_back_button", False)),
            id=int(d.get("id", 0)),
            ref=d.get("ref"),
            glyph=bool(d.get("glyph", False)),
        )


@dataclass(frozen=True)
class ScreenSnapshot:
    elements: tuple[UIElement, ...]
    width: int
    height: int
    keyboard_visible: bool = False
    app_id: str = ""
    screen_id: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "elements", tuple(self.elements))
        for el in self.elements:
            if el.box.x1 > self.width or el.box.y1 > self.height:
                raise ValueError(f"element {el.ref or el.id} outside {self.width}x{self.height} screen")

    def by_id(self, element_id: int) -> UIElement | None:
        for el in self.elements:
            if el.id == element_id:
                return el
        return None

    def by_ref(self, ref: str) -> UIElement | None:
        for el in self.elements:
            if el.ref == ref:
                return el
        return None

    def to_dict(self) -> dict:
        return {
            "app_id": self.app_id,
            "screen_id": self.screen_id,
            "width": self.width,
            "height": self.height,
            "keyboard_visible": self.keyboard_visible,
            "elements": [el.to_dict() for el in self.elements],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScreenSnapshot":
        return cls(
            elements=tuple(UIElement.from_dict(e) for e in d.get("elements", [])),
            width=int(d["width"]),
            height=int(d["height"]),
            keyboard_visible=bool(d.get("keyboard_visible", False)),
            app_id=d.get("app_id", ""),
            screen_id=d.get("screen_id", ""),
        )


def default_row_band(height: int) -> int:
    return max(1, round(height * ROW_BAND_FRAC))


def _center_y2(el: UIElement) -> int:
    # doubled center keeps the arithmetic in integers
    return el.box.y0 + el.box.y1


def sort_reading_order(elements: Iterable[UIElement], row_band_px: int) -> list[UIElement]:
    """Group elements into horizontal bands, then order bands top-to-bottom
    and each band left-to-right by ``x0``.

    A band is anchored at its first (topmost) element; an element joins it
    while its vertical center is less than ``row_band_px`` below the anchor.
    Python's sort is stable, so exact ties keep their input order.
    """
    items = sorted(elements, key=_center_y2)
    bands: list[list[UIElement]] = []
    anchor = 0
    for el in items:
        if bands and _center_y2(el) - anchor < 2 * row_band_px:
            bands[-1].append(el)
        else:
            bands.append([el])
            anchor = _center_y2(el)
    out: list[UIElement] = []
    for band in bands:
        out.extend(sorted(band, key=lambda e: e.box.x0))
    return out


def flag_back_button(el: UIElement, width: int, height: int) -> UIElement:
    """Mark a Button or Icon sitting in the top-left corner as a back button."""
    is_back = (
        el.kind in (ElementKind.BUTTON, ElementKind.ICON)
        and el.box.y0 * 4 < height
        and el.box.x0 * 3 < width
    )
    if is_back == el.is_back_button:
        return el
    return replace(el, is_back_button=is_back)


def make_snapshot(
    elements: Iterable[UIElement],
    width: int,
    height: int,
    *,
    app_id: str = "",
    screen_id: str = "",
    keyboard_visible: bool = False,
    row_band_px: int | None = None,
) -> ScreenSnapshot:
    """Sort, flag back buttons and number elements 1..n."""
    band = default_row_band(height) if row_band_px is None else row_band_px
    ordered = sort_reading_order(elements, band)
    numbered = tuple(
        replace(flag_back_button(el, width, height), id=i)
        for i, el in enumerate(ordered, start=1)
    )
    return ScreenSnapshot(numbered, width, height, keyboard_visible, app_id, screen_id)


def renumber(screen: ScreenSnapshot, elements: Iterable[UIElement] | None = None) -> ScreenSnapshot:
    els = screen.elements if elements is None else tuple(elements)
    return ScreenSnapshot(
        tuple(replace(el, id=i) for i, el in enumerate(els, start=1)),
        screen.width,
        screen.height,
        screen.keyboard_visible,
        screen.app_id,
        screen.screen_id,
    )


def format_element(el: UIElement, element_id: int | None = None) -> str:
    eid = el.id if element_id is None else element_id
    kind = el.kind.value + (" (Clickable)" if el.clickable else "")
    parts = [f"({eid}) [{kind}]"]
    if el.text:
        parts.append(f'"{el.text}"')
    b = el.box
    parts.append(f"({b.x0}, {b.y0}) to ({b.x1}, {b.y1})")
    line = " ".join(parts)
    if el.is_back_button:
        line += " [Back]"
    return line


def serialize_elements(screen: ScreenSnapshot) -> str:
    return "\n".join(format_element(el, i) for i, el in enumerate(screen.elements, start=1))


_ID_RE = re.compile(r"^\((\d+)\) \[", re.MULTILINE)


def element_ids(screen_text: str) -> set[int]:
    """Ids present in a serialized screen."""
    return {int(m) for m in _ID_RE.findall(screen_text)}


def detect_keyboard(screen: ScreenSnapshot) -> tuple[bool, list[UIElement]]:
    """Infer an on-screen keyboard from single-character text in the lower third.

    When a keyboard is found, everything in the lower third is dropped except
    submit keys.
    """

    def lower_third(el: UIElement) -> bool:
        return 3 * el.box.y0 >= 2 * screen.height

    keys = [
        el
        for el in screen.elements
        if el.text is not None and len(el.text) == 1 and lower_third(el)
    ]
    if len(keys) < KEYBOARD_MIN_KEYS:
        return False, list(screen.elements)
    kept = [
        el
        for el in screen.elements
        if not lower_third(el) or (el.text or "").strip().lower() in SUBMIT_KEYS
    ]
    return True, kept


def filter_caption_panel(
    screen: ScreenSnapshot, caption_height_frac: float = DEFAULT_CAPTION_HEIGHT_FRAC
) -> ScreenSnapshot:
    """Drop elements lying entirely inside the bottom caption band."""
    if not 0 < caption_height_frac < 0.5:
        raise ValueError("caption_height_frac must be in (0, 0.5)")
    band_top = screen.height - caption_height_frac * screen.height
    kept = tuple(el for el in screen.elements if el.box.y0 < band_top)
    return ScreenSnapshot(
        kept, screen.width, screen.height, screen.keyboard_visible, screen.app_id, screen.screen_id
    )
