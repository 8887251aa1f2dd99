"""Accessibility issue detectors.

* Dynamic Type: text (and paired icons) must grow by ``growth_min`` in
  bounding-box area between consecutive text sizes.
* Button Shapes: text inside a clickable container must not be underlined;
  uncontained clickable text must be.
* VoiceOver: loops in the focus order and elements the cursor cannot reach.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Iterable

from .imaging import CANNY_HIGH, CANNY_LOW, PatchError, PixelBuffer, has_underline
from .ui_model import BoundingBox, ElementKind, ScreenSnapshot, UIElement
from .voiceover import ActivationResult, LoopRecord, VisitTrace

log = logging.getLogger(__name__)


class FindingKind(str, Enum):
    DYNAMIC_TYPE_NO_GROWTH = "DynamicTypeNoGrowth"
    ICON_NO_GROWTH = "IconNoGrowth"
    BUTTON_SHAPE_UNDERLINED_IN_CONTAINER = "ButtonShapeUnderlinedInContainer"
    CLICKABLE_TEXT_NOT_UNDERLINED = "ClickableTextNotUnderlined"
    VOICEOVER_LOOP = "VoiceOverLoop"
    VOICEOVER_MISSING_ELEMENT = "VoiceOverMissingElement"


VOICEOVER_KINDS = frozenset({FindingKind.VOICEOVER_LOOP, FindingKind.VOICEOVER_MISSING_ELEMENT})


class Verdict(str, Enum):
    FAIL = "fail"
    PASS = "pass"


class ColorRole(str, Enum):
    ISSUE_ORANGE = "issue-orange"
    ISSUE_CYAN = "issue-cyan"
    PASS_GREEN = "pass-green"


@dataclass(frozen=True)
class HeuristicFinding:
    kind: FindingKind
    region: BoundingBox
    screen_id: str
    verdict: Verdict
    detail: str = ""
    element_ref: str | None = None

    def __post_init__(self) -> None:
        if self.verdict is Verdict.FAIL and not self.detail:
            raise ValueError("failing findings need a detail message")

    @property
    def color_role(self) -> ColorRole:
        if self.verdict is Verdict.PASS:
            return ColorRole.PASS_GREEN
        return ColorRole.ISSUE_CYAN if self.kind in VOICEOVER_KINDS else ColorRole.ISSUE_ORANGE

    @property
    def failed(self) -> bool:
        return self.verdict is Verdict.FAIL

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "region": self.region.to_list(),
            "screen_id": self.screen_id,
            "verdict": self.verdict.value,
            "detail": self.detail,
            "color_role": self.color_role.value,
            "element_ref": self.element_ref,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HeuristicFinding":
        return cls(
            FindingKind(d["kind"]),
            BoundingBox.from_list(d["region"]),
            d["screen_id"],
            Verdict(d["verdict"]),
            d.get("detail", ""),
            d.get("element_ref"),
        )


@dataclass(frozen=True)
class HeuristicConfig:
    partial_similarity_min: float = 0.50
    growth_min: float = 0.10
    underline_span_min: float = 0.75
    icon_gap_max_frac: float = 0.5
    canny_low: float = CANNY_LOW
    canny_high: float = CANNY_HIGH

    def __post_init__(self) -> None:
        for name in ("partial_similarity_min", "growth_min", "underline_span_min", "icon_gap_max_frac"):
            value = getattr(self, name)
            if not 0 < value <= 1:
                raise ValueError(f"{name} must be in (0, 1], got {value}")


def _exact(value: float) -> Fraction:
    # "0.1" -> 1/10 rather than the binary float's expansion
    return Fraction(str(value))


# ------------------------------------------------------------ similarity


def levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def partial_score(a: str, b: str) -> Fraction:
    """Exact partial similarity: best window of the longer string, scored
    by ``1 - distance / len(shorter)``."""
    s, l = (a, b) if len(a) <= len(b) else (b, a)
    if not s:
        return Fraction(1) if not l else Fraction(0)
    n = len(s)
    best = min(levenshtein(s, l[i : i + n]) for i in range(len(l) - n + 1))
    return 1 - Fraction(best, n)


def partial_similarity(a: str, b: str) -> float:
    return float(partial_score(a, b))


# ---------------------------------------------------------- dynamic type


def _text_elements(snapshot: ScreenSnapshot) -> list[UIElement]:
    return [el for el in snapshot.elements if el.kind is ElementKind.TEXT and el.text]


def match_text_elements(
    base: ScreenSnapshot, grown: ScreenSnapshot, cfg: HeuristicConfig = HeuristicConfig()
) -> list[tuple[UIElement, UIElement]]:
    """Greedy best-first pairing by partial similarity.

    Ties go to the earliest base element in reading order, then the earliest
    grown element. Pairs below the similarity floor are dropped, as are
    unmatched elements.
    """
    floor = _exact(cfg.partial_similarity_min)
    b_els, g_els = _text_elements(base), _text_elements(grown)
    candidates = []
    for i, b in enumerate(b_els):
        for j, g in enumerate(g_els):
            score = partial_score(b.text, g.text)
            if score >= floor:
                candidates.append((-score, i, j))
    candidates.sort()
    used_b: set[int] = set()
    used_g: set[int] = set()
    pairs = []
    for _, i, j in candidates:
        if i in used_b or j in used_g:
            continue
        used_b.add(i)
        used_g.add(j)
        pairs.append((i, j))
    pairs.sort()
    return [(b_els[i], g_els[j]) for i, j in pairs]


def grew_enough(base: BoundingBox, grown: BoundingBox, growth_min: float) -> bool:
    return grown.area() >= (1 + _exact(growth_min)) * base.area()


def pair_icons(snapshot: ScreenSnapshot, cfg: HeuristicConfig = HeuristicConfig()) -> list[tuple[UIElement, UIElement]]:
    """Pair each icon with the text element immediately to its right.

    A candidate needs a non-negative gap no larger than ``icon_gap_max_frac``
    of the icon width, and the icon's top and bottom must lie within the
    text's vertical extent. Smallest gaps are taken first.
    """
    frac = _exact(cfg.icon_gap_max_frac)
    icons = [el for el in snapshot.elements if el.kind is ElementKind.ICON]
    texts = _text_elements(snapshot)
    candidates = []
    for i, icon in enumerate(icons):
        for j, text in enumerate(texts):
            gap = text.box.x0 - icon.box.x1
            if gap < 0 or gap > frac * icon.box.width:
                continue
            if icon.box.y0 < text.box.y0 or icon.box.y1 > text.box.y1:
                continue
            candidates.append((gap, i, j))
    candidates.sort()
    used_i: set[int] = set()
    used_t: set[int] = set()
    pairs = []
    for _, i, j in candidates:
        if i in used_i or j in used_t:
            continue
        used_i.add(i)
        used_t.add(j)
        pairs.append((i, j))
    pairs.sort()
    return [(icons[i], texts[j]) for i, j in pairs]


def _growth_detail(what: str, base: BoundingBox, grown: BoundingBox, growth_min: float) -> str:
    ratio = grown.area() / base.area() - 1 if base.area() else float("inf")
    return f"{what} area changed by {ratio:+.1%} (needs at least +{growth_min:.0%})"


def dynamic_type_check(
    base: ScreenSnapshot, grown: ScreenSnapshot, cfg: HeuristicConfig = HeuristicConfig()
) -> list[HeuristicFinding]:
    """One finding per matched text pair and per retained icon pair."""
    findings = []
    text_pairs = match_text_elements(base, grown, cfg)
    for b, g in text_pairs:
        ok = grew_enough(b.box, g.box, cfg.growth_min)
        findings.append(
            HeuristicFinding(
                FindingKind.DYNAMIC_TYPE_NO_GROWTH,
                g.box,
                grown.screen_id,
                Verdict.PASS if ok else Verdict.FAIL,
                _growth_detail(f'text "{g.text}"', b.box, g.box, cfg.growth_min),
                g.ref,
            )
        )
    base_icons = {id(t): icon for icon, t in pair_icons(base, cfg)}
    grown_icons = {id(t): icon for icon, t in pair_icons(grown, cfg)}
    for b, g in text_pairs:
        bi, gi = base_icons.get(id(b)), grown_icons.get(id(g))
        if bi is None or gi is None:
            continue
        ok = grew_enough(bi.box, gi.box, cfg.growth_min)
        findings.append(
            HeuristicFinding(
                FindingKind.ICON_NO_GROWTH,
                gi.box,
                grown.screen_id,
                Verdict.PASS if ok else Verdict.FAIL,
                _growth_detail(f'icon next to "{g.text}"', bi.box, gi.box, cfg.growth_min),
                gi.ref,
            )
        )
    return findings


# --------------------------------------------------------- button shapes


def _containers(snapshot: ScreenSnapshot) -> list[UIElement]:
    return [
        el
        for el in snapshot.elements
        if el.clickable and el.kind in (ElementKind.BUTTON, ElementKind.TAB)
    ]


def button_shapes_check(
    snapshot: ScreenSnapshot, pixels: PixelBuffer, cfg: HeuristicConfig = HeuristicConfig()
) -> list[HeuristicFinding]:
    containers = _containers(snapshot)
    findings = []
    for el in _text_elements(snapshot):
        if el.glyph:
            continue
        contained = any(c.box.contains(el.box) for c in containers)
        if not contained and not el.clickable:
            continue
        try:
            underlined = has_underline(pixels, el.box, cfg.underline_span_min, cfg.canny_low, cfg.canny_high)
        except PatchError as exc:
            log.info("skipping %s: %s", el.ref or el.id, exc)
            continue
        if contained:
            kind = FindingKind.BUTTON_SHAPE_UNDERLINED_IN_CONTAINER
            ok = not underlined
            detail = f'"{el.text}" sits inside a button shape ' + ("and is also underlined" if underlined else "without an underline")
        else:
            kind = FindingKind.CLICKABLE_TEXT_NOT_UNDERLINED
            ok = underlined
            detail = f'clickable "{el.text}" ' + ("is underlined" if underlined else "has no button shape and no underline")
        findings.append(
            HeuristicFinding(kind, el.box, snapshot.screen_id, Verdict.PASS if ok else Verdict.FAIL, detail, el.ref)
        )
    return findings


# -------------------------------------------------------------- voiceover


def _loop_finding(loop: LoopRecord) -> HeuristicFinding:
    el = loop.repeated_element
    label = el.text or el.kind.value
    return HeuristicFinding(
        FindingKind.VOICEOVER_LOOP,
        el.box,
        el.screen_id,
        Verdict.FAIL,
        f'VoiceOver focus returned to "{label}" after {loop.repeat_index - loop.first_index} swipes',
        el.ref,
    )


def collect_vo_findings(
    traces: VisitTrace | Iterable[VisitTrace],
    activations: Iterable[ActivationResult] = (),
) -> list[HeuristicFinding]:
    """Loop findings from traces and activation sweeps, plus one missing-element
    finding per failed activation. The same bug seen twice is reported once."""
    if isinstance(traces, VisitTrace):
        traces = [traces]
    activations = list(activations)
    loops = [t.loop for t in traces if t.loop is not None]
    loops += [a.loop for a in activations if a.loop is not None]
    findings: list[HeuristicFinding] = []
    seen: set[tuple] = set()
    for loop in loops:
        key = ("loop",) + loop.repeated_element.key
        if key not in seen:
            seen.add(key)
            findings.append(_loop_finding(loop))
    for act in activations:
        if not act.missing:
            continue
        x, y = act.point
        region = act.target_box or BoundingBox(max(0, x - 1), max(0, y - 1), x + 1, y + 1)
        key = ("missing", act.screen_id, region)
        if key in seen:
            continue
        seen.add(key)
        findings.append(
            HeuristicFinding(
                FindingKind.VOICEOVER_MISSING_ELEMENT,
                region,
                act.screen_id,
                Verdict.FAIL,
                f"no VoiceOver element contains ({x}, {y}); the {act.ui_type.value} cannot be reached with swipes",
                act.target_ref,
            )
        )
    return findings
