"""Turn a session recording into the exported artifact.

Layout of an export directory::

    frame_00000.png ...   annotated screenshots, in capture order
    chapters.vtt          WebVTT chapter cues, timestamps divided by the speedup
    report.json           the TestReport (see ``SCHEMA_VERSION``)

Video encoding is left to any downstream tool that can join numbered frames.
"""

from __future__ import annotations

import json
import shutil
import tempfile
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Union

import numpy as np

from .heuristics import ColorRole, HeuristicFinding
from .imaging import PixelBuffer, save_png
from .runner import EventKind, FinalStatus, SessionRecording, TestSpec
from .ui_model import BoundingBox

SCHEMA_VERSION = 1
SPEEDUP_FACTOR = 2.5

ORANGE = (0xFF, 0x8C, 0x00)
CYAN = (0x00, 0xB7, 0xEB)
GREEN = (0x2E, 0x8B, 0x57)
PINK = (0xFF, 0x69, 0xB4)
ROLE_COLORS = {ColorRole.ISSUE_ORANGE: ORANGE, ColorRole.ISSUE_CYAN: CYAN, ColorRole.PASS_GREEN: GREEN}

CROSSHAIR_ARM = 30
CROSSHAIR_PX = 5
ARROW_LEN = 120
ARROW_PX = 6
ARROW_HEAD = 24
BOX_STROKE = 6


class ExportError(OSError):
    pass


class ChapterKind(str, Enum):
    STEP = "step"
    ISSUE = "issue"


@dataclass(frozen=True)
class ChapterMarker:
    start_ms: int
    end_ms: int
    title: str
    kind: ChapterKind = ChapterKind.STEP
    finding_ref: int | None = None

    def __post_init__(self) -> None:
        if self.start_ms >= self.end_ms:
            raise ValueError(f"chapter {self.title!r} has start {self.start_ms} >= end {self.end_ms}")
        if self.kind is ChapterKind.ISSUE and self.finding_ref is None:
            raise ValueError("issue chapters must reference a finding")

    def to_dict(self) -> dict:
        return {
            "start_ms": self.start_ms,
            "end_ms": self.end_ms,
            "title": self.title,
            "kind": self.kind.value,
            "finding_ref": self.finding_ref,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ChapterMarker":
        return cls(d["start_ms"], d["end_ms"], d["title"], ChapterKind(d["kind"]), d.get("finding_ref"))


def _issue_title(f: HeuristicFinding) -> str:
    return f"Issue: {f.kind.value} - {f.detail}"


def build_chapters(recording: SessionRecording) -> list[ChapterMarker]:
    """Partition [first event, last event] into step and issue chapters.

    Each chapter boundary opens a step chapter; each failing finding opens an
    issue chapter that runs until the next cut. A cut sharing its timestamp
    with the following one is superseded by it.
    """
    events = recording.events
    if not events:
        return []
    first, last = events[0].t_ms, events[-1].t_ms
    cuts: list[tuple[int, str, ChapterKind, int | None]] = []
    for ev in events:
        if ev.kind is EventKind.CHAPTER_BOUNDARY:
            cuts.append((ev.t_ms, ev.data["title"], ChapterKind.STEP, None))
        elif ev.kind is EventKind.FINDING:
            idx = ev.data["index"]
            f = recording.findings[idx]
            if f.failed:
                cuts.append((ev.t_ms, _issue_title(f), ChapterKind.ISSUE, idx))
    if not cuts:
        cuts = [(first, "Recording", ChapterKind.STEP, None)]
    chapters = []
    for i, (t, title, kind, ref) in enumerate(cuts):
        start = first if i == 0 else t
        end = cuts[i + 1][0] if i + 1 < len(cuts) else last
        if end > start:
            chapters.append(ChapterMarker(start, end, title, kind, ref))
    return chapters


# ---------------------------------------------------------------- overlays


@dataclass(frozen=True)
class TapOverlay:
    x: int
    y: int


@dataclass(frozen=True)
class SwipeOverlay:
    x: int
    y: int
    direction: str


@dataclass(frozen=True)
class BoxOverlay:
    box: BoundingBox
    role: ColorRole


Overlay = Union[TapOverlay, SwipeOverlay, BoxOverlay]


def _rect(arr: np.ndarray, x0: int, y0: int, x1: int, y1: int, color) -> None:
    h, w = arr.shape[:2]
    x0, x1, y0, y1 = max(0, x0), min(w, x1), max(0, y0), min(h, y1)
    if x1 > x0 and y1 > y0:
        arr[y0:y1, x0:x1] = color


def _check_point(arr: np.ndarray, x: int, y: int) -> None:
    h, w = arr.shape[:2]
    if not (0 <= x < w and 0 <= y < h):
        raise ValueError(f"overlay point ({x}, {y}) outside {w}x{h} frame")


def _crosshair(arr: np.ndarray, x: int, y: int) -> None:
    half = CROSSHAIR_PX // 2
    _rect(arr, x - CROSSHAIR_ARM, y - half, x + CROSSHAIR_ARM + 1, y + half + 1, PINK)
    _rect(arr, x - half, y - CROSSHAIR_ARM, x + half + 1, y + CROSSHAIR_ARM + 1, PINK)


_UNIT = {"up": (0, -1), "down": (0, 1), "left": (-1, 0), "right": (1, 0)}


def _arrow(arr: np.ndarray, x: int, y: int, direction: str) -> None:
    dx, dy = _UNIT[direction]
    half = ARROW_PX // 2
    tip_x, tip_y = x + dx * ARROW_LEN, y + dy * ARROW_LEN
    _rect(arr, min(x, tip_x) - half, min(y, tip_y) - half, max(x, tip_x) + half + 1, max(y, tip_y) + half + 1, PINK)
    # arrowhead: stacked bars narrowing toward the tip
    for k in range(ARROW_HEAD):
        cx, cy = tip_x - dx * k, tip_y - dy * k
        if dx:
            _rect(arr, cx, cy - k, cx + 1, cy + k + 1, PINK)
        else:
            _rect(arr, cx - k, cy, cx + k + 1, cy + 1, PINK)


def _box(arr: np.ndarray, box: BoundingBox, color) -> None:
    s = BOX_STROKE
    _rect(arr, box.x0, box.y0, box.x1, box.y0 + s, color)
    _rect(arr, box.x0, box.y1 - s, box.x1, box.y1, color)
    _rect(arr, box.x0, box.y0, box.x0 + s, box.y1, color)
    _rect(arr, box.x1 - s, box.y0, box.x1, box.y1, color)


def annotate_frame(frame: PixelBuffer, overlays: list[Overlay]) -> PixelBuffer:
    """Draw overlays on a copy; the input buffer is left untouched."""
    arr = frame.data.copy()
    if arr.ndim == 2:
        if not overlays:
            return PixelBuffer(arr)
        arr = np.repeat(arr[:, :, None], 3, axis=2)
    # finding boxes first so cursor marks stay visible on top
    for ov in sorted(overlays, key=lambda o: not isinstance(o, BoxOverlay)):
        if isinstance(ov, BoxOverlay):
            _box(arr, ov.box, ROLE_COLORS[ov.role])
        elif isinstance(ov, TapOverlay):
            _check_point(arr, ov.x, ov.y)
            _crosshair(arr, ov.x, ov.y)
        else:
            _check_point(arr, ov.x, ov.y)
            _arrow(arr, ov.x, ov.y, ov.direction)
    return PixelBuffer(arr)


def _overlay_from_dict(d: dict) -> Overlay:
    if d["type"] == "tap":
        return TapOverlay(d["x"], d["y"])
    return SwipeOverlay(d["x"], d["y"], d["direction"])


def frame_overlays(recording: SessionRecording) -> dict[int, list[Overlay]]:
    out: dict[int, list[Overlay]] = {}
    for ev in recording.events:
        if ev.kind is EventKind.SCREENSHOT:
            out.setdefault(ev.data["frame"], []).extend(_overlay_from_dict(o) for o in ev.data.get("overlays", []))
        elif ev.kind is EventKind.FINDING and ev.data.get("frame") is not None:
            f = recording.findings[ev.data["index"]]
            out.setdefault(ev.data["frame"], []).append(BoxOverlay(f.region, f.color_role))
    return out


# ------------------------------------------------------------------ report


@dataclass
class TestReport:
    __test__ = False

    spec: TestSpec | None
    chapters: list[ChapterMarker] = field(default_factory=list)
    findings: list[HeuristicFinding] = field(default_factory=list)
    frames: list[tuple[int, str]] = field(default_factory=list)
    status: FinalStatus = FinalStatus.FAIL
    speedup_factor: float = SPEEDUP_FACTOR
    residual: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "spec": self.spec.to_dict() if self.spec else None,
            "status": self.status.value,
            "speedup_factor": self.speedup_factor,
            "chapters": [c.to_dict() for c in self.chapters],
            "findings": [f.to_dict() for f in self.findings],
            "residual_findings": list(self.residual),
            "frames": [{"t_ms": t, "file": name} for t, name in self.frames],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TestReport":
        version = d.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema_version {version!r}")
        return cls(
            spec=TestSpec.from_dict(d["spec"]) if d.get("spec") else None,
            chapters=[ChapterMarker.from_dict(c) for c in d["chapters"]],
            findings=[HeuristicFinding.from_dict(f) for f in d["findings"]],
            frames=[(f["t_ms"], f["file"]) for f in d["frames"]],
            status=FinalStatus(d["status"]),
            speedup_factor=d["speedup_factor"],
            residual=list(d.get("residual_findings", [])),
        )

    @property
    def fail_count(self) -> int:
        return sum(1 for f in self.findings if f.failed)


def build_report(recording: SessionRecording, speedup_factor: float = SPEEDUP_FACTOR) -> TestReport:
    chapters = build_chapters(recording)
    referenced = {c.finding_ref for c in chapters if c.finding_ref is not None}
    frames: dict[int, int] = {}
    for ev in recording.events:
        if ev.kind is EventKind.SCREENSHOT:
            frames.setdefault(ev.data["frame"], ev.t_ms)
    return TestReport(
        spec=recording.spec,
        chapters=chapters,
        findings=list(recording.findings),
        frames=[(frames[i], frame_name(i)) for i in sorted(frames)],
        status=recording.final_status,
        speedup_factor=speedup_factor,
        residual=[i for i in range(len(recording.findings)) if i not in referenced],
    )


def frame_name(index: int) -> str:
    return f"frame_{index:05d}.png"


def _vtt_time(ms: int, speedup: float) -> str:
    scaled = round(Fraction(ms) / Fraction(str(speedup)))
    h, rem = divmod(scaled, 3_600_000)
    m, rem = divmod(rem, 60_000)
    s, milli = divmod(rem, 1000)
    return f"{h:02d}:{m:02d}:{s:02d}.{milli:03d}"


def chapters_vtt(chapters: list[ChapterMarker], speedup: float = SPEEDUP_FACTOR) -> str:
    lines = ["WEBVTT", ""]
    for i, c in enumerate(chapters, start=1):
        title = " ".join(c.title.split())  # cue text may not contain blank lines
        lines += [str(i), f"{_vtt_time(c.start_ms, speedup)} --> {_vtt_time(c.end_ms, speedup)}", title, ""]
    return "\n".join(lines)


def _dumps(report: TestReport) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"


def export_report(
    recording: SessionRecording, out_dir: str | Path, speedup_factor: float = SPEEDUP_FACTOR
) -> TestReport:
    """Write frames, chapters.vtt and report.json; all or nothing.

    Files are staged in a sibling temporary directory and moved into place
    at the end. An existing export at ``out_dir`` is replaced; any other
    non-empty directory is refused.
    """
    out = Path(out_dir)
    report = build_report(recording, speedup_factor)
    if out.exists():
        if not out.is_dir():
            raise ExportError(f"{out} exists and is not a directory")
        if any(out.iterdir()) and not (out / "report.json").exists():
            raise ExportError(f"{out} is not empty and does not hold a previous export")
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        staging = Path(tempfile.mkdtemp(prefix=f".{out.name}.", dir=out.parent))
        staging.chmod(0o755)
    except OSError as exc:
        raise ExportError(f"cannot write to {out.parent}: {exc}") from exc
    try:
        overlays = frame_overlays(recording)
        for i, frame in enumerate(recording.frames):
            save_png(annotate_frame(frame, overlays.get(i, [])), staging / frame_name(i))
        (staging / "chapters.vtt").write_text(chapters_vtt(report.chapters, speedup_factor))
        (staging / "report.json").write_text(_dumps(report))
        if out.exists():
            shutil.rmtree(out)
        staging.rename(out)
    except OSError as exc:
        shutil.rmtree(staging, ignore_errors=True)
        raise ExportError(f"export to {out} failed: {exc}") from exc
    return report


def load_report(path: str | Path) -> TestReport:
    p = Path(path)
    if p.is_dir():
        p = p / "report.json"
    return TestReport.from_dict(json.loads(p.read_text()))
