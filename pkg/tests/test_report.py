import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from a11yreplay.heuristics import ColorRole, FindingKind, HeuristicFinding, Verdict
from a11yreplay.imaging import PixelBuffer, load_png
from a11yreplay.report import (
    CYAN,
    GREEN,
    ORANGE,
    PINK,
    SPEEDUP_FACTOR,
    BoxOverlay,
    ChapterKind,
    ChapterMarker,
    ExportError,
    SwipeOverlay,
    TapOverlay,
    TestReport,
    annotate_frame,
    build_chapters,
    build_report,
    chapters_vtt,
    export_report,
    load_report,
)
from a11yreplay.runner import EventKind, FinalStatus, SessionRecording, run_test
from a11yreplay.ui_model import BoundingBox
from conftest import FIXTURES, case_by_name, load_case

NO_GROWTH = HeuristicFinding(
    FindingKind.DYNAMIC_TYPE_NO_GROWTH, BoundingBox(10, 10, 60, 40), "detail", Verdict.FAIL, "text did not grow", "body"
)


def three_chapter_recording() -> SessionRecording:
    rec = SessionRecording(final_status=FinalStatus.SUCCESS)
    rec.frames.append(PixelBuffer.blank(100, 80, (255, 255, 255)))
    rec.findings.append(NO_GROWTH)
    rec.append(0, EventKind.CHAPTER_BOUNDARY, title="Tap Open", step_index=0)
    rec.append(1000, EventKind.SCREENSHOT, frame=0, purpose="frame", overlays=[{"type": "tap", "x": 50, "y": 40}])
    rec.append(2500, EventKind.CHAPTER_BOUNDARY, title="Tap Back", step_index=1)
    rec.append(5000, EventKind.FINDING, index=0, frame=0, finding=NO_GROWTH.to_dict())
    rec.append(7500, EventKind.SCREENSHOT, frame=0, purpose="end", overlays=[])
    return rec


# ------------------------------------------------------------ chapters


def test_three_chapter_vtt_matches_golden():
    chapters = build_chapters(three_chapter_recording())
    assert [c.kind for c in chapters] == [ChapterKind.STEP, ChapterKind.STEP, ChapterKind.ISSUE]
    golden = (FIXTURES / "golden" / "three_chapters.vtt").read_text()
    assert chapters_vtt(chapters) == golden


def test_vtt_times_divide_by_speedup():
    vtt = chapters_vtt([ChapterMarker(0, 3_725_000, "long")])
    # 3725 s / 2.5 = 1490 s = 0:24:50
    assert "00:00:00.000 --> 00:24:50.000" in vtt
    assert SPEEDUP_FACTOR == 2.5


def test_issue_splits_a_step_chapter():
    chapters = build_chapters(three_chapter_recording())
    back, issue = chapters[1], chapters[2]
    assert back.end_ms == issue.start_ms == 5000
    assert issue.finding_ref == 0


def test_passing_findings_open_no_chapter():
    rec = three_chapter_recording()
    rec.findings[0] = HeuristicFinding(FindingKind.DYNAMIC_TYPE_NO_GROWTH, BoundingBox(1, 1, 5, 5), "s", Verdict.PASS)
    assert all(c.kind is ChapterKind.STEP for c in build_chapters(rec))
    assert build_report(rec).residual == [0]


def test_chapter_validation():
    with pytest.raises(ValueError):
        ChapterMarker(5, 5, "empty")
    with pytest.raises(ValueError):
        ChapterMarker(0, 5, "issue", ChapterKind.ISSUE)


def test_no_boundaries_gives_one_chapter():
    rec = SessionRecording()
    rec.append(0, EventKind.ACTION)
    rec.append(400, EventKind.ACTION)
    assert build_chapters(rec) == [ChapterMarker(0, 400, "Recording")]


@settings(max_examples=150, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 3000), st.sampled_from(["chapter", "pass", "fail", "action"])), min_size=1, max_size=30))
def test_chapters_partition_the_timeline(raw):
    rec = SessionRecording()
    t = 0
    for dt, what in raw:
        t += dt
        if what == "chapter":
            rec.append(t, EventKind.CHAPTER_BOUNDARY, title=f"step at {t}")
        elif what == "action":
            rec.append(t, EventKind.ACTION)
        else:
            verdict = Verdict.FAIL if what == "fail" else Verdict.PASS
            rec.findings.append(HeuristicFinding(FindingKind.VOICEOVER_LOOP, BoundingBox(0, 0, 1, 1), "s", verdict,
                                                 "looped" if verdict is Verdict.FAIL else ""))
            rec.append(t, EventKind.FINDING, index=len(rec.findings) - 1, frame=None)
    chapters = build_chapters(rec)
    first, last = rec.events[0].t_ms, rec.events[-1].t_ms
    if last == first:
        assert chapters == []
        return
    assert chapters[0].start_ms == first and chapters[-1].end_ms == last
    for a, b in zip(chapters, chapters[1:]):
        assert a.end_ms == b.start_ms
    for c in chapters:
        assert c.start_ms < c.end_ms
        if c.kind is ChapterKind.ISSUE:
            assert rec.findings[c.finding_ref].failed
    report = build_report(rec)
    referenced = {c.finding_ref for c in chapters if c.finding_ref is not None}
    assert referenced | set(report.residual) == set(range(len(rec.findings)))


# ------------------------------------------------------------ overlays


def test_no_overlays_gives_identical_copy():
    frame = PixelBuffer(np.arange(60, dtype=np.uint8).reshape(4, 5, 3))
    out = annotate_frame(frame, [])
    assert out == frame
    assert out.data is not frame.data


def test_tap_draws_pink_crosshair_and_leaves_input_alone():
    frame = PixelBuffer.blank(200, 200, (255, 255, 255))
    before = frame.data.copy()
    out = annotate_frame(frame, [TapOverlay(100, 120)])
    assert tuple(out.data[120, 100]) == PINK
    assert tuple(out.data[120, 125]) == PINK  # along the arm
    assert tuple(out.data[10, 10]) == (255, 255, 255)
    assert np.array_equal(frame.data, before)


def test_swipe_draws_arrow_in_direction():
    out = annotate_frame(PixelBuffer.blank(400, 400, 0), [SwipeOverlay(200, 300, "up")])
    assert tuple(out.data[200, 200]) == PINK
    assert tuple(out.data[350, 200]) == (0, 0, 0)


def test_finding_boxes_use_role_colors():
    out = annotate_frame(
        PixelBuffer.blank(300, 300, 0),
        [BoxOverlay(BoundingBox(10, 10, 100, 100), ColorRole.ISSUE_ORANGE),
         BoxOverlay(BoundingBox(150, 150, 250, 250), ColorRole.ISSUE_CYAN),
         BoxOverlay(BoundingBox(20, 200, 80, 280), ColorRole.PASS_GREEN)],
    )
    assert tuple(out.data[10, 50]) == ORANGE
    assert tuple(out.data[200, 150]) == CYAN
    assert tuple(out.data[200, 50]) == GREEN
    assert tuple(out.data[50, 50]) == (0, 0, 0)  # interior untouched


def test_overlay_outside_frame_rejected():
    with pytest.raises(ValueError):
        annotate_frame(PixelBuffer.blank(10, 10, 0), [TapOverlay(10, 3)])


# ------------------------------------------------------------ export


def test_export_writes_frames_vtt_and_json(tmp_path):
    rec = three_chapter_recording()
    out = tmp_path / "run"
    report = export_report(rec, out)
    assert sorted(p.name for p in out.iterdir()) == ["chapters.vtt", "frame_00000.png", "report.json"]
    doc = json.loads((out / "report.json").read_text())
    assert doc["schema_version"] == 1
    assert doc["speedup_factor"] == 2.5
    assert doc["status"] == "success"
    assert load_report(out) == report
    frame = load_png(out / "frame_00000.png")
    assert tuple(frame.data[40, 50]) == PINK
    assert tuple(frame.data[10, 30]) == ORANGE


def test_report_round_trip_through_dict():
    report = build_report(three_chapter_recording())
    assert TestReport.from_dict(json.loads(json.dumps(report.to_dict()))) == report


def test_unknown_schema_version_rejected(tmp_path):
    export_report(three_chapter_recording(), tmp_path / "r")
    doc = json.loads((tmp_path / "r" / "report.json").read_text())
    doc["schema_version"] = 2
    with pytest.raises(ValueError, match="schema_version"):
        TestReport.from_dict(doc)


def test_empty_recording_exports_empty_arrays(tmp_path):
    report = export_report(SessionRecording(), tmp_path / "empty")
    doc = json.loads((tmp_path / "empty" / "report.json").read_text())
    assert (doc["chapters"], doc["findings"], doc["frames"]) == ([], [], [])
    assert not list((tmp_path / "empty").glob("*.png"))
    assert report.fail_count == 0


def test_export_refuses_foreign_directory(tmp_path):
    out = tmp_path / "busy"
    out.mkdir()
    (out / "notes.txt").write_text("mine")
    with pytest.raises(ExportError):
        export_report(three_chapter_recording(), out)
    assert (out / "notes.txt").read_text() == "mine"


def test_export_replaces_previous_export(tmp_path):
    out = tmp_path / "run"
    export_report(three_chapter_recording(), out)
    export_report(SessionRecording(), out)
    assert not list(out.glob("*.png"))


def test_fixture_export_is_byte_identical_on_rerun(tmp_path):
    case = case_by_name("vo_cities_order")
    outputs = []
    for k in range(2):
        app, spec, client = load_case(case)
        export_report(run_test(spec, app, client), tmp_path / f"r{k}")
        outputs.append({p.name: p.read_bytes() for p in sorted((tmp_path / f"r{k}").iterdir())})
    assert outputs[0] == outputs[1]


def test_fixture_report_round_trips(tmp_path):
    for name in ("dt_following", "bs_tabs", "vo_share_episode"):
        app, spec, client = load_case(case_by_name(name))
        report = export_report(run_test(spec, app, client), tmp_path / name)
        assert load_report(tmp_path / name) == report
        referenced = {c.finding_ref for c in report.chapters if c.finding_ref is not None}
        assert referenced | set(report.residual) == set(range(len(report.findings)))
