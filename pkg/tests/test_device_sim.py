import copy

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from a11yreplay.device_sim import (
    VOICEOVER_SPEAKING_RATE,
    AccessibilityFeatureState,
    AppLoadError,
    Device,
    DeviceActionError,
    DeviceStateError,
    DynamicTypeSize,
    app_to_dict,
    load_app,
)
from conftest import FIXTURES, simple_app


def paged_app():
    doc = simple_app()
    doc["screens"]["home"]["scroll_extent"] = 2
    doc["screens"]["home"]["elements"] += [
        {"ref": "p1", "kind": "Text", "text": "Second page", "box": [60, 900, 600, 980], "page": 1},
        {"ref": "p2", "kind": "Text", "text": "Third page", "box": [60, 900, 600, 980], "page": 2},
    ]
    doc["screens"]["home"]["transitions"].append({"element": None, "action": "swipe_left", "target": "detail"})
    return load_app(doc)


def launched(app):
    dev = Device(app)
    dev.launch_app(app.app_id)
    return dev


def texts(snap):
    return [e.text for e in snap.elements]


# ------------------------------------------------------------ loading


def test_minimal_app_loads():
    doc = simple_app({"only": {"elements": [
        {"ref": "b", "kind": "Button", "text": "OK", "clickable": True, "box": [0, 0, 100, 100]}]}})
    doc["initial_screen"] = "only"
    app = load_app(doc)
    assert list(app.screens) == ["only"]


def test_transition_to_missing_screen_is_rejected():
    doc = simple_app()
    doc["screens"]["home"]["transitions"][0]["target"] = "nowhere"
    with pytest.raises(AppLoadError, match="unknown screen"):
        load_app(doc)


def test_load_errors_name_the_offender():
    doc = simple_app()
    doc["screens"]["detail"]["elements"][1]["box"] = [0, 0, 5000, 10]
    with pytest.raises(AppLoadError, match="detail.*body"):
        load_app(doc)


def test_duplicate_vo_order_rejected():
    doc = simple_app()
    for e in doc["screens"]["home"]["elements"][:2]:
        e["vo_order_index"] = 1
    with pytest.raises(AppLoadError, match="vo_order_index"):
        load_app(doc)


def test_unexposed_element_cannot_carry_vo_index():
    doc = simple_app()
    e = doc["screens"]["home"]["elements"][0]
    e["accessibility_exposed"] = False
    e["vo_order_index"] = 0
    with pytest.raises(AppLoadError):
        load_app(doc)


def test_unsupported_format_version():
    with pytest.raises(AppLoadError, match="format_version"):
        load_app(simple_app(format_version=9))


def test_podcast_fixture_golden_counts(podcast_app):
    counts = {sid: len(s.elements) for sid, s in podcast_app.screens.items()}
    assert counts == {"home": 6, "search": 6, "search_results": 4, "episode": 8, "share_sheet": 9, "library": 7}


def test_app_document_round_trip():
    app = load_app(FIXTURES / "apps" / "mail_app.json")
    assert load_app(copy.deepcopy(app_to_dict(app))) == app


# ------------------------------------------------------------ lifecycle and input


def test_launch_podcast_shows_initial_screen(podcast_app):
    snap = launched(podcast_app).snapshot()
    assert snap.screen_id == "home"
    assert "Try It Free" in texts(snap)


def test_actions_need_a_launched_app(tiny_app):
    dev = Device(tiny_app)
    with pytest.raises(DeviceStateError):
        dev.tap(10, 10)
    with pytest.raises(DeviceStateError):
        dev.swipe("up", 10, 10)


def test_unknown_app_launch(tiny_app):
    with pytest.raises(DeviceStateError):
        Device(tiny_app).launch_app("missing")


def test_kill_without_app_is_noop(tiny_app):
    dev = Device(tiny_app)
    dev.kill_app()
    assert dev.events == []


def test_launch_after_kill_resets(tiny_app):
    dev = launched(tiny_app)
    dev.tap(480, 460)
    assert dev.state.current_screen == "detail"
    dev.kill_app()
    assert dev.state.current_app is None
    assert dev.launch_app("tiny").screen_id == "home"


def test_tap_follows_transition(tiny_app):
    assert launched(tiny_app).tap(480, 460).screen_id == "detail"


def test_tap_empty_region_changes_nothing(tiny_app):
    dev = launched(tiny_app)
    before = dev.snapshot()
    assert dev.tap(1100, 2000) == before
    assert dev.events[-1].kind == "tap"


def test_tap_text_field_shows_keyboard(tiny_app):
    snap = launched(tiny_app).tap(500, 750)
    assert snap.screen_id == "home"
    assert snap.keyboard_visible
    assert "q" in texts(snap)


def test_swipe_pages_within_bounds():
    dev = launched(paged_app())
    snap = dev.swipe("up", 500, 1500)
    assert dev.state.scroll_offset == 1
    assert "Second page" in texts(snap)
    dev.swipe("up", 500, 1500)
    at_end = dev.snapshot()
    assert dev.swipe("up", 500, 1500) == at_end
    assert dev.state.scroll_offset == 2


def test_swipe_down_at_top_is_noop(tiny_app):
    dev = launched(tiny_app)
    before = dev.snapshot()
    assert dev.swipe("down", 500, 500) == before


def test_horizontal_swipe_without_transition_is_noop(tiny_app):
    dev = launched(tiny_app)
    assert dev.swipe("left", 500, 500).screen_id == "home"


def test_horizontal_swipe_transition():
    dev = launched(paged_app())
    assert dev.swipe("left", 500, 500).screen_id == "detail"


def test_type_with_wildcard_submit(tiny_app):
    dev = launched(tiny_app)
    snap = dev.type_text("field", "Stuff You Should Know")
    assert snap.screen_id == "detail"
    assert not snap.keyboard_visible


def test_type_into_search_field_of_fixture(podcast_app):
    dev = launched(podcast_app)
    dev.tap(585, 1880)  # Search tab
    field = next(e for e in dev.snapshot().elements if e.kind.value == "TextField")
    assert dev.type_text(field.id, "Stuff You Should Know").screen_id == "search_results"


def test_type_into_button_is_an_error(tiny_app):
    dev = launched(tiny_app)
    with pytest.raises(DeviceActionError):
        dev.type_text("open", "hello")


def test_type_empty_string_clears_without_transition(tiny_app):
    dev = launched(tiny_app)
    snap = dev.type_text("field", "")
    assert snap.screen_id == "home"
    assert dev.state.field_values["field"] == ""


# ------------------------------------------------------------ features


def test_voiceover_sets_captions_and_speaking_rate(tiny_app):
    dev = launched(tiny_app)
    dev.set_feature(voiceover_on=True)
    assert dev.feature.captions_on
    assert dev.feature.speaking_rate == VOICEOVER_SPEAKING_RATE == 0.25
    assert dev.state.vo_cursor == "title"


def test_disabling_voiceover_clears_cursor(tiny_app):
    dev = launched(tiny_app)
    dev.set_feature(voiceover_on=True)
    dev.set_feature(voiceover_on=False)
    assert dev.state.vo_cursor is None
    assert not dev.feature.captions_on


def test_captions_require_voiceover():
    with pytest.raises(ValueError):
        AccessibilityFeatureState(captions_on=True)


def test_dynamic_type_swaps_boxes():
    app = load_app(FIXTURES / "apps" / "news_app.json")
    dev = launched(app)
    screen = app.screen(app.initial_screen)
    el = next(e for e in screen.elements if DynamicTypeSize.XXL in e.size_boxes)
    dev.set_feature(dynamic_type_size="XXL")
    assert dev.snapshot().by_ref(el.ref).box == el.size_boxes[DynamicTypeSize.XXL]


def test_interrupt_shown_once_per_launch():
    doc = simple_app()
    doc["screens"]["detail"]["interrupt"] = "dialog"
    doc["screens"]["dialog"] = {
        "elements": [{"ref": "allow", "kind": "Button", "text": "Allow", "clickable": True, "box": [300, 1200, 870, 1320]}],
        "transitions": [{"element": "allow", "action": "tap", "target": "$return"}],
    }
    app = load_app(doc)
    dev = launched(app)
    assert dev.tap(480, 460).screen_id == "dialog"
    assert dev.tap(585, 1260).screen_id == "detail"
    dev.tap(110, 140)  # back to home
    assert dev.tap(480, 460).screen_id == "detail"
    dev.kill_app()
    dev.launch_app(app.app_id)
    assert dev.tap(480, 460).screen_id == "dialog"


# ------------------------------------------------------------ determinism


ops = st.lists(
    st.one_of(
        st.tuples(st.just("tap"), st.integers(0, 1169), st.integers(0, 2531)),
        st.tuples(st.just("swipe"), st.sampled_from(["up", "down", "left", "right"]), st.integers(0, 1169)),
        st.tuples(st.just("dt"), st.sampled_from(["Off", "XL", "XXL", "XXXL", "AX1"]), st.just(0)),
        st.tuples(st.just("vo"), st.booleans(), st.just(0)),
        st.tuples(st.just("kill"), st.just(0), st.just(0)),
    ),
    max_size=25,
)


def _replay(app, seq):
    dev = launched(app)
    snaps = []
    for op, a, b in seq:
        if op == "kill":
            dev.kill_app()
            dev.launch_app(app.app_id)
        elif op == "tap":
            dev.tap(a, b)
        elif op == "swipe":
            dev.swipe(a, b, 1000)
        elif op == "dt":
            dev.set_feature(dynamic_type_size=a)
        else:
            dev.set_feature(voiceover_on=a)
        snaps.append(dev.snapshot())
        # state invariants
        st_ = dev.state
        assert st_.vo_cursor is None or dev.feature.voiceover_on
        assert 0 <= st_.scroll_offset <= dev.screen.scroll_extent
    return dev, snaps


@settings(max_examples=40, deadline=None)
@given(ops)
def test_replay_is_deterministic_and_log_monotonic(seq):
    app = load_app(FIXTURES / "apps" / "podcast_app.json")
    d1, s1 = _replay(app, seq)
    d2, s2 = _replay(app, seq)
    assert s1 == s2
    assert d1.events == d2.events
    times = [e.t_ms for e in d1.events]
    assert times == sorted(times)
