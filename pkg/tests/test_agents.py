import json

import httpx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from a11yreplay.agents import (
    ActionCommand,
    ActionError,
    AgentRole,
    Agents,
    EvalResult,
    ExchangeLog,
    HTTPClient,
    LLMError,
    ParseError,
    Plan,
    PlanningError,
    PlanStep,
    QueuedResponse,
    ScriptedClient,
    ScriptExhausted,
    StepStatus,
    Stop,
    Swipe,
    Tap,
    extract_structured_block,
    llm_complete,
)
from a11yreplay.agents import prompts
from a11yreplay.agents.llm import Rule
from a11yreplay.runner import Session, run_navigation, run_test
from a11yreplay.ui_model import element_ids
from conftest import FakeModel, case_by_name, load_case

SCREEN = "\n".join([
    '(1) [Text] "Listen Now" (375, 150) to (795, 230)',
    '(2) [Text] "Premium shows" (60, 540) to (594, 620)',
    '(3) [Button (Clickable)] "Try It Free" (194, 1563) to (1042, 1744)',
    '(4) [Tab (Clickable)] "Search" (390, 1800) to (780, 1960)',
])


def plan_json(*actions):
    return json.dumps({"steps": [{"thought": f"t{i}", "evaluation": f"e{i}", "action": a, "status": "todo"}
                                 for i, a in enumerate(actions)]})


def agents(*responses):
    return Agents(ScriptedClient(list(responses)))


# ------------------------------------------------------------ clients


def test_queued_response_is_returned():
    assert llm_complete(ScriptedClient(["X"]), "p", AgentRole.PLANNER) == "X"


def test_empty_queue_is_exhausted():
    with pytest.raises(ScriptExhausted, match="script exhausted"):
        ScriptedClient([]).complete("p", AgentRole.ACTION)


def test_rule_table_matches_substring():
    client = ScriptedClient(rules=[Rule("nope", contains=("zzz",)), Rule("PLAN", contains=("tentative plan",))])
    assert client.complete("Propose a tentative plan now", AgentRole.PLANNER) == "PLAN"


def test_rule_times_limit_falls_through():
    client = ScriptedClient(rules=[Rule("first", times=1), Rule("after")])
    assert [client.complete("p", AgentRole.ACTION) for _ in range(3)] == ["first", "after", "after"]


def test_queue_asserts_expected_prompt():
    client = ScriptedClient([QueuedResponse("r", AgentRole.PLANNER, "exact prompt", exact=True)])
    with pytest.raises(LLMError):
        client.complete("other prompt", AgentRole.PLANNER)


def test_script_from_dict_rules_mode():
    client = ScriptedClient.from_dict({"rules": [{"role": "action", "pattern": r"id \d+", "response": {"a": 1}}]})
    assert json.loads(client.complete("the id 42", AgentRole.ACTION)) == {"a": 1}
    with pytest.raises(ScriptExhausted):
        client.complete("the id 42", AgentRole.PLANNER)


def test_exchange_turn_indices_increase():
    log = ExchangeLog()
    client = ScriptedClient(["a", "b", "c"])
    for _ in range(3):
        llm_complete(client, "p", AgentRole.ACTION, log, "t")
    assert [e.turn_index for e in log.exchanges] == [0, 1, 2]


def _chat(content):
    return httpx.Response(200, json={"choices": [{"message": {"content": content}}]})


def test_http_retries_then_succeeds(monkeypatch):
    monkeypatch.setenv("TEST_TOKEN", "secret-token")
    seen, sleeps = [], []

    def handler(request):
        seen.append(request)
        if len(seen) < 3:
            return httpx.Response(503)
        return _chat("hello")

    client = HTTPClient("http://llm.local/v1", api_key_env="TEST_TOKEN",
                        transport=httpx.MockTransport(handler), sleep=sleeps.append)
    assert client.complete("hi", AgentRole.PLANNER) == "hello"
    assert len(seen) == 3
    assert sleeps == [1.0, 2.0]
    assert seen[0].headers["authorization"] == "Bearer secret-token"
    assert seen[0].url.path == "/v1/chat/completions"
    body = json.loads(seen[0].content)
    assert body["temperature"] == 0.0
    assert body["messages"] == [{"role": "user", "content": "hi"}]


def test_http_gives_up_after_three_retries():
    calls = []

    def handler(request):
        calls.append(1)
        raise httpx.ConnectError("down")

    client = HTTPClient("http://llm.local", transport=httpx.MockTransport(handler), sleep=lambda s: None)
    with pytest.raises(LLMError, match="giving up after 3 retries"):
        client.complete("hi", AgentRole.ACTION)
    assert len(calls) == 4


def test_http_client_errors_are_not_retried():
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(401, text="bad key")

    client = HTTPClient("http://llm.local", transport=httpx.MockTransport(handler), sleep=lambda s: None)
    with pytest.raises(LLMError, match="401"):
        client.complete("hi", AgentRole.ACTION)
    assert len(calls) == 1


# ------------------------------------------------------------ extraction


def test_fenced_block_extracted():
    assert extract_structured_block('```json\n{"a": {"b": 1}}\n```') == '{"a": {"b": 1}}'


def test_prose_then_trailing_object():
    assert extract_structured_block('Sure! Here it is: {"x": "}"} done') == '{"x": "}"}'


def test_no_braces_is_parse_error():
    with pytest.raises(ParseError):
        extract_structured_block("no json here")


def test_fence_wins_over_earlier_prose_object():
    text = 'ignore {"a": 1}\n```\n{"b": 2}\n```'
    assert extract_structured_block(text) == '{"b": 2}'


@settings(max_examples=100, deadline=None)
@given(
    st.recursive(
        st.none() | st.booleans() | st.integers() | st.text(max_size=8),
        lambda inner: st.lists(inner, max_size=3) | st.dictionaries(st.text(max_size=5), inner, max_size=3),
        max_leaves=10,
    ).map(lambda v: {"v": v}),
    st.text(alphabet=st.characters(blacklist_characters="{}`"), max_size=20),
)
def test_extraction_recovers_any_object_after_prose(obj, prose):
    assert json.loads(extract_structured_block(prose + json.dumps(obj) + prose)) == obj


# ------------------------------------------------------------ planner


def test_three_step_plan_all_todo():
    plan = agents(plan_json("a", "b", "c")).propose_plan("goal", "App", SCREEN)
    assert len(plan.steps) == 3
    assert {s.status for s in plan.steps} == {StepStatus.TODO}
    assert plan.revision == 0


def test_plan_inside_prose_and_fence():
    plan = agents(f"Here is my plan:\n```json\n{plan_json('Tap Search')}\n```\nGood luck.").propose_plan("g", "A", SCREEN)
    assert plan.steps[0].action == "Tap Search"


def test_missing_action_fails_after_two_reprompts():
    bad = '{"steps": [{"thought": "x"}]}'
    a = agents(bad, bad, bad)
    with pytest.raises(PlanningError):
        a.propose_plan("g", "A", SCREEN)
    assert len(a.audit) == 3
    assert "could not be used" in a.audit.exchanges[1].prompt


def test_reprompt_recovers():
    a = agents("garbage", plan_json("Tap Search"))
    assert a.propose_plan("g", "A", SCREEN).steps[0].action == "Tap Search"


def test_planner_prompt_carries_guidelines():
    text = prompts.render(prompts.PLANNER, app_name="A", goal="g", screen=SCREEN)
    for phrase in ("Traverse backward through the app if an unexpected state is encountered",
                   "accept an imperfect plan", "provide\n  reasonable search queries"):
        assert phrase in text
    assert SCREEN in text


def test_action_prompt_carries_allowances():
    text = prompts.render(prompts.ACTION, step_action="s", step_thought="", screen=SCREEN)
    assert "acceptable if it is the only reasonable option" in text
    assert "Come up with\n  appropriate text if it is not provided" in text


def test_evaluation_prompt_carries_all_hints():
    text = prompts.render(prompts.EVALUATION, goal="g", plan="p", step_action="s", action="a", before="b", after="c")
    for phrase in ("If UI elements significantly change, the action likely succeeded",
                   "err on the side of the action succeeding",
                   "the screen did not change,\n  the action likely failed",
                   "more scrolling may be required",
                   "whether a keyboard is visible"):
        assert phrase in text


# ------------------------------------------------------------ replanner


def _four_step_plan():
    plan = Plan(tuple(PlanStep(a) for a in ("s0", "s1", "s2", "s3")), "goal")
    return plan.mark_success(0).mark_success(1)


def test_replan_keeps_prefix():
    prev = _four_step_plan()
    new = agents(plan_json("Swipe up to reveal Settings", "Tap Settings")).replan(
        prev, 2, "element not visible, scroll needed", SCREEN, "A")
    assert new.steps[:2] == prev.steps[:2]
    assert new.steps[2].action == "Swipe up to reveal Settings"
    assert new.revision == prev.revision + 1


def test_replan_at_zero_replaces_everything():
    prev = Plan((PlanStep("old"),), "goal", 3)
    new = agents(plan_json("n1", "n2")).replan(prev, 0, "fb", SCREEN)
    assert [s.action for s in new.steps] == ["n1", "n2"]
    assert new.revision == 4


def test_replan_index_checked():
    with pytest.raises(IndexError):
        agents().replan(Plan((PlanStep("a"),), "g"), 1, "fb", SCREEN)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.text(min_size=1, max_size=10).filter(str.strip), min_size=1, max_size=6), st.data())
def test_replan_prefix_is_byte_identical(actions, data):
    idx = data.draw(st.integers(0, len(actions) - 1))
    prev = Plan(tuple(PlanStep(a.strip()) for a in actions), "goal", data.draw(st.integers(0, 4)))
    for i in range(idx):
        prev = prev.mark_success(i)
    new = agents(plan_json("replacement")).replan(prev, idx, "fb", SCREEN)
    assert json.dumps([s.to_dict() for s in new.steps[:idx]]) == json.dumps([s.to_dict() for s in prev.steps[:idx]])


# ------------------------------------------------------------ action agent


def _action(obj):
    return json.dumps(obj)


def test_tap_search_tab():
    cmd = agents(_action({"thought": "tab", "relevant_ui_ids": [4], "action": {"name": "Tap", "id": 4}})).next_action(
        PlanStep("Tap the Search tab"), SCREEN)
    assert cmd.action == Tap(4)
    assert cmd.relevant_ui_ids == (4,)


def test_swipe_for_offscreen_target():
    cmd = agents(_action({"thought": "scroll", "action": {"name": "Swipe", "direction": "up", "x": 585, "y": 1266}})
                 ).next_action(PlanStep("Open Settings"), SCREEN)
    assert cmd.action == Swipe("up", 585, 1266)


def test_stop_carries_feedback():
    cmd = agents(_action({"thought": "", "action": {"name": "Stop", "feedback": "No compose button here"}})
                 ).next_action(PlanStep("Compose"), SCREEN)
    assert isinstance(cmd.action, Stop) and cmd.action.feedback


def test_unknown_id_becomes_stop():
    cmd = agents(_action({"thought": "", "action": {"name": "Tap", "id": 99}})).next_action(PlanStep("x"), SCREEN)
    assert isinstance(cmd.action, Stop)
    assert "99" in cmd.action.feedback


def test_empty_stop_feedback_is_rejected():
    bad = _action({"thought": "", "action": {"name": "Stop", "feedback": ""}})
    with pytest.raises(ActionError):
        agents(bad, bad, bad).next_action(PlanStep("x"), SCREEN)


# ------------------------------------------------------------ evaluation agent


def _eval(result, explanation=""):
    return json.dumps({"evaluation_criteria": "c", "result": result, "explanation": explanation})


def _cmd(action):
    return ActionCommand("", (), action)


def test_unchanged_screen_after_swipe_is_failure():
    res = agents(_eval("success")).evaluate_action("g", _four_step_plan(), _cmd(Swipe("up", 1, 1)), SCREEN, SCREEN)
    assert res.result is EvalResult.FAILURE
    assert res.explanation


def test_keyboard_tap_success():
    after = SCREEN + '\n(5) [Text (Clickable)] "q" (0, 2000) to (100, 2100)'
    res = agents(_eval("success")).evaluate_action("g", _four_step_plan(), _cmd(Tap(3)), SCREEN, after)
    assert res.result is EvalResult.SUCCESS


def test_task_complete():
    res = agents(_eval("task_complete")).evaluate_action("g", _four_step_plan(), _cmd(Tap(4)), SCREEN, SCREEN + "x")
    assert res.result is EvalResult.TASK_COMPLETE


def test_unparseable_evaluation_is_failure():
    res = agents("?", "?", "?").evaluate_action("g", _four_step_plan(), _cmd(Tap(4)), SCREEN, SCREEN)
    assert res.result is EvalResult.FAILURE
    assert res.explanation == "evaluator unparseable"


def test_failure_always_has_explanation():
    res = agents(_eval("failure", "")).evaluate_action("g", _four_step_plan(), _cmd(Tap(4)), SCREEN, SCREEN)
    assert res.explanation.strip()


# ------------------------------------------------------------ sessions


def test_clean_run_uses_one_plus_two_n_turns(podcast_app):
    steps = ['Tap "Search"', 'Tap "Library"', 'Tap "Home"']
    model = FakeModel(steps)
    session = Session(podcast_app, model)
    session.device.launch_app(podcast_app.app_id)
    result = run_navigation(session, "visit the tabs")
    log = session.recording.exchanges
    assert result.outcome.value == "reached"
    assert len(log) == 1 + 2 * len(steps)
    assert (log.count(AgentRole.PLANNER), log.count(AgentRole.ACTION), log.count(AgentRole.EVALUATION)) == (1, 3, 3)


def test_tap_ids_always_come_from_presented_screen():
    app, spec, client = load_case(case_by_name("vo_share_episode"))
    rec = run_test(spec, app, client)
    for ex in rec.exchanges.exchanges:
        if ex.agent_role is not AgentRole.ACTION:
            continue
        action = json.loads(ex.response)["action"]
        if "id" in action:
            screen = ex.prompt.split("Current screen:\n", 1)[1]
            assert action["id"] in element_ids(screen)


def test_audit_log_replays_session_exactly():
    app, spec, client = load_case(case_by_name("fault_moved"))
    first = run_test(spec, app, client)
    replay = ScriptedClient.from_exchanges(first.exchanges.exchanges)
    second = run_test(spec, app, replay)
    assert replay.remaining == 0
    assert second.to_dict() == first.to_dict()
