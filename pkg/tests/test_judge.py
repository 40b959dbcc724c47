import json

import httpx
import pytest
from hypothesis import given, strategies as st

from revtraj.chat import ChatClient
from revtraj.judge import (
    ConstantJudge,
    JudgeQuery,
    JudgeUnavailable,
    Label,
    OracleJudge,
    RemoteJudge,
    escape,
    format_log,
    parse_prompt,
    parse_verdict,
    render_prompt,
    unescape,
)
from revtraj.resources import judge_template
from revtraj.traj import Step


def test_template_resource_has_placeholders():
    tpl = judge_template()
    for key in ("{task_description}", "{history_log}", "{node_action}", "{node_observation}"):
        assert key in tpl
    assert tpl.endswith("Judgment: <Good or Bad or Uncertain>")


def test_empty_history_prompt():
    p = render_prompt(JudgeQuery("Craft 1 plank.", (), "wait", "Nothing."))
    assert "Task Description: Craft 1 plank.\n\nCurrent Action: wait" in p
    assert "Current Observation: Nothing." in p


def test_history_blocks_in_order():
    hist = (Step("a1", "o1"), Step("a2", "o2"))
    log = format_log(hist)
    assert log == "###\nAction: a1\nObservation: o1\n###\n###\nAction: a2\nObservation: o2\n###"
    p = render_prompt(JudgeQuery("T", hist, "a3", "o3"))
    assert p.index("Action: a1") < p.index("Action: a2") < p.index("Current Action: a3")


line = st.text(alphabet="ab# :.", min_size=1, max_size=12).filter(lambda s: s.strip() == s and s)


@given(st.text(alphabet="#a", max_size=20))
def test_escape_roundtrip(text):
    assert unescape(escape(text)) == text


@given(line, st.lists(st.tuples(line, line), max_size=3), line, line)
def test_prompt_roundtrip(task, hist, action, obs):
    q = JudgeQuery(task, tuple(Step(a, o) for a, o in hist), action, obs)
    assert parse_prompt(render_prompt(q)) == q


def test_delimiter_in_task_text_roundtrips():
    q = JudgeQuery("use ### carefully", (Step("x###y", "###"),), "a", "b")
    assert parse_prompt(render_prompt(q)) == q


@pytest.mark.parametrize("text,label", [
    ("The action wastes a step. Therefore, Judgment: Bad", Label.BAD),
    ("Judgment: good\nOn reflection... Judgment: Uncertain", Label.UNCERTAIN),
    ("JUDGMENT : GOOD", Label.GOOD),
])
def test_parse_verdict(text, label):
    assert parse_verdict(text).label is label


def test_parse_verdict_fallback():
    v = parse_verdict("no verdict here")
    assert v.label is Label.UNCERTAIN and v.reason == "unparseable"


@given(st.sampled_from(list(Label)), st.text(alphabet="abc .", max_size=30))
def test_render_parse_verdict(label, reason):
    from revtraj.judge import Verdict
    assert parse_verdict(Verdict(label, reason).render()).label is label


def _q(env, task, actions, action):
    hist_t = env.replay(task, actions, finalize=False)
    _, state = env.replay_state(task, actions)
    _, r = env.step(state, action)
    return JudgeQuery(hist_t.instruction.text, hist_t.steps, action, r.observation, task)


def test_oracle_judge(craft):
    j = OracleJudge(craft)
    assert j.judge_step(_q(craft, "plank", [], "get 1 wood")).label is Label.GOOD
    assert j.judge_step(_q(craft, "plank", [], "inventory")).label is Label.BAD
    assert j.judge_step(_q(craft, "plank", [], "fly away")).label is Label.BAD


def test_constant_judge():
    assert ConstantJudge().judge_step(JudgeQuery("t", (), "a", "o")).label is Label.GOOD


def _remote(texts, votes=1, status=200):
    seen = []

    def handler(request):
        seen.append(json.loads(request.content))
        if status != 200:
            return httpx.Response(status)
        return httpx.Response(200, json={"choices": [{"text": t} for t in texts]})

    chat = ChatClient("http://judge.test", client=httpx.Client(transport=httpx.MockTransport(handler)),
                      retries=0, backoff=0)
    return RemoteJudge(chat, votes), seen


def test_remote_judge_canned_completion():
    j, seen = _remote(["The plan needs wood first.\nJudgment: Bad"])
    v = j.judge_step(JudgeQuery("Craft 1 plank.", (), "inventory", "Inventory: ..."))
    assert v.label is Label.BAD
    assert seen[0]["temperature"] == 0.0 and seen[0]["n"] == 1
    assert "Current Action: inventory" in seen[0]["messages"][0]["content"]


def test_remote_judge_votes():
    j, _ = _remote(["Judgment: Bad", "Judgment: Good", "Judgment: Bad"], votes=3)
    assert j.judge_step(JudgeQuery("t", (), "a", "o")).label is Label.BAD
    j, _ = _remote(["Judgment: Bad", "Judgment: Good"], votes=2)
    assert j.judge_step(JudgeQuery("t", (), "a", "o")).label is Label.UNCERTAIN


def test_remote_judge_unavailable():
    j, _ = _remote([], status=500)
    with pytest.raises(JudgeUnavailable):
        j.judge_step(JudgeQuery("t", (), "a", "o"))
