"""Step verdicts used to locate the transition point in a bad trajectory."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from enum import Enum

from revtraj.chat import ChatClient, ChatUnavailable
from revtraj.env import INVALID_PREFIX, Environment
from revtraj.resources import judge_template
from revtraj.traj import Step

DELIMITER = "###"
UNPARSEABLE = "unparseable"


class JudgeUnavailable(Exception):
    pass


class Label(str, Enum):
    GOOD = "Good"
    BAD = "Bad"
    UNCERTAIN = "Uncertain"


@dataclass(frozen=True)
class Verdict:
    label: Label
    reason: str

    def render(self) -> str:
        return f"{self.reason}\nJudgment: {self.label.value}"


@dataclass(frozen=True)
class JudgeQuery:
    task_description: str
    history: tuple[Step, ...]
    current_action: str
    current_observation: str
    # Identifies the task for judges that consult the environment directly.
    task_id: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "history", tuple(self.history))


def escape(text: str) -> str:
    """Double every ``###`` so field text cannot forge a log delimiter."""
    return text.replace(DELIMITER, DELIMITER * 2)


def unescape(text: str) -> str:
    return text.replace(DELIMITER * 2, DELIMITER)


def format_log(history: tuple[Step, ...]) -> str:
    blocks = [
        f"{DELIMITER}\nAction: {escape(s.action)}\nObservation: {escape(s.observation)}\n{DELIMITER}"
        for s in history
    ]
    return "\n".join(blocks)


def render_prompt(q: JudgeQuery) -> str:
    return judge_template().format(
        task_description=escape(q.task_description),
        history_log=format_log(q.history),
        node_action=escape(q.current_action),
        node_observation=escape(q.current_observation),
    )


def parse_prompt(prompt: str) -> JudgeQuery:
    """Recover the query from a rendered prompt. Field text must be single-line."""
    _, sep, rest = prompt.partition("\nLog:\nTask Description: ")
    if not sep:
        raise ValueError("not a rendered judge prompt")
    lines = rest.split("\n")
    task = lines[0]
    i = 1 if lines[1] else 2  # empty history leaves a blank line
    steps = []
    while lines[i] == DELIMITER:
        act = lines[i + 1].removeprefix("Action: ")
        obs = lines[i + 2].removeprefix("Observation: ")
        steps.append(Step(unescape(act), unescape(obs)))
        i += 4
    action = lines[i].removeprefix("Current Action: ")
    obs = lines[i + 1].removeprefix("Current Observation: ")
    return JudgeQuery(unescape(task), tuple(steps), unescape(action), unescape(obs))


_JUDGMENT = re.compile(r"judgment\s*:\s*(good|bad|uncertain)", re.I)


def parse_verdict(completion: str) -> Verdict:
    matches = _JUDGMENT.findall(completion)
    if not matches:
        return Verdict(Label.UNCERTAIN, UNPARSEABLE)
    return Verdict(Label(matches[-1].capitalize()), completion)


class Judge:
    def judge_step(self, q: JudgeQuery) -> Verdict:
        raise NotImplementedError


class OracleJudge(Judge):
    """Bad when the action leaves the environment's optimal plan or is invalid."""

    def __init__(self, env: Environment):
        self.env = env

    def judge_step(self, q: JudgeQuery) -> Verdict:
        if q.current_observation.startswith(INVALID_PREFIX):
            return Verdict(Label.BAD, "the environment rejected the action as invalid")
        if q.task_id is None:
            raise ValueError("OracleJudge needs the query's task_id")
        _, state = self.env.replay_state(q.task_id, [s.action for s in q.history])
        plan = self.env.plan(state)
        if not plan:
            return Verdict(Label.UNCERTAIN, "no plan continuation from this state")
        if q.current_action != plan[0]:
            return Verdict(Label.BAD, f"the plan continues with {plan[0]!r}")
        return Verdict(Label.GOOD, "the action follows the plan")


class ConstantJudge(Judge):
    """Always answers ``label``; useful as a degenerate baseline."""

    def __init__(self, label: Label = Label.GOOD):
        self.label = Label(label)

    def judge_step(self, q: JudgeQuery) -> Verdict:
        return Verdict(self.label, "constant judge")


class RemoteJudge(Judge):
    """Render the verifier prompt, sample at temperature 0, parse the verdict.

    ``votes > 1`` samples that many completions and takes the majority label
    (ties resolve to Uncertain).
    """

    def __init__(self, chat: ChatClient, votes: int = 1):
        if votes < 1:
            raise ValueError("votes must be >= 1")
        self.chat = chat
        self.votes = votes

    def judge_step(self, q: JudgeQuery) -> Verdict:
        prompt = render_prompt(q)
        try:
            texts = self.chat.complete([{"role": "user", "content": prompt}],
                                       n=self.votes, temperature=0.0)
        except ChatUnavailable as exc:
            raise JudgeUnavailable(str(exc)) from exc
        if not texts:
            raise JudgeUnavailable("endpoint returned no choices")
        verdicts = [parse_verdict(t) for t in texts]
        if len(verdicts) == 1:
            return verdicts[0]
        counts = Counter(v.label for v in verdicts).most_common()
        if len(counts) > 1 and counts[0][1] == counts[1][1]:
            return Verdict(Label.UNCERTAIN, "tied votes")
        winner = counts[0][0]
        return next(v for v in verdicts if v.label is winner)
