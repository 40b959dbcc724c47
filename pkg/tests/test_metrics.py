import random

import pytest
from hypothesis import given, settings, strategies as st

from conftest import from_actions
from oracles import repetition_brute
from revtraj.metrics import evaluate, loop_profile, max_repetition, revision_eval, revision_length
from revtraj.policy import RandomPolicy, ScriptedOracle
from revtraj.traj import RevisionSignal, Source, Trajectory, TrajectoryPair, splice


def test_oracle_evaluation_is_perfect(craft):
    report, trajs = evaluate(ScriptedOracle(craft, 0.0), craft, craft.tasks(), 100)
    assert report.average_reward == 1.0 and report.success_rate == 1.0
    assert len(report.tasks) == 20 and len(trajs) == 20


def test_random_evaluation_reproducible(craft):
    a, _ = evaluate(RandomPolicy(craft, 3), craft, craft.tasks()[:6], 30)
    b, _ = evaluate(RandomPolicy(craft, 3), craft, craft.tasks()[:6], 30)
    assert a.to_dict() == b.to_dict()


def test_one_round_solves_nothing(craft):
    # every bundled recipe needs at least one gather before the final craft
    report, _ = evaluate(ScriptedOracle(craft, 0.0), craft, craft.tasks(), 1)
    assert report.average_reward == 0.0


def test_evaluate_rejects_zero_rounds(craft):
    with pytest.raises(ValueError):
        evaluate(ScriptedOracle(craft), craft, ["plank"], 0)


def test_evaluate_flags_failures(craft):
    class Broken(ScriptedOracle):
        def _draw(self, ctx):
            from revtraj.policy import PolicyUnavailable
            raise PolicyUnavailable("down")

    report, _ = evaluate(Broken(craft), craft, ["plank", "stick"], 10)
    assert [t.flag for t in report.tasks] == ["failed", "failed"]
    assert report.average_reward == 0.0


def _failures(env, n, seed):
    rng = random.Random(seed)
    out = []
    while len(out) < n:
        task = rng.choice(env.tasks())
        t = env.replay(task, [rng.choice(env.distractors(task)[:-1]) for _ in range(rng.randint(2, 8))])
        if t.reward == 0:
            out.append(t)
    return out


def test_revision_eval_oracle_recovers(craft):
    report = revision_eval(ScriptedOracle(craft, 0.0), craft, _failures(craft, 20, 1), random.Random(0))
    assert report.average_reward == 1.0 and len(report.tasks) == 20


def test_revision_eval_empty_and_seeded(craft):
    assert revision_eval(ScriptedOracle(craft), craft, [], random.Random(0)).tasks == []
    fails = _failures(craft, 10, 2)
    a = revision_eval(ScriptedOracle(craft), craft, fails, random.Random(9))
    b = revision_eval(ScriptedOracle(craft), craft, fails, random.Random(9))
    assert [t.truncated_at for t in a.tasks] == [t.truncated_at for t in b.tasks]
    assert all(1 <= t.truncated_at < len(f.steps) for t, f in zip(a.tasks, fails))


def test_revision_eval_requires_failures(craft):
    win = craft.replay("plank", ["get 1 wood", "craft 1 plank"])
    with pytest.raises(ValueError):
        revision_eval(ScriptedOracle(craft), craft, [win], random.Random(0))


def test_revision_eval_excludes_nondeterministic(craft):
    fail = _failures(craft, 1, 3)[0]
    forged = Trajectory(fail.instruction, tuple(
        type(s)(s.action, s.observation + " (changed)") for s in fail.steps), 0.0, True)
    report = revision_eval(ScriptedOracle(craft), craft, [forged], random.Random(0))
    assert report.tasks == [] and report.excluded[0].flag == "NonDeterministicEnv"


def test_revision_length():
    assert revision_length([]) is None

    def rev(tp):
        bad = from_actions(["a", "b", "c", "d", "e"], 0.0)
        good = from_actions(["a", "z"], 1.0)
        return splice(TrajectoryPair.of(bad, good), tp, RevisionSignal.from_index(0))

    assert revision_length([rev(4)]) == 4.0
    assert revision_length([rev(2), rev(4)]) == 3.0
    direct = [splice(TrajectoryPair.of(from_actions(list("ab" + "x" * k), 0.0), from_actions(["a", "q"], 1.0)),
                     2 + k, RevisionSignal.from_index(1), Source.DIRECT) for k in range(4)]
    assert revision_length(direct) == sum(len(r.pair.bad.steps) for r in direct) / 4


@pytest.mark.parametrize("actions,L,want", [
    (list("xyxyxy"), 2, 3), (list("aaa"), 1, 3), (list("abc"), 1, 1), (list("abc"), 3, 1),
    (list("ab") * 5, 2, 5), (list("ab"), 3, None),
])
def test_max_repetition_examples(actions, L, want):
    assert max_repetition(actions, L) == want


@settings(max_examples=400)
@given(st.lists(st.sampled_from("ab"), max_size=30), st.integers(1, 5))
def test_max_repetition_matches_brute_force(actions, L):
    assert max_repetition(actions, L) == repetition_brute(actions, L)


def test_loop_profile_averages_and_skips_short():
    prof = loop_profile([list("xyxyxy"), list("abc"), list("a")], max_len=3)
    assert prof.counts[1] == 1.0
    assert prof.counts[2] == pytest.approx((3 + 1) / 2)
    assert prof.trajectories == {1: 3, 2: 2, 3: 2}
    with pytest.raises(ValueError):
        loop_profile([])
