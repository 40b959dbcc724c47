import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from revtraj.env import CraftEnv, GradedPathEnv  # noqa: E402
from revtraj.traj import Instruction, Step, Trajectory  # noqa: E402

INSTR = Instruction("craft", "plank", "Craft 1 plank.")


def traj(pairs, reward=0.0, instruction=INSTR, terminal=True):
    """Trajectory from (action, observation) pairs."""
    steps = tuple(Step(a, o) for a, o in pairs)
    return Trajectory(instruction, steps, reward if terminal else None, terminal)


def from_actions(actions, reward=0.0, instruction=INSTR):
    return traj([(a, f"obs:{a}") for a in actions], reward, instruction)


@pytest.fixture
def craft():
    return CraftEnv()


@pytest.fixture
def graded():
    return GradedPathEnv()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
