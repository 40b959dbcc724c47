"""Toy crafting environment modelled on text crafting games.

Commands::

    get <n> <item>      gather a raw item
    craft <n> <item>    craft from the listed recipe (optional ``using ...`` suffix ignored)
    inventory           list carried items
    give up             end the episode

Crafting the task's target ends the episode with reward 1. Any other ending
(give up, round limit, forced stop) scores 1 only if the target is carried.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping

from revtraj import resources
from revtraj.env.base import EnvState, Environment, invalid
from revtraj.traj import Instruction

Inventory = tuple[tuple[str, int], ...]

_COMMAND = re.compile(r"^(get|craft)\s+(\d+)\s+([a-z_]+)(?:\s+using\s+.*)?$")


@dataclass(frozen=True)
class CraftSpec:
    items: frozenset[str]
    recipes: Mapping[str, tuple[tuple[str, int], ...]]
    gatherable: frozenset[str]
    target: str

    def __post_init__(self):
        if self.target not in self.items:
            raise ValueError(f"target {self.target!r} is not a known item")
        order = self.closure()  # raises on cycles
        missing = [i for i in order if i not in self.recipes and i not in self.gatherable]
        if missing:
            raise ValueError(f"target not reachable: no source for {missing}")

    def closure(self) -> list[str]:
        """Dependency closure of the target, ingredients before consumers."""
        order: list[str] = []
        state: dict[str, int] = {}

        def visit(item: str) -> None:
            mark = state.get(item)
            if mark == 2:
                return
            if mark == 1:
                raise ValueError(f"recipe cycle through {item!r}")
            state[item] = 1
            for ing, _ in self.recipes.get(item, ()):
                visit(ing)
            state[item] = 2
            order.append(item)

        visit(self.target)
        return order


def load_craft_specs(doc: dict | None = None) -> dict[str, CraftSpec]:
    doc = doc or resources.read_json(resources.CRAFT_TASKS)
    recipes = {k: tuple((i, int(n)) for i, n in v.items()) for k, v in doc["recipes"].items()}
    gatherable = frozenset(doc["gatherable"])
    items = frozenset(gatherable) | frozenset(recipes) | frozenset(
        i for r in recipes.values() for i, _ in r)
    specs = {}
    for task in doc["tasks"]:
        specs[task["task_id"]] = CraftSpec(items, recipes, gatherable, task["target"])
    return specs


def _inv_get(inv: Inventory, item: str) -> int:
    for name, n in inv:
        if name == item:
            return n
    return 0


def _inv_update(inv: Inventory, delta: Mapping[str, int]) -> Inventory:
    d = dict(inv)
    for k, v in delta.items():
        d[k] = d.get(k, 0) + v
    return tuple(sorted((k, v) for k, v in d.items() if v > 0))


class CraftEnv(Environment):
    name = "craft"

    def __init__(self, specs: dict[str, CraftSpec] | None = None, max_rounds: int = 100):
        super().__init__(max_rounds)
        self.specs = specs if specs is not None else load_craft_specs()
        self._task_order = list(self.specs)

    def tasks(self) -> list[str]:
        return list(self._task_order)

    def instruction(self, task_id: str) -> Instruction:
        self._check_task(task_id)
        return Instruction(self.name, task_id, f"Craft 1 {self.specs[task_id].target}.")

    def _extra_recipes(self, task_id: str) -> list[str]:
        spec = self.specs[task_id]
        closure = set(spec.closure())
        others = sorted(r for r in spec.recipes if r not in closure)
        if not others:
            return []
        i = self._task_order.index(task_id)
        return [others[i % len(others)], others[(i + 3) % len(others)]]

    def _extra_gatherables(self, task_id: str) -> list[str]:
        spec = self.specs[task_id]
        closure = set(spec.closure())
        others = sorted(g for g in spec.gatherable if g not in closure)
        if not others:
            return []
        i = self._task_order.index(task_id)
        return list(dict.fromkeys([others[i % len(others)], others[(i + 5) % len(others)]]))

    def recipe_listing(self, task_id: str) -> list[str]:
        spec = self.specs[task_id]
        shown = [i for i in spec.closure() if i in spec.recipes]
        shown += [r for r in self._extra_recipes(task_id) if r not in shown]
        lines = []
        for item in sorted(shown):
            using = ", ".join(f"{n} {ing}" for ing, n in spec.recipes[item])
            lines.append(f"craft 1 {item} using {using}")
        return lines

    def _start(self, task_id: str):
        spec = self.specs[task_id]
        obs = "Crafting commands:\n" + "\n".join(self.recipe_listing(task_id))
        obs += f"\nGoal: craft {spec.target}."
        return (), obs

    def _transition(self, task_id: str, inv: Inventory, action: str):
        spec = self.specs[task_id]
        if action == "inventory":
            if not inv:
                return inv, "Inventory: You are not carrying anything.", False
            listing = " ".join(f"[{k}] ({v})" for k, v in inv)
            return inv, f"Inventory: {listing}", False
        if action == "give up":
            return inv, "You gave up.", True
        m = _COMMAND.match(action)
        if not m or int(m.group(2)) < 1:
            return inv, invalid(action), False
        verb, count, item = m.group(1), int(m.group(2)), m.group(3)
        if verb == "get":
            if item not in spec.gatherable:
                return inv, f"Could not find {item}", False
            return _inv_update(inv, {item: count}), f"Got {count} {item}", False
        if item not in spec.recipes:
            return inv, f"Could not find a valid recipe for {item}", False
        need = {ing: n * count for ing, n in spec.recipes[item]}
        if any(_inv_get(inv, ing) < n for ing, n in need.items()):
            return inv, f"Could not find enough items to craft {count} {item}", False
        delta = {ing: -n for ing, n in need.items()}
        delta[item] = delta.get(item, 0) + count
        inv = _inv_update(inv, delta)
        return inv, f"Crafted {count} {item}", item == spec.target

    def _score(self, task_id: str, inv: Inventory) -> float:
        return 1.0 if _inv_get(inv, self.specs[task_id].target) >= 1 else 0.0

    def plan(self, state: EnvState) -> list[str]:
        if state.done:
            return []
        spec = self.specs[state.task_id]
        order = spec.closure()
        need = {item: 0 for item in order}
        need[spec.target] = 1
        deficit: dict[str, int] = {}
        for item in reversed(order):
            d = max(0, need[item] - _inv_get(state.data, item))
            deficit[item] = d
            if d and item in spec.recipes:
                for ing, n in spec.recipes[item]:
                    need[ing] += d * n
        gathers = [f"get {deficit[i]} {i}" for i in order
                   if deficit[i] and i not in spec.recipes]
        crafts = [f"craft {deficit[i]} {i}" for i in order
                  if deficit[i] and i in spec.recipes]
        return gathers + crafts

    def distractors(self, task_id: str) -> list[str]:
        self._check_task(task_id)
        acts = [f"get 1 {g}" for g in self._extra_gatherables(task_id)]
        acts += [f"craft 1 {r}" for r in self._extra_recipes(task_id)[:1]]
        acts += ["inventory", "look around", "give up"]
        return acts
