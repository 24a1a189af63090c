"""Novelty injection wrapper, ontology tags, and the exemplar catalog."""

from __future__ import annotations

import dataclasses
from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Union

import numpy as np

from . import gridworld as gw
from .errors import ConfigurationError
from .gridworld import Action, Color, DoorState, GridConfig, Kind, Layout


class Target(str, Enum):
    OBJECT = "Object"
    ACTION = "Action"


class Arity(str, Enum):
    UNARY = "Unary"
    NON_UNARY = "NonUnary"


class SolutionShift(str, Enum):
    BARRIER = "Barrier"
    DELTA = "Delta"
    SHORTCUT = "Shortcut"


@dataclass(frozen=True)
class OntologyTag:
    target: Target
    arity: Arity
    solution_shift: SolutionShift

    def __post_init__(self):
        for name, typ in (("target", Target), ("arity", Arity), ("solution_shift", SolutionShift)):
            object.__setattr__(self, name, typ(getattr(self, name)))


@dataclass(frozen=True)
class NoveltySpec:
    name: str
    injection_episode: int
    pre_config: GridConfig
    post_config: Union[GridConfig, Callable[[GridConfig], GridConfig]]
    ontology: OntologyTag
    description: str = ""

    def __post_init__(self):
        if self.injection_episode < 1:
            raise ConfigurationError("injection_episode must be >= 1")
        if callable(self.post_config) and not isinstance(self.post_config, GridConfig):
            object.__setattr__(self, "post_config", self.post_config(self.pre_config))
        self.pre_config.validate()
        self.post_config.validate()
        if gw.schema_signature(self.pre_config) != gw.schema_signature(self.post_config):
            raise ConfigurationError(
                f"{self.name}: pre- and post-novelty configs differ in grid size, actions or feature schema"
            )

    def with_injection(self, episode: int) -> "NoveltySpec":
        return dataclasses.replace(self, injection_episode=episode)


def classify(spec: NoveltySpec) -> OntologyTag:
    """Ontology coordinates are declared with the novelty, not inferred."""
    return spec.ontology


class NoveltyEnv:
    """Episode-counting environment that swaps in the post-novelty config.

    Episodes are numbered from 1 by ``reset``; from ``injection_episode`` on
    every reset generates the post-novelty grid. Nothing in the returned
    states marks the switch.
    """

    def __init__(self, spec: NoveltySpec, seed: int = 0, rng: Optional[np.random.Generator] = None):
        self.spec = spec
        self.rng = rng if rng is not None else np.random.default_rng(seed)
        self.episode = 0
        self._env: Optional[gw.GridEnv] = None

    @property
    def post_novelty(self) -> bool:
        return self.episode >= self.spec.injection_episode

    @property
    def config(self) -> GridConfig:
        if self.episode == 0:
            return self.spec.pre_config
        return self.spec.post_config if self.post_novelty else self.spec.pre_config

    def reset(self) -> gw.SymbolicState:
        self.episode += 1
        self._env = gw.GridEnv(self.config, rng=self.rng)
        return self._env.reset()

    def step(self, action):
        return self._env.step(action)

    @property
    def state(self):
        return self._env.state

    @property
    def done(self) -> bool:
        return self._env is None or self._env.done

    @property
    def timed_out(self) -> bool:
        return self._env is not None and self._env.timed_out


def wrap(env, spec: NoveltySpec) -> NoveltyEnv:
    """Wrap an environment (or just its random stream) with novelty injection.

    ``env`` may be a :class:`~ottalab.gridworld.GridEnv`, whose generator is
    reused, or ``None``.
    """
    rng = getattr(env, "rng", None)
    if isinstance(env, gw.GridEnv) and gw.schema_signature(env.config) != gw.schema_signature(spec.pre_config):
        raise ConfigurationError("wrapped environment does not match the novelty's pre-novelty schema")
    return NoveltyEnv(spec, rng=rng if rng is not None else np.random.default_rng(0))


# -- default layouts -----------------------------------------------------------

DOORKEY = Layout([
    "########",
    "#...#..#",
    "#...#..#",
    "#>k.d..#",
    "#...#..#",
    "#...#.G#",
    "#...#..#",
    "########",
])

DOORKEY_TWO_KEYS = Layout([
    "########",
    "#...#..#",
    "#.k.#..#",
    "#>..d..#",
    "#.K.#..#",
    "#...#.G#",
    "#...#..#",
    "########",
])

DOORKEY_SAME_KEYS = Layout([
    "########",
    "#...#..#",
    "#.k.#..#",
    "#>..d..#",
    "#.k.#..#",
    "#...#.G#",
    "#...#..#",
    "########",
])

DOORKEY_CORNER_KEY = Layout([
    "########",
    "#k..#..#",
    "#...#..#",
    "#^..d..#",
    "#...#..#",
    "#...#.G#",
    "#...#..#",
    "########",
])

TWO_DOORS = Layout([
    "########",
    "#...#..#",
    "#.k.d..#",
    "#>..#.G#",
    "#.K.D..#",
    "#...#..#",
    "#...#..#",
    "########",
])

BURDEN = Layout([
    "########",
    "#>.....#",
    "#k.....#",
    "#......#",
    "##d#####",
    "#......#",
    "#.....G#",
    "########",
])

LAVA_SHORTCUT_MAZE = Layout([
    "########",
    "#.....v#",
    "#......#",
    "#......#",
    "#.###LL#",
    "#......#",
    "#.....G#",
    "########",
])

EMPTY = Layout([
    "########",
    "#>.....#",
    "#......#",
    "#......#",
    "#......#",
    "#......#",
    "#.....G#",
    "########",
])


def doorkey_config() -> GridConfig:
    return DOORKEY.build(name="DoorKey-8x8")


def lava_shortcut_config() -> GridConfig:
    return LAVA_SHORTCUT_MAZE.build(name="LavaShortcutMaze-8x8")


def empty_config() -> GridConfig:
    return EMPTY.build(name="Empty-8x8")


def _set_doors(config: GridConfig, state: DoorState) -> GridConfig:
    objs = tuple(
        dataclasses.replace(o, door_state=state) if o.kind == Kind.DOOR else o for o in config.objects
    )
    return config.replace(objects=objs)


def _move_goal(config: GridConfig, where) -> GridConfig:
    objs = tuple(dataclasses.replace(o, location=where) if o.kind == Kind.GOAL else o for o in config.objects)
    return config.replace(objects=objs)


def _tag(target, arity, shift) -> OntologyTag:
    return OntologyTag(Target(target), Arity(arity), SolutionShift(shift))


def _build(name: str, variant: Optional[str]):
    """Returns ``(pre, post, tag, description)``; variant None picks the default."""
    if name == "GoalLocationChange":
        pre = doorkey_config()
        return pre, _move_goal(pre, (1, 6)), _tag("Object", "Unary", "Delta"), "goal (5,6) -> (1,6)"
    if name == "DoorLockToggle":
        pre = doorkey_config()
        if variant in (None, "unlock", "locked->unlocked"):
            return pre, _set_doors(pre, DoorState.CLOSED), _tag("Object", "Unary", "Shortcut"), "locked -> unlocked"
        if variant in ("lock", "unlocked->locked"):
            unlocked = _set_doors(pre, DoorState.CLOSED)
            return unlocked, pre, _tag("Object", "Unary", "Barrier"), "unlocked -> locked"
        raise KeyError(f"unknown DoorLockToggle variant {variant!r}")
    if name == "DoorKeyChange":
        pre = DOORKEY_TWO_KEYS.build(name="DoorKey-8x8-2keys")
        post = pre.replace(key_color_map=((Color.YELLOW, Color.BLUE),))
        return pre, post, _tag("Object", "NonUnary", "Delta"), "yellow door: yellow key -> blue key"
    if name == "DoorNumKeys":
        pre = DOORKEY_SAME_KEYS.build(name="DoorKey-8x8-2keys")
        return pre, pre.replace(keys_required=2), _tag("Object", "NonUnary", "Barrier"), "NumKeys=1 -> NumKeys=2"
    if name == "ImperviousToLava":
        pre = lava_shortcut_config()
        return pre, pre.replace(lava_harmful=False), _tag("Object", "NonUnary", "Shortcut"), "lava harmful -> harmless"
    if name == "ActionRepetition":
        pre = doorkey_config().replace(repeat_action=Action.PICKUP, repeat_count=1)
        return pre, pre.replace(repeat_count=2), _tag("Action", "Unary", "Barrier"), "PickCommands=1 -> PickCommands=2"
    if name == "ForwardMovementSpeed":
        pre = doorkey_config()
        return pre, pre.replace(forward_step=2), _tag("Action", "NonUnary", "Shortcut"), "ForwardStep=1 -> ForwardStep=2"
    if name == "ActionRadius":
        pre = DOORKEY_CORNER_KEY.build(name="DoorKey-8x8-cornerkey")
        return pre, pre.replace(pick_radius=2), _tag("Action", "Unary", "Shortcut"), "PickDistance=1 -> PickDistance=2"
    if name == "ColorRestriction":
        pre = TWO_DOORS.build(name="TwoDoors-8x8", allowed_colors=frozenset({Color.YELLOW}))
        post = pre.replace(allowed_colors=frozenset({Color.BLUE}))
        return pre, post, _tag("Action", "Unary", "Delta"), "YellowOnly -> BlueOnly"
    if name == "Burdening":
        pre = BURDEN.build(name="Burden-8x8")
        return pre, pre.replace(burdening=True), _tag("Action", "NonUnary", "Delta"), "inventory-dependent speed"
    if name == "TransitionDeterminism":
        pre = doorkey_config()
        return pre, pre.replace(stochastic_forward_p=0.8), _tag("Action", "NonUnary", "Barrier"), "Deterministic -> Stochastic"
    raise KeyError(name)


EXEMPLARS = (
    "GoalLocationChange",
    "DoorLockToggle",
    "DoorKeyChange",
    "DoorNumKeys",
    "ImperviousToLava",
    "ActionRepetition",
    "ForwardMovementSpeed",
    "ActionRadius",
    "ColorRestriction",
    "Burdening",
    "TransitionDeterminism",
)

ALIASES = {"ForwardMoveSpeed": "ForwardMovementSpeed", "LavaProof": "ImperviousToLava"}


def exemplar(name: str, injection_episode: int = 1, variant: Optional[str] = None) -> NoveltySpec:
    """Build one of the catalog novelties by name.

    Raises:
        KeyError: ``name`` is not in the catalog.
    """
    canonical = ALIASES.get(name, name)
    if canonical not in EXEMPLARS:
        raise KeyError(f"unknown novelty {name!r}; known: {', '.join(EXEMPLARS)}")
    pre, post, tag, desc = _build(canonical, variant)
    return NoveltySpec(canonical, injection_episode, pre, post, tag, desc)


def identity(config: GridConfig, injection_episode: int = 1) -> NoveltySpec:
    return NoveltySpec("Identity", injection_episode, config, config, _tag("Object", "Unary", "Delta"), "no change")


# -- optimal solution length ------------------------------------------------------

def optimal_solution_length(config: GridConfig, max_states: int = 500_000) -> float:
    """Shortest number of actions from the start to the goal.

    Deterministic configs use breadth-first search. With stochastic forward
    moves this is the minimal expected number of actions, from value
    iteration over the reachable state graph. Timeouts are ignored.
    """
    if config.stochastic_forward_p < 1.0:
        return _expected_length(config, max_states)
    start = dataclasses.replace(gw.initial_state(config), t=0)
    seen = {start}
    frontier = deque([(start, 0)])
    while frontier:
        s, d = frontier.popleft()
        for a in Action:
            s2, r, term = gw.apply_action(config, s, a)
            if term:
                if r > 0 or _on_goal(s2):
                    return float(d + 1)
                continue
            s2 = dataclasses.replace(s2, t=0)
            if s2 not in seen:
                if len(seen) >= max_states:
                    raise ConfigurationError("state space too large for exhaustive search")
                seen.add(s2)
                frontier.append((s2, d + 1))
    return float("inf")


def _on_goal(state: gw.SymbolicState) -> bool:
    return any(o.kind == Kind.GOAL and o.location == state.agent_location for o in state.objects)


def _expected_length(config: GridConfig, max_states: int) -> float:
    states = list(gw.reachable_states(config, limit=max_states))
    index = {s: i for i, s in enumerate(states)}
    n = len(states)
    # per (state, action): list of (prob, next index or -1 goal or -2 dead end)
    table = []
    for s in states:
        row = []
        for a in Action:
            outs = []
            for p, s2, r, term in gw.outcomes(config, s, a):
                if term:
                    outs.append((p, -1 if _on_goal(s2) else -2))
                else:
                    outs.append((p, index[dataclasses.replace(s2, t=0)]))
            row.append(outs)
        table.append(row)
    big = 1e9
    v = np.zeros(n)
    for _ in range(10_000):
        new = np.empty(n)
        for i, row in enumerate(table):
            best = big
            for outs in row:
                q = 1.0
                for p, j in outs:
                    if j >= 0:
                        q += p * v[j]
                    elif j == -2:
                        q += p * big
                best = min(best, q)
            new[i] = min(best, big)
        if np.max(np.abs(new - v)) < 1e-10:
            v = new
            break
        v = new
    return float(v[0])
