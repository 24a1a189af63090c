"""Discrete key/door/lava gridworld with a feature-structured symbolic state.

Locations are ``(row, col)`` pairs; East increments the column and South
increments the row. When ``GridConfig.walled`` is set the border cells are
implicit walls, as in MiniGrid, and only interior objects are listed.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterator, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, UsageError

Location = tuple[int, int]


class Action(IntEnum):
    TURN_LEFT = 0
    TURN_RIGHT = 1
    FORWARD = 2
    PICKUP = 3
    DROP = 4
    TOGGLE = 5


N_ACTIONS = len(Action)


class Facing(IntEnum):
    E = 0
    S = 1
    W = 2
    N = 3


DIRECTIONS = {
    Facing.E: (0, 1),
    Facing.S: (1, 0),
    Facing.W: (0, -1),
    Facing.N: (-1, 0),
}


class Kind(IntEnum):
    KEY = 0
    DOOR = 1
    WALL = 2
    LAVA = 3
    GOAL = 4
    BALL = 5
    BOX = 6


class Color(IntEnum):
    RED = 0
    GREEN = 1
    BLUE = 2
    PURPLE = 3
    YELLOW = 4
    GREY = 5


class DoorState(IntEnum):
    OPEN = 0
    CLOSED = 1
    LOCKED = 2


PICKABLE = frozenset({Kind.KEY, Kind.BALL, Kind.BOX})
COLORED = frozenset({Kind.KEY, Kind.DOOR, Kind.BALL, Kind.BOX})


@dataclass(frozen=True, slots=True)
class ObjectRecord:
    kind: Kind
    color: Optional[Color] = None
    location: Optional[Location] = None
    door_state: Optional[DoorState] = None

    def __post_init__(self):
        if (self.door_state is not None) != (self.kind == Kind.DOOR):
            raise ConfigurationError(f"door_state must be set iff kind is Door: {self}")
        if self.kind in COLORED and self.color is None:
            raise ConfigurationError(f"{self.kind.name} requires a color")

    def is_solid(self) -> bool:
        if self.kind == Kind.DOOR:
            return self.door_state != DoorState.OPEN
        return self.kind not in (Kind.GOAL, Kind.LAVA)


@dataclass(frozen=True, slots=True)
class SymbolicState:
    """Full gridworld state.

    ``streak``/``streak_action`` count consecutive issues of an action that
    must be repeated before it takes effect; both stay at their defaults unless
    a repetition-gated dynamics setting is active.
    """

    agent_location: Location
    agent_facing: Facing
    inventory: Optional[int]
    objects: tuple[ObjectRecord, ...]
    t: int = 0
    streak: int = 0
    streak_action: Optional[Action] = None
    _key: Optional[bytes] = field(default=None, init=False, repr=False, compare=False)


@dataclass(frozen=True)
class GridConfig:
    width: int
    height: int
    objects: tuple[ObjectRecord, ...]
    agent_start: Location
    agent_facing: Facing = Facing.E
    max_steps: Optional[int] = None
    stochastic_forward_p: float = 1.0
    walled: bool = True
    lava_harmful: bool = True
    forward_step: int = 1
    pick_radius: int = 1
    repeat_action: Optional[Action] = None
    repeat_count: int = 1
    burdening: bool = False
    allowed_colors: Optional[frozenset] = None
    # door color -> key color that unlocks it; identity when absent
    key_color_map: tuple[tuple[Color, Color], ...] = ()
    keys_required: int = 1
    name: str = "grid"

    @property
    def horizon(self) -> int:
        return self.max_steps if self.max_steps is not None else self.height * self.width * 10

    def replace(self, **changes) -> "GridConfig":
        return dataclasses.replace(self, **changes)

    def unlock_color(self, door_color: Color) -> Color:
        for door_c, key_c in self.key_color_map:
            if door_c == door_color:
                return key_c
        return door_color

    def validate(self) -> None:
        if self.width < 3 or self.height < 3:
            raise ConfigurationError("grid must be at least 3x3")
        if self.horizon <= 0:
            raise ConfigurationError("max_steps must be positive")
        if not 0.0 <= self.stochastic_forward_p <= 1.0:
            raise ConfigurationError("stochastic_forward_p must lie in [0, 1]")
        if self.forward_step < 1 or self.pick_radius < 1 or self.repeat_count < 1:
            raise ConfigurationError("forward_step, pick_radius and repeat_count must be >= 1")
        if self.keys_required < 1:
            raise ConfigurationError("keys_required must be >= 1")
        seen: dict[Location, ObjectRecord] = {}
        for obj in self.objects:
            if obj.location is None:
                raise ConfigurationError(f"initial layout object has no location: {obj}")
            if not self.in_interior(obj.location):
                raise ConfigurationError(f"object outside the grid interior: {obj}")
            if obj.location in seen:
                raise ConfigurationError(f"two objects share cell {obj.location}")
            seen[obj.location] = obj
        if not self.in_interior(self.agent_start):
            raise ConfigurationError(f"agent start {self.agent_start} is not a free interior cell")
        blocker = seen.get(self.agent_start)
        if blocker is not None and blocker.is_solid():
            raise ConfigurationError(f"agent start {self.agent_start} is occupied by {blocker.kind.name}")

    def in_interior(self, loc: Location) -> bool:
        r, c = loc
        if self.walled:
            return 1 <= r < self.height - 1 and 1 <= c < self.width - 1
        return 0 <= r < self.height and 0 <= c < self.width


def initial_state(config: GridConfig) -> SymbolicState:
    return SymbolicState(
        agent_location=tuple(config.agent_start),
        agent_facing=Facing(config.agent_facing),
        inventory=None,
        objects=tuple(config.objects),
    )


def reset(config: GridConfig, seed: int = 0) -> SymbolicState:
    """Validate ``config`` and return its initial state (t = 0).

    The layout is fixed, so the seed only matters for the stochastic forward
    dynamics drawn later by :class:`GridEnv`.
    """
    config.validate()
    return initial_state(config)


def _required_repeats(config: GridConfig, state: SymbolicState, action: Action) -> int:
    if config.burdening and action == Action.FORWARD and state.inventory is not None:
        return 2
    if config.repeat_action is not None and action == config.repeat_action:
        return config.repeat_count
    return 1


def _allowed(config: GridConfig, obj: ObjectRecord) -> bool:
    return config.allowed_colors is None or obj.color is None or obj.color in config.allowed_colors


def _occupancy(objects: Sequence[ObjectRecord]) -> dict[Location, int]:
    return {o.location: i for i, o in enumerate(objects) if o.location is not None}


def apply_action(config: GridConfig, state: SymbolicState, action: Action):
    """Deterministic transition. Returns ``(next_state, reward, terminal)``."""
    action = Action(action)
    t = state.t + 1
    need = _required_repeats(config, state, action)
    if need > 1:
        streak = state.streak + 1 if state.streak_action == action else 1
        if streak < need:
            nxt = dataclasses.replace(state, t=t, streak=streak, streak_action=action)
            return _timeout(config, nxt)
    state = dataclasses.replace(state, streak=0, streak_action=None) if state.streak else state

    objects = list(state.objects)
    loc = state.agent_location
    facing = state.agent_facing
    inventory = state.inventory
    reward = 0.0
    terminal = False
    dr, dc = DIRECTIONS[facing]

    if action == Action.TURN_LEFT:
        facing = Facing((facing - 1) % 4)
    elif action == Action.TURN_RIGHT:
        facing = Facing((facing + 1) % 4)
    elif action == Action.FORWARD:
        occ = _occupancy(objects)
        if config.burdening:
            n = 1 if inventory is not None else 2
        else:
            n = config.forward_step
        for _ in range(n):
            cell = (loc[0] + dr, loc[1] + dc)
            if not config.in_interior(cell) and config.walled:
                break
            if not (0 <= cell[0] < config.height and 0 <= cell[1] < config.width):
                break
            idx = occ.get(cell)
            if idx is not None and objects[idx].is_solid():
                break
            loc = cell
            if idx is not None:
                kind = objects[idx].kind
                if kind == Kind.GOAL:
                    terminal = True
                    reward = 1.0 - t / (config.height * config.width * 10)
                    break
                if kind == Kind.LAVA and config.lava_harmful:
                    terminal = True
                    break
    elif action == Action.PICKUP:
        if inventory is None:
            occ = _occupancy(objects)
            for d in range(1, config.pick_radius + 1):
                cell = (loc[0] + d * dr, loc[1] + d * dc)
                if not config.in_interior(cell):
                    break
                idx = occ.get(cell)
                if idx is None:
                    continue
                obj = objects[idx]
                if obj.kind in PICKABLE:
                    if _allowed(config, obj):
                        inventory = idx
                        objects[idx] = dataclasses.replace(obj, location=None)
                    break
                if obj.is_solid():
                    break
    elif action == Action.DROP:
        if inventory is not None:
            cell = (loc[0] + dr, loc[1] + dc)
            if config.in_interior(cell) and cell not in _occupancy(objects):
                objects[inventory] = dataclasses.replace(objects[inventory], location=cell)
                inventory = None
    elif action == Action.TOGGLE:
        cell = (loc[0] + dr, loc[1] + dc)
        idx = _occupancy(objects).get(cell)
        if idx is not None and objects[idx].kind == Kind.DOOR and _allowed(config, objects[idx]):
            door = objects[idx]
            if door.door_state == DoorState.LOCKED:
                held = objects[inventory] if inventory is not None else None
                if (
                    held is not None
                    and held.kind == Kind.KEY
                    and held.color == config.unlock_color(door.color)
                    and _allowed(config, held)
                ):
                    want = held.color
                    inventory = None  # key is consumed by the lock
                    used = sum(
                        1
                        for i, o in enumerate(objects)
                        if o.kind == Kind.KEY and o.color == want and o.location is None and i != state.inventory
                    ) + 1
                    if used >= config.keys_required:
                        objects[idx] = dataclasses.replace(door, door_state=DoorState.CLOSED)
            elif door.door_state == DoorState.CLOSED:
                objects[idx] = dataclasses.replace(door, door_state=DoorState.OPEN)
            else:
                objects[idx] = dataclasses.replace(door, door_state=DoorState.CLOSED)

    nxt = SymbolicState(
        agent_location=loc,
        agent_facing=facing,
        inventory=inventory,
        objects=tuple(objects),
        t=t,
    )
    if terminal:
        return nxt, reward, True
    return _timeout(config, nxt)


def _timeout(config: GridConfig, nxt: SymbolicState):
    return nxt, 0.0, nxt.t >= config.horizon


def is_timeout(config: GridConfig, state: SymbolicState) -> bool:
    """True when ``state`` was reached by running out of steps."""
    return state.t >= config.horizon


def step(config: GridConfig, state: SymbolicState, action: Action, rng: Optional[np.random.Generator] = None):
    """One environment step; draws from ``rng`` only when forward moves are stochastic."""
    action = Action(action)
    if action == Action.FORWARD and config.stochastic_forward_p < 1.0:
        if rng is None:
            raise UsageError("stochastic dynamics need a random generator")
        if rng.random() >= config.stochastic_forward_p:
            action = Action.TURN_LEFT if rng.integers(2) == 0 else Action.TURN_RIGHT
    return apply_action(config, state, action)


def outcomes(config: GridConfig, state: SymbolicState, action: Action):
    """All ``(probability, next_state, reward, terminal)`` outcomes of an action."""
    action = Action(action)
    p = config.stochastic_forward_p
    if action != Action.FORWARD or p >= 1.0:
        return [(1.0, *apply_action(config, state, action))]
    out = [(p, *apply_action(config, state, action))] if p > 0 else []
    for turn in (Action.TURN_LEFT, Action.TURN_RIGHT):
        out.append(((1.0 - p) / 2, *apply_action(config, state, turn)))
    return out


class GridEnv:
    """Stateful wrapper holding the current state and the run's random stream."""

    def __init__(self, config: GridConfig, seed: int = 0, rng: Optional[np.random.Generator] = None):
        config.validate()
        self.config = config
        self.rng = rng if rng is not None else np.random.default_rng(seed)
        self.state: Optional[SymbolicState] = None
        self.done = True

    def reset(self) -> SymbolicState:
        self.state = initial_state(self.config)
        self.done = False
        return self.state

    def step(self, action: Action):
        if self.done:
            raise UsageError("step() called on a terminal state; call reset() first")
        self.state, reward, self.done = step(self.config, self.state, action, self.rng)
        return self.state, reward, self.done

    @property
    def timed_out(self) -> bool:
        return self.state is not None and is_timeout(self.config, self.state)


# -- canonical serialization -------------------------------------------------

def _opt(v) -> str:
    return "-" if v is None else str(int(v))


def serialize_state(state: SymbolicState, include_step: bool = True) -> bytes:
    """Canonical ASCII encoding; injective over states.

    With ``include_step=False`` the step counter is dropped, which is the key
    tabular agents use so that values generalize across time.
    """
    parts = [
        "%d,%d" % state.agent_location,
        str(int(state.agent_facing)),
        _opt(state.inventory),
        str(state.t) if include_step else "*",
        str(state.streak),
        _opt(state.streak_action),
    ]
    objs = []
    for o in state.objects:
        where = "-" if o.location is None else "%d,%d" % o.location
        objs.append(f"{int(o.kind)}.{_opt(o.color)}.{where}.{_opt(o.door_state)}")
    parts.append(";".join(objs))
    return "|".join(parts).encode("ascii")


def state_key(state: SymbolicState) -> bytes:
    # states are immutable, so the key is memoized on the instance
    key = state._key
    if key is None:
        key = serialize_state(state, include_step=False)
        object.__setattr__(state, "_key", key)
    return key


def parse_state(data: bytes) -> SymbolicState:
    text = data.decode("ascii")
    loc, facing, inv, t, streak, sact, objs = text.split("|")

    def opt(s, typ):
        return None if s == "-" else typ(int(s))

    objects = []
    if objs:
        for rec in objs.split(";"):
            kind, color, where, door = rec.split(".")
            location = None if where == "-" else tuple(int(v) for v in where.split(","))
            objects.append(ObjectRecord(Kind(int(kind)), opt(color, Color), location, opt(door, DoorState)))
    if t == "*":
        raise UsageError("cannot parse a state serialized without its step counter")
    return SymbolicState(
        agent_location=tuple(int(v) for v in loc.split(",")),
        agent_facing=Facing(int(facing)),
        inventory=opt(inv, int),
        objects=tuple(objects),
        t=int(t),
        streak=int(streak),
        streak_action=opt(sact, Action),
    )


# -- feature codec used by the rule model -------------------------------------

@dataclass(frozen=True)
class Feature:
    name: str
    categorical: bool


class StateCodec:
    """Maps states to flat integer feature vectors and back.

    Ordered features: agent row/col, object row/col, streak length.
    Categorical features: facing, inventory, object kind/color/door state,
    streak action. Absent values (no location, no door state) encode as -1.
    Walls never move, so they are left out unless ``include_walls``.
    """

    def __init__(self, config: GridConfig, include_walls: bool = False):
        self.template = initial_state(config)
        self.include_walls = include_walls
        self.object_indices = tuple(
            i for i, o in enumerate(config.objects) if include_walls or o.kind != Kind.WALL
        )
        feats = [
            Feature("agent_row", False),
            Feature("agent_col", False),
            Feature("agent_facing", True),
            Feature("inventory", True),
            Feature("streak", False),
            Feature("streak_action", True),
        ]
        for i in self.object_indices:
            tag = f"obj{i}_{config.objects[i].kind.name.lower()}"
            feats += [
                Feature(f"{tag}_kind", True),
                Feature(f"{tag}_color", True),
                Feature(f"{tag}_row", False),
                Feature(f"{tag}_col", False),
                Feature(f"{tag}_door", True),
            ]
        self.features: tuple[Feature, ...] = tuple(feats)

    @property
    def categorical(self) -> tuple[bool, ...]:
        return tuple(f.categorical for f in self.features)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features)

    def encode(self, state: SymbolicState) -> tuple[int, ...]:
        inv = -1 if state.inventory is None else state.inventory
        sa = -1 if state.streak_action is None else int(state.streak_action)
        vec = [state.agent_location[0], state.agent_location[1], int(state.agent_facing), inv, state.streak, sa]
        objects = state.objects
        for i in self.object_indices:
            o = objects[i]
            r, c = o.location if o.location is not None else (-1, -1)
            vec += [
                int(o.kind),
                -1 if o.color is None else int(o.color),
                r,
                c,
                -1 if o.door_state is None else int(o.door_state),
            ]
        return tuple(vec)

    def decode(self, vec: Sequence[int], t: int = 0, template: Optional[SymbolicState] = None) -> SymbolicState:
        template = template if template is not None else self.template
        objects = list(template.objects)
        for j, i in enumerate(self.object_indices):
            kind, color, r, c, door = vec[6 + 5 * j: 11 + 5 * j]
            objects[i] = ObjectRecord(
                Kind(kind),
                None if color < 0 else Color(color),
                None if r < 0 else (r, c),
                None if door < 0 else DoorState(door),
            )
        return SymbolicState(
            agent_location=(vec[0], vec[1]),
            agent_facing=Facing(vec[2]),
            inventory=None if vec[3] < 0 else vec[3],
            objects=tuple(objects),
            t=t,
            streak=vec[4],
            streak_action=None if vec[5] < 0 else Action(vec[5]),
        )


def schema_signature(config: GridConfig) -> tuple:
    """What must stay fixed across a novelty: grid size, action count, feature schema."""
    codec = StateCodec(config, include_walls=True)
    kinds = tuple(o.kind for o in config.objects)
    return (config.width, config.height, N_ACTIONS, codec.features, kinds)


# -- exhaustive exploration ----------------------------------------------------

def reachable_states(config: GridConfig, limit: int = 500_000) -> Iterator[SymbolicState]:
    """Breadth-first enumeration of non-terminal reachable states (step counter zeroed)."""
    start = dataclasses.replace(initial_state(config), t=0)
    seen = {start}
    frontier = [start]
    n = 0
    while frontier:
        nxt_frontier = []
        for s in frontier:
            yield s
            n += 1
            if n >= limit:
                raise ConfigurationError(f"reachable set exceeds {limit} states")
            for a in Action:
                for _, s2, _, term in outcomes(config, s, a):
                    if term:
                        continue
                    s2 = dataclasses.replace(s2, t=0)
                    if s2 not in seen:
                        seen.add(s2)
                        nxt_frontier.append(s2)
        frontier = nxt_frontier


@dataclass
class Layout:
    """ASCII layout helper. Legend::

        # wall   G goal   L lava   . empty   > v < ^ agent start/facing
        k/K key  d/D locked door  o/O unlocked (closed) door   b ball
        lower case = yellow, upper case = blue
    """

    rows: Sequence[str]
    extra: dict = field(default_factory=dict)

    def build(self, **kwargs) -> GridConfig:
        objects = []
        start = None
        facing = Facing.E
        arrows = {">": Facing.E, "v": Facing.S, "<": Facing.W, "^": Facing.N}
        h, w = len(self.rows), len(self.rows[0])
        for r, row in enumerate(self.rows):
            if len(row) != w:
                raise ConfigurationError("ragged layout")
            for c, ch in enumerate(row):
                border = r in (0, h - 1) or c in (0, w - 1)
                if border:
                    if ch != "#":
                        raise ConfigurationError("layout border must be walls")
                    continue
                yellow = ch.islower()
                color = Color.YELLOW if yellow else Color.BLUE
                low = ch.lower()
                if ch == "#":
                    objects.append(ObjectRecord(Kind.WALL, location=(r, c)))
                elif ch == "G":
                    objects.append(ObjectRecord(Kind.GOAL, location=(r, c)))
                elif ch == "L":
                    objects.append(ObjectRecord(Kind.LAVA, location=(r, c)))
                elif low == "k":
                    objects.append(ObjectRecord(Kind.KEY, color, (r, c)))
                elif low == "d":
                    objects.append(ObjectRecord(Kind.DOOR, color, (r, c), DoorState.LOCKED))
                elif low == "o":
                    objects.append(ObjectRecord(Kind.DOOR, color, (r, c), DoorState.CLOSED))
                elif low == "b":
                    objects.append(ObjectRecord(Kind.BALL, color, (r, c)))
                elif ch in arrows:
                    start = (r, c)
                    facing = arrows[ch]
                elif ch != ".":
                    raise ConfigurationError(f"unknown layout symbol {ch!r}")
        if start is None:
            raise ConfigurationError("layout has no agent start")
        # walls first keeps non-wall object indices stable across layout edits
        objects.sort(key=lambda o: o.kind != Kind.WALL)
        cfg = GridConfig(width=w, height=h, objects=tuple(objects), agent_start=start, agent_facing=facing)
        return cfg.replace(**{**self.extra, **kwargs})
