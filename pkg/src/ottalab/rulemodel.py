"""Interval-based symbolic world model.

A rule is ``<state precondition, action precondition, effect>``. State
preconditions are a disjoint union of axis-aligned bounding intervals (AABIs)
over a flat integer feature vector: ordered features carry ``[lo, hi]``
bounds, categorical features carry a value set. Effects are the componentwise
difference between successive states (integer deltas for ordered features,
``(old, new)`` pairs for categorical ones) plus the terminal flag.

The model is learned one transition at a time with four outcomes: no change,
creation of a point rule, relaxation of an existing AABI, and collision
resolution by a min-cut split.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, NamedTuple, Optional, Sequence, Union

import numpy as np

from .errors import UsageError

Vector = tuple[int, ...]


@dataclass(frozen=True)
class AABI:
    """Axis-aligned bounding interval over a mixed feature vector.

    ``bounds[i]`` is an inclusive ``(lo, hi)`` pair for ordered features and a
    frozenset of admissible values for categorical ones.
    """

    bounds: tuple

    @classmethod
    def point(cls, x: Sequence[int], categorical: Sequence[bool]) -> "AABI":
        return cls(tuple(frozenset((v,)) if cat else (v, v) for v, cat in zip(x, categorical)))

    def __len__(self):
        return len(self.bounds)

    def is_empty(self) -> bool:
        for b in self.bounds:
            if isinstance(b, frozenset):
                if not b:
                    return True
            elif b[0] > b[1]:
                return True
        return False

    def is_point(self) -> bool:
        for b in self.bounds:
            if isinstance(b, frozenset):
                if len(b) != 1:
                    return False
            elif b[0] != b[1]:
                return False
        return True

    def contains(self, x: Sequence[int]) -> bool:
        if len(x) != len(self.bounds):
            raise UsageError(f"state has {len(x)} features, AABI has {len(self.bounds)}")
        for v, b in zip(x, self.bounds):
            if type(b) is tuple:
                if v < b[0] or v > b[1]:
                    return False
            elif v not in b:
                return False
        return True

    def intersects(self, other: "AABI") -> bool:
        if len(other.bounds) != len(self.bounds):
            raise UsageError("AABIs have different feature schemas")
        for a, b in zip(self.bounds, other.bounds):
            if type(a) is tuple:
                if a[0] > b[1] or b[0] > a[1]:
                    return False
            elif a.isdisjoint(b):
                return False
        return True

    def relaxed(self, x: Sequence[int]) -> "AABI":
        return AABI(tuple(
            (min(v, b[0]), max(v, b[1])) if type(b) is tuple else (b if v in b else b | {v})
            for v, b in zip(x, self.bounds)
        ))

    def hull(self, other: "AABI") -> "AABI":
        return AABI(tuple(
            (min(a[0], b[0]), max(a[1], b[1])) if type(a) is tuple else a | b
            for a, b in zip(self.bounds, other.bounds)
        ))

    def covers(self, other: "AABI") -> bool:
        for a, b in zip(self.bounds, other.bounds):
            if type(a) is tuple:
                if b[0] < a[0] or b[1] > a[1]:
                    return False
            elif not b <= a:
                return False
        return True

    def split_about(self, x: Sequence[int]) -> list["AABI"]:
        """Carve ``x`` out along the widest ordered axis (ties: lowest index).

        Returns the non-empty pieces ``[lo, x-1]`` and ``[x+1, hi]`` on that
        axis. A box that is a single point on every ordered axis instead drops
        ``x``'s value from its first multi-valued categorical set; a true point
        yields no pieces.
        """
        if not self.contains(x):
            raise UsageError("split point is not inside the AABI")
        axis, width = -1, 1
        for i, b in enumerate(self.bounds):
            if type(b) is tuple and b[1] - b[0] + 1 > width:
                axis, width = i, b[1] - b[0] + 1
        if axis >= 0:
            lo, hi = self.bounds[axis]
            pieces = []
            for new in ((lo, x[axis] - 1), (x[axis] + 1, hi)):
                if new[0] <= new[1]:
                    pieces.append(AABI(self.bounds[:axis] + (new,) + self.bounds[axis + 1:]))
            return pieces
        for i, b in enumerate(self.bounds):
            if type(b) is not tuple and len(b) > 1:
                return [AABI(self.bounds[:i] + (b - {x[i]},) + self.bounds[i + 1:])]
        return []


def contains(aabi: AABI, x: Sequence[int]) -> bool:
    """Separating-axis membership test."""
    return aabi.contains(x)


def intersects(a: AABI, b: AABI) -> bool:
    return a.intersects(b)


@dataclass(frozen=True)
class Effect:
    """State change of one transition.

    ``delta[i]`` is an int for ordered features and ``None`` (unchanged) or an
    ``(old, new)`` pair for categorical ones.
    """

    delta: tuple
    terminal: bool = False

    @classmethod
    def between(cls, x: Sequence[int], y: Sequence[int], categorical: Sequence[bool], terminal: bool = False):
        if len(x) != len(y) or len(x) != len(categorical):
            raise UsageError("feature vectors do not share the model schema")
        return cls(tuple(
            ((a, b) if a != b else None) if cat else b - a
            for a, b, cat in zip(x, y, categorical)
        ), bool(terminal))

    def apply(self, x: Sequence[int]) -> Vector:
        return tuple(
            v + d if type(d) is int else (v if d is None else d[1])
            for v, d in zip(x, self.delta)
        )

    def is_empty(self) -> bool:
        return not self.terminal and all(d is None or d == 0 for d in self.delta)


@dataclass
class Rule:
    id: int
    action: int
    effect: Effect
    boxes: list[AABI]
    reward_sum: float = 0.0
    reward_n: int = 0
    # stochastic families only: empirical counts over effects sharing one precondition
    effect_counts: Optional[dict] = None

    @property
    def reward(self) -> float:
        return self.reward_sum / self.reward_n if self.reward_n else 0.0

    @property
    def terminal(self) -> bool:
        return self.effect.terminal

    @property
    def stochastic(self) -> bool:
        return self.effect_counts is not None

    def box_index(self, x: Sequence[int]) -> int:
        for i, box in enumerate(self.boxes):
            if box.contains(x):
                return i
        return -1

    def contains(self, x: Sequence[int]) -> bool:
        return self.box_index(x) >= 0

    def observe_reward(self, reward: float) -> None:
        self.reward_sum += reward
        self.reward_n += 1

    def copy(self) -> "Rule":
        return Rule(self.id, self.action, self.effect, list(self.boxes), self.reward_sum, self.reward_n,
                    None if self.effect_counts is None else dict(self.effect_counts))


def relax(rule: Rule, x: Sequence[int]) -> Rule:
    """Expand the rule's nearest AABI to cover ``x`` (unchanged if already covered).

    Ordered bounds take componentwise min/max; categorical sets take the union.
    Collision checks against other rules are the model's job.
    """
    if rule.contains(x):
        return rule
    out = rule.copy()
    best = min(range(len(out.boxes)), key=lambda i: (_distance(out.boxes[i], x), i))
    out.boxes[best] = out.boxes[best].relaxed(x)
    return out


def split_min_cut(rule: Rule, x: Sequence[int]) -> list[Rule]:
    """Split the AABI containing ``x`` so ``x`` leaves the rule.

    Returns ``[rule']`` with the replaced preconditions, or ``[]`` when nothing
    is left (the degenerate split deletes the rule).
    """
    i = rule.box_index(x)
    if i < 0:
        raise UsageError("colliding state is not covered by the rule")
    out = rule.copy()
    out.boxes[i:i + 1] = out.boxes[i].split_about(x)
    return [out] if out.boxes else []


def _distance(box: AABI, x: Sequence[int]) -> int:
    d = 0
    for v, b in zip(x, box.bounds):
        if type(b) is tuple:
            if v < b[0]:
                d += b[0] - v
            elif v > b[1]:
                d += v - b[1]
        elif v not in b:
            d += 1
    return d


class UpdateOutcome(str, Enum):
    NO_CHANGE = "NoChange"
    CREATED = "Created"
    RELAXED = "Relaxed"
    SPLIT_AND_CREATED = "SplitAndCreated"


class Prediction(NamedTuple):
    next: Any
    reward: float
    terminal: bool
    rule_id: int
    effect: Effect


class _BoxIndex:
    """Array view of every AABI of one action, for vectorized geometry.

    Ordered bounds live in ``lo``/``hi``; categorical value sets become
    bitmasks (bit ``v + 1`` marks value ``v``, so -1 is representable).
    """

    def __init__(self, rules: list[Rule], ordered: np.ndarray, cat: np.ndarray, blocks: dict):
        self.refs = [(rule, j) for rule in rules for j in range(len(rule.boxes))]
        self.owner = np.array([rule.id for rule, _ in self.refs], dtype=np.int64)
        d = len(ordered) + len(cat)
        parts = []
        for rule in rules:
            block = blocks.get(rule.id)
            if block is None:
                block = blocks[rule.id] = np.array([_encode(b) for b in rule.boxes], dtype=np.int64).reshape(-1, 3, d)
            parts.append(block)
        arr = np.concatenate(parts) if parts else np.zeros((0, 3, d), dtype=np.int64)
        self.lo = arr[:, 0][:, ordered]
        self.hi = arr[:, 1][:, ordered]
        self.mask = arr[:, 2][:, cat]

    def __len__(self):
        return len(self.refs)

    def contains(self, xo: np.ndarray, bits: np.ndarray) -> np.ndarray:
        return ((self.lo <= xo) & (xo <= self.hi)).all(1) & ((self.mask & bits) != 0).all(1)

    def intersects(self, lo: np.ndarray, hi: np.ndarray, mask: np.ndarray) -> np.ndarray:
        return ((self.lo <= hi) & (lo <= self.hi)).all(1) & ((self.mask & mask) != 0).all(1)


def _encode(box: AABI) -> tuple:
    enc = box.__dict__.get("_enc")
    if enc is None:
        lo, hi, mask = [], [], []
        for b in box.bounds:
            if type(b) is tuple:
                lo.append(b[0])
                hi.append(b[1])
                mask.append(-1)
            else:
                m = 0
                for v in b:
                    if not -1 <= v < 62:
                        raise UsageError(f"categorical value {v} outside [-1, 62)")
                    m |= 1 << (v + 1)
                lo.append(0)
                hi.append(0)
                mask.append(m)
        enc = (lo, hi, mask)
        object.__setattr__(box, "_enc", enc)
    return enc


class RuleModel:
    """Online rule learner.

    Args:
        features: feature names, one per vector component.
        categorical: which features are categorical.
        codec: optional object with ``encode(state)``/``decode(vec, t)``; when
            given, states may be passed instead of vectors.
        stochastic: when set, conflicting effects observed at an exact point
            precondition accumulate into an effect distribution instead of
            replacing each other.
    """

    def __init__(self, features: Sequence[str], categorical: Sequence[bool], codec=None, stochastic: bool = False):
        if len(features) != len(categorical):
            raise UsageError("features and categorical mask differ in length")
        self.features = tuple(features)
        self.categorical = tuple(bool(c) for c in categorical)
        self.codec = codec
        self.stochastic = stochastic
        self.rules: dict[int, Rule] = {}
        self._by_action: dict[int, list[Rule]] = {}
        self._next_id = 0
        self.stats = Counter(creations=0, relaxations=0, splits=0, hits=0)
        self.relax_candidates = 8
        self._ord = np.array([i for i, c in enumerate(self.categorical) if not c], dtype=np.int64)
        self._cat = np.array([i for i, c in enumerate(self.categorical) if c], dtype=np.int64)
        self._index_cache: dict[int, _BoxIndex] = {}
        self._blocks: dict[int, np.ndarray] = {}  # rule id -> encoded boxes
        self._memo: dict[int, dict] = {}  # action -> {feature tuple -> matching rule}

    def _index(self, action: int) -> _BoxIndex:
        idx = self._index_cache.get(action)
        if idx is None:
            idx = self._index_cache[action] = _BoxIndex(self._by_action.get(action, []), self._ord, self._cat,
                                                         self._blocks)
        return idx

    def _touch(self, action: int, rule: Optional[Rule] = None) -> None:
        """Invalidate cached geometry after ``rule`` (or any rule of ``action``) changed."""
        self._index_cache.pop(action, None)
        self._memo.pop(action, None)
        if rule is not None:
            self._blocks.pop(rule.id, None)
        else:
            for r in self._by_action.get(action, ()):
                self._blocks.pop(r.id, None)

    def _split_x(self, x: Sequence[int]):
        xa = np.asarray(x, dtype=np.int64)
        return xa[self._ord], np.left_shift(1, xa[self._cat] + 1)

    @classmethod
    def for_codec(cls, codec, stochastic: bool = False) -> "RuleModel":
        return cls(codec.names, codec.categorical, codec=codec, stochastic=stochastic)

    # -- conversion ---------------------------------------------------------------

    def vector(self, s) -> Vector:
        if isinstance(s, tuple):
            vec = s
        elif self.codec is not None:
            vec = self.codec.encode(s)
        else:
            raise UsageError("model has no codec; pass feature vectors")
        if len(vec) != len(self.features):
            raise UsageError(f"expected {len(self.features)} features, got {len(vec)}")
        return vec

    def __len__(self):
        return len(self.rules)

    def rules_for(self, action) -> list[Rule]:
        return self._by_action.get(int(action), [])

    def add_rule(self, action, effect: Effect, boxes: Sequence[AABI], reward: Optional[float] = None) -> Rule:
        """Insert a hand-written rule; its boxes must not overlap any rule of the same action."""
        a = int(action)
        boxes = list(boxes)
        for box in boxes:
            if len(box) != len(self.features):
                raise UsageError(f"AABI has {len(box)} features, model has {len(self.features)}")
            for rule in self._by_action.get(a, ()):
                if any(box.intersects(b) for b in rule.boxes):
                    raise UsageError(f"precondition overlaps rule {rule.id}")
        rule = self._new_rule(a, effect, boxes)
        if reward is not None:
            rule.observe_reward(reward)
        return rule

    # -- queries -----------------------------------------------------------------------

    def lookup(self, x: Sequence[int], action) -> Optional[Rule]:
        a = int(action)
        key = tuple(x)
        memo = self._memo.setdefault(a, {})
        if key in memo:
            return memo[key]
        rule = memo[key] = self._scan(key, a)
        return rule

    def _scan(self, x: tuple, a: int) -> Optional[Rule]:
        rules = self._by_action.get(a, ())
        if sum(len(r.boxes) for r in rules) <= 32:
            for rule in rules:
                for box in rule.boxes:
                    if box.contains(x):
                        return rule
            return None
        if len(x) != len(self.features):
            raise UsageError(f"expected {len(self.features)} features, got {len(x)}")
        idx = self._index(a)
        hit = np.flatnonzero(idx.contains(*self._split_x(x)))
        return idx.refs[hit[0]][0] if len(hit) else None

    def predict(self, state, action, rng: Optional[np.random.Generator] = None) -> Optional[Prediction]:
        """Apply the matching rule's effect, or return None when no rule applies.

        Stochastic families sample their effect with ``rng`` (most frequent
        effect when ``rng`` is None).
        """
        x = self.vector(state)
        rule = self.lookup(x, action)
        if rule is None:
            return None
        effect = rule.effect
        if rule.effect_counts:
            effects = list(rule.effect_counts)
            counts = np.array([rule.effect_counts[e] for e in effects], dtype=float)
            if rng is None:
                effect = effects[int(np.argmax(counts))]
            else:
                effect = effects[int(rng.choice(len(effects), p=counts / counts.sum()))]
        y = effect.apply(x)
        if not isinstance(state, tuple):
            y = self.codec.decode(y, t=state.t + 1, template=state)
        return Prediction(y, rule.reward, effect.terminal, rule.id, effect)

    # -- learning ----------------------------------------------------------------------

    def update(self, s_prev, action, s_next, reward: float = 0.0, terminal: bool = False) -> UpdateOutcome:
        """Fold one observed transition into the model.

        After the call, ``predict(s_prev, action)`` reproduces ``s_next``.
        """
        x = self.vector(s_prev)
        y = self.vector(s_next)
        a = int(action)
        eff = Effect.between(x, y, self.categorical, terminal)
        rules = self._by_action.setdefault(a, [])
        holder = self.lookup(x, a)

        if holder is not None and holder.effect_counts is not None:
            holder.effect_counts[eff] = holder.effect_counts.get(eff, 0) + 1
            holder.observe_reward(reward)
            self.stats["hits"] += 1
            return UpdateOutcome.NO_CHANGE

        match = None
        for rule in rules:
            if rule.effect_counts is None and rule.effect == eff:
                match = rule
                break
        if holder is not None and holder is match:
            match.observe_reward(reward)
            self.stats["hits"] += 1
            return UpdateOutcome.NO_CHANGE

        split = False
        if holder is not None:
            # disjointness means at most one rule of this action covers x
            i = holder.box_index(x)
            if self.stochastic and holder.boxes[i].is_point():
                del holder.boxes[i]
                if not holder.boxes:
                    self._remove(holder)
                self._touch(a, holder)
                family = self._new_rule(a, holder.effect, [AABI.point(x, self.categorical)])
                family.effect_counts = {holder.effect: 1, eff: 1}
                family.observe_reward(reward)
                self.stats["creations"] += 1
                return UpdateOutcome.SPLIT_AND_CREATED
            self._carve(holder, i, x)
            split = True

        if match is not None and self._relax_into(match, x):
            outcome = UpdateOutcome.RELAXED
            self.stats["relaxations"] += 1
        else:
            point = AABI.point(x, self.categorical)
            if match is not None:
                match.boxes.append(point)
                self._touch(a, match)
            else:
                match = self._new_rule(a, eff, [point])
            outcome = UpdateOutcome.CREATED
            self.stats["creations"] += 1
        match.observe_reward(reward)
        if split:
            return UpdateOutcome.SPLIT_AND_CREATED
        return outcome

    def _new_rule(self, action: int, effect: Effect, boxes: list[AABI]) -> Rule:
        rule = Rule(self._next_id, action, effect, boxes)
        self._next_id += 1
        self.rules[rule.id] = rule
        self._by_action.setdefault(action, []).append(rule)
        self._touch(action, rule)
        return rule

    def _remove(self, rule: Rule) -> None:
        del self.rules[rule.id]
        self._by_action[rule.action].remove(rule)
        self._touch(rule.action, rule)

    def _carve(self, rule: Rule, i: int, x: Vector) -> None:
        rule.boxes[i:i + 1] = rule.boxes[i].split_about(x)
        self.stats["splits"] += 1
        self._touch(rule.action, rule)
        if not rule.boxes:
            self._remove(rule)

    def _relax_into(self, rule: Rule, x: Vector) -> bool:
        """Relax one of the nearest boxes of ``rule`` so it covers ``x``.

        Candidates are tried nearest first (at most ``relax_candidates``); a
        candidate swallows any box of the same rule it comes to overlap and is
        rejected if it would overlap a box of another rule for this action.
        """
        idx = self._index(rule.action)
        own = idx.owner == rule.id
        rows = np.flatnonzero(own)
        if len(rows) == 0:
            return False
        xo, bits = self._split_x(x)
        dist = (np.maximum(idx.lo[rows] - xo, 0) + np.maximum(xo - idx.hi[rows], 0)).sum(1) \
            + ((idx.mask[rows] & bits) == 0).sum(1)
        order = rows[np.lexsort((rows, dist))][:self.relax_candidates]
        for r in order:
            lo = np.minimum(idx.lo[r], xo)
            hi = np.maximum(idx.hi[r], xo)
            mask = idx.mask[r] | bits
            absorbed = np.zeros(len(idx), dtype=bool)
            absorbed[r] = True
            while True:
                grow = own & ~absorbed & idx.intersects(lo, hi, mask)
                if not grow.any():
                    break
                absorbed |= grow
                lo = np.minimum(lo, idx.lo[grow].min(0))
                hi = np.maximum(hi, idx.hi[grow].max(0))
                mask = mask | np.bitwise_or.reduce(idx.mask[grow], axis=0)
            if (~own & idx.intersects(lo, hi, mask)).any():
                continue
            gone = {idx.refs[j][1] for j in np.flatnonzero(absorbed)}
            keep = [b for j, b in enumerate(rule.boxes) if j not in gone]
            rule.boxes[:] = keep + [self._decode_box(lo, hi, mask)]
            self._touch(rule.action, rule)
            return True
        return False

    def _decode_box(self, lo, hi, mask) -> AABI:
        bounds: list = [None] * len(self.features)
        for k, i in enumerate(self._ord):
            bounds[i] = (int(lo[k]), int(hi[k]))
        for k, i in enumerate(self._cat):
            m = int(mask[k])
            bounds[i] = frozenset(v - 1 for v in range(m.bit_length()) if m >> v & 1)
        return AABI(tuple(bounds))

    # -- inspection / persistence -------------------------------------------------------------

    def check_invariants(self) -> None:
        """Raise AssertionError if preconditions overlap where they must not."""
        for a, rules in self._by_action.items():
            for r in rules:
                for i, b in enumerate(r.boxes):
                    assert not b.is_empty(), f"rule {r.id} holds an empty AABI"
                    for b2 in r.boxes[i + 1:]:
                        assert not b.intersects(b2), f"rule {r.id} has overlapping AABIs"
            for i, r in enumerate(rules):
                for r2 in rules[i + 1:]:
                    for b in r.boxes:
                        for b2 in r2.boxes:
                            assert not b.intersects(b2), f"rules {r.id} and {r2.id} overlap (action {a})"

    def to_records(self) -> list[dict]:
        recs = []
        for rule in self.rules.values():
            recs.append({
                "id": rule.id,
                "action": rule.action,
                "effect": _effect_to_json(rule.effect, self.features),
                "reward_mean": rule.reward,
                "reward_n": rule.reward_n,
                "terminal": rule.terminal,
                "preconditions": [_box_to_json(b, self.features) for b in rule.boxes],
                "effect_distribution": None if rule.effect_counts is None else [
                    {"effect": _effect_to_json(e, self.features), "count": n}
                    for e, n in rule.effect_counts.items()
                ],
            })
        return recs

    def dumps(self) -> str:
        """One JSON record per line: preconditions, action, effect, annotations."""
        header = {"features": list(self.features), "categorical": list(self.categorical),
                  "stochastic": self.stochastic}
        return "\n".join(json.dumps(r, sort_keys=True) for r in [header] + self.to_records()) + "\n"

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.dumps())

    @classmethod
    def loads(cls, text: str, codec=None) -> "RuleModel":
        lines = [json.loads(line) for line in text.splitlines() if line.strip()]
        head, recs = lines[0], lines[1:]
        model = cls(head["features"], head["categorical"], codec=codec, stochastic=head.get("stochastic", False))
        names = model.features
        for rec in sorted(recs, key=lambda r: r["id"]):
            rule = Rule(
                rec["id"], rec["action"], _effect_from_json(rec["effect"], names, model.categorical, rec["terminal"]),
                [_box_from_json(b, names, model.categorical) for b in rec["preconditions"]],
                reward_sum=rec["reward_mean"] * rec["reward_n"], reward_n=rec["reward_n"],
            )
            if rec.get("effect_distribution"):
                rule.effect_counts = {
                    _effect_from_json(d["effect"], names, model.categorical, d["effect"].get("_terminal", False)): d["count"]
                    for d in rec["effect_distribution"]
                }
            model.rules[rule.id] = rule
            model._by_action.setdefault(rule.action, []).append(rule)
            model._next_id = max(model._next_id, rule.id + 1)
        model._index_cache.clear()
        model._blocks.clear()
        return model


def _box_to_json(box: AABI, names) -> dict:
    out = {}
    for name, b in zip(names, box.bounds):
        out[name] = sorted(b) if isinstance(b, frozenset) else {"min": b[0], "max": b[1]}
    return out


def _box_from_json(d: dict, names, categorical) -> AABI:
    return AABI(tuple(
        frozenset(d[n]) if cat else (d[n]["min"], d[n]["max"]) for n, cat in zip(names, categorical)
    ))


def _effect_to_json(e: Effect, names) -> dict:
    out: dict = {"_terminal": e.terminal}
    for n, d in zip(names, e.delta):
        if d is None or d == 0:
            continue
        out[n] = list(d) if isinstance(d, tuple) else d
    return out


def _effect_from_json(d: dict, names, categorical, terminal: bool) -> Effect:
    delta = []
    for n, cat in zip(names, categorical):
        v = d.get(n)
        if cat:
            delta.append(None if v is None else tuple(v))
        else:
            delta.append(0 if v is None else v)
    return Effect(tuple(delta), bool(terminal))


def prediction_accuracy(model: RuleModel, env, policy=None, steps: int = 1000,
                        rng: Optional[np.random.Generator] = None) -> float:
    """Fraction of ``steps`` fresh transitions whose next state the model predicts.

    ``env`` is a :class:`~ottalab.gridworld.GridEnv` (reset on terminal);
    ``policy`` maps a state to an action and defaults to uniform random
    actions drawn from ``rng``. Absent predictions count as errors; the
    terminal flag is compared except on timeouts. The model is not updated.
    """
    if steps < 1:
        raise UsageError("steps must be >= 1")
    from .gridworld import N_ACTIONS

    rng = rng if rng is not None else np.random.default_rng(0)
    if env.done:
        env.reset()
    correct = 0
    for _ in range(steps):
        s = env.state
        a = int(rng.integers(N_ACTIONS)) if policy is None else int(policy(s))
        x = model.vector(s)
        rule = model.lookup(x, a)
        s2, _, term = env.step(a)
        if rule is not None:
            y = model.vector(s2)
            timeout = term and env.timed_out and not rule.terminal
            if rule.effect_counts:
                ok = any(e.apply(x) == y and (timeout or e.terminal == term) for e in rule.effect_counts)
            else:
                ok = rule.effect.apply(x) == y and (timeout or rule.terminal == term)
            correct += ok
        if term:
            env.reset()
    return correct / steps
