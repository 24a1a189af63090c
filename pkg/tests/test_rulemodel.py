import dataclasses
import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ottalab import gridworld as gw
from ottalab import novelty as nv
from ottalab.errors import UsageError
from ottalab.gridworld import Action, DoorState, Facing, Kind, Layout
from ottalab.rulemodel import (AABI, Effect, Rule, RuleModel, UpdateOutcome, contains, intersects,
                               prediction_accuracy, relax, split_min_cut)

LOC = ("x", "y")
ORD2 = (False, False)
FWD = int(Action.FORWARD)


def box(*bounds):
    return AABI(tuple(bounds))


def loc_model():
    return RuleModel(LOC, ORD2)


# -- geometry -------------------------------------------------------------------

def test_contains_examples():
    b = box((1, 5), (1, 2))
    assert not contains(b, (3, 4))
    assert contains(box((3, 3), (5, 5)), (3, 5))
    with pytest.raises(UsageError):
        contains(b, (1, 2, 3))


def test_intersects_examples():
    assert intersects(box((1, 5), (1, 2)), box((3, 8), (2, 4)))
    assert not intersects(box((1, 2)), box((3, 4)))
    a = box((2, 6), (1, 1))
    assert intersects(a, a)


def test_categorical_membership():
    b = AABI(((0, 3), frozenset({1, 2})))
    assert contains(b, (0, 1)) and not contains(b, (0, 3))
    assert not intersects(b, AABI(((0, 3), frozenset({0}))))


intervals = st.tuples(st.integers(0, 7), st.integers(0, 7)).map(lambda t: (min(t), max(t)))
boxes2 = st.tuples(intervals, intervals).map(AABI)
cells = st.tuples(st.integers(0, 7), st.integers(0, 7))


def _cells(b):
    return {c for c in itertools.product(range(8), repeat=2) if all(lo <= v <= hi for v, (lo, hi) in zip(c, b.bounds))}


@settings(max_examples=200, deadline=None)
@given(boxes2, boxes2)
def test_intersects_matches_cell_sets(a, b):
    assert intersects(a, b) == bool(_cells(a) & _cells(b))


@settings(max_examples=200, deadline=None)
@given(boxes2, cells)
def test_relaxed_covers_old_box_and_point(b, x):
    r = b.relaxed(x)
    assert _cells(b) <= _cells(r) and contains(r, x)


@settings(max_examples=200, deadline=None)
@given(boxes2, cells)
def test_split_partitions_minus_slab(b, x):
    if not contains(b, x):
        with pytest.raises(UsageError):
            b.split_about(x)
        return
    pieces = b.split_about(x)
    covered = [_cells(p) for p in pieces]
    for p, q in itertools.combinations(covered, 2):
        assert not p & q
    union = set().union(*covered) if covered else set()
    assert x not in union
    widths = [hi - lo + 1 for lo, hi in b.bounds]
    if max(widths) == 1:
        assert pieces == []
    else:
        axis = widths.index(max(widths))
        assert union == {c for c in _cells(b) if c[axis] != x[axis]}


# -- rule-level operations -----------------------------------------------------------

def test_relax_worked_example():
    rule = Rule(0, FWD, Effect((0, 1)), [box((1, 5), (1, 2))])
    out = relax(rule, (3, 4))
    assert out.boxes == [box((1, 5), (1, 4))]
    assert rule.boxes == [box((1, 5), (1, 2))]  # pure
    assert relax(out, (2, 3)) is out


def test_split_min_cut_examples():
    rule = Rule(0, FWD, Effect((0, 1)), [box((1, 8), (1, 8))])
    (out,) = split_min_cut(rule, (3, 5))
    assert out.boxes == [box((1, 2), (1, 8)), box((4, 8), (1, 8))]
    point = Rule(1, FWD, Effect((0, 1)), [box((3, 3), (5, 5))])
    assert split_min_cut(point, (3, 5)) == []
    with pytest.raises(UsageError):
        split_min_cut(rule, (9, 9))


def test_split_on_categorical_only_box_drops_value():
    b = AABI(((2, 2), frozenset({0, 1, 2})))
    assert b.split_about((2, 1)) == [AABI(((2, 2), frozenset({0, 2})))]


# -- model updates ---------------------------------------------------------------------

def test_update_creates_then_no_change():
    m = loc_model()
    assert m.update((1, 1), FWD, (1, 2)) == UpdateOutcome.CREATED
    assert m.update((1, 1), FWD, (1, 2)) == UpdateOutcome.NO_CHANGE
    assert m.stats["creations"] == 1 and m.stats["hits"] == 1


def test_update_relaxation_example():
    m = loc_model()
    m.add_rule(FWD, Effect((0, 1)), [box((1, 5), (1, 2))])
    assert m.update((3, 4), FWD, (3, 5)) == UpdateOutcome.RELAXED
    (rule,) = m.rules_for(FWD)
    assert rule.boxes == [box((1, 5), (1, 4))]


def test_update_collision_example():
    m = loc_model()
    m.add_rule(FWD, Effect((0, 1)), [box((1, 8), (1, 8))])
    assert m.update((3, 5), FWD, (3, 5)) == UpdateOutcome.SPLIT_AND_CREATED
    old, new = m.rules_for(FWD)
    assert old.boxes == [box((1, 2), (1, 8)), box((4, 8), (1, 8))]
    assert new.effect.is_empty() and new.boxes == [box((3, 3), (5, 5))]
    assert m.predict((3, 5), FWD).next == (3, 5)
    assert m.predict((3, 4), FWD) is None  # carved out of the old rule, not yet seen
    m.check_invariants()


def test_add_rule_rejects_overlap():
    m = loc_model()
    m.add_rule(FWD, Effect((0, 1)), [box((1, 3), (1, 3))])
    with pytest.raises(UsageError):
        m.add_rule(FWD, Effect((1, 0)), [box((3, 4), (3, 4))])


def test_rule_creation_on_full_state():
    cfg = Layout([
        "########",
        "#......#",
        "#......#",
        "#....>d#",
        "#.k....#",
        "#......#",
        "#.....G#",
        "########",
    ]).build()
    s0 = gw.reset(cfg)
    key = next(i for i, o in enumerate(s0.objects) if o.kind == Kind.KEY)
    door = next(i for i, o in enumerate(s0.objects) if o.kind == Kind.DOOR)
    objs = list(s0.objects)
    objs[key] = dataclasses.replace(objs[key], location=None)
    s = dataclasses.replace(s0, agent_location=(3, 5), agent_facing=Facing.E, inventory=key, objects=tuple(objs))
    s2, r, d = gw.step(cfg, s, Action.TOGGLE)
    codec = gw.StateCodec(cfg)
    m = RuleModel.for_codec(codec)
    assert m.update(s, Action.TOGGLE, s2, r, d) == UpdateOutcome.CREATED
    (rule,) = m.rules_for(Action.TOGGLE)
    (b,) = rule.boxes
    assert b.is_point()
    names = codec.names
    assert b.bounds[names.index("agent_row")] == (3, 3) and b.bounds[names.index("agent_col")] == (5, 5)
    changed = {names[i]: d for i, d in enumerate(rule.effect.delta) if d not in (None, 0)}
    door_tag = next(n for n in names if n.endswith("_door") and changed.get(n))
    assert changed[door_tag] == (int(DoorState.LOCKED), int(DoorState.CLOSED))
    assert changed["inventory"] == (key, -1)
    pred = m.predict(s, Action.TOGGLE)
    assert pred.next == s2 and pred.reward == 0.0 and not pred.terminal


def test_predict_absent_on_empty_model():
    cfg = nv.empty_config()
    m = RuleModel.for_codec(gw.StateCodec(cfg))
    assert m.predict(gw.reset(cfg), Action.FORWARD) is None


def _random_transitions(cfg, n, seed):
    rng = np.random.default_rng(seed)
    env = gw.GridEnv(cfg, rng=rng)
    env.reset()
    for _ in range(n):
        s = env.state
        a = int(rng.integers(gw.N_ACTIONS))
        s2, r, d = env.step(a)
        yield s, a, s2, r, d and not env.timed_out
        if d:
            env.reset()


@pytest.mark.parametrize("name", ["DoorKeyChange", "ImperviousToLava", "Burdening"])
def test_single_example_fix_and_disjointness(name):
    cfg = nv.exemplar(name).pre_config
    m = RuleModel.for_codec(gw.StateCodec(cfg))
    for s, a, s2, r, term in _random_transitions(cfg, 1500, 0):
        m.update(s, a, s2, r, term)
        p = m.predict(s, a)
        assert p is not None and p.next == s2 and p.terminal == term
    m.check_invariants()


def test_rewards_are_annotated():
    cfg = Layout(["#####", "#>G.#", "#...#", "#####"]).build()
    m = RuleModel.for_codec(gw.StateCodec(cfg))
    s = gw.reset(cfg)
    s2, r, d = gw.step(cfg, s, Action.FORWARD)
    m.update(s, Action.FORWARD, s2, r, d)
    p = m.predict(s, Action.FORWARD)
    assert p.terminal and p.reward == r > 0


def test_stochastic_family_records_effect_distribution():
    m = RuleModel(LOC, ORD2, stochastic=True)
    m.update((2, 2), FWD, (2, 3))
    assert m.update((2, 2), FWD, (2, 2)) == UpdateOutcome.SPLIT_AND_CREATED
    (rule,) = m.rules_for(FWD)
    assert rule.stochastic and sum(rule.effect_counts.values()) == 2
    m.update((2, 2), FWD, (2, 3))
    rng = np.random.default_rng(0)
    draws = [m.predict((2, 2), FWD, rng).next for _ in range(3000)]
    assert abs(draws.count((2, 3)) / 3000 - 2 / 3) < 0.05


def test_prediction_accuracy_bounds():
    cfg = nv.empty_config()
    m = RuleModel.for_codec(gw.StateCodec(cfg))
    env = gw.GridEnv(cfg, rng=np.random.default_rng(0))
    assert prediction_accuracy(m, env, steps=200, rng=np.random.default_rng(1)) == 0.0
    with pytest.raises(UsageError):
        prediction_accuracy(m, env, steps=0)


def test_prediction_accuracy_after_random_exploration():
    cfg = nv.empty_config()
    m = RuleModel.for_codec(gw.StateCodec(cfg))
    for s, a, s2, r, term in _random_transitions(cfg, 3000, 3):
        m.update(s, a, s2, r, term)
    acc = prediction_accuracy(m, gw.GridEnv(cfg, rng=np.random.default_rng(4)), steps=500,
                              rng=np.random.default_rng(5))
    assert 0.9 <= acc <= 1.0


def test_dump_roundtrip(tmp_path):
    cfg = nv.exemplar("DoorKeyChange").pre_config
    codec = gw.StateCodec(cfg)
    m = RuleModel.for_codec(codec)
    data = list(_random_transitions(cfg, 800, 2))
    for s, a, s2, r, term in data:
        m.update(s, a, s2, r, term)
    path = tmp_path / "rules.jsonl"
    m.save(path)
    m2 = RuleModel.loads(path.read_text(), codec=codec)
    assert m2.dumps() == m.dumps()
    for s, a, *_ in data:
        p1, p2 = m.predict(s, a), m2.predict(s, a)
        assert (p1 is None and p2 is None) or p1.next == p2.next
