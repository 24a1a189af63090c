import dataclasses

import pytest

from ottalab import gridworld as gw
from ottalab import novelty as nv
from ottalab.detection import DetectorParams, NoveltyDetector
from ottalab.errors import ConfigurationError
from ottalab.gridworld import Action, Color, Facing, Kind
from ottalab.rulemodel import RuleModel


def test_rule_case_fires_at_n_consecutive_violations():
    det = NoveltyDetector(DetectorParams(n=2))
    assert not det.observe(7, "a", "b", "s1")
    assert det.observe(7, "a", "b", "s2")
    assert det.trigger["case"] == "rule" and det.trigger["count"] == 2


def test_alternating_rule_never_fires_on_rule_case():
    det = NoveltyDetector(DetectorParams(n=2))
    for i in range(50):
        ok = i % 2 == 0
        det.observe(3, "x", "x" if ok else "y", f"s{i}")
    assert not det.fired


def test_n1_fires_on_first_violation():
    det = NoveltyDetector(DetectorParams(n=1))
    assert det.observe(0, 1, 2, "s")


def test_state_case_needs_more_than_n():
    det = NoveltyDetector(DetectorParams(n=2))
    # absent predictions never blame a rule
    assert not det.observe(None, None, "a", "s")
    assert not det.observe(None, None, "a", "s")
    assert det.observe(None, None, "a", "s")
    assert det.trigger == {"case": "state", "state": "s", "count": 3}


def test_success_resets_state_counter():
    det = NoveltyDetector(DetectorParams(n=2))
    for _ in range(10):
        det.observe(None, None, "a", "s")
        det.observe(None, None, "a", "s")
        det.observe(5, "a", "a", "s")
    assert not det.fired


def test_fired_is_latched_until_reset():
    det = NoveltyDetector(DetectorParams(n=1))
    det.observe(0, 1, 2, "s")
    assert det.observe(0, 1, 1, "s")
    det.reset()
    assert not det.fired and det.trigger is None


def test_invalid_n():
    with pytest.raises(ConfigurationError):
        DetectorParams(n=0)


def _at_door_with(cfg, color):
    s = gw.reset(cfg)
    door = next(i for i, o in enumerate(s.objects) if o.kind == Kind.DOOR)
    key = next(i for i, o in enumerate(s.objects) if o.kind == Kind.KEY and o.color == color)
    objs = list(s.objects)
    objs[key] = dataclasses.replace(objs[key], location=None)
    dr, dc = gw.DIRECTIONS[Facing.E]
    row, col = s.objects[door].location
    return dataclasses.replace(s, agent_location=(row - dr, col - dc), agent_facing=Facing.E, inventory=key,
                               objects=tuple(objs))


def test_doorkeychange_scripted_fires_on_second_violation():
    spec = nv.exemplar("DoorKeyChange")
    codec = gw.StateCodec(spec.pre_config)
    model = RuleModel.for_codec(codec)
    s = _at_door_with(spec.pre_config, Color.YELLOW)
    s2, r, d = gw.step(spec.pre_config, s, Action.TOGGLE)
    model.update(s, Action.TOGGLE, s2, r, d)
    det = NoveltyDetector(DetectorParams(n=2))
    # the yellow key no longer unlocks after the novelty: the rule is violated each time
    fires = []
    for _ in range(3):
        s_post, _, d_post = gw.step(spec.post_config, s, Action.TOGGLE)
        fires.append(det.observe_transition(model, s, Action.TOGGLE, s_post, d_post, gw.state_key(s)))
    assert fires == [False, True, True]
    assert det.trigger["case"] == "rule"


def test_no_fire_on_correct_predictions():
    spec = nv.exemplar("DoorKeyChange")
    model = RuleModel.for_codec(gw.StateCodec(spec.pre_config))
    s = _at_door_with(spec.pre_config, Color.YELLOW)
    s2, r, d = gw.step(spec.pre_config, s, Action.TOGGLE)
    model.update(s, Action.TOGGLE, s2, r, d)
    det = NoveltyDetector(DetectorParams(n=1))
    for _ in range(20):
        assert not det.observe_transition(model, s, Action.TOGGLE, s2, d, gw.state_key(s))
