"""Noticing that the world changed.

The agent holds the yellow key in front of the yellow door. Before the
novelty the key unlocks the door; afterwards only the blue key does. The
detector fires once the same rule has been contradicted twice.
"""

import dataclasses

from ottalab import gridworld as gw
from ottalab import novelty as nv
from ottalab.detection import DetectorParams, NoveltyDetector
from ottalab.gridworld import Action, Color, Facing, Kind
from ottalab.rulemodel import RuleModel

spec = nv.exemplar("DoorKeyChange")
print(f"{spec.name}: {spec.description} ({spec.ontology.solution_shift.value})")

s = gw.reset(spec.pre_config)
door = next(i for i, o in enumerate(s.objects) if o.kind == Kind.DOOR and o.color == Color.YELLOW)
key = next(i for i, o in enumerate(s.objects) if o.kind == Kind.KEY and o.color == Color.YELLOW)
objs = list(s.objects)
objs[key] = dataclasses.replace(objs[key], location=None)
dr, dc = gw.DIRECTIONS[Facing.E]
row, col = s.objects[door].location
s = dataclasses.replace(s, agent_location=(row - dr, col - dc), agent_facing=Facing.E, inventory=key,
                        objects=tuple(objs))

model = RuleModel.for_codec(gw.StateCodec(spec.pre_config))
s2, r, d = gw.step(spec.pre_config, s, Action.TOGGLE)
print("before: toggle ->", model.update(s, Action.TOGGLE, s2, r, d).value, "| door now", s2.objects[door].door_state.name)

det = NoveltyDetector(DetectorParams(n=2))
for attempt in range(1, 4):
    s_post, _, d_post = gw.step(spec.post_config, s, Action.TOGGLE)
    fired = det.observe_transition(model, s, Action.TOGGLE, s_post, d_post, gw.state_key(s))
    print(f"after, attempt {attempt}: door {s_post.objects[door].door_state.name}, detector fired: {fired}")
print("trigger:", det.trigger)
