import copy

import numpy as np
import pytest

from ottalab import gridworld as gw
from ottalab import novelty as nv
from ottalab.agents import QAgent, Transition
from ottalab.detection import DetectorParams, NoveltyDetector
from ottalab.errors import ConfigurationError
from ottalab.imagination import AdaptationController, MixParams, UpdateBuffer, imagine_rollout
from ottalab.rulemodel import RuleModel


def learned_empty_model(steps=6000, seed=0):
    cfg = nv.empty_config()
    model = RuleModel.for_codec(gw.StateCodec(cfg))
    rng = np.random.default_rng(seed)
    env = gw.GridEnv(cfg, rng=rng)
    env.reset()
    for _ in range(steps):
        s = env.state
        a = int(rng.integers(gw.N_ACTIONS))
        s2, r, d = env.step(a)
        model.update(s, a, s2, r, d and not env.timed_out)
        if d:
            env.reset()
    return cfg, model


@pytest.fixture(scope="module")
def empty_world():
    return learned_empty_model()


def test_mix_params_validation():
    assert MixParams(0.4).steps_ratio == pytest.approx(1.5)
    assert MixParams(0.0).steps_ratio == float("inf")
    for bad in ({"imagined_fraction": 1.0}, {"horizon": 0}, {"pool_size": 0}):
        with pytest.raises(ConfigurationError):
            MixParams(**bad)


def test_empty_model_gives_empty_rollout():
    cfg = nv.empty_config()
    model = RuleModel.for_codec(gw.StateCodec(cfg))
    assert imagine_rollout(model, QAgent(), gw.reset(cfg), 20) == []
    with pytest.raises(ConfigurationError):
        imagine_rollout(model, QAgent(), gw.reset(cfg), 0)


def test_rollout_respects_horizon(empty_world):
    cfg, model = empty_world
    agent = QAgent(epsilon=1.0, rng=np.random.default_rng(0))
    for h in (1, 5, 20):
        out = imagine_rollout(model, agent, gw.reset(cfg), h)
        assert 1 <= len(out) <= h and all(tr.imagined for tr in out)


def test_learned_model_rollout_matches_real_rollout(empty_world):
    cfg, model = empty_world
    real_agent = QAgent(epsilon=1.0, rng=np.random.default_rng(7))
    imag_agent = QAgent(epsilon=1.0, rng=np.random.default_rng(7))
    imagined = imagine_rollout(model, imag_agent, gw.reset(cfg), 40)
    env = gw.GridEnv(cfg)
    s = env.reset()
    real = []
    for _ in range(len(imagined)):
        a = real_agent.act(s)
        s2, r, d = env.step(a)
        real.append(Transition(gw.state_key(s), a, r, gw.state_key(s2), d, imagined=True))
        s = s2
        if d:
            break
    assert imagined == real


def test_update_buffer_tracks_share():
    buf = UpdateBuffer(capacity=10)
    for i in range(12):
        buf.append(Transition(i, 0, 0.0, i, False, imagined=i % 4 == 0))
    assert len(buf) == 10 and buf.n_real + buf.n_imagined == 12
    assert buf.imagined_share() == 2 / 10
    assert len(buf.take_pending()) == 12 and buf.pending == []


def _drive(ctrl, cfg, steps, rng):
    env = gw.GridEnv(cfg, rng=rng)
    s = env.reset()
    fired_at = None
    for t in range(steps):
        a = int(rng.integers(gw.N_ACTIONS))
        s2, r, d = env.step(a)
        if ctrl.observe(s, a, s2, r, d, env.timed_out):
            fired_at = t
        s = s2
        if d:
            s = env.reset()
    return fired_at


def test_frozen_until_fire_then_mixes_at_target_share(empty_world):
    cfg, model = empty_world
    # goal moves to the top-right corner of the empty grid
    post = cfg.replace(objects=tuple(o if o.kind != gw.Kind.GOAL else o.__class__(o.kind, o.color, (1, 6))
                                     for o in cfg.objects))
    agent = QAgent(epsilon=0.3, rng=np.random.default_rng(1))
    ctrl = AdaptationController(agent, copy.deepcopy(model),
                                NoveltyDetector(DetectorParams(2)), MixParams(0.4), np.random.default_rng(2))
    rng = np.random.default_rng(3)
    assert _drive(ctrl, cfg, 2000, rng) is None
    assert len(ctrl.buffer) == 0 and agent.updates == 0  # nothing reaches the buffer pre-fire
    _drive(ctrl, post, 20_000, rng)
    assert ctrl.detector.fired and ctrl.active
    share = ctrl.buffer.imagined_share(window=4000)
    assert abs(share - 0.4) <= 0.02
    assert agent.updates == (ctrl.buffer.n_real + ctrl.buffer.n_imagined) // 64


def test_baseline_learns_from_start_without_imagination():
    cfg = nv.empty_config()
    model = RuleModel.for_codec(gw.StateCodec(cfg))
    agent = QAgent(rng=np.random.default_rng(0))
    ctrl = AdaptationController(agent, model, NoveltyDetector(), MixParams(0.0))
    _drive(ctrl, cfg, 640, np.random.default_rng(0))
    assert ctrl.buffer.n_imagined == 0 and ctrl.buffer.n_real == 640
    assert agent.updates == 10 and len(model) > 0


def test_paused_controller_only_observes():
    cfg = nv.empty_config()
    model = RuleModel.for_codec(gw.StateCodec(cfg))
    agent = QAgent(rng=np.random.default_rng(0))
    ctrl = AdaptationController(agent, model, NoveltyDetector(), MixParams(0.0))
    ctrl.paused = True
    _drive(ctrl, cfg, 200, np.random.default_rng(0))
    assert len(model) == 0 and len(ctrl.buffer) == 0 and ctrl.detector.fired
