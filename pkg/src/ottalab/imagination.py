"""Imagination-based adaptation.

Once the detector fires, the controller turns learning back on for both the
rule model and the agent, and feeds the agent a mix of real transitions and
transitions imagined by rolling the agent out inside the rule model. The mix
is set by the imagined fraction ``f``: each real step adds ``f / (1 - f)`` to
an imagination debt that rollouts pay off, so ``(1 - f) / f`` real steps are
taken per imagined step on average.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .agents import Transition
from .detection import NoveltyDetector
from .errors import ConfigurationError
from .gridworld import state_key


@dataclass(frozen=True)
class MixParams:
    imagined_fraction: float = 0.4
    horizon: int = 20
    pool_size: int = 256
    update_period: int = 64
    max_rollouts_per_step: int = 4

    def __post_init__(self):
        if not 0.0 <= self.imagined_fraction < 1.0:
            raise ConfigurationError("imagined_fraction must lie in [0, 1)")
        if self.horizon < 1 or self.pool_size < 1 or self.update_period < 1 or self.max_rollouts_per_step < 1:
            raise ConfigurationError("horizon, pool_size, update_period and max_rollouts_per_step must be >= 1")

    @property
    def steps_ratio(self) -> float:
        """Real steps per imagined step."""
        f = self.imagined_fraction
        return math.inf if f == 0 else (1.0 - f) / f


class UpdateBuffer:
    """Bounded FIFO of transitions awaiting (and recently used by) policy updates."""

    def __init__(self, capacity: int = 4096):
        self.items: deque = deque(maxlen=capacity)
        self.pending: list[Transition] = []
        self.n_real = 0
        self.n_imagined = 0

    def __len__(self):
        return len(self.items)

    def append(self, tr: Transition) -> None:
        self.items.append(tr)
        self.pending.append(tr)
        if tr.imagined:
            self.n_imagined += 1
        else:
            self.n_real += 1

    def take_pending(self) -> list[Transition]:
        batch, self.pending = self.pending, []
        return batch

    def imagined_share(self, window: Optional[int] = None) -> float:
        items = list(self.items)[-window:] if window else self.items
        if not items:
            return 0.0
        return sum(tr.imagined for tr in items) / len(items)


def imagine_rollout(model, agent, start, horizon: int, rng: Optional[np.random.Generator] = None) -> list[Transition]:
    """Roll ``agent`` out in ``model`` from ``start`` for at most ``horizon`` steps.

    Stops early on a predicted terminal or when no rule applies. Rewards and
    terminal flags come from the rules' annotations.
    """
    if horizon < 1:
        raise ConfigurationError("horizon must be >= 1")
    out: list[Transition] = []
    s = start
    for _ in range(horizon):
        a = agent.act(s)
        pred = model.predict(s, a, rng)
        if pred is None:
            break
        out.append(Transition(state_key(s), a, pred.reward, state_key(pred.next), pred.terminal, imagined=True))
        if pred.terminal:
            break
        s = pred.next
    return out


class AdaptationController:
    """Runs one arm's post-convergence loop, one real transition at a time.

    With ``imagined_fraction == 0`` this is the model-free baseline: the agent
    and the rule model learn from every real transition from the start.
    Otherwise both stay frozen until the detector fires. ``paused`` freezes
    everything but the detector (used for the resilience probe).
    """

    def __init__(self, agent, model, detector: NoveltyDetector, params: MixParams = MixParams(),
                 rng: Optional[np.random.Generator] = None):
        self.agent = agent
        self.model = model
        self.detector = detector
        self.params = params
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.baseline = params.imagined_fraction == 0
        self.active = self.baseline
        self.paused = False
        self.buffer = UpdateBuffer(max(4096, params.update_period))
        self.pool: deque = deque(maxlen=params.pool_size)
        self.debt = 0.0
        self.real_steps = 0
        self.imagined_steps = 0
        self.fire_step: Optional[int] = None

    def act(self, state) -> int:
        return self.agent.act(state)

    def observe(self, s, a, s_next, reward: float, terminal: bool, timeout: bool = False) -> bool:
        """Process one real transition; returns True if the detector fired on it."""
        self.real_steps += 1
        done = terminal and not timeout
        was_fired = self.detector.fired
        self.detector.observe_transition(self.model, s, a, s_next, done, state_key(s))
        fired_now = self.detector.fired and not was_fired
        if fired_now:
            self.fire_step = self.real_steps
        self.pool.append(s)
        if self.paused:
            return fired_now
        if not self.active:
            if not self.detector.fired:
                return fired_now
            self.active = True
        self.model.update(s, a, s_next, reward, done)
        self._append(Transition(state_key(s), a, reward, state_key(s_next), done))
        if not self.baseline:
            self._imagine()
        return fired_now

    def _imagine(self) -> None:
        f = self.params.imagined_fraction
        self.debt += f / (1.0 - f)
        tries = 0
        while self.debt >= 1.0 and tries < self.params.max_rollouts_per_step:
            tries += 1
            start = self.pool[int(self.rng.integers(len(self.pool)))]
            for tr in imagine_rollout(self.model, self.agent, start, self.params.horizon, self.rng):
                self.imagined_steps += 1
                self.debt -= 1.0
                self._append(tr)
        # cap the backlog a model with few applicable rules can build up
        self.debt = min(self.debt, float(self.params.horizon))

    def _append(self, tr: Transition) -> None:
        self.buffer.append(tr)
        if len(self.buffer.pending) >= self.params.update_period:
            self.agent.update(self.buffer.take_pending())

    def end_episode(self) -> None:
        self.agent.end_episode()
