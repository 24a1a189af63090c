"""Tabular agents over canonical state keys.

Both agents share one interface: ``act(state)`` picks an action,
``update(batch)`` performs one policy update over a list of
:class:`Transition` records, and ``updates`` counts those policy updates.
States may be passed as :class:`~ottalab.gridworld.SymbolicState` (keyed by
:func:`~ottalab.gridworld.state_key`) or as any hashable key.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Optional, Sequence

import numpy as np

from .errors import UsageError
from .gridworld import N_ACTIONS, SymbolicState, state_key


@dataclass(frozen=True)
class Transition:
    state: Hashable
    action: int
    reward: float
    next_state: Hashable
    terminal: bool
    imagined: bool = False


def as_key(state) -> Hashable:
    return state_key(state) if isinstance(state, SymbolicState) else state


def argmax_first(values: Sequence[float]) -> int:
    best, best_i = values[0], 0
    for i in range(1, len(values)):
        if values[i] > best:
            best, best_i = values[i], i
    return best_i


class QAgent:
    """Epsilon-greedy tabular Q-learning.

    Epsilon decays multiplicatively per episode until :meth:`end_decay`,
    after which it stays at ``epsilon_floor``. Unvisited entries start at the
    small optimistic value ``q_init`` so untried actions win greedy ties over
    tried ones that led nowhere.
    """

    kind = "q"

    def __init__(self, n_actions: int = N_ACTIONS, alpha: float = 0.5, gamma: float = 0.9,
                 epsilon: float = 1.0, epsilon_floor: float = 0.05, epsilon_decay: float = 0.8,
                 q_init: float = 0.01, decay_on_success: bool = True,
                 rng: Optional[np.random.Generator] = None):
        if not 0.0 <= epsilon <= 1.0 or not 0.0 <= epsilon_floor <= 1.0:
            raise UsageError("epsilon must lie in [0, 1]")
        self.n_actions = n_actions
        self.alpha = alpha
        self.gamma = gamma
        self.epsilon = epsilon
        self.epsilon_floor = epsilon_floor
        self.epsilon_decay = epsilon_decay
        self.q_init = q_init
        self.decay_on_success = decay_on_success
        self.decaying = True
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.q: dict = {}
        self.updates = 0

    def values(self, state) -> list[float]:
        return self.q.get(as_key(state)) or [self.q_init] * self.n_actions

    def act(self, state, greedy: bool = False) -> int:
        if not greedy and self.epsilon > 0 and self.rng.random() < self.epsilon:
            return int(self.rng.integers(self.n_actions))
        return argmax_first(self.values(state))

    def learn(self, tr: Transition) -> float:
        """One Q-learning backup; returns the TD error."""
        row = self.q.get(tr.state)
        if row is None:
            row = self.q[tr.state] = [self.q_init] * self.n_actions
        target = tr.reward
        if not tr.terminal:
            nxt = self.q.get(tr.next_state)
            target += self.gamma * (self.q_init if nxt is None else max(nxt))
        delta = target - row[tr.action]
        row[tr.action] += self.alpha * delta
        return delta

    def update(self, batch: Sequence[Transition]) -> None:
        """One policy update: a backward sweep over the batch (newest first),
        so reward information travels along a whole trajectory in one pass."""
        if not batch:
            raise UsageError("empty update batch")
        for tr in reversed(batch):
            self.learn(tr)
        self.updates += 1

    def end_episode(self, success: bool = True) -> None:
        """Decay epsilon; with ``decay_on_success`` only successful episodes count."""
        if self.decaying and (success or not self.decay_on_success):
            self.epsilon = max(self.epsilon_floor, self.epsilon * self.epsilon_decay)

    def end_decay(self) -> None:
        self.decaying = False
        self.epsilon = self.epsilon_floor

    def to_dict(self) -> dict:
        return {
            "kind": self.kind, "alpha": self.alpha, "gamma": self.gamma, "epsilon": self.epsilon,
            "epsilon_floor": self.epsilon_floor, "epsilon_decay": self.epsilon_decay, "q_init": self.q_init,
            "decaying": self.decaying, "updates": self.updates,
            "q": {_hex(k): v for k, v in self.q.items()},
        }

    @classmethod
    def from_dict(cls, d: dict, rng=None) -> "QAgent":
        agent = cls(len(next(iter(d["q"].values()), [0] * N_ACTIONS)), d["alpha"], d["gamma"], d["epsilon"],
                    d["epsilon_floor"], d["epsilon_decay"], d.get("q_init", 0.0), rng)
        agent.decaying, agent.updates = d["decaying"], d["updates"]
        agent.q = {_unhex(k): list(v) for k, v in d["q"].items()}
        return agent


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.exp(logits - logits.max())
    return z / z.sum()


class ActorCriticAgent:
    """Tabular softmax policy with a TD(0) state-value baseline.

    The actor ascends ``A * grad log pi(a|s) + entropy_coef * grad H(pi(.|s))``
    with advantage ``A = r + gamma * v(s') * [not terminal] - v(s)``.

    Values start at 0, so episodes without reward leave the policy alone. The
    default critic rate of 1 suits deterministic worlds: one backward sweep
    over a successful episode credits every step of it.
    """

    kind = "ac"

    def __init__(self, n_actions: int = N_ACTIONS, lr_actor: float = 5.0, lr_critic: float = 1.0,
                 gamma: float = 0.95, entropy_coef: float = 0.01, rng: Optional[np.random.Generator] = None):
        self.n_actions = n_actions
        self.lr_actor = lr_actor
        self.lr_critic = lr_critic
        self.gamma = gamma
        self.entropy_coef = entropy_coef
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.logits: dict = {}
        self.v: dict = {}
        self.updates = 0

    def probs(self, state) -> np.ndarray:
        z = self.logits.get(as_key(state))
        if z is None:
            return np.full(self.n_actions, 1.0 / self.n_actions)
        return softmax(z)

    def act(self, state, greedy: bool = False) -> int:
        p = self.probs(state)
        if greedy:
            return int(np.argmax(p))
        return int(self.rng.choice(self.n_actions, p=p))

    def learn(self, tr: Transition) -> float:
        """Critic TD(0) step then actor step; returns the advantage."""
        v_s = self.v.get(tr.state, 0.0)
        target = tr.reward if tr.terminal else tr.reward + self.gamma * self.v.get(tr.next_state, 0.0)
        adv = target - v_s
        self.v[tr.state] = v_s + self.lr_critic * adv
        z = self.logits.get(tr.state)
        if z is None:
            z = self.logits[tr.state] = np.zeros(self.n_actions)
        p = softmax(z)
        grad = -adv * p
        grad[tr.action] += adv
        if self.entropy_coef:
            logp = np.log(np.maximum(p, 1e-300))
            entropy = -float(p @ logp)
            grad += self.entropy_coef * (-p * (logp + entropy))
        z += self.lr_actor * grad
        return adv

    def update(self, batch: Sequence[Transition]) -> None:
        if not batch:
            raise UsageError("empty update batch")
        for tr in reversed(batch):
            self.learn(tr)
        self.updates += 1

    def end_episode(self, success: bool = True) -> None:
        pass

    def end_decay(self) -> None:
        pass

    def to_dict(self) -> dict:
        return {
            "kind": self.kind, "lr_actor": self.lr_actor, "lr_critic": self.lr_critic, "gamma": self.gamma,
            "entropy_coef": self.entropy_coef, "updates": self.updates,
            "logits": {_hex(k): v.tolist() for k, v in self.logits.items()},
            "v": {_hex(k): x for k, x in self.v.items()},
        }

    @classmethod
    def from_dict(cls, d: dict, rng=None) -> "ActorCriticAgent":
        agent = cls(N_ACTIONS, d["lr_actor"], d["lr_critic"], d["gamma"], d["entropy_coef"], rng)
        agent.updates = d["updates"]
        agent.logits = {_unhex(k): np.array(v) for k, v in d["logits"].items()}
        agent.v = {_unhex(k): x for k, x in d["v"].items()}
        agent.n_actions = len(next(iter(agent.logits.values()), [0] * N_ACTIONS))
        return agent


def make_agent(kind: str, rng: Optional[np.random.Generator] = None, **params):
    if kind == "q":
        return QAgent(rng=rng, **params)
    if kind == "ac":
        return ActorCriticAgent(rng=rng, **params)
    raise UsageError(f"unknown agent kind {kind!r}")


def agent_from_dict(d: dict, rng=None):
    return (QAgent if d["kind"] == "q" else ActorCriticAgent).from_dict(d, rng)


def _hex(k) -> str:
    return k.hex() if isinstance(k, bytes) else str(k)


def _unhex(s: str):
    try:
        return bytes.fromhex(s)
    except ValueError:
        return s
