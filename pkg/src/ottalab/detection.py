"""Novelty detection from consecutive rule-model prediction failures.

Two heuristics run side by side:

* a single rule whose prediction is wrong on ``n`` consecutive applications;
* a single state whose prediction fails on more than ``n`` consecutive visits.

A missing prediction (no applicable rule) only counts toward the per-state
heuristic, since the per-rule one needs a rule to blame.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Hashable, Optional

from .errors import ConfigurationError


@dataclass(frozen=True)
class DetectorParams:
    n: int = 2

    def __post_init__(self):
        if self.n < 1:
            raise ConfigurationError("detector n must be >= 1")


@dataclass
class NoveltyDetector:
    params: DetectorParams = field(default_factory=DetectorParams)
    rule_failures: dict = field(default_factory=dict)
    state_failures: dict = field(default_factory=dict)
    fired: bool = False
    trigger: Optional[dict] = None

    def observe(self, rule_hit: Optional[int], predicted: Any, actual: Any, state_key: Hashable) -> bool:
        """Feed one real transition; return the latched ``fired`` flag.

        ``predicted`` is None when no rule applied; otherwise it is compared
        to ``actual`` with ``==``.
        """
        ok = predicted is not None and predicted == actual
        n = self.params.n
        fire = None
        if rule_hit is not None:
            if ok:
                self.rule_failures[rule_hit] = 0
            else:
                c = self.rule_failures.get(rule_hit, 0) + 1
                self.rule_failures[rule_hit] = c
                if c >= n:
                    fire = {"case": "rule", "rule": rule_hit, "count": c}
        if ok:
            self.state_failures[state_key] = 0
        else:
            c = self.state_failures.get(state_key, 0) + 1
            self.state_failures[state_key] = c
            if c > n and fire is None:
                fire = {"case": "state", "state": state_key, "count": c}
        if fire is not None and not self.fired:
            self.fired = True
            self.trigger = fire
        return self.fired

    def observe_transition(self, model, s_prev, action, s_next, terminal: bool, state_key: Hashable) -> bool:
        """Query ``model`` for ``(s_prev, action)`` and compare with the outcome.

        Comparison is on the feature vector and the terminal flag.
        """
        x = model.vector(s_prev)
        rule = model.lookup(x, action)
        actual = (model.vector(s_next), bool(terminal))
        predicted = None
        if rule is not None:
            effects = list(rule.effect_counts) if rule.effect_counts else [rule.effect]
            # a stochastic family predicts correctly if any of its effects matches
            outcomes = [(e.apply(x), e.terminal) for e in effects]
            predicted = actual if actual in outcomes else outcomes[0]
        return self.observe(None if rule is None else rule.id, predicted, actual, state_key)

    def reset(self) -> None:
        self.rule_failures.clear()
        self.state_failures.clear()
        self.fired = False
        self.trigger = None
