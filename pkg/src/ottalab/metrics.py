"""Adaptation metrics over per-episode run logs.

Every smoothed quantity uses one convention: a 10-episode moving average.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import UsageError

WINDOW = 10
FAILED_TO_ADAPT = math.inf


@dataclass(frozen=True)
class EpisodeRecord:
    seed: int
    episode: int
    phase: str  # "pre" or "post"
    ret: float
    env_steps_cum: int
    policy_updates_cum: int
    detector_fired: bool = False

    def to_json(self) -> dict:
        d = asdict(self)
        d["return"] = d.pop("ret")
        return d

    @classmethod
    def from_json(cls, d: dict) -> "EpisodeRecord":
        return cls(int(d["seed"]), int(d["episode"]), str(d["phase"]), float(d["return"]),
                   int(d["env_steps_cum"]), int(d["policy_updates_cum"]), bool(d.get("detector_fired", False)))


class RunCurve:
    """Ordered episode records of one run, split at the injection episode."""

    def __init__(self, records: Sequence[EpisodeRecord], injection_episode: Optional[int] = None):
        records = list(records)
        for a, b in zip(records, records[1:]):
            if b.episode <= a.episode:
                raise UsageError("episodes must be strictly increasing")
            if b.env_steps_cum < a.env_steps_cum:
                raise UsageError("env steps must be nondecreasing")
        if injection_episode is None:
            post = [r.episode for r in records if r.phase == "post"]
            injection_episode = post[0] if post else (records[-1].episode + 1 if records else 1)
        self.records = records
        self.injection_episode = injection_episode
        self.pre = [r for r in records if r.episode < injection_episode]
        self.post = [r for r in records if r.episode >= injection_episode]

    @classmethod
    def from_returns(cls, pre: Sequence[float], post: Sequence[float], steps: Sequence[int] | int = 100,
                     updates: Sequence[int] | int = 0, seed: int = 0) -> "RunCurve":
        """Build a curve from per-episode returns, episode lengths and update counts."""
        rets = list(pre) + list(post)
        n = len(rets)
        lens = [steps] * n if np.ndim(steps) == 0 else list(steps)
        ups = [updates] * n if np.ndim(updates) == 0 else list(updates)
        recs, s, u = [], 0, 0
        for i, r in enumerate(rets):
            s += lens[i]
            u += ups[i]
            recs.append(EpisodeRecord(seed, i + 1, "pre" if i < len(pre) else "post", float(r), s, u))
        return cls(recs, len(pre) + 1)

    def returns(self, phase: str) -> np.ndarray:
        return np.array([r.ret for r in (self.pre if phase == "pre" else self.post)], dtype=float)

    def _base(self, attr: str) -> int:
        return getattr(self.pre[-1], attr) if self.pre else 0

    def _require(self, pre: bool = False) -> None:
        if not self.post:
            raise UsageError("curve has no post-novelty episodes")
        if pre and not self.pre:
            raise UsageError("curve has no pre-novelty episodes")


def moving_average(x: Sequence[float], window: int = WINDOW) -> np.ndarray:
    """Trailing mean; the first ``window - 1`` entries average what is available."""
    x = np.asarray(x, dtype=float)
    c = np.concatenate([[0.0], np.cumsum(x)])
    i = np.arange(1, len(x) + 1)
    lo = np.maximum(0, i - window)
    return (c[i] - c[lo]) / (i - lo)


def resilience(curve: RunCurve, k: int = WINDOW) -> float:
    """Best smoothed pre-novelty return minus the mean of the first ``k`` post-novelty returns."""
    curve._require(pre=True)
    pre_best = float(moving_average(curve.returns("pre")).max())
    return pre_best - float(curve.returns("post")[:k].mean())


def asymptotic_adaptive_performance(curve: RunCurve, window: int = WINDOW) -> float:
    curve._require()
    return float(curve.returns("post")[-window:].mean())


def _threshold_index(curve: RunCurve, threshold: float, window: int) -> Optional[int]:
    post = curve.returns("post")
    asym = asymptotic_adaptive_performance(curve, window)
    if asym <= 0 or len(post) < window:
        return None
    means = moving_average(post, window)[window - 1:]  # means[i] covers post episodes i .. i+window-1
    hit = np.flatnonzero(means >= threshold * asym - 1e-12)
    return int(hit[0]) if len(hit) else None


def _before(curve: RunCurve, i: int, attr: str) -> int:
    """Counter value when post-novelty episode ``i`` starts, relative to injection."""
    start = getattr(curve.post[i - 1], attr) if i > 0 else curve._base(attr)
    return start - curve._base(attr)


def adaptive_efficiency(curve: RunCurve, threshold: float = 0.95, window: int = WINDOW) -> float:
    """Real env steps from injection to the start of the first full window averaging at least
    ``threshold`` times the asymptote; ``FAILED_TO_ADAPT`` if there is none."""
    curve._require()
    i = _threshold_index(curve, threshold, window)
    return FAILED_TO_ADAPT if i is None else _before(curve, i, "env_steps_cum")


def update_efficiency(curve: RunCurve, threshold: float = 0.95, window: int = WINDOW) -> float:
    """Policy updates from injection to the adaptive-efficiency point."""
    curve._require()
    i = _threshold_index(curve, threshold, window)
    return FAILED_TO_ADAPT if i is None else _before(curve, i, "policy_updates_cum")


def one_shot_adaptive_performance(curve: RunCurve) -> float:
    curve._require()
    return float(curve.post[0].ret)


def tr_auc(source_returns: Sequence[float], target_returns: Sequence[float]) -> float:
    """Half the best source return plus half the mean target return."""
    s = np.asarray(source_returns, dtype=float)
    t = np.asarray(target_returns, dtype=float)
    if s.size == 0 or t.size == 0:
        raise UsageError("tr_auc needs non-empty source and target returns")
    return 0.5 * (float(s.max()) + float(t.mean()))


def curve_tr_auc(curve: RunCurve, eval_every: int = 1) -> float:
    """Transfer AUC of one run, sampling the target phase every ``eval_every`` episodes
    up to the adaptive-efficiency point (all of it if the run failed to adapt)."""
    curve._require(pre=True)
    post = curve.returns("post")
    i = _threshold_index(curve, 0.95, WINDOW)
    end = len(post) if i is None else i + WINDOW
    return tr_auc(curve.returns("pre"), post[:end:eval_every])


def all_metrics(curve: RunCurve, k: int = WINDOW, threshold: float = 0.95) -> dict:
    return {
        "resilience": resilience(curve, k),
        "asymptotic_adaptive_performance": asymptotic_adaptive_performance(curve),
        "adaptive_efficiency": adaptive_efficiency(curve, threshold),
        "update_efficiency": update_efficiency(curve, threshold),
        "one_shot_adaptive_performance": one_shot_adaptive_performance(curve),
        "tr_auc": curve_tr_auc(curve),
    }


def bootstrap_ci(values: Sequence[float], n_boot: int = 2000, level: float = 0.95, seed: int = 0) -> dict:
    """Mean and percentile bootstrap interval over seeds; non-finite values are reported, not resampled."""
    v = np.asarray(values, dtype=float)
    finite = v[np.isfinite(v)]
    out = {"n": int(v.size), "n_failed": int(v.size - finite.size)}
    if finite.size == 0:
        return {**out, "mean": None, "lo": None, "hi": None}
    rng = np.random.default_rng(seed)
    means = rng.choice(finite, size=(n_boot, finite.size), replace=True).mean(axis=1)
    a = (1.0 - level) / 2.0
    return {**out, "mean": float(finite.mean()),
            "lo": float(np.quantile(means, a)), "hi": float(np.quantile(means, 1.0 - a))}
