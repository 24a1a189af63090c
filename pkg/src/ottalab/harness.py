"""Experiment runner: seeded multi-arm runs, JSONL logs, metrics, and the rule-learning assay.

A run for one seed has two stages:

1. Pre-training. The agent and the rule model learn on the pre-novelty
   environment until the agent's recent returns average at least
   ``convergence_threshold`` (or the step budget runs out, in which case the
   run is marked unconverged and left out of the metrics). Novelty is injected
   at the next episode.
2. Adaptation, once per arm, starting from copies of the same pre-trained
   agent, model and random stream. The first ``resilience_window`` post-novelty
   episodes replay the frozen policy; then the arm's controller takes over.
"""

from __future__ import annotations

import copy
import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Optional

import numpy as np
import yaml

from . import gridworld as gw
from . import metrics as mt
from .agents import Transition, make_agent
from .detection import DetectorParams, NoveltyDetector
from .errors import ConfigurationError, LogParseError, UsageError
from .imagination import AdaptationController, MixParams
from .novelty import NoveltyEnv, exemplar
from .rulemodel import RuleModel, prediction_accuracy

OUTPUT_ENV_VAR = "OTTALAB_OUTPUT_DIR"
ARMS = ("baseline", "worldcloner")


@dataclass
class ExperimentConfig:
    novelty: str = "DoorKeyChange"
    variant: Optional[str] = None
    agent: str = "q"
    agent_params: dict = field(default_factory=dict)
    arms: list = field(default_factory=lambda: list(ARMS))
    mix: dict = field(default_factory=dict)
    detector_n: int = 2
    seeds: list = field(default_factory=lambda: [0])
    pre_budget: int = 500_000
    post_budget: int = 100_000
    convergence_threshold: float = 0.9
    convergence_window: int = 20
    resilience_window: int = 10
    stochastic_model: bool = False
    output_dir: str = "runs"
    assay: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.seeds:
            raise ConfigurationError("at least one seed is required")
        if self.pre_budget <= 0 or self.post_budget <= 0:
            raise ConfigurationError("step budgets must be > 0")
        if self.agent not in ("q", "ac"):
            raise ConfigurationError(f"agent must be 'q' or 'ac', got {self.agent!r}")
        for arm in self.arms:
            if arm not in ARMS:
                raise ConfigurationError(f"unknown arm {arm!r}; expected one of {ARMS}")
        try:
            exemplar(self.novelty, variant=self.variant)
        except KeyError as e:
            raise ConfigurationError(str(e)) from None
        self.mix_params("worldcloner")
        DetectorParams(self.detector_n)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def mix_params(self, arm: str) -> MixParams:
        try:
            params = MixParams(**self.mix)
        except TypeError as e:
            raise ConfigurationError(f"bad mix parameters: {e}") from None
        if arm == "baseline":
            params = dataclasses.replace(params, imagined_fraction=0.0)
        return params

    def out_dir(self) -> Path:
        return Path(os.environ.get(OUTPUT_ENV_VAR) or self.output_dir)


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: expected a mapping at top level")
    return ExperimentConfig.from_dict(data)


def log_name(novelty: str, arm: str, seed: int) -> str:
    return f"{novelty}__{arm}__seed{seed}.jsonl"


@dataclass
class PretrainResult:
    agent: Any
    model: RuleModel
    env: NoveltyEnv
    rng: np.random.Generator
    records: list
    converged: bool
    steps: int


def pretrain(config: ExperimentConfig, seed: int) -> PretrainResult:
    """Train agent and rule model on the pre-novelty environment until convergence."""
    spec = exemplar(config.novelty, variant=config.variant)
    rng = np.random.default_rng(seed)
    env = NoveltyEnv(spec.with_injection(2**62), rng=rng)
    agent = make_agent(config.agent, rng=rng, **config.agent_params)
    model = RuleModel.for_codec(gw.StateCodec(spec.pre_config), stochastic=config.stochastic_model)
    returns, records = [], []
    steps, converged = 0, False
    w = config.convergence_window
    while steps < config.pre_budget:
        s = env.reset()
        k = gw.state_key(s)
        ret = 0.0
        episode = []
        while True:
            a = agent.act(s)
            s2, r, d = env.step(a)
            steps += 1
            done = d and not env.timed_out
            k2 = gw.state_key(s2)
            episode.append(Transition(k, a, r, k2, done))
            model.update(s, a, s2, r, done)
            ret += r
            s, k = s2, k2
            if d:
                break
        # one backward sweep per episode carries the sparse reward all the way back
        agent.update(episode)
        agent.end_episode(success=ret > 0)
        returns.append(ret)
        records.append(mt.EpisodeRecord(seed, env.episode, "pre", ret, steps, agent.updates))
        if len(returns) >= w and np.mean(returns[-w:]) >= config.convergence_threshold:
            converged = True
            break
    agent.end_decay()
    env.spec = spec.with_injection(env.episode + 1)
    return PretrainResult(agent, model, env, rng, records, converged, steps)


def run_arm(config: ExperimentConfig, pre: PretrainResult, arm: str, seed: int):
    """Adaptation stage for one arm on copies of the pre-trained state.

    Returns ``(episode records, events, final rule model)``.
    """
    agent, model, env, rng = copy.deepcopy((pre.agent, pre.model, pre.env, pre.rng))
    env.rng = rng
    agent.rng = rng
    ctrl = AdaptationController(agent, model, NoveltyDetector(DetectorParams(config.detector_n)),
                                config.mix_params(arm), rng)
    ctrl.paused = config.resilience_window > 0
    steps = pre.steps
    records, events = [], []
    post_steps, n_post = 0, 0
    while post_steps < config.post_budget:
        s = env.reset()
        ret = 0.0
        while True:
            a = ctrl.act(s)
            s2, r, d = env.step(a)
            steps += 1
            post_steps += 1
            if ctrl.observe(s, a, s2, r, d, env.timed_out):
                trig = dict(ctrl.detector.trigger)
                if "state" in trig:
                    trig["state"] = trig["state"].decode("ascii")
                events.append({"event": "detector_fired", "episode": env.episode, "env_steps_cum": steps,
                               "post_steps": post_steps, **trig})
            ret += r
            s = s2
            if d:
                break
        ctrl.end_episode()
        n_post += 1
        if n_post == config.resilience_window:
            ctrl.paused = False
            events.append({"event": "adaptation_enabled", "episode": env.episode, "env_steps_cum": steps})
        records.append(mt.EpisodeRecord(seed, env.episode, "post", ret, steps, agent.updates, ctrl.detector.fired))
    events.append({"event": "run_end", "env_steps_cum": steps, "policy_updates_cum": agent.updates,
                   "imagined_steps": ctrl.imagined_steps, "rules": len(model),
                   "imagined_share": ctrl.buffer.n_imagined / max(1, ctrl.buffer.n_imagined + ctrl.buffer.n_real)})
    return records, events, model


def config_digest(config: ExperimentConfig) -> str:
    blob = json.dumps(config.to_dict(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True)


def run(config: ExperimentConfig, out_dir=None) -> list[Path]:
    """Run every (seed, arm) pair and write one JSONL log per pair plus a manifest."""
    out = Path(out_dir) if out_dir is not None else config.out_dir()
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for seed in config.seeds:
        pre = pretrain(config, seed)
        for arm in config.arms:
            path = out / log_name(config.novelty, arm, seed)
            lines = [_dumps({"event": "run_start", "novelty": config.novelty, "arm": arm, "seed": seed,
                             "agent": config.agent, "converged": pre.converged,
                             "injection_episode": pre.env.spec.injection_episode,
                             "resilience_window": config.resilience_window,
                             "config_digest": config_digest(config)})]
            lines += [_dumps(r.to_json()) for r in pre.records]
            if pre.converged:
                records, events, model = run_arm(config, pre, arm, seed)
                lines += [_dumps(r.to_json()) for r in records]
                lines += [_dumps(e) for e in events]
                model.save(out / f"{config.novelty}__{arm}__seed{seed}.rules.jsonl")
            else:
                lines.append(_dumps({"event": "run_end", "converged": False, "env_steps_cum": pre.steps}))
            path.write_text("\n".join(lines) + "\n")
            paths.append(path)
    manifest = {
        "config": config.to_dict(),
        "config_digest": config_digest(config),
        "arms": {arm: dataclasses.asdict(config.mix_params(arm)) for arm in config.arms},
        "arm_diff": _arm_diff(config),
        "logs": [p.name for p in paths],
    }
    (out / f"{config.novelty}__manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return paths


def _arm_diff(config: ExperimentConfig) -> dict:
    """Parameters that differ between arms; everything else is shared."""
    params = {arm: dataclasses.asdict(config.mix_params(arm)) for arm in config.arms}
    keys = sorted({k for p in params.values() for k in p})
    return {k: {arm: params[arm][k] for arm in config.arms}
            for k in keys if len({params[arm][k] for arm in config.arms}) > 1}


# -- logs and metrics ---------------------------------------------------------

@dataclass
class RunLog:
    path: Path
    header: dict
    records: list
    events: list

    @property
    def converged(self) -> bool:
        return bool(self.header.get("converged", False))

    def curve(self) -> mt.RunCurve:
        return mt.RunCurve(self.records, self.header.get("injection_episode"))


def read_log(path) -> RunLog:
    path = Path(path)
    header, records, events = {}, [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise LogParseError(path, lineno, f"invalid JSON ({e.msg})") from None
            if not isinstance(obj, dict):
                raise LogParseError(path, lineno, "expected a JSON object")
            if "event" in obj:
                if obj["event"] == "run_start":
                    header = obj
                else:
                    events.append(obj)
                continue
            try:
                records.append(mt.EpisodeRecord.from_json(obj))
            except (KeyError, TypeError, ValueError) as e:
                raise LogParseError(path, lineno, f"bad episode record ({e})") from None
    return RunLog(path, header, records, events)


def _jsonable(v):
    if isinstance(v, float) and not np.isfinite(v):
        return "failed to adapt"
    return v


def compute_metrics(paths: Iterable, k: Optional[int] = None, n_boot: int = 2000) -> dict:
    """Per-novelty, per-arm metric tables with bootstrap intervals over seeds."""
    table: dict = {}
    excluded = []
    for p in sorted(Path(x) for x in paths):
        log = read_log(p)
        if not log.converged:
            excluded.append(p.name)
            continue
        novelty = log.header.get("novelty", "unknown")
        arm = log.header.get("arm", "unknown")
        window = k if k is not None else log.header.get("resilience_window", mt.WINDOW)
        vals = mt.all_metrics(log.curve(), k=window or mt.WINDOW)
        entry = table.setdefault(novelty, {}).setdefault(arm, {"seeds": {}})
        entry["seeds"][str(log.header.get("seed"))] = vals
    for novelty, arms in table.items():
        for arm, entry in arms.items():
            per_seed = entry["seeds"]
            names = next(iter(per_seed.values())).keys()
            entry["aggregate"] = {}
            for name in names:
                values = [s[name] for s in per_seed.values()]
                agg = mt.bootstrap_ci(values, n_boot=n_boot)
                agg["median"] = _jsonable(float(np.median(values)))
                entry["aggregate"][name] = agg
            entry["seeds"] = {seed: {n: _jsonable(v) for n, v in vals.items()} for seed, vals in per_seed.items()}
    return {"metrics": table, "excluded_unconverged": excluded}


# -- rule-learning assay ----------------------------------------------------------

def assay_rule_convergence(grid: gw.GridConfig, total_steps: int = 5000, eval_every: int = 100,
                           eval_len: int = 1000, seed: int = 0) -> list[tuple[int, float]]:
    """Train a rule model under a uniform random policy and validate it periodically.

    Every ``eval_every`` training steps (and at step 0) the model is scored by
    :func:`~ottalab.rulemodel.prediction_accuracy` on ``eval_len`` fresh random
    steps in a separate environment. Returns ``(step, accuracy)`` pairs.
    """
    if grid.stochastic_forward_p != 1.0:
        raise UsageError("the convergence assay needs a deterministic environment")
    rng = np.random.default_rng(seed)
    eval_rng = np.random.default_rng([seed, 1])
    env = gw.GridEnv(grid, rng=rng)
    eval_env = gw.GridEnv(grid, rng=eval_rng)
    model = RuleModel.for_codec(gw.StateCodec(grid))
    n_actions = gw.N_ACTIONS
    env.reset()
    curve = [(0, prediction_accuracy(model, eval_env, None, eval_len, eval_rng))]
    for t in range(1, total_steps + 1):
        s = env.state
        a = int(rng.integers(n_actions))
        s2, r, d = env.step(a)
        model.update(s, a, s2, r, d and not env.timed_out)
        if d:
            env.reset()
        if t % eval_every == 0:
            curve.append((t, prediction_accuracy(model, eval_env, None, eval_len, eval_rng)))
    return curve
