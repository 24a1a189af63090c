"""Command-line entry point: ``ottalab {run,assay,metrics,bench-replay}``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import harness as hs
from . import replay
from .errors import ConfigurationError, LogParseError, UsageError
from .novelty import empty_config, exemplar

ASSAY_DEFAULTS = {"grid": "empty", "phase": "pre", "total_steps": 5000, "eval_every": 100, "eval_len": 1000}


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def cmd_run(args) -> int:
    config = hs.load_config(args.config)
    out = Path(args.out) if args.out else config.out_dir()
    paths = hs.run(config, out)
    for p in paths:
        print(p)
    metrics = hs.compute_metrics(paths)
    _write_json(out / f"{config.novelty}__metrics.json", metrics)
    print(out / f"{config.novelty}__metrics.json")
    return 0


def _assay_grid(spec: dict):
    if spec["grid"] == "empty":
        return empty_config()
    nov = exemplar(spec["grid"])
    return nov.pre_config if spec["phase"] == "pre" else nov.post_config


def cmd_assay(args) -> int:
    config = hs.load_config(args.config)
    unknown = set(config.assay) - set(ASSAY_DEFAULTS)
    if unknown:
        raise ConfigurationError(f"unknown assay keys: {sorted(unknown)}")
    spec = {**ASSAY_DEFAULTS, **config.assay}
    grid = _assay_grid(spec)
    curves = {}
    for seed in config.seeds:
        curves[str(seed)] = hs.assay_rule_convergence(grid, spec["total_steps"], spec["eval_every"],
                                                      spec["eval_len"], seed)
    steps = [s for s, _ in next(iter(curves.values()))]
    mean = np.mean([[a for _, a in c] for c in curves.values()], axis=0)
    reached = next((s for s, a in zip(steps, mean) if a >= 0.99), None)
    result = {"assay": spec, "grid": grid.name, "seeds": curves,
              "mean": [[s, float(a)] for s, a in zip(steps, mean)], "first_step_at_0.99": reached}
    out = Path(args.out) if args.out else config.out_dir() / "assay.json"
    _write_json(out, result)
    print(f"{grid.name}: mean accuracy {mean[-1]:.4f} at step {steps[-1]}; >=0.99 first at {reached}")
    print(out)
    return 0


def cmd_metrics(args) -> int:
    d = Path(args.dir)
    paths = sorted(p for p in d.glob("*.jsonl") if not p.name.endswith(".rules.jsonl"))
    if not paths:
        raise UsageError(f"no run logs in {d}")
    metrics = hs.compute_metrics(paths, n_boot=args.n_boot)
    text = json.dumps(metrics, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def cmd_bench(args) -> int:
    out = replay.bench(args.items, args.ops, args.batch, args.seed)
    print(json.dumps({k: round(v, 1) if isinstance(v, float) else v for k, v in out.items()}, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ottalab", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a paired-arm adaptation experiment from a YAML config")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (overrides config and $%s)" % hs.OUTPUT_ENV_VAR)
    r.set_defaults(func=cmd_run)

    a = sub.add_parser("assay", help="rule-model convergence assay under a random policy")
    a.add_argument("config")
    a.add_argument("--out", help="path of the JSON result")
    a.set_defaults(func=cmd_assay)

    m = sub.add_parser("metrics", help="compute adaptation metrics for a directory of run logs")
    m.add_argument("dir")
    m.add_argument("--out", help="also write the metrics JSON here")
    m.add_argument("--n-boot", type=int, default=2000)
    m.set_defaults(func=cmd_metrics)

    b = sub.add_parser("bench-replay", help="replay buffer sample/update throughput")
    b.add_argument("--items", type=int, default=10_000)
    b.add_argument("--ops", type=int, default=50_000)
    b.add_argument("--batch", type=int, default=64)
    b.add_argument("--seed", type=int, default=0)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, UsageError, LogParseError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
