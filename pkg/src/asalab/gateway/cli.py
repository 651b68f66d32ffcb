"""Command-line entry points: simulate, collect, train, eval, info-gain,
convert, validate.  Config comes from one JSON file (--config or the
ASA_CONFIG environment variable)."""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from ..config import load_config
from ..dataspace import read_episode, validate_episode_file, write_episode
from ..errors import LabError
from ..evalmetrics import aggregate, evaluate_trial, write_reports
from ..policy.model import CognitiveFlowPolicy, LearnedPolicyDriver
from ..policy.scripted import ScriptedChunkPolicy
from ..runtime.executor import run_episode
from ..world.beliefs import expected_info_gain, scenario_observation_model
from ..world.scenarios import SCENARIO_KINDS, make_scenario


def _add_config(p):
    p.add_argument("--config", default=None, help="path to a JSON config file")


def _driver_for(policy_arg: str, kind: str, cfg):
    if policy_arg == "scripted":
        return ScriptedChunkPolicy(kind, cfg)
    policy = CognitiveFlowPolicy.load(policy_arg)
    return LearnedPolicyDriver(policy, cfg)


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    scenario = make_scenario(args.scenario, args.seed)
    driver = _driver_for(args.policy, args.scenario, cfg)
    record = run_episode(driver, scenario, cfg, noise_seed=args.noise_seed,
                         policy_seed=args.policy_seed,
                         max_sim_time_s=args.max_time)
    trial = evaluate_trial(record.result, args.scenario)
    if args.out:
        write_episode(record.episode, args.out, result=record.result)
        print(f"episode written to {args.out}")
    print(json.dumps({
        "task": args.scenario, "seed": args.seed,
        "success": trial.success, "search_time_s": round(trial.search_time_s, 2),
        "sim_time_s": round(record.result["sim_time"], 2),
        "planning_calls": record.result["planning_calls"],
        "markers": record.result["markers"],
    }, indent=2))
    return 0


def cmd_collect(args) -> int:
    import uvicorn

    from .server import create_app

    cfg = load_config(args.config)
    app = create_app(cfg, out_dir=args.out_dir, static_dir=args.static_dir)
    uvicorn.run(app, host=args.host, port=args.port or cfg.gateway.port,
                log_level="info")
    return 0


def cmd_train(args) -> int:
    from ..config import stage_defaults
    from ..policy.features import InstructionVocab
    from ..policy.network import ModelDims
    from ..policy.training import build_training_data, train_stage

    cfg = load_config(args.config)
    episodes = []
    for name in sorted(os.listdir(args.data)):
        if name.endswith(".jsonl"):
            ep, _ = read_episode(os.path.join(args.data, name))
            episodes.append(ep)
    if not episodes:
        print(f"no .jsonl episodes under {args.data}", file=sys.stderr)
        return 2
    if args.checkpoint:
        policy = CognitiveFlowPolicy.load(args.checkpoint)
    else:
        vocab = InstructionVocab()
        dims = ModelDims(n_hist=cfg.policy.n_hist, d_ctx=cfg.policy.d_ctx,
                         hidden=cfg.policy.hidden, d_embed=cfg.policy.d_embed,
                         chunk=cfg.policy.chunk_size, vocab=len(vocab))
        policy = CognitiveFlowPolicy(dims=dims, vocab=vocab, seed=args.seed)
    stage_cfg = stage_defaults(args.stage)
    if args.lr is not None:
        stage_cfg.lr = args.lr
    if args.epochs is not None:
        stage_cfg.epochs = args.epochs
    stage_cfg.seed = args.seed
    data = build_training_data(episodes, policy.dims, policy.vocab)
    policy.fit(data, stage_cfg, log_path=args.log)
    policy.save(args.out)
    print(f"stage {args.stage} done on {data.n_episodes} episodes "
          f"({len(data)} windows); checkpoint at {args.out}")
    return 0


def cmd_eval(args) -> int:
    cfg = load_config(args.config)
    trials = []
    for seed in range(args.seed_base, args.seed_base + args.trials):
        scenario = make_scenario(args.task, seed)
        driver = _driver_for(args.policy, args.task, cfg)
        record = run_episode(driver, scenario, cfg, noise_seed=seed,
                             policy_seed=seed, max_sim_time_s=args.max_time)
        trials.append(evaluate_trial(record.result, args.task))
    metrics = aggregate(trials)
    rows = [(args.task, metrics)]
    table = write_reports(rows,
                          csv_path=f"{args.report}.csv" if args.report else None,
                          json_path=f"{args.report}.json" if args.report else None)
    print(json.dumps(table, indent=2))
    return 0


def cmd_info_gain(args) -> int:
    cfg = load_config(args.config)  # noqa: F841  (kept for parity/env override)
    scenario = make_scenario(args.scenario, args.seed)
    prior, actions, model = scenario_observation_model(scenario)
    print(f"scenario={args.scenario} seed={args.seed} "
          f"hypotheses={list(prior.hypotheses)} prior=uniform")
    print(f"{'action':<28}{'EIG (bits)':>12}")
    for action in actions:
        label = action.name
        if action.entity:
            label += f"({action.entity})"
        elif action.name in ("pan", "rotate_base", "advance"):
            label += f"({action.value:+.2f})"
        print(f"{label:<28}{expected_info_gain(prior, action, model):>12.6f}")
    return 0


def cmd_convert(args) -> int:
    episode, result = read_episode(args.input)
    if args.to_csv:
        with open(args.output, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["frame", "t", "subtask", "cognition"]
                            + [f"a{i}" for i in range(29)])
            for s in episode.samples:
                writer.writerow([s.frame, s.timestamp, s.subtask_id, s.cognition]
                                + [repr(v) for v in s.action_vector()])
        print(f"wrote {len(episode.samples)} action rows to {args.output}")
    else:
        write_episode(episode, args.output, result=result)
        print(f"canonicalized episode written to {args.output}")
    return 0


def cmd_validate(args) -> int:
    status = 0
    for path in args.files:
        try:
            info = validate_episode_file(path)
            print(f"{path}: ok {json.dumps(info)}")
        except LabError as exc:
            print(f"{path}: INVALID - {exc}", file=sys.stderr)
            status = 1
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="asa", description="active-perception lab command line")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a policy on a scenario")
    p.add_argument("--scenario", required=True, choices=SCENARIO_KINDS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--policy", default="scripted",
                   help="'scripted' or a checkpoint path")
    p.add_argument("--out", default=None, help="episode output file")
    p.add_argument("--max-time", type=float, default=None)
    p.add_argument("--noise-seed", type=int, default=0)
    p.add_argument("--policy-seed", type=int, default=0)
    _add_config(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("collect", help="serve the teleoperation gateway")
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--scenario", default=None, choices=SCENARIO_KINDS,
                   help="informational default shown to clients")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default="episodes")
    p.add_argument("--static-dir", default=None,
                   help="serve a built browser client from this directory")
    _add_config(p)
    p.set_defaults(func=cmd_collect)

    p = sub.add_parser("train", help="run one training stage on episode files")
    p.add_argument("--stage", type=int, required=True, choices=(1, 2, 3))
    p.add_argument("--data", required=True, help="directory of .jsonl episodes")
    p.add_argument("--checkpoint", default=None, help="warm-start checkpoint")
    p.add_argument("--out", required=True, help="output checkpoint path")
    p.add_argument("--log", default=None, help="training-curve CSV path")
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    _add_config(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a policy over seeds")
    p.add_argument("--policy", required=True)
    p.add_argument("--task", required=True, choices=SCENARIO_KINDS)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--seed-base", type=int, default=10_000)
    p.add_argument("--max-time", type=float, default=None)
    p.add_argument("--report", default=None, help="report path prefix")
    _add_config(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("info-gain", help="per-action expected information gain")
    p.add_argument("--scenario", required=True, choices=SCENARIO_KINDS)
    p.add_argument("--seed", type=int, default=0)
    _add_config(p)
    p.set_defaults(func=cmd_info_gain)

    p = sub.add_parser("convert", help="rewrite or export an episode file")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--to-csv", action="store_true",
                   help="export the 29-D action rows as CSV")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("validate", help="schema-validate episode files")
    p.add_argument("files", nargs="+")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
