"""Command-line front door.

Subcommands: gen-pool, split, oracle, train, eval, nash, prompt-eval,
k-report, serve, replay. Every subcommand reads layered configuration
(file < environment < flags) and ends with a machine-readable result footer
(one JSON line prefixed by RESULT).
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys
from pathlib import Path

from . import config as cfgmod


def _footer(payload: dict) -> None:
    print("RESULT " + json.dumps(payload, sort_keys=True))


def _fail(message: str, code: int = 1) -> int:
    print("RESULT " + json.dumps({"ok": False, "error": message}), file=sys.stderr)
    return code


def cmd_gen_pool(args, cfg) -> int:
    from .taskgen.params import GenParams
    from .taskgen.pool import presample_pool, save_pool
    params = GenParams.from_dict(cfgmod.get(cfg, "gen.params", {})) \
        if cfgmod.get(cfg, "gen.params") else GenParams()
    pool = presample_pool(args.seed, args.worlds, args.games, params,
                          require_solvable=not args.no_solvable_check)
    save_pool(pool, args.out)
    _footer({"ok": True, "out": str(args.out), "worlds": pool.n_worlds,
             "games": pool.n_games})
    return 0


def cmd_split(args, cfg) -> int:
    from .taskgen.pool import load_pool, save_pool, split_holdout
    pool = load_pool(args.pool)
    n_test = int(round(pool.n_games * args.test_frac)) if args.test_frac \
        else args.test_games
    train, test = split_holdout(pool, n_test)
    train_path = Path(args.pool).with_suffix(".train.xlm")
    test_path = Path(args.pool).with_suffix(".test.xlm")
    save_pool(train, train_path)
    save_pool(test, test_path)
    _footer({"ok": True, "train": str(train_path), "test": str(test_path),
             "n_train": train.n_games, "n_test": test.n_games})
    return 0


def _resolve_task(args):
    from .taskgen.pool import load_pool
    from .taskgen import probes
    if args.pool:
        pool = load_pool(args.pool)
        w, g = (int(x) for x in args.task_id.split(":"))
        return pool.task(w, g)
    named = dict(probes.build_probe_set() + probes.build_two_player_probes())
    if args.task_id in named:
        return named[args.task_id]
    raise SystemExit(_fail(f"unknown task {args.task_id}"))


def cmd_oracle(args, cfg) -> int:
    from .taskgen.oracle import oracle_solve
    task = _resolve_task(args)
    report = oracle_solve(task)
    _footer({"ok": True, "task": task.id_str, "verdict": report.verdict,
             "optimal_reward": report.optimal_reward,
             "firing_sequence": list(report.firing_sequence),
             "dead_ends": sorted(report.dead_ends),
             "trial_length": task.trial_length})
    return 0


def cmd_train(args, cfg) -> int:
    import torch
    from .learner.config import TrainConfig
    from .learner.train import run_training
    from .nn import AgentNetwork, NetConfig
    from .taskgen import probes

    torch.set_num_threads(int(cfgmod.get(cfg, "train.threads", 2)))
    tasks = probes.adaptation_minipool() if args.tasks == "minipool" \
        else probes.curriculum_pool()[0]
    net_cfg = NetConfig.from_dict(cfgmod.get(cfg, "net")) \
        if cfgmod.get(cfg, "net") else NetConfig()
    torch.manual_seed(args.seed)
    net = AgentNetwork(net_cfg)
    if args.teacher:
        teacher, _ = AgentNetwork.load_checkpoint(args.teacher)
    else:
        teacher = None
    train_cfg = TrainConfig(
        total_frames=args.frames, seed=args.seed,
        **cfgmod.get(cfg, "train.overrides", {}),
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    result = run_training(net, tasks, train_cfg, curriculum=args.curriculum,
                          teacher=teacher,
                          metrics_path=str(out_dir / "metrics.jsonl"))
    ckpt = out_dir / "agent.ckpt"
    net.save_checkpoint(ckpt, extra={"frames": train_cfg.total_frames})
    _footer({"ok": True, "checkpoint": str(ckpt),
             "updates": len(result.metrics),
             "metrics": str(out_dir / "metrics.jsonl")})
    return 0


def cmd_eval(args, cfg) -> int:
    from .evalh.harness import compute_normalizers, evaluate_policy
    from .evalh.scores import percentile_curves
    from .nn import AgentNetwork
    from .taskgen import probes

    net, _ = AgentNetwork.load_checkpoint(args.checkpoint)
    tasks = dict(probes.build_probe_set())
    chosen = list(tasks.values())
    normalizers, excluded = compute_normalizers(chosen, mode="oracle")
    table = evaluate_policy(net, chosen, ks=args.ks, repetitions=args.reps,
                            seed=args.seed)
    table.normalizers = normalizers
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    table.append_to(out)
    table.export_csv(out.with_suffix(".csv"))
    curves, gaps = percentile_curves(table, args.ks, (20, 50))
    _footer({"ok": True, "records": len(table.records),
             "excluded_tasks": excluded, "curves": curves,
             "gaps": gaps.missing, "scores": str(out)})
    return 0


def cmd_nash(args, cfg) -> int:
    import numpy as np
    from .evalh.nash import MetaGame, nash_adaptation_metric
    payload = json.loads(Path(args.payoffs).read_text())
    meta = MetaGame(agents=payload["agents"], ks=payload["ks"],
                    payoffs=np.array(payload["payoffs"]))
    metric = nash_adaptation_metric(meta)
    ranking = sorted(metric, key=metric.get, reverse=True)
    _footer({"ok": True, "metric": metric, "ranking": ranking})
    return 0


def cmd_prompt_eval(args, cfg) -> int:
    from .evalh.harness import prompt_eval
    from .nn import AgentNetwork
    from .policies import OraclePolicy
    from .taskgen import probes
    net, _ = AgentNetwork.load_checkpoint(args.checkpoint)
    results = {}
    for name, task in probes.build_probe_set():
        results[name] = prompt_eval(net, OraclePolicy(), task, args.k,
                                    repetitions=args.reps, seed=args.seed)
    _footer({"ok": True, "k": args.k, "results": results})
    return 0


def cmd_k_report(args, cfg) -> int:
    from .evalh.harness import compute_normalizers, k_conditioning_report
    from .nn import AgentNetwork
    from .taskgen import probes
    net, _ = AgentNetwork.load_checkpoint(args.checkpoint)
    tasks = [t for _, t in probes.build_probe_set()]
    normalizers, _ = compute_normalizers(tasks, mode="oracle")
    report = k_conditioning_report(net, tasks, normalizers,
                                   ks=tuple(args.ks), repetitions=args.reps,
                                   seed=args.seed)
    _footer({"ok": True, **report})
    return 0


def cmd_serve(args, cfg) -> int:
    from .serve.server import PlayServer
    from .taskgen import probes
    from .taskgen.pool import load_pool

    if args.pool:
        pool = load_pool(args.pool)
        tasks = [pool.task(w, g) for w, g in pool.iter_task_ids()]
    else:
        tasks = [t for _, t in probes.build_probe_set()]
        tasks += [t for _, t in probes.build_two_player_probes()]
    server = PlayServer(tasks, args.store, host=args.host, port=args.port)
    print(f"serving {len(tasks)} tasks on ws://{args.host}:{args.port}")
    try:
        asyncio.run(server.serve_forever())
    except KeyboardInterrupt:
        pass
    _footer({"ok": True})
    return 0


def cmd_replay(args, cfg) -> int:
    from .serve.session import replay_session
    from .taskgen import probes
    payload = json.loads(Path(args.session).read_text())
    named = dict(probes.build_probe_set() + probes.build_two_player_probes())
    task = None
    for t in named.values():
        if t.id_str == payload["task_id"]:
            task = t
            break
    if task is None:
        return _fail(f"task {payload['task_id']} not found in the probe set")
    totals = replay_session(task, payload)
    match = totals == payload["trial_rewards"]
    _footer({"ok": True, "replayed": totals,
             "recorded": payload["trial_rewards"], "bit_exact": match})
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="xlm", description=__doc__)
    p.add_argument("--config", default=None, help="JSON config file")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-pool", help="pre-sample a task pool")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--worlds", type=int, default=256)
    g.add_argument("--games", type=int, default=2048)
    g.add_argument("--out", required=True)
    g.add_argument("--no-solvable-check", action="store_true")
    g.set_defaults(fn=cmd_gen_pool)

    s = sub.add_parser("split", help="train/test holdout split")
    s.add_argument("--pool", required=True)
    s.add_argument("--test-frac", type=float, default=None)
    s.add_argument("--test-games", type=int, default=200)
    s.set_defaults(fn=cmd_split)

    o = sub.add_parser("oracle", help="solvability report for one task")
    o.add_argument("--task-id", required=True,
                   help="probe name, or W:G with --pool")
    o.add_argument("--pool", default=None)
    o.set_defaults(fn=cmd_oracle)

    t = sub.add_parser("train", help="train an agent")
    t.add_argument("--curriculum", choices=("uniform", "noop", "plr"),
                   default="uniform")
    t.add_argument("--tasks", choices=("minipool", "ladder"), default="minipool")
    t.add_argument("--frames", type=int, default=200_000)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--teacher", default=None, help="teacher checkpoint")
    t.add_argument("--out", default="runs/latest")
    t.set_defaults(fn=cmd_train)

    e = sub.add_parser("eval", help="score an agent on the probe suite")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--ks", type=int, nargs="+", default=[1, 2, 3, 5, 8, 13])
    e.add_argument("--reps", type=int, default=50)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", default="runs/scores.jsonl")
    e.set_defaults(fn=cmd_eval)

    n = sub.add_parser("nash", help="adaptation metric from a payoff matrix")
    n.add_argument("--payoffs", required=True,
                   help="JSON {agents, ks, payoffs}")
    n.set_defaults(fn=cmd_nash)

    pe = sub.add_parser("prompt-eval", help="teacher-prompted evaluation")
    pe.add_argument("--checkpoint", required=True)
    pe.add_argument("--k", type=int, default=2)
    pe.add_argument("--reps", type=int, default=16)
    pe.add_argument("--seed", type=int, default=0)
    pe.set_defaults(fn=cmd_prompt_eval)

    kr = sub.add_parser("k-report", help="k-conditioning comparison")
    kr.add_argument("--checkpoint", required=True)
    kr.add_argument("--ks", type=int, nargs=2, default=[1, 8])
    kr.add_argument("--reps", type=int, default=16)
    kr.add_argument("--seed", type=int, default=0)
    kr.set_defaults(fn=cmd_k_report)

    sv = sub.add_parser("serve", help="human-play session server")
    sv.add_argument("--pool", default=None)
    sv.add_argument("--host", default="127.0.0.1")
    sv.add_argument("--port", type=int, default=8765)
    sv.add_argument("--store", default="sessions")
    sv.set_defaults(fn=cmd_serve)

    r = sub.add_parser("replay", help="replay a recorded session")
    r.add_argument("--session", required=True)
    r.set_defaults(fn=cmd_replay)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code not in (0, None) else 0
    cfg = cfgmod.load_layered(args.config)
    try:
        return args.fn(args, cfg)
    except Exception as e:  # structured failure, nonzero exit
        return _fail(f"{type(e).__name__}: {e}")


if __name__ == "__main__":
    sys.exit(main())
