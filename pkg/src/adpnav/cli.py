"""Command-line entry point: ``adpnav <command> [options]``.

Commands: gen-worlds, train, eval, bench, score, render. Exit status is 0 on
success, 2 for usage errors and 1 for runtime failures.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from .bench import MethodSpec, barn_score, run_benchmark
from .config import env_config, load_config, train_config
from .env import run_episode
from .errors import AdpError
from .render import world_svg
from .training import train
from .world import CAParams, generate_worlds, load_world, load_worlds, save_world

log = logging.getLogger("adpnav")

EVAL_COLUMNS = ["world_seed", "success", "collided", "timeout", "traversal_time", "steps", "cumulative_reward"]


class UsageError(Exception):
    pass


def _worlds(args, cfg: dict):
    """Worlds from --worlds files/directories, else generated from --seed/--count or the config."""
    if args.worlds:
        paths: list[Path] = []
        for p in map(Path, args.worlds):
            paths.extend(sorted(p.glob("*.world")) if p.is_dir() else [p])
        if not paths:
            raise UsageError("no .world files found")
        return load_worlds(paths)
    wcfg = dict(cfg.get("worlds") or {})
    seed = args.seed if args.seed is not None else wcfg.pop("seed", 0)
    wcfg.pop("seed", None)
    count = getattr(args, "count", None) or wcfg.pop("count", 5)
    wcfg.pop("count", None)
    if "ca_params" in wcfg:
        wcfg["ca_params"] = CAParams(**wcfg["ca_params"])
    return generate_worlds(seed, count, **wcfg)


def _method(args) -> MethodSpec:
    return MethodSpec(args.method, args.planner, args.checkpoint)


def cmd_gen_worlds(args, cfg: dict) -> int:
    out = Path(args.out or "worlds")
    out.mkdir(parents=True, exist_ok=True)
    for i, w in enumerate(_worlds(args, cfg)):
        save_world(w, out / f"world_{i:03d}.world")
    return 0


def cmd_train(args, cfg: dict) -> int:
    worlds = _worlds(args, cfg)
    tcfg = train_config(cfg, seed=args.seed, cycles=args.cycles, actor_count=args.actors)
    result = train(tcfg, worlds, out_dir=args.out or "run")
    last = result.log_rows[-1] if result.log_rows else {}
    print(f"trained {tcfg.cycles} cycles; final eval success {last.get('eval_success_rate', float('nan')):.2f}")
    return 0


def cmd_eval(args, cfg: dict) -> int:
    worlds = _worlds(args, cfg)
    env = env_config(cfg)
    actions, policy = _method(args).build()
    seed = args.seed or 0
    rows = []
    for i, w in enumerate(worlds):
        rec, _ = run_episode(policy, w, env, actions, seed=seed + i)
        rows.append([w.seed, int(rec.success), int(rec.collided), int(rec.timeout),
                     repr(rec.traversal_time), rec.steps, repr(rec.cumulative_reward)])
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(EVAL_COLUMNS)
        writer.writerows(rows)
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def cmd_bench(args, cfg: dict) -> int:
    worlds = _worlds(args, cfg)
    b = cfg.get("bench") or {}
    runs = args.runs if args.runs is not None else b.get("runs", 20)
    trim = args.trim if args.trim is not None else b.get("trim", 5)
    v_max = args.v_max if args.v_max is not None else b.get("v_max")
    report = run_benchmark(_method(args), worlds, env_config(cfg), runs, trim, v_max, seed=args.seed or 0)
    text = report.to_csv()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_score(args, cfg: dict) -> int:
    """Read ``success,AT,OT`` rows from stdin and print one score per row."""
    for lineno, row in enumerate(csv.reader(sys.stdin), 1):
        if not row or not "".join(row).strip():
            continue
        if len(row) != 3:
            raise UsageError(f"line {lineno}: expected success,AT,OT")
        try:
            success = row[0].strip().lower() in ("1", "true", "yes")
            score = barn_score(success, float(row[1]), float(row[2]))
        except ValueError as exc:
            if lineno == 1 and row[0].strip().lower() == "success":
                continue  # header row
            raise UsageError(f"line {lineno}: {exc}") from exc
        print(score)
    return 0


def cmd_render(args, cfg: dict) -> int:
    world = load_world(args.world)
    trace = None
    if args.method:
        actions, policy = _method(args).build()
        rec, _ = run_episode(policy, world, env_config(cfg), actions, seed=args.seed or 0, keep_trace=True)
        trace = rec.trace
    svg = world_svg(world, trace)
    if args.out:
        Path(args.out).write_text(svg)
    else:
        sys.stdout.write(svg)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adpnav", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, worlds=True):
        p.add_argument("--config", help="YAML or JSON config file")
        p.add_argument("--seed", type=int)
        p.add_argument("--out")
        if worlds:
            p.add_argument("--worlds", nargs="+", help="world files or directories of *.world")
            p.add_argument("--count", type=int, help="number of generated worlds")

    def method(p, default=None):
        p.add_argument("--method", choices=["ddp", "uniform", "inc", "adp"], default=default)
        p.add_argument("--planner", choices=["dwa", "mppi", "logmppi"], default="dwa")
        p.add_argument("--checkpoint")

    p = sub.add_parser("gen-worlds", help="generate cave worlds")
    common(p)
    p.set_defaults(func=cmd_gen_worlds)

    p = sub.add_parser("train", help="train a schedule policy")
    common(p)
    p.add_argument("--cycles", type=int)
    p.add_argument("--actors", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="one episode per world, CSV out")
    common(p)
    method(p, "ddp")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="scored, trimmed benchmark report")
    common(p)
    method(p, "ddp")
    p.add_argument("--runs", type=int)
    p.add_argument("--trim", type=int)
    p.add_argument("--v-max", type=float)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("score", help="stdin rows success,AT,OT -> scores")
    p.set_defaults(func=cmd_score, config=None)

    p = sub.add_parser("render", help="world (and optional episode) as SVG")
    common(p, worlds=False)
    p.add_argument("--world", required=True)
    method(p)
    p.set_defaults(func=cmd_render)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed the message
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if getattr(args, "method", None) == "adp" and not args.checkpoint:
            raise UsageError("--method adp needs --checkpoint")
        cfg = load_config(args.config)
        return args.func(args, cfg)
    except UsageError as exc:
        print(f"adpnav: error: {exc}", file=sys.stderr)
        return 2
    except (AdpError, OSError) as exc:
        print(f"adpnav: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
