"""Command-line entry points: replay, bench, compare, serve.

Exit codes: 0 success, 2 configuration/parse error, 3 internal invariant
breach. Named configs resolve through filesystem paths, the
``STEADYARM_CONFIG_ROOT`` environment variable, then packaged defaults (see
``steadyarm.config``). All commands are deterministic given config + seed.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import fixtures
from .config import ArmConfig, ParamSet, load_arm, load_params
from .kinematics import ConfigurationError
from .reference import RecordingError, load_recording
from .runner import LOOP_RATE, TeleopLog, metrics, replay


def _load(args) -> tuple[ArmConfig, ParamSet]:
    return load_arm(args.arm), load_params(args.params)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _check_log_invariants(log: TeleopLog, duration: float) -> None:
    expected = int(math.ceil(duration * LOOP_RATE))
    if len(log) != expected:
        raise RuntimeError(
            f"log length {len(log)} != ceil(duration * rate) = {expected}")
    ts = [r.t for r in log.records]
    if any(b <= a for a, b in zip(ts, ts[1:])):
        raise RuntimeError("log timestamps are not strictly increasing")


def _print_metrics(name: str, m: dict) -> None:
    print(f"[{name}] cycles={m['cycles']}  lateral mean={m['lateral_mean']:.4f} "
          f"max={m['lateral_max']:.4f} m/s^2  rms_pos_err={m['rms_pos_err']:.4f} m")
    print(f"[{name}] solve ms  mean={m['solve_ms_mean']:.2f}  p50={m['solve_ms_p50']:.2f}  "
          f"p99={m['solve_ms_p99']:.2f}  max={m['solve_ms_max']:.2f}  "
          f"iterations mean={m['iterations_mean']:.2f}")


def _warn_degraded(m: dict) -> None:
    if m["degraded"]:
        print(f"warning: {m['degraded']} degraded cycles (hold-last-plan)")


def cmd_replay(args) -> int:
    arm, params = _load(args)
    samples = load_recording(args.recording)
    duration = samples[-1].t - samples[0].t if samples else 0.0
    log = replay(samples, arm, params)
    _check_log_invariants(log, duration)
    out = _out_dir(args)
    stem = f"{Path(args.recording).stem}_{params.name}"
    log.write_csv(out / f"{stem}_log.csv")
    log.write_jsonl(out / f"{stem}_log.jsonl")
    if len(log) == 0:
        print("empty recording: empty log written")
        return 0
    m = metrics(log)
    with open(out / f"{stem}_metrics.json", "w", encoding="utf-8") as fh:
        json.dump(m, fh, indent=2)
    _print_metrics(params.name, m)
    _warn_degraded(m)
    print(f"wrote {out / (stem + '_log.csv')}")
    return 0


def cmd_bench(args) -> int:
    if args.cycles < 1:
        raise ConfigurationError("--cycles must be >= 1")
    arm, params = _load(args)
    duration = args.cycles / LOOP_RATE
    samples = fixtures.aggressive_recording(duration=duration, seed=args.seed)
    log = replay(samples, arm, params)
    _check_log_invariants(log, duration)
    m = metrics(log)
    its = np.array([r.iterations for r in log.records])
    report = {
        "params": params.name,
        "cycles": m["cycles"],
        "seed": args.seed,
        "solve_ms": {"mean": m["solve_ms_mean"], "max": m["solve_ms_max"],
                     "p50": m["solve_ms_p50"], "p99": m["solve_ms_p99"]},
        "iterations": {"mean": float(its.mean()), "max": int(its.max()),
                       "p50": float(np.percentile(its, 50)),
                       "p99": float(np.percentile(its, 99)),
                       "per_cycle": its.tolist()},
        "degraded": m["degraded"],
        "overruns": m["overruns"],
        "cold_starts": m["cold_starts"],
    }
    out = _out_dir(args)
    path = out / f"bench_{params.name}.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2)
    print(f"benchmark: {params.name}, {m['cycles']} cycles on the aggressive fixture")
    print(f"{'metric':<12}{'mean':>10}{'p50':>10}{'p99':>10}{'max':>10}")
    print(f"{'solve ms':<12}{m['solve_ms_mean']:>10.2f}{m['solve_ms_p50']:>10.2f}"
          f"{m['solve_ms_p99']:>10.2f}{m['solve_ms_max']:>10.2f}")
    print(f"{'iterations':<12}{its.mean():>10.2f}{np.percentile(its, 50):>10.1f}"
          f"{np.percentile(its, 99):>10.1f}{its.max():>10d}")
    print(f"degraded={m['degraded']}  overruns={m['overruns']}  "
          f"cold_starts={m['cold_starts']}")
    _warn_degraded(m)
    print(f"wrote {path}")
    return 0


def cmd_compare(args) -> int:
    arm = load_arm(args.arm)
    params_a = load_params(args.params_a)
    params_b = load_params(args.params_b)
    recording = args.recording or fixtures.packaged_recording_path()
    samples = load_recording(recording)
    log_a = replay(samples, arm, params_a)
    log_b = replay(samples, arm, params_b)
    if len(log_a) != len(log_b):
        raise RuntimeError("comparison runs produced different cycle counts")
    out = _out_dir(args)
    name_a, name_b = params_a.name, params_b.name
    path = out / f"compare_{name_a}_{name_b}.csv"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"t,ref_y,ref_roll,{name_a}_y,{name_a}_roll,{name_a}_lateral,"
                 f"{name_b}_y,{name_b}_roll,{name_b}_lateral\n")
        for ra, rb in zip(log_a.records, log_b.records):
            if abs(ra.t - rb.t) > 1e-12:
                raise RuntimeError("comparison timelines not aligned")
            fh.write(f"{ra.t},{ra.target_p[1]},{ra.target_roll},"
                     f"{ra.ee_p[1]},{ra.ee_roll},{ra.lateral},"
                     f"{rb.ee_p[1]},{rb.ee_roll},{rb.lateral}\n")
    if len(log_a):
        ma, mb = metrics(log_a), metrics(log_b)
        _print_metrics(name_a, ma)
        _print_metrics(name_b, mb)
        _warn_degraded(ma)
        _warn_degraded(mb)
    if name_a == name_b:
        print("note: identical parameter sets, zero difference expected")
    print(f"wrote {path}")
    return 0


def cmd_serve(args) -> int:
    from . import service

    return service.main(["--host", args.host, "--port", str(args.port),
                         "--params", args.params])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="steadyarm",
        description="Receding-horizon teleoperation planner tools")
    sub = parser.add_subparsers(dest="command")

    rep = sub.add_parser("replay", help="run a recording through the loop")
    rep.add_argument("--params", default="P2", help="parameter set name or file")
    rep.add_argument("--recording", required=True, help="JSONL target recording")
    rep.add_argument("--arm", default="ur5e_like", help="arm config name or file")
    rep.add_argument("--out", default=".", help="output directory")
    rep.set_defaults(func=cmd_replay)

    ben = sub.add_parser("bench", help="time the solver on the synthetic fixture")
    ben.add_argument("--params", default="P2", help="parameter set name or file")
    ben.add_argument("--arm", default="ur5e_like", help="arm config name or file")
    ben.add_argument("--cycles", type=int, default=200, help="number of 50 ms cycles")
    ben.add_argument("--seed", type=int, default=None, help="fixture jitter seed")
    ben.add_argument("--out", default=".", help="output directory")
    ben.set_defaults(func=cmd_bench)

    cmp_ = sub.add_parser("compare", help="run two parameter sets on one recording")
    cmp_.add_argument("params_a", help="first parameter set name or file")
    cmp_.add_argument("params_b", help="second parameter set name or file")
    cmp_.add_argument("--recording", default=None,
                      help="JSONL recording (default: packaged aggressive fixture)")
    cmp_.add_argument("--arm", default="ur5e_like", help="arm config name or file")
    cmp_.add_argument("--out", default=".", help="output directory")
    cmp_.set_defaults(func=cmd_compare)

    srv = sub.add_parser("serve", help="run the WebSocket session service")
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=8720)
    srv.add_argument("--params", default="P2", help="default parameter set")
    srv.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "func", None):
        parser.print_help()
        return 2
    try:
        return args.func(args)
    except (ConfigurationError, RecordingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename or exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # internal invariant breach
        print(f"internal error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
