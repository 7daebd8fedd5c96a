"""Command-line front end: run, compare, verify, snapshot.

Exit codes: 0 success, 1 usage/config error, 2 verification failure,
3 I/O error. Report and snapshot files are canonical JSON, so identical
invocations produce identical bytes.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from .compare import compare_policies, comparison_table
from .config import ConfigError, RunConfig, config_from_dict, load_config_file
from .jsonio import canonical_bytes
from .pipeline import POLICY_NAMES
from .runner import RunReport, run_steps, run_stream
from .snapshot import SnapshotError, snapshot_load, snapshot_save
from .synthetic import gen_scenario, scenario_from_json_obj
from .verify import verify_many


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _add_run_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--seed", type=int)
    p.add_argument("--tau", type=int, help="context window capacity")
    p.add_argument("--capacity", type=int, help="evidence bank capacity")
    p.add_argument("--lambda-r", type=float, dest="lambda_r")
    p.add_argument("--lambda-nu", type=float, dest="lambda_nu")
    p.add_argument("--policy", choices=POLICY_NAMES)
    p.add_argument("--sim-mode", choices=("pooled_mean", "per_token"), dest="sim_mode")
    p.add_argument("--dim", type=int, help="feature width d")
    p.add_argument("--geom-dim", type=int)
    p.add_argument("--geom-tokens", type=int)
    p.add_argument("--grid", help="visual grid as HxW, e.g. 14x14")
    p.add_argument("--pool", help="pooled grid as HxW, e.g. 7x7")
    p.add_argument("--length", type=int, help="stream length")
    p.add_argument("--labels", type=int, help="number of content labels")
    p.add_argument("--relevant-fraction", type=float, dest="relevant_fraction")
    p.add_argument("--revisit-rate", type=float, dest="revisit_rate")
    p.add_argument("--noise-scale", type=float, dest="noise_scale")
    p.add_argument("--question", dest="question_label")
    p.add_argument("--no-geometry-fusion", action="store_true")
    p.add_argument("--no-context-bank", action="store_true")
    p.add_argument("--no-evidence-bank", action="store_true")
    p.add_argument("--no-camera-delta", action="store_true")
    p.add_argument("--verbose-records", action="store_true")


def _parse_hw(text: str, flag: str) -> tuple[int, int]:
    try:
        h, w = text.lower().split("x")
        return int(h), int(w)
    except ValueError:
        raise ConfigError(f"{flag} expects HxW, got {text!r}")


def build_config(args) -> RunConfig:
    base = RunConfig()
    if args.config:
        base = load_config_file(args.config, base)
    overrides: dict = {}
    for key in ("seed", "tau", "capacity", "lambda_r", "lambda_nu", "policy", "sim_mode"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    dims: dict = {}
    if getattr(args, "dim", None) is not None:
        dims["feature_dim"] = args.dim
    if getattr(args, "geom_dim", None) is not None:
        dims["geom_dim"] = args.geom_dim
    if getattr(args, "geom_tokens", None) is not None:
        dims["geom_tokens"] = args.geom_tokens
    if getattr(args, "grid", None) is not None:
        dims["grid_h"], dims["grid_w"] = _parse_hw(args.grid, "--grid")
    if getattr(args, "pool", None) is not None:
        dims["pool_h"], dims["pool_w"] = _parse_hw(args.pool, "--pool")
    if dims:
        overrides["dims"] = dims
    scenario: dict = {}
    for src, dst in (
        ("length", "length"),
        ("labels", "n_labels"),
        ("relevant_fraction", "relevant_fraction"),
        ("revisit_rate", "revisit_rate"),
        ("noise_scale", "noise_scale"),
        ("question_label", "question_label"),
    ):
        value = getattr(args, src, None)
        if value is not None:
            scenario[dst] = value
    if scenario:
        overrides["scenario"] = scenario
    for flag, key in (
        ("no_geometry_fusion", "geometry_fusion"),
        ("no_context_bank", "context_bank"),
        ("no_evidence_bank", "evidence_bank"),
        ("no_camera_delta", "camera_delta"),
    ):
        if getattr(args, flag, False):
            overrides[key] = False
    if getattr(args, "verbose_records", False):
        overrides["verbose_records"] = True
    return config_from_dict(overrides, base)


def _make_scenario(config: RunConfig):
    sc = config.scenario
    return gen_scenario(
        seed=config.seed,
        length=sc.length,
        n_labels=sc.n_labels,
        relevant_fraction=sc.relevant_fraction,
        revisit_rate=sc.revisit_rate,
        noise_scale=sc.noise_scale,
        question_label=sc.question_label,
    )


def _write_bytes(data: bytes, out: str | None):
    if out:
        with open(out, "wb") as fh:
            fh.write(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.buffer.flush()


def cmd_run(args) -> int:
    config = build_config(args)
    if args.scenario_file:
        import json

        with open(args.scenario_file, "r", encoding="utf-8") as fh:
            scenario = scenario_from_json_obj(json.load(fh))
    else:
        scenario = _make_scenario(config)
    report = run_stream(config, scenario)
    _write_bytes(report.to_canonical_bytes(config.verbose_records), args.out)
    print(f"ran {len(report.steps)} steps in {report.wall_time:.3f}s "
          f"(recall={report.recall:.4f}, redundancy={report.redundancy:.4f})",
          file=sys.stderr)
    return 0


def cmd_compare(args) -> int:
    config = build_config(args)
    seeds = _int_list(args.seeds, "--seeds")
    lengths = _int_list(args.lengths, "--lengths")
    policies = [p.strip() for p in args.policies.split(",") if p.strip()]
    result = compare_policies(config, seeds, lengths, policies)
    _write_bytes(canonical_bytes(result), args.out)
    table = comparison_table(result)
    print(table, file=sys.stderr if not args.out else sys.stdout)
    return 0


def cmd_verify(args) -> int:
    config = build_config(args)
    seeds = _int_list(args.seeds, "--seeds")
    results = verify_many(config, seeds,
                          evict_newest_on_tie=args.corrupt_tie_break)
    failed = False
    for r in results:
        if r.passed:
            print(f"seed {r.seed}: OK ({r.steps} steps, {r.writes_checked} writes, "
                  f"{r.reads_checked} read checks)")
        else:
            failed = True
            print(f"seed {r.seed}: FAIL")
            for d in r.divergences:
                print(f"  {d.render()}")
    return 2 if failed else 0


def cmd_snapshot(args) -> int:
    if args.resume:
        state, config = snapshot_load(args.resume)
        scenario = _make_scenario(config)
        steps = args.steps if args.steps is not None else 0
        if state.step + steps > scenario.length:
            raise ConfigError(
                f"cannot run {steps} steps from step {state.step}; "
                f"scenario length is {scenario.length}"
            )
        state, records = run_steps(state, config, scenario, state.step + 1, steps)
        if args.state_out:
            snapshot_save(state, config, args.state_out)
        if args.out or not args.state_out:
            from .runner import _record_to_json

            payload = {
                "format_version": 1,
                "config": config.echo(),
                "resumed_from_step": state.step - steps,
                "steps": [_record_to_json(r, False) for r in records],
            }
            _write_bytes(canonical_bytes(payload), args.out)
        return 0
    config = build_config(args)
    if args.at is None:
        raise UsageError("snapshot: need --at N (save mode) or --resume FILE")
    scenario = _make_scenario(config)
    if args.at < 0 or args.at > scenario.length:
        raise ConfigError(f"--at must lie in [0, {scenario.length}]")
    from .runner import build_initial_state

    state = build_initial_state(config, scenario)
    state, _ = run_steps(state, config, scenario, 1, args.at)
    if not args.state_out:
        raise UsageError("snapshot save mode needs --state-out FILE")
    snapshot_save(state, config, args.state_out)
    print(f"saved state after step {state.step} to {args.state_out}", file=sys.stderr)
    return 0


def _int_list(text: str, flag: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip() != ""]
    except ValueError:
        raise ConfigError(f"{flag} expects a comma-separated integer list, got {text!r}")


def make_parser() -> Parser:
    parser = Parser(prog="videomem", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one stream and write its report",
                           parents=[], add_help=True)
    _add_run_flags(p_run)
    p_run.add_argument("--scenario-file", help="replay a serialized scenario instead "
                                               "of generating one")
    p_run.add_argument("--out", help="report path (stdout when omitted)")
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="compare policies over seeds and lengths")
    _add_run_flags(p_cmp)
    p_cmp.add_argument("--seeds", required=True, help="comma-separated seeds")
    p_cmp.add_argument("--lengths", required=True, help="comma-separated stream lengths")
    p_cmp.add_argument("--policies", required=True, help="comma-separated policies")
    p_cmp.add_argument("--out", help="JSON path (stdout when omitted)")
    p_cmp.set_defaults(func=cmd_compare)

    p_ver = sub.add_parser("verify", help="replay streams against the brute-force oracle")
    _add_run_flags(p_ver)
    p_ver.add_argument("--seeds", default="0", help="comma-separated seeds")
    p_ver.add_argument("--corrupt-tie-break", action="store_true",
                       help=argparse.SUPPRESS)
    p_ver.set_defaults(func=cmd_verify)

    p_snap = sub.add_parser("snapshot", help="save or resume mid-stream state")
    _add_run_flags(p_snap)
    p_snap.add_argument("--at", type=int, help="save after this many steps")
    p_snap.add_argument("--state-out", help="where to write the state snapshot")
    p_snap.add_argument("--resume", help="state snapshot to resume from")
    p_snap.add_argument("--steps", type=int, help="steps to run after resuming")
    p_snap.add_argument("--out", help="report path for resumed steps")
    p_snap.set_defaults(func=cmd_snapshot)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except SnapshotError as exc:
        print(f"snapshot error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
