"""Batch front-end: generate traces, run experiments, sweep a parameter.

Everything the subcommands write is a deterministic function of
(config, seed); re-running a command reproduces its output files byte for
byte.  Exit code 0 on success, 1 with a diagnostic on stderr otherwise.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import yaml

from .config import ConfigError, ExperimentConfig, from_dict, load, to_dict, to_yaml
from .core import ContractViolation
from .simulator import generate_device_traces, per_slot_csv, run_experiment
from .traces import ParseError, write_trace

SWEEP_HEADER = "param_value,tukf,rp_ratio,over_rbs"


def _out_dir(cfg: ExperimentConfig) -> Path:
    p = Path(cfg.out_dir)
    p.mkdir(parents=True, exist_ok=True)
    return p


def cmd_generate(cfg: ExperimentConfig, out_path=None) -> list:
    """Write one trace file per device; returns the written paths."""
    out = Path(out_path) if out_path is not None else _out_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    traces, _ = generate_device_traces(cfg)
    paths = []
    for tr in traces:
        p = out / f"trace_{tr.device_id}.txt"
        p.write_bytes(write_trace(tr))
        paths.append(p)
    return paths


def cmd_run(cfg: ExperimentConfig) -> tuple:
    """Run both pipelines; write summary, CSVs and the effective config."""
    out = _out_dir(cfg)
    uc, sl = run_experiment(cfg)
    (out / "effective_config.yaml").write_text(to_yaml(cfg), encoding="utf-8")
    (out / "per_slot_user_centric.csv").write_text(per_slot_csv(uc), encoding="utf-8")
    (out / "per_slot_slicing.csv").write_text(per_slot_csv(sl), encoding="utf-8")
    summary = (
        "== user-centric ==\n" + uc.summary_text()
        + "== slicing ==\n" + sl.summary_text()
    )
    (out / "summary.txt").write_text(summary, encoding="utf-8")
    return uc, sl


def _set_by_path(d: dict, dotted: str, value) -> None:
    parts = dotted.split(".")
    node = d
    for key in parts[:-1]:
        if not isinstance(node, dict) or key not in node:
            raise ConfigError(f"{dotted}: no such config key")
        node = node[key]
    if not isinstance(node, dict) or parts[-1] not in node:
        raise ConfigError(f"{dotted}: no such config key")
    node[parts[-1]] = value


def _with_param(cfg: ExperimentConfig, dotted: str, value) -> ExperimentConfig:
    d = to_dict(cfg)
    _set_by_path(d, dotted, value)
    return from_dict(d)


def cmd_sweep(cfg: ExperimentConfig, parameter: str, values) -> list:
    """One user-centric run per value; summary rows param_value,tukf,rp_ratio,over_rbs.

    Any failing value aborts the sweep with that value named; nothing is
    written in that case.
    """
    rows = []
    for v in values:
        try:
            uc, _ = run_experiment(_with_param(cfg, parameter, v))
        except (ConfigError, ContractViolation, ParseError, OSError) as e:
            raise ConfigError(f"sweep aborted at {parameter}={v!r}: {e}") from None
        rows.append((v, uc.tukf, uc.rp_ratio, uc.over_provisioned_rbs))
    out = _out_dir(cfg)
    lines = [SWEEP_HEADER]
    lines += [f"{v},{t!r},{r!r},{o}" for v, t, r, o in rows]
    (out / "sweep.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return rows


def _parse_value(token: str):
    try:
        return yaml.safe_load(token)
    except yaml.YAMLError:
        return token


def _load_config(args) -> ExperimentConfig:
    cfg = load(args.config) if args.config else from_dict({})
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.out is not None:
        cfg = replace(cfg, out_dir=args.out)
    return cfg


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="YAML config file; defaults apply if omitted")
    sub.add_argument("--seed", type=int, default=None, help="override the config seed")
    sub.add_argument("--out", default=None, help="override the output directory")
    sub.add_argument(
        "--print-defaults", action="store_true",
        help="print the default config as YAML and exit",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="marprov",
        description="User-centric spectrum provisioning experiments.",
    )
    parser.add_argument(
        "--print-defaults", action="store_true",
        help="print the default config as YAML and exit",
    )
    sub = parser.add_subparsers(dest="command")
    gen = sub.add_parser("generate", help="synthesize per-device trace files")
    _add_common(gen)
    run = sub.add_parser("run", help="run both pipelines; write summary and CSVs")
    _add_common(run)
    swp = sub.add_parser("sweep", help="re-run over values of one config key")
    _add_common(swp)
    swp.add_argument(
        "--param", required=True,
        help="dotted config key to vary, e.g. radio.epsilon or n_devices",
    )
    swp.add_argument(
        "--values", required=True,
        help="comma-separated values, e.g. 0.6,0.7,0.8,0.9",
    )
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "print_defaults", False):
        sys.stdout.write(to_yaml(ExperimentConfig()))
        return 0
    if args.command is None:
        parser.print_usage(sys.stderr)
        sys.stderr.write("error: a subcommand is required\n")
        return 2
    try:
        cfg = _load_config(args)
        if args.command == "generate":
            for p in cmd_generate(cfg):
                sys.stdout.write(f"{p}\n")
        elif args.command == "run":
            uc, sl = cmd_run(cfg)
            sys.stdout.write(
                "== user-centric ==\n" + uc.summary_text()
                + "== slicing ==\n" + sl.summary_text()
            )
        elif args.command == "sweep":
            values = [_parse_value(tok) for tok in args.values.split(",")]
            rows = cmd_sweep(cfg, args.param, values)
            sys.stdout.write(SWEEP_HEADER + "\n")
            for v, t, r, o in rows:
                sys.stdout.write(f"{v},{t!r},{r!r},{o}\n")
    except (ConfigError, ContractViolation, ParseError, OSError) as e:
        sys.stderr.write(f"error: {e}\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
