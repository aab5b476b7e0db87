"""Command-line front end: run a scenario file, run a named preset, or
validate a configuration without executing it."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .config import ConfigError, parse_config
from .model import ControlParams, ModelSpec, NoiseModel, ScalingParams, validate_spec
from .runner import PRESETS, build_compromise, build_diffusion, run_preset, run_scenario


def _error_record(exc: Exception) -> str:
    return json.dumps({"error": type(exc).__name__, "message": str(exc)})


def _load_config(path: str):
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {path}")
    return parse_config(p.read_text(), name=p.name)


def cmd_run(args) -> int:
    cfg = _load_config(args.config)
    if args.seed is not None:
        from dataclasses import replace

        cfg = replace(cfg, seed=args.seed)
    out = args.out or cfg.out_path or f"kinopt_out/{Path(args.config).stem}"
    artifacts = run_scenario(
        cfg, out, workers=args.workers, figures=False if args.no_figures else None
    )
    for key in sorted(artifacts):
        print(f"{key}: {artifacts[key]}")
    return 0


def cmd_preset(args) -> int:
    if args.list or args.name is None:
        for name in sorted(PRESETS):
            print(f"{name}: {len(PRESETS[name])} scenario(s)")
        return 0
    out = args.out or f"kinopt_out/{args.name}"
    results = run_preset(
        args.name, out, seed=args.seed, workers=args.workers,
        figures=False if args.no_figures else None,
    )
    for member in results:
        print(f"{member}: done")
    print(f"artifacts under {out}")
    return 0


def cmd_validate(args) -> int:
    cfg = _load_config(args.config)
    spec = ModelSpec(
        P=build_compromise(cfg),
        D=build_diffusion(cfg),
        noise=(
            NoiseModel.scaled_uniform(cfg.epsilon, cfg.varsigma)
            if cfg.mode == "dsmc" and cfg.varsigma > 0
            else NoiseModel.none()
        ),
        control=ControlParams(w_d=cfg.w_d, nu=cfg.nu if cfg.nu is not None else 1.0, clamp=cfg.clamp),
        scaling=(
            ScalingParams(cfg.epsilon, cfg.kappa, cfg.varsigma)
            if cfg.epsilon is not None and cfg.kappa is not None
            else None
        ),
    )
    rep = validate_spec(spec)
    for line in rep.lines():
        print(line)
    print(f"configuration OK (mode={cfg.mode})" if rep.ok else "configuration INVALID")
    return 0 if rep.ok else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="kinopt",
        description="Controlled opinion-consensus experiments: particle, kinetic and analytic layers.",
    )
    parser.add_argument("--version", action="version", version=f"kinopt {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument(
        "--workers", type=int, default=1,
        help="worker count recorded in meta.json (solvers are vectorized single-process; results do not depend on it)",
    )
    common.add_argument("--no-figures", action="store_true", help="skip figure rendering")

    p_run = sub.add_parser("run", parents=[common], help="run one scenario config file")
    p_run.add_argument("config")
    p_run.set_defaults(fn=cmd_run)

    p_preset = sub.add_parser("preset", parents=[common], help="run a named preset group")
    p_preset.add_argument("name", nargs="?")
    p_preset.add_argument("--list", action="store_true", help="list available presets")
    p_preset.set_defaults(fn=cmd_preset)

    p_val = sub.add_parser("validate", help="parse and validate a config without running")
    p_val.add_argument("config")
    p_val.set_defaults(fn=cmd_validate)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(_error_record(exc), file=sys.stderr)
        return 2
    except Exception as exc:  # solver/runtime failures: machine-readable record
        print(_error_record(exc), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
