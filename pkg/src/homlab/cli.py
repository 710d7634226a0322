"""``homlab`` command line.

Exit status: 0 when the run succeeded (and, with ``--check``, every
assertion held); 1 when a check failed; 2 on configuration or usage errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import experiments
from .config import MAX_SEED, ExperimentConfig
from .errors import ConfigError, HomlabError

COMMAND_KINDS = {
    "classical-dip": ("classical-dip",),
    "quantum-dip": ("quantum-dip",),
    "complementarity": ("complementarity-classical", "complementarity-quantum"),
    "mzi-scan": ("mzi-scan",),
    "fit": ("fit",),
    "min-n": ("min-n",),
    "bootstrap": ("bootstrap",),
}


def _seed(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v <= MAX_SEED:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _samples(text: str) -> str:
    if text in ("auto", "exact"):
        return text
    try:
        if int(text) >= 2:
            return text
    except ValueError:
        pass
    raise argparse.ArgumentTypeError("expected 'auto', 'exact' or an integer >= 2")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="homlab", description="HOM dip simulation and analysis")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML experiment config")
    common.add_argument("--seed", type=_seed, help="master seed (overrides the config)")
    common.add_argument("--out", type=Path, help="output directory (default: config 'output' or ./out)")
    common.add_argument("--check", action="store_true",
                        help="assert the ideal-model targets and fail with exit code 1 otherwise")

    sampled = argparse.ArgumentParser(add_help=False)
    sampled.add_argument("--samples", type=_samples, help="per-delay sample count: n, auto or exact")
    sampled.add_argument("--rf-chain", action="store_true", help="route pulses through the mixer chain")

    sub.add_parser("classical-dip", parents=[common, sampled], help="Monte-Carlo classical dip")
    sub.add_parser("quantum-dip", parents=[common], help="two-photon coincidence curve")
    comp = sub.add_parser("complementarity", parents=[common], help="blocked vs unblocked MZI ratio")
    comp.add_argument("--mode", choices=("classical", "quantum"))
    sub.add_parser("mzi-scan", parents=[common], help="coincidence vs MZI phase")
    fit = sub.add_parser("fit", parents=[common], help="fit a dip curve CSV")
    fit.add_argument("--data", help="curve CSV (tau_s,c_mean,ci_lo,ci_hi)")
    sub.add_parser("min-n", parents=[common, sampled], help="minimum sample count vs delay")
    boot = sub.add_parser("bootstrap", parents=[common], help="bootstrap CI or coverage study")
    boot.add_argument("--data", help="one-column CSV of observations")
    return parser


def load_config(args) -> ExperimentConfig:
    kinds = COMMAND_KINDS[args.command]
    if args.config is not None:
        cfg = ExperimentConfig.load(args.config)
        if cfg.kind not in kinds:
            raise ConfigError("kind", f"{cfg.kind!r} does not match subcommand {args.command!r}")
    else:
        kind = kinds[0]
        if args.command == "complementarity" and getattr(args, "mode", None) == "quantum":
            kind = kinds[1]
        cfg = ExperimentConfig(kind)
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def run(args) -> experiments.RunResult:
    cfg = load_config(args)
    out = args.out or (cfg.resolve_path(cfg.output) if cfg.output else Path("out"))
    cmd = args.command
    if cmd == "classical-dip":
        return experiments.run_classical_dip(cfg, out, args.samples, args.rf_chain, args.check)
    if cmd == "quantum-dip":
        return experiments.run_quantum_dip(cfg, out, args.check)
    if cmd == "complementarity":
        return experiments.run_complementarity(cfg, out, args.mode, args.check)
    if cmd == "mzi-scan":
        return experiments.run_mzi_scan(cfg, out, args.check)
    if cmd == "fit":
        return experiments.run_fit(cfg, out, args.data, args.check)
    if cmd == "min-n":
        if args.samples is not None and args.samples not in ("auto", "exact"):
            cfg.tables.setdefault("sampling", {})["pilot"] = int(args.samples)
        return experiments.run_min_n(cfg, out, args.rf_chain)
    return experiments.run_bootstrap(cfg, out, args.data, args.check)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        result = run(args)
    except HomlabError as exc:
        print(f"homlab: error: {exc}", file=sys.stderr)
        return 2
    for f in result.files:
        print(f)
    status = "passed" if result.passed else "FAILED"
    if args.check:
        print(f"{result.name}: checks {status}")
    return 0 if result.passed else 1


if __name__ == "__main__":
    sys.exit(main())
