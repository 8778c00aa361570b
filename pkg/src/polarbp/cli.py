"""Command-line entry point.

Exit codes:
    0  success
    1  gradient check above tolerance
    2  usage error (unknown subcommand or flag)
    3  invalid configuration
    4  I/O failure
    5  runtime failure inside a run
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path


from . import __version__
from .baselines import DesignSpec, construct, design_label
from .binarizer import parse_checkpoint
from .channel import make_rng
from .config import (ConfigError, ExperimentConfig, format_config, from_dict, load_config,
                     override, to_dict)
from .diff_bp import grad_check
from .mc_harness import StopRule, compare, format_report, sweep
from .polar_core import CodeConfig, CodeError, format_avector, parse_avector
from .trainer import extract_code, train

EXIT_OK, EXIT_GRADCHECK, EXIT_USAGE, EXIT_CONFIG, EXIT_IO, EXIT_RUNTIME = 0, 1, 2, 3, 4, 5
GRADCHECK_TOL = 1e-3
COMMANDS = {
    "construct": "build a classical code and write its A-vector",
    "train": "learn an A-vector through the unrolled BP decoder",
    "simulate": "Monte-Carlo BER/BLER sweep of one code",
    "compare": "paired-seed BER comparison of two codes or iteration counts",
    "gradcheck": "check decoder gradients against finite differences",
    "export": "re-serialize a checkpoint or A-vector file as an A-vector",
}


# flag -> config key
_FLAGS = {
    "--N": "N",
    "--k": "k",
    "--method": "design",
    "--eps": "design_param",
    "--design-snr": "design_param",
    "--sequence": "design_param",
    "--avector": "avector",
    "--avector-b": "avector_b",
    "--method-b": "design_b",
    "--param-b": "design_param_b",
    "--channel": "channel",
    "--snr": "snr_db",
    "--iters": "n_it",
    "--iters-b": "n_it_b",
    "--train-snrs": "train_snrs",
    "--steps": "steps",
    "--lambda1": "lambda1",
    "--lambda2": "lambda2",
    "--lr": "lr",
    "--batch-size": "batch_size",
    "--a-init": "a_init",
    "--min-frames": "min_frames",
    "--max-frames": "max_frames",
    "--target-errors": "target_errors",
    "--seed": "seed",
    "--trials": "trials",
    "--input": "input",
}


def _dest(flag: str) -> str:
    return "opt_" + flag[2:].replace("-", "_")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polarbp", description="Learn and evaluate polar codes under BP decoding.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", metavar="command")
    for name, text in COMMANDS.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("--config", help="flat key = value experiment file")
        p.add_argument("--manifest", help="re-run from a manifest written by an earlier run")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override any config key")
        p.add_argument("--out", help="output directory (default: $POLARBP_OUTPUT_DIR or ./runs)")
        p.add_argument("--workers", type=int, default=1, help="simulation worker processes")
        p.add_argument("--rate-projection", action="store_true", default=None,
                       help="re-center the soft A-vector on the target rate after every step")
        p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
        for flag in _FLAGS:
            p.add_argument(flag, dest=_dest(flag), default=None, metavar="VALUE",
                           help=f"sets config key '{_FLAGS[flag]}'")
    return parser


def resolve_config(args) -> ExperimentConfig:
    if args.manifest:
        data = json.loads(Path(args.manifest).read_text())
        if data.get("command") != args.command:
            raise ConfigError(f"manifest was written by '{data.get('command')}', not '{args.command}'")
        cfg = from_dict(data["config"])
    elif args.config:
        cfg = load_config(args.config)
    else:
        cfg = ExperimentConfig()
    pairs = {}
    for item in args.set:
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        pairs[key.strip()] = val
    for flag, key in _FLAGS.items():
        val = getattr(args, _dest(flag))
        if val is None:
            continue
        if key in ("design", "design_b"):
            val = val.replace("-", "_")
        pairs[key] = val
    if args.rate_projection:
        pairs["rate_projection"] = "true"
    if args.out:
        pairs["output_dir"] = args.out
    return override(cfg, pairs).validate()


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class Run:
    """Output directory bookkeeping plus the manifest."""

    def __init__(self, command: str, cfg: ExperimentConfig, workers: int):
        self.command, self.cfg, self.workers = command, cfg, workers
        self.dir = cfg.resolved_output_dir()
        self.dir.mkdir(parents=True, exist_ok=True)
        self.artifacts: list[Path] = []

    def write(self, name: str, text: str) -> Path:
        path = self.dir / name
        path.write_text(text)
        self.artifacts.append(path)
        return path

    def track(self, path: Path) -> None:
        self.artifacts.append(Path(path))

    def finish(self) -> Path:
        (self.dir / "config.txt").write_text(format_config(self.cfg))
        manifest = {
            "command": self.command,
            "version": __version__,
            "seed": self.cfg.seed,
            "workers": self.workers,
            "config": to_dict(self.cfg),
            "artifacts": {p.name: _sha256(p) for p in self.artifacts},
        }
        path = self.dir / "manifest.json"
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return path


def _code_from(cfg: ExperimentConfig, which: str = "a") -> tuple[CodeConfig, str]:
    avector = cfg.avector if which == "a" else cfg.avector_b
    design = cfg.design if which == "a" else cfg.design_b
    param = cfg.design_param if which == "a" else cfg.design_param_b
    if avector:
        code, header = parse_avector(Path(avector).read_text())
        if code.N != cfg.N or code.k != cfg.k:
            raise ConfigError(f"A-vector {avector} is P({code.N},{code.k}), config asks P({cfg.N},{cfg.k})")
        return code, str(header["design"])
    spec = DesignSpec(design, param if design == "sequence_file" else float(param))
    return construct(cfg.N, cfg.k, spec), design_label(spec)


def _stop(cfg: ExperimentConfig) -> StopRule:
    return StopRule(cfg.min_frames, cfg.max_frames, cfg.target_errors)


def cmd_construct(cfg, run: Run) -> int:
    code, label = _code_from(cfg)
    run.write("avector.txt", format_avector(code, label, cfg.seed))
    print(f"info_set = {code.info_set_1based()}")
    return EXIT_OK


def cmd_train(cfg, run: Run) -> int:
    tcfg = cfg.train_config()
    log_path = run.dir / "train_log.csv"
    outcome = train(tcfg, out_dir=run.dir, log_path=log_path)
    for p in sorted(run.dir.glob("checkpoint_*.txt")):
        run.track(p)
    run.track(log_path)
    run.write("avector.txt", format_avector(outcome.code, "learned-bp", cfg.seed))
    print(f"info_set = {outcome.code.info_set_1based()}")
    return EXIT_OK


def cmd_simulate(cfg, run: Run) -> int:
    code, label = _code_from(cfg)
    records = sweep(code, cfg.channel, cfg.snr_db, cfg.n_it, _stop(cfg), cfg.seed,
                    csv_path=run.dir / "ber.csv", workers=run.workers)
    run.track(run.dir / "ber.csv")
    for r in records:
        print(f"{r.snr_db:6.2f} dB  frames={r.frames}  BER={r.ber:.4e}  BLER={r.bler:.4e}")
    return EXIT_OK


def cmd_compare(cfg, run: Run) -> int:
    code_a, label_a = _code_from(cfg, "a")
    code_b, label_b = _code_from(cfg, "b")
    points = compare(code_a, code_b, cfg.channel, cfg.snr_db, cfg.n_it, _stop(cfg), cfg.seed,
                     n_it_b=cfg.n_it_b or None, workers=run.workers,
                     csv_path=run.dir / "compare.csv")
    run.track(run.dir / "compare.csv")
    report = format_report(points, label_a, label_b)
    run.write("compare.txt", report + "\n")
    print(report)
    return EXIT_OK


def cmd_gradcheck(cfg, run: Run) -> int:
    rep = grad_check(cfg.N, cfg.n_it, cfg.trials, make_rng(cfg.seed, 7))
    text = (f"N={cfg.N} N_it={cfg.n_it} trials={rep.trials} checked={rep.checked} "
            f"skipped={rep.skipped}\nmax relative error = {rep.max_rel_error:.3e}\n")
    run.write("gradcheck.txt", text)
    print(text, end="")
    return EXIT_OK if rep.max_rel_error < GRADCHECK_TOL else EXIT_GRADCHECK


def cmd_export(cfg, run: Run) -> int:
    if not cfg.input:
        raise ConfigError("export needs --input (checkpoint or A-vector file)")
    text = Path(cfg.input).read_text()
    if text.lstrip().startswith("N=") and "step=" in text:
        a_soft, header = parse_checkpoint(text)
        if a_soft.N != cfg.N:
            raise ConfigError(f"checkpoint has N={a_soft.N}, config N={cfg.N}")
        code = extract_code(a_soft, cfg.k, literal=cfg.extraction == "literal")
        run.write("avector.txt", format_avector(code, "learned-bp", header["seed"]))
    else:
        code, header = parse_avector(text)
        run.write("avector.txt", format_avector(code, str(header["design"]), header["seed"]))
    print(f"info_set = {code.info_set_1based()}")
    return EXIT_OK


HANDLERS = {
    "construct": cmd_construct, "train": cmd_train, "simulate": cmd_simulate,
    "compare": cmd_compare, "gradcheck": cmd_gradcheck, "export": cmd_export,
}


def run_command(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
    except (ConfigError, CodeError, ValueError) as exc:
        print(f"polarbp: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"polarbp: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        run = Run(args.command, cfg, args.workers)
        status = HANDLERS[args.command](cfg, run)
        run.finish()
        return status
    except (ConfigError, CodeError) as exc:
        print(f"polarbp: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"polarbp: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        print(f"polarbp: run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
