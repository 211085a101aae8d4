"""Command line entry point: ``otoclab {run,validate,emit-plots,list-experiments}``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .config import default_config, from_dict, load
from .errors import ConfigError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PARTIAL = 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="otoclab", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="verb", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", type=Path, required=config_required, help="TOML experiment file")
        sp.add_argument("--scale", choices=("desk", "paper"), help="override the configured scale")
        sp.add_argument("--seed", type=int, help="override the configured seed (unsigned 64-bit)")

    run = sub.add_parser("run", help="execute a campaign")
    common(run, config_required=False)
    run.add_argument("--experiment", help="use built-in defaults for this campaign instead of --config")
    run.add_argument("--out", type=Path, help="output directory")
    run.add_argument("--workers", type=int, default=1, help="worker processes")
    run.add_argument("--no-resume", action="store_true", help="ignore an existing manifest")
    val = sub.add_parser("validate", help="check a config file and print the fully resolved version")
    common(val)
    plots = sub.add_parser("emit-plots", help="write matplotlib scripts for a finished run")
    plots.add_argument("--out", type=Path, required=True, help="run directory holding manifest.json")
    sub.add_parser("list-experiments", help="show the available campaigns")
    return p


def _resolve(args):
    if getattr(args, "config", None) is not None:
        cfg = load(args.config, args.scale)
    elif getattr(args, "experiment", None):
        cfg = default_config(args.experiment, args.scale or "desk")
    else:
        raise ConfigError("run needs --config or --experiment")
    if args.seed is not None:
        data = cfg.to_dict()
        data["experiment"]["seed"] = args.seed
        cfg = from_dict(data, cfg.scale)
    return cfg


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    if args.verb == "list-experiments":
        from .experiments import list_experiments

        for name, desc in list_experiments().items():
            print(f"{name:16s} {desc}")
        return EXIT_OK
    if args.verb == "emit-plots":
        from .experiments import RunManifest
        from .plots import emit_plots

        try:
            manifest = RunManifest.load(args.out)
        except (OSError, ValueError, TypeError) as exc:
            print(f"error: cannot read manifest in {args.out}: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        manifest.output = str(args.out)
        for path in emit_plots(manifest):
            print(path)
        return EXIT_OK
    try:
        cfg = _resolve(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.verb == "validate":
        sys.stdout.write(cfg.to_toml())
        return EXIT_OK
    from .experiments import run

    if args.workers < 1:
        print("config error: --workers must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out or Path(cfg.output)
    manifest = run(cfg, out, args.workers, resume=not args.no_resume)
    for task_id in manifest.failed:
        entry = manifest.tasks[task_id]
        print(f"task {task_id}: {entry['status']} ({entry['error']})", file=sys.stderr)
    print(f"manifest: {Path(out) / 'manifest.json'}")
    return EXIT_OK if manifest.complete else EXIT_PARTIAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
