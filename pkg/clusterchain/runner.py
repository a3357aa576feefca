from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np
from rich.console import Console
from rich.logging import RichHandler
from scipy.sparse.linalg import ArpackNoConvergence

from clusterchain.config import ExperimentConfig, get_settings, load_experiment_config
from clusterchain.errors import ClusterChainError, ConfigError
from clusterchain.experiments import run_experiment
from clusterchain.results import ResultStore
from clusterchain.ui.tui import build_summary

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2


def setup_logging(path: str, level: str = "INFO") -> None:
    logger = logging.getLogger()
    logger.setLevel(level.upper())
    logger.handlers.clear()
    fmt = logging.Formatter("%(asctime)s | %(levelname)s | %(message)s")

    sh = RichHandler(show_path=False)
    logger.addHandler(sh)

    Path(path).parent.mkdir(parents=True, exist_ok=True)
    fh = logging.FileHandler(path)
    fh.setFormatter(fmt)
    logger.addHandler(fh)


def apply_overrides(cfg: ExperimentConfig, args: argparse.Namespace, default_out: Path) -> ExperimentConfig:
    schedule = cfg.schedule.model_copy(
        update={
            k: v
            for k, v in (("base_seed", args.seed), ("n_traj", args.n_traj), ("threads", args.threads))
            if v is not None
        }
    )
    out_dir = args.out_dir or cfg.output.dir or default_out
    output = cfg.output.model_copy(update={"dir": Path(out_dir)})
    # re-validate so overrides obey the same bounds as the file
    data = cfg.model_copy(update={"schedule": schedule, "output": output}).model_dump(mode="json")
    return ExperimentConfig.model_validate(data)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clusterchain")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one experiment from a TOML config")
    run.add_argument("config", type=Path)
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--out-dir", type=Path, default=None)
    run.add_argument("--n-traj", type=int, default=None)
    run.add_argument("--threads", type=int, default=None)
    return parser


def run(args: argparse.Namespace, console: Console | None = None) -> int:
    settings = get_settings()
    log = logging.getLogger(__name__)
    console = console or Console()
    started = time.monotonic()
    try:
        cfg = load_experiment_config(args.config)
        if args.threads is None and cfg.schedule.threads == 1:
            args.threads = settings.threads
        cfg = apply_overrides(cfg, args, settings.out_dir)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except ValueError as exc:
        log.error("invalid override: %s", exc)
        return EXIT_CONFIG

    try:
        output = run_experiment(cfg, settings)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except ClusterChainError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_NUMERICAL
    except (np.linalg.LinAlgError, ArpackNoConvergence) as exc:
        log.error("solver failure, %s: %s", type(exc).__name__, exc)
        return EXIT_NUMERICAL

    store = ResultStore(cfg.output.dir, cfg.experiment, cfg.output.stem)
    for name, table in output.tables.items():
        store.write_table(table, name)
    for name, data in output.artefacts.items():
        store.write_json(data, name)
    store.write_sidecar(cfg.model_dump(mode="json"))
    for w in output.warnings:
        log.warning("%s", w)
    log.info("%s finished, %d files written", cfg.experiment, len(store.written))
    console.print(build_summary(cfg, output.headline, store.written, output.warnings, time.monotonic() - started))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    settings = get_settings()
    args = build_parser().parse_args(argv)
    setup_logging(str(settings.log_path), settings.log_level)
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
