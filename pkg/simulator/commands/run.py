"""
Command dispatcher: turns a RunManifest into results on disk and an exit code.
"""

import logging
import sys
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import click
from pydantic import ValidationError

from commands.output import CSV_COLUMNS, FORMATS, check_writable, write_results
from config.run_config import RunConfig, load_recorded_run, load_run_config, with_overrides
from config.settings import get_config
from services.errors import (
    ConfigError,
    InfeasibleScenarioError,
    InvalidRegularizerError,
    NumericalError,
)

logger = logging.getLogger(__name__)

COMMANDS = ("sweep-rho0", "sweep-cache", "validate", "optimize-xi", "mc-rate")

EXIT_OK = 0
EXIT_FAILURE = 1  # unexpected error, or results exist without --force
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_NUMERICAL = 4
EXIT_CHECKS_FAILED = 5


@dataclass(frozen=True)
class RunManifest:
    """One CLI invocation."""

    command: str
    config_path: Optional[str] = None
    output_dir: Optional[str] = None
    seed: Optional[int] = None
    trials: Optional[int] = None
    threads: Optional[int] = None
    force: bool = False
    format: str = "both"
    options: Dict[str, Any] = field(default_factory=dict)
    replay_path: Optional[str] = None


@dataclass
class RunContext:
    """Everything a command handler needs, with overrides already resolved."""

    manifest: RunManifest
    run_config: RunConfig
    settings: Any
    seed: int
    trials: int
    threads: int
    logger: logging.Logger

    @property
    def xi_range(self) -> Tuple[float, float]:
        return (
            self.run_config.xi_min or self.settings.XI_MIN,
            self.run_config.xi_max or self.settings.XI_MAX,
        )

    def option(self, name: str, default: Any = None) -> Any:
        value = self.manifest.options.get(name)
        return default if value is None else value


@dataclass
class CommandOutcome:
    """Records to write plus run metadata for the manifest."""

    records: List[Dict[str, Any]]
    metadata: Dict[str, Any] = field(default_factory=dict)
    columns: Sequence[str] = CSV_COLUMNS
    passed: bool = True


HANDLERS: Dict[str, Callable[[RunContext], CommandOutcome]] = {}


def handler(command: str):
    """Register the handler of one command."""

    def decorator(fn):
        HANDLERS[command] = fn
        return fn

    return decorator


def _load_handlers() -> None:
    # handler modules register themselves on import
    from commands import rate_commands, sweep_commands, validation_commands  # noqa: F401


def exit_code_for(error: BaseException) -> int:
    """Map an exception onto the documented exit codes."""
    if isinstance(error, (ConfigError, InvalidRegularizerError, ValidationError)):
        return EXIT_CONFIG
    if isinstance(error, InfeasibleScenarioError):
        return EXIT_INFEASIBLE
    if isinstance(error, NumericalError):
        return EXIT_NUMERICAL
    return EXIT_FAILURE


def apply_recorded_run(manifest: RunManifest) -> Tuple[RunManifest, RunConfig]:
    """
    Fill seed, trials, threads and options from the manifest.json at replay_path.

    Flags given on the command line still take precedence.

    Raises:
        ConfigError: --config given as well, or the manifest records another command
    """
    if manifest.config_path is not None:
        raise ConfigError("--config and --manifest cannot be combined")
    recorded = load_recorded_run(manifest.replay_path)
    if recorded.command != manifest.command:
        raise ConfigError(
            f"manifest {manifest.replay_path} records '{recorded.command}', not '{manifest.command}'"
        )
    given = {k: v for k, v in manifest.options.items() if v is not None and v is not False}
    replayed = replace(
        manifest,
        seed=recorded.seed if manifest.seed is None else manifest.seed,
        trials=manifest.trials or recorded.trials,
        threads=manifest.threads or recorded.threads,
        options={**recorded.options, **given},
    )
    return replayed, recorded.run_config


def resolve_context(
    manifest: RunManifest, settings=None, logger=None, run_config: Optional[RunConfig] = None
) -> RunContext:
    settings = settings or get_config()
    logger = logger or logging.getLogger(__name__)
    if run_config is None:
        run_config = load_run_config(manifest.config_path)

    seed = manifest.seed
    if seed is None:
        seed = run_config.system.seed if "seed" in run_config.system.model_fields_set else settings.SEED
    run_config = with_overrides(run_config, seed=seed)

    return RunContext(
        manifest=manifest,
        run_config=run_config,
        settings=settings,
        seed=seed,
        trials=manifest.trials or run_config.trials or settings.TRIALS,
        threads=manifest.threads or run_config.threads or settings.THREADS,
        logger=logger,
    )


def run(manifest: RunManifest, settings=None, logger: Optional[logging.Logger] = None) -> int:
    """
    Execute one command and write its artifacts.

    Returns:
        process exit code (0 on success)
    """
    logger = logger or logging.getLogger(__name__)
    settings = settings or get_config()
    _load_handlers()

    try:
        if manifest.command not in HANDLERS:
            raise ConfigError(f"Unknown command: {manifest.command}")
        if manifest.format not in FORMATS:
            raise ConfigError(f"Unknown output format: {manifest.format}")

        output_dir = manifest.output_dir or settings.OUTPUT_DIR
        check_writable(output_dir, manifest.format, manifest.force)

        run_config = None
        if manifest.replay_path is not None:
            manifest, run_config = apply_recorded_run(manifest)
        context = resolve_context(manifest, settings, logger, run_config)
        logger.info(
            f"Running {manifest.command} (seed={context.seed}, trials={context.trials}, "
            f"threads={context.threads})"
        )
        outcome = HANDLERS[manifest.command](context)

        run_manifest = {
            "command": manifest.command,
            "version": settings.VERSION,
            "seed": context.seed,
            "trials": context.trials,
            "threads": context.threads,
            "format": manifest.format,
            "config_path": manifest.config_path,
            "replayed_from": manifest.replay_path,
            "options": manifest.options,
            "config": context.run_config.resolved(),
            "metadata": outcome.metadata,
            "timestamp": datetime.now(timezone.utc).isoformat(),
        }
        write_results(
            output_dir,
            outcome.records,
            run_manifest,
            fmt=manifest.format,
            force=manifest.force,
            columns=outcome.columns,
            logger=logger,
        )
        click.echo(f"Wrote {len(outcome.records)} records to {output_dir}")
        return EXIT_OK if outcome.passed else EXIT_CHECKS_FAILED

    except FileExistsError as e:
        logger.error(str(e))
        click.echo(f"Error: {e}", err=True)
        return EXIT_FAILURE
    except (ConfigError, InvalidRegularizerError, ValidationError) as e:
        logger.error(f"Configuration error: {e}")
        click.echo(f"Configuration error: {e}", err=True)
        return EXIT_CONFIG
    except InfeasibleScenarioError as e:
        logger.error(f"Infeasible scenario: {e}")
        click.echo(f"Infeasible scenario: {e}", err=True)
        return EXIT_INFEASIBLE
    except NumericalError as e:
        logger.error(f"Numerical failure: {e}", exc_info=True)
        click.echo(f"Numerical failure: {e}", err=True)
        return EXIT_NUMERICAL
    except Exception as e:
        logger.error(f"{manifest.command} failed: {e}", exc_info=True)
        click.echo(f"Error: {e}", err=True)
        return exit_code_for(e)


RUN_OPTIONS = (
    click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
                 help="Run configuration file (key = value)."),
    click.option("--manifest", "replay_path", type=click.Path(dir_okay=False), default=None,
                 help="Re-run from an earlier manifest.json (replaces --config)."),
    click.option("--out", "output_dir", type=click.Path(file_okay=False), default=None,
                 help="Output directory (default: SIM_OUTPUT_DIR)."),
    click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=None,
                 help="Unsigned 64-bit seed."),
    click.option("--trials", type=click.IntRange(min=1), default=None,
                 help="Monte Carlo trials."),
    click.option("--threads", type=click.IntRange(min=1), default=None,
                 help="Worker threads (default: available parallelism)."),
    click.option("--force", is_flag=True, help="Overwrite existing results."),
    click.option("--format", "fmt", type=click.Choice(FORMATS), default="both",
                 show_default=True),
)


def run_options(fn):
    """Attach the flags shared by every command."""
    for option in reversed(RUN_OPTIONS):
        fn = option(fn)
    return fn


def manifest_from_options(command: str, options: Dict[str, Any]) -> RunManifest:
    """Split click keyword arguments into the manifest fields and command options."""
    options = dict(options)
    return RunManifest(
        command=command,
        config_path=options.pop("config_path", None),
        output_dir=options.pop("output_dir", None),
        seed=options.pop("seed", None),
        trials=options.pop("trials", None),
        threads=options.pop("threads", None),
        force=options.pop("force", False),
        format=options.pop("fmt", "both"),
        replay_path=options.pop("replay_path", None),
        options=options,
    )


def invoke(command: str, options: Dict[str, Any]) -> None:
    """Run a command from click and exit with its code."""
    ctx = click.get_current_context(silent=True)
    settings = ctx.obj if ctx is not None else None
    code = run(manifest_from_options(command, options), settings=settings)
    sys.exit(code)
