"""
Sweep commands: per-user rate versus rho0 and versus cache size, and the
per-point regularizer search.
"""

import click

from commands.run import CommandOutcome, RunContext, handler, invoke, run_options
from services.analysis import (
    DEFAULT_CACHE_SWEEP_RHO0,
    DEFAULT_L_U_GRID,
    DEFAULT_RHO0_GRID,
    EVALUATIONS,
    sweep_cache_size,
    sweep_rho0,
)
from services.errors import ConfigError


def _evaluation(context: RunContext) -> str:
    evaluation = context.option("evaluation", context.run_config.evaluation)
    if evaluation not in EVALUATIONS:
        raise ConfigError(f"evaluation must be one of {', '.join(EVALUATIONS)}, got '{evaluation}'")
    return evaluation


def _sweep_kwargs(context: RunContext) -> dict:
    return dict(
        precoders=context.run_config.precoders,
        modes=context.run_config.modes,
        evaluation=_evaluation(context),
        trials=context.trials,
        threads=context.threads,
        large_K=context.settings.LARGE_SYSTEM_K,
        finite_K=context.settings.FINITE_K,
        xi_range=context.xi_range,
        logger=context.logger,
    )


def _outcome(result) -> CommandOutcome:
    metadata = {k: v for k, v in result.metadata.items() if k != "config"}
    metadata["xi_star"] = result.xi_star
    metadata["absent"] = {"/".join(key): points for key, points in result.reasons.items()}
    return CommandOutcome(records=result.records(), metadata=metadata)


@handler("sweep-rho0")
def run_sweep_rho0(context: RunContext) -> CommandOutcome:
    grid = context.run_config.rho0 or DEFAULT_RHO0_GRID
    result = sweep_rho0(context.run_config.system, grid, **_sweep_kwargs(context))
    return _outcome(result)


@handler("sweep-cache")
def run_sweep_cache(context: RunContext) -> CommandOutcome:
    rho0_values = context.run_config.rho0
    if len(rho0_values) > 1:
        raise ConfigError("sweep-cache takes a single rho0 value")
    rho0 = rho0_values[0] if rho0_values else DEFAULT_CACHE_SWEEP_RHO0
    grid = context.run_config.L_u or DEFAULT_L_U_GRID
    result = sweep_cache_size(context.run_config.system, grid, rho0=rho0, **_sweep_kwargs(context))
    return _outcome(result)


@handler("optimize-xi")
def run_optimize_xi(context: RunContext) -> CommandOutcome:
    system = context.run_config.system
    grid = context.run_config.rho0 or (system.M / system.K,)
    kwargs = _sweep_kwargs(context)
    if kwargs["evaluation"] == "monte-carlo":
        raise ConfigError("optimize-xi evaluates the large-system or finite closed forms only")
    kwargs["precoders"] = ("rzf",)
    result = sweep_rho0(system, grid, **kwargs)

    records = result.records()
    for record in records:
        index = result.values.index(record["axis_value"])
        record["xi_star"] = result.xi_star[record["mode"]][index]
    for mode, values in result.xi_star.items():
        for rho0, xi in zip(result.values, values):
            context.logger.info(f"rho0={rho0:.6g} {mode}: xi*={xi:.6g}")
    outcome = _outcome(result)
    outcome.records = records
    return outcome


def register_sweep_commands(cli):
    """Register the sweep and regularizer-search commands."""

    evaluation_option = click.option(
        "--evaluation",
        type=click.Choice(EVALUATIONS),
        default=None,
        help="large-system (default), finite or monte-carlo.",
    )

    @cli.command("sweep-rho0")
    @run_options
    @evaluation_option
    def sweep_rho0_command(**options):
        """Per-user rate versus antennas per user (rho0 = M/K)."""
        invoke("sweep-rho0", options)

    @cli.command("sweep-cache")
    @run_options
    @evaluation_option
    def sweep_cache_command(**options):
        """Per-user rate versus cache size L_u."""
        invoke("sweep-cache", options)

    @cli.command("optimize-xi")
    @run_options
    @evaluation_option
    def optimize_xi_command(**options):
        """Optimal RZF regularizer per rho0 point."""
        invoke("optimize-xi", options)
