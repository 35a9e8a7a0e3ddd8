"""
Monte Carlo ergodic rate of a single scenario.
"""

from typing import Optional

import click
import numpy as np

from commands.run import CommandOutcome, RunContext, handler, invoke, run_options
from services.asymptotics import asymptotic_report
from services.rates import (
    CACHE_POLICIES,
    METHOD_ASYMPTOTIC,
    METHOD_MONTE_CARLO,
    RateReport,
    fixed_cache_state,
    mc_ergodic_rate,
)


@handler("mc-rate")
def run_mc_rate(context: RunContext) -> CommandOutcome:
    system = context.run_config.system
    policy = context.option("cache_policy", context.run_config.cache_policy)
    report = mc_ergodic_rate(
        system,
        cache_state_policy=policy,
        trials=context.trials,
        threads=context.threads,
        dump_channel=context.option("dump_channel"),
        logger=context.logger,
    )

    common = dict(
        precoder=system.precoder,
        mode=system.mode,
        method=METHOD_MONTE_CARLO,
        trials=context.trials,
        seed=context.seed,
    )
    records = [
        dict(axis="user", axis_value=k, rate=rate, stderr=report.stderr[k], **common)
        for k, rate in sorted(report.per_user_rate.items())
    ]
    records.append(
        dict(
            axis="rho0",
            axis_value=system.M / system.K,
            rate=report.mean_rate,
            stderr=report.mean_stderr,
            **common,
        )
    )
    metadata = {
        "cache_state_policy": policy,
        "sum_rate": report.sum_rate,
        "inactive_users": report.inactive_users,
        "infeasible_trials": report.infeasible_trials,
        "empty_trials": report.empty_trials,
    }
    if system.precoder == "rzf" and policy == "fixed":
        companion = _asymptotic_companion(context)
        if companion is not None:
            records.append(
                dict(
                    common,
                    axis="rho0",
                    axis_value=system.M / system.K,
                    method=METHOD_ASYMPTOTIC,
                    rate=companion.mean_rate,
                    stderr=None,
                    trials=0,
                )
            )
            metadata["asymptotic_per_user_rate"] = {
                str(k): rate for k, rate in sorted(companion.per_user_rate.items())
            }

    click.echo(
        f"{system.precoder}/{system.mode}: mean rate {report.mean_rate:.6f} "
        f"+- {report.mean_stderr:.2e} bits/s/Hz over {context.trials} trials"
    )
    return CommandOutcome(records=records, metadata=metadata)


def _asymptotic_companion(context: RunContext) -> Optional[RateReport]:
    """Large-system RZF rates of the simulated cache state; None when the beta_k differ."""
    system = context.run_config.system
    betas = system.beta_vector
    if not np.all(betas == betas[0]):
        context.logger.info("No asymptotic companion row: beta_k differ across users")
        return None
    return asymptotic_report(system, fixed_cache_state(system))


def register_rate_commands(cli):
    """Register the Monte Carlo rate command."""

    @cli.command("mc-rate")
    @run_options
    @click.option("--cache-policy", type=click.Choice(CACHE_POLICIES), default=None,
                  help="fixed: one cache state; redraw: new caches every trial.")
    @click.option("--dump-channel", type=click.Path(dir_okay=False), default=None,
                  help="Write the first trial's H as little-endian complex64.")
    def mc_rate_command(**options):
        """Monte Carlo ergodic rate of the configured scenario."""
        invoke("mc-rate", options)
