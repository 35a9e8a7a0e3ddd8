"""
Command-line entry point for the cache-aided massive MIMO simulator.

    python app.py sweep-rho0 --out results/rho0
    python app.py sweep-cache --config runs/cache_sweep.env --out results/cache
    python app.py mc-rate --config runs/scenario.env --trials 1000 --seed 7
    python app.py validate --full
"""

import logging

import click

from commands.rate_commands import register_rate_commands
from commands.sweep_commands import register_sweep_commands
from commands.validation_commands import register_validation_commands
from config.settings import get_config


def create_cli(config_name=None):
    """Create the click command group with every command registered."""

    config_class = get_config(config_name)

    @click.group()
    @click.version_option(config_class.VERSION, prog_name="cache-mimo-sim")
    @click.pass_context
    def cli(ctx):
        """Cache-aided massive MIMO downlink: precoders, rate bounds and sweeps."""
        ctx.obj = config_class

    # Register command handlers
    register_sweep_commands(cli)
    register_rate_commands(cli)
    register_validation_commands(cli)

    return cli


def main():
    config_class = get_config()
    logging.basicConfig(
        level=getattr(logging, config_class.LOG_LEVEL, logging.INFO),
        format="[%(levelname)s] %(message)s",
    )

    # Validate configuration
    for error in config_class.validate_config():
        logging.getLogger(__name__).warning(f"CONFIG WARNING: {error}")

    create_cli()()


if __name__ == "__main__":
    main()
