"""
Validation command: runs the oracle and identity checks and reports each one.
"""

import click

from commands.run import CommandOutcome, RunContext, handler, invoke, run_options
from services.validation import run_checks

CHECK_COLUMNS = ("check", "passed", "value", "expected", "detail")


@handler("validate")
def run_validate(context: RunContext) -> CommandOutcome:
    results = run_checks(
        full=bool(context.option("full", False)),
        seed=context.seed,
        threads=context.threads,
        logger=context.logger,
    )
    records = []
    for result in results:
        status = "PASS" if result.passed else "FAIL"
        line = f"[{status}] {result.name}"
        if result.value is not None:
            line += f": {result.value:.6g}"
            if result.expected is not None:
                line += f" (expected {result.expected:.6g})"
        click.echo(line)
        records.append(
            {
                "check": result.name,
                "passed": result.passed,
                "value": result.value,
                "expected": result.expected,
                "detail": result.detail,
            }
        )

    failed = sum(not r.passed for r in results)
    click.echo(f"{len(results) - failed}/{len(results)} checks passed")
    return CommandOutcome(
        records=records,
        metadata={"full": bool(context.option("full", False)), "failed": failed},
        columns=CHECK_COLUMNS,
        passed=failed == 0,
    )


def register_validation_commands(cli):
    """Register the validation command."""

    @cli.command("validate")
    @run_options
    @click.option("--full", is_flag=True, help="Use acceptance-scale sample sizes.")
    def validate_command(**options):
        """Run the invariant and oracle checks."""
        invoke("validate", options)
