#!/usr/bin/env python3
"""
Plot a results.csv written by the simulator: one line per precoder and mode.

    python docs/plot_results.py results/rho0/results.csv --out rho0.png

Requires matplotlib (not a runtime dependency of the simulator).
"""

import csv
from collections import defaultdict

import click
import matplotlib.pyplot as plt

STYLES = {"mrt": "tab:blue", "zf": "tab:red", "rzf": "tab:green"}
AXIS_LABELS = {"rho0": "Antennas per user M/K", "L_u": "Cache size L_u (files)"}


def read_results(path):
    """Rows of a results.csv, skipping the schema line."""
    with open(path, encoding="utf-8") as f:
        schema = f.readline().strip()
        if not schema.startswith("#schema="):
            raise click.ClickException(f"{path} has no schema line")
        return list(csv.DictReader(f))


def collect_series(rows):
    series = defaultdict(lambda: ([], []))
    for row in rows:
        if row["axis"] == "user" or not row["rate"]:
            continue
        xs, ys = series[(row["precoder"], row["mode"])]
        xs.append(float(row["axis_value"]))
        ys.append(float(row["rate"]))
    return series


@click.command()
@click.argument("results", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Image file to write instead of showing the plot.")
def main(results, out):
    rows = read_results(results)
    if not rows:
        raise click.ClickException(f"{results} has no records")
    axis = rows[0]["axis"]

    fig, ax = plt.subplots(figsize=(6, 4.5))
    for (precoder, mode), (xs, ys) in sorted(collect_series(rows).items()):
        ax.plot(
            xs,
            ys,
            color=STYLES.get(precoder, "black"),
            linestyle="-" if mode == "proposed" else "--",
            marker="o" if mode == "proposed" else None,
            markersize=3,
            label=f"{precoder.upper()} ({mode})",
        )

    ax.set_xlabel(AXIS_LABELS.get(axis, axis))
    ax.set_ylabel("Per-user rate [bits/s/Hz]")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()

    if out:
        fig.savefig(out, dpi=150)
        click.echo(f"Saved {out}")
    else:
        plt.show()


if __name__ == "__main__":
    main()
