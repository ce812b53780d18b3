#!/usr/bin/env python
import sys

import click

from restriction_lab import Lab, __version__ as lversion, experiment
from restriction_lab.logging import LEVELS

log_level_option = click.option("--log-level", type=click.Choice(LEVELS, case_sensitive=False), default="INFO",
                                help="package log level, also written to run.log")


def _fail(lab, e):
    code = lab.handle_exception(e)
    sys.exit(code)


@click.group()
@click.version_option(lversion, prog_name="restriction-lab")
def cli():
    pass


@cli.command()
@click.option("-c", "--config", "config_path", type=click.Path(dir_okay=False), required=True,
              help="experiment config (JSON)")
@click.option("-o", "--out", type=click.Path(file_okay=False), required=True, help="output directory")
@click.option("--threads", type=click.IntRange(min=1), default=None, help="worker cap, default 1")
@log_level_option
def run(config_path, out, threads, log_level):
    """Run one experiment from a config file."""
    lab = Lab(threads=threads, config={"LOG_LEVEL": log_level.upper()})
    try:
        config = lab.load_config(config_path)
        result = lab.run(config, out)
    except Exception as e:
        _fail(lab, e)
    else:
        click.echo(f"{config.experiment}: {result.status} -> {out}")


@cli.command()
@click.option("-o", "--out", type=click.Path(file_okay=False), default="verify-out",
              help="output root, one directory per experiment")
@click.option("-s", "--seed", type=int, default=0, help="seed for the randomized experiments")
@click.option("--threads", type=click.IntRange(min=1), default=None, help="worker cap, default 1")
@log_level_option
def verify(out, seed, threads, log_level):
    """Run the full acceptance suite with built-in parameters."""
    lab = Lab(threads=threads, config={"LOG_LEVEL": log_level.upper()})
    try:
        results = lab.verify(out, seed)
    except Exception as e:
        _fail(lab, e)
    else:
        for name, result in results.items():
            click.echo(f"{name:<14} {result.status}")


@cli.command(name="experiments")
def list_experiments():
    """List registered experiments and their parameter defaults."""
    for name in experiment.names():
        runner = experiment.find(name)
        flags = " (seeded)" if runner.seeded else ""
        click.echo(f"{name}{flags}: {runner.description}")
        for key, value in runner.defaults.items():
            click.echo(f"    {key} = {value!r}")


def main():
    cli(prog_name="restriction-lab")


if __name__ == "__main__":
    main()
